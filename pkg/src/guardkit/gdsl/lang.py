"""Guardrail DSL grammar: tokens, AST, and recursive-descent parser.

The language is expression-oriented and loop-free: let-bindings,
string/int/bool/list/map literals, field access, calls, if/else, boolean
and comparison operators, and a terminal ``verdict`` statement. See
docs/gdsl.md for the EBNF listing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Optional, Union


class GdslParseError(Exception):
    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        loc = f"line {line}, column {col}"
        suffix = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at {loc}{suffix}")
        self.line = line
        self.col = col
        self.expected = expected


KEYWORDS = {"let", "if", "else", "verdict", "grant", "deny", "true", "false", "and", "or", "not"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:\\.|[^"\\])*")
  | (?P<int>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|[<>{}()\[\],.:=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "string" | "int" | "ident" | "keyword" | "op" | "eof"
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, col = 1, 1
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise GdslParseError(f"unexpected character {source[pos]!r}", line, col)
        text = m.group(0)
        kind = m.lastgroup or "op"
        if kind not in ("ws", "comment"):
            if kind == "ident" and text in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# --- AST ----------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: Any


@dataclass(frozen=True)
class Ident:
    name: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class FieldAccess:
    base: "Expr"
    name: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class ListLit:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class MapLit:
    pairs: tuple[tuple[str, "Expr"], ...]


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = 0
    col: int = 0


Expr = Union[Lit, Ident, FieldAccess, Call, ListLit, MapLit, Unary, Binary]


@dataclass(frozen=True)
class Let:
    name: str
    expr: Expr
    line: int = 0


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...]
    line: int = 0


@dataclass(frozen=True)
class VerdictGrant:
    line: int = 0


@dataclass(frozen=True)
class VerdictDeny:
    message: Expr
    details: Expr
    line: int = 0


Stmt = Union[Let, If, VerdictGrant, VerdictDeny]

_COMPARISONS = ("==", "!=", "<=", ">=", "<", ">")


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, expected: tuple[str, ...] = ()) -> GdslParseError:
        tok = self.peek()
        return GdslParseError(message, tok.line, tok.col, expected)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise self.error(f"unexpected token {tok.text or '<eof>'!r}", expected=(want,))
        return self.advance()

    def match(self, kind: str, text: Optional[str] = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    # statements

    def parse_program(self) -> tuple[Stmt, ...]:
        stmts = []
        while not self.match("eof"):
            stmts.append(self.parse_stmt())
        if not stmts:
            raise self.error("empty program", expected=("let", "if", "verdict"))
        return tuple(stmts)

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if self.match("keyword", "let"):
            return self.parse_let()
        if self.match("keyword", "if"):
            return self.parse_if()
        if self.match("keyword", "verdict"):
            return self.parse_verdict()
        raise self.error(
            f"unexpected token {tok.text or '<eof>'!r}", expected=("let", "if", "verdict")
        )

    def parse_let(self) -> Let:
        start = self.expect("keyword", "let")
        name = self.expect("ident").text
        self.expect("op", "=")
        return Let(name=name, expr=self.parse_expr(), line=start.line)

    def parse_if(self) -> If:
        start = self.expect("keyword", "if")
        cond = self.parse_expr()
        then = self.parse_block()
        orelse: tuple[Stmt, ...] = ()
        if self.match("keyword", "else"):
            self.advance()
            if self.match("keyword", "if"):
                orelse = (self.parse_if(),)
            else:
                orelse = self.parse_block()
        return If(cond=cond, then=then, orelse=orelse, line=start.line)

    def parse_verdict(self) -> Stmt:
        start = self.expect("keyword", "verdict")
        if self.match("keyword", "grant"):
            self.advance()
            return VerdictGrant(line=start.line)
        if self.match("keyword", "deny"):
            self.advance()
            self.expect("op", "(")
            message = self.parse_expr()
            self.expect("op", ",")
            details = self.parse_expr()
            self.expect("op", ")")
            return VerdictDeny(message=message, details=details, line=start.line)
        raise self.error("verdict must be 'grant' or 'deny(...)'", expected=("grant", "deny"))

    def parse_block(self) -> tuple[Stmt, ...]:
        self.expect("op", "{")
        stmts = []
        while not self.match("op", "}"):
            if self.match("eof"):
                raise self.error("unterminated block", expected=("}",))
            stmts.append(self.parse_stmt())
        self.expect("op", "}")
        if not stmts:
            raise self.error("empty block")
        return tuple(stmts)

    # expressions

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.match("keyword", "or"):
            tok = self.advance()
            left = Binary("or", left, self.parse_and(), tok.line, tok.col)
        return left

    def parse_and(self) -> Expr:
        left = self.parse_not()
        while self.match("keyword", "and"):
            tok = self.advance()
            left = Binary("and", left, self.parse_not(), tok.line, tok.col)
        return left

    def parse_not(self) -> Expr:
        if self.match("keyword", "not"):
            self.advance()
            return Unary("not", self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        left = self.parse_postfix()
        tok = self.peek()
        if tok.kind == "op" and tok.text in _COMPARISONS:
            self.advance()
            right = self.parse_postfix()
            return Binary(tok.text, left, right, tok.line, tok.col)
        return left

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while self.match("op", "."):
            self.advance()
            name_tok = self.expect("ident")
            expr = FieldAccess(expr, name_tok.text, name_tok.line, name_tok.col)
        return expr

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return Lit(int(tok.text))
        if tok.kind == "string":
            self.advance()
            return Lit(_unescape(tok.text))
        if tok.kind == "keyword" and tok.text in ("true", "false"):
            self.advance()
            return Lit(tok.text == "true")
        if tok.kind == "ident":
            self.advance()
            if self.match("op", "("):
                return self.parse_call(tok)
            return Ident(tok.text, tok.line, tok.col)
        if self.match("op", "("):
            self.advance()
            expr = self.parse_expr()
            self.expect("op", ")")
            return expr
        if self.match("op", "["):
            return self.parse_list()
        if self.match("op", "{"):
            return self.parse_map()
        raise self.error(
            f"unexpected token {tok.text or '<eof>'!r} in expression",
            expected=("literal", "identifier", "(", "[", "{"),
        )

    def parse_call(self, name_tok: Token) -> Call:
        self.expect("op", "(")
        args = []
        if not self.match("op", ")"):
            args.append(self.parse_expr())
            while self.match("op", ","):
                self.advance()
                args.append(self.parse_expr())
        self.expect("op", ")")
        return Call(name_tok.text, tuple(args), name_tok.line, name_tok.col)

    def parse_list(self) -> ListLit:
        self.expect("op", "[")
        items = []
        if not self.match("op", "]"):
            items.append(self.parse_expr())
            while self.match("op", ","):
                self.advance()
                items.append(self.parse_expr())
        self.expect("op", "]")
        return ListLit(tuple(items))

    def parse_map(self) -> MapLit:
        self.expect("op", "{")
        pairs = []
        if not self.match("op", "}"):
            pairs.append(self.parse_map_pair())
            while self.match("op", ","):
                self.advance()
                pairs.append(self.parse_map_pair())
        self.expect("op", "}")
        return MapLit(tuple(pairs))

    def parse_map_pair(self) -> tuple[str, Expr]:
        key_tok = self.expect("string")
        self.expect("op", ":")
        return (_unescape(key_tok.text), self.parse_expr())


def _unescape(quoted: str) -> str:
    body = quoted[1:-1]
    return body.replace('\\"', '"').replace("\\n", "\n").replace("\\\\", "\\")


def parse(source: str) -> tuple[Stmt, ...]:
    """Parse GDSL source; raises GdslParseError with line/column on failure."""
    parser = _Parser(tokenize(source))
    return parser.parse_program()
