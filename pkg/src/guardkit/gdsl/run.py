"""Toolbox-restricted validation and tree-walking interpretation of
guardrail programs.

Programs can only call registered functions, cannot loop, and have no
access to files, the network, or the environment; those capabilities are
unrepresentable in the grammar.
"""
from __future__ import annotations

from typing import Any, Mapping

from ..core import (
    DetailSet,
    ErrorClass,
    Label,
    ResourceSet,
    RiskLevel,
    Verdict,
)
from ..toolbox import ToolboxRegistry
from .lang import (
    Binary,
    Call,
    Expr,
    FieldAccess,
    Ident,
    If,
    Let,
    ListLit,
    Lit,
    MapLit,
    Stmt,
    Unary,
    VerdictDeny,
    VerdictGrant,
)


class GdslValidationError(Exception):
    error_class = ErrorClass.PARSE


class UnknownFunctionError(GdslValidationError):
    error_class = ErrorClass.UNKNOWN_FUNCTION

    def __init__(self, name: str, line: int = 0, col: int = 0):
        super().__init__(f"unknown function {name!r} (line {line}, column {col})")
        self.name = name


class ArityError(GdslValidationError):
    error_class = ErrorClass.TYPE

    def __init__(self, name: str, expected: int, actual: int):
        super().__init__(f"function {name!r} expects {expected} arguments, got {actual}")


class UnreachableVerdictError(GdslValidationError):
    pass


class GdslRuntimeError(Exception):
    def __init__(self, message: str, error_class: ErrorClass = ErrorClass.RUNTIME):
        super().__init__(message)
        self.error_class = error_class


def _walk_exprs(expr: Expr, registry: ToolboxRegistry) -> None:
    if isinstance(expr, Call):
        if expr.name not in registry:
            raise UnknownFunctionError(expr.name, expr.line, expr.col)
        spec = registry.spec(expr.name)
        if spec.arity != len(expr.args):
            raise ArityError(expr.name, spec.arity, len(expr.args))
        for arg in expr.args:
            _walk_exprs(arg, registry)
    elif isinstance(expr, FieldAccess):
        _walk_exprs(expr.base, registry)
    elif isinstance(expr, (Unary,)):
        _walk_exprs(expr.operand, registry)
    elif isinstance(expr, Binary):
        _walk_exprs(expr.left, registry)
        _walk_exprs(expr.right, registry)
    elif isinstance(expr, ListLit):
        for item in expr.items:
            _walk_exprs(item, registry)
    elif isinstance(expr, MapLit):
        for _, value in expr.pairs:
            _walk_exprs(value, registry)


def _check_paths(stmts: tuple[Stmt, ...], registry: ToolboxRegistry) -> bool:
    """Validate a statement sequence; returns whether every control path
    through it reaches a verdict."""
    terminated = False
    for stmt in stmts:
        if terminated:
            raise UnreachableVerdictError(
                f"unreachable statement after a verdict (line {getattr(stmt, 'line', 0)})"
            )
        if isinstance(stmt, Let):
            _walk_exprs(stmt.expr, registry)
        elif isinstance(stmt, If):
            _walk_exprs(stmt.cond, registry)
            then_term = _check_paths(stmt.then, registry)
            else_term = _check_paths(stmt.orelse, registry) if stmt.orelse else False
            terminated = then_term and else_term and bool(stmt.orelse)
        elif isinstance(stmt, VerdictGrant):
            terminated = True
        elif isinstance(stmt, VerdictDeny):
            _walk_exprs(stmt.message, registry)
            _walk_exprs(stmt.details, registry)
            terminated = True
    return terminated


def validate(ast: tuple[Stmt, ...], registry: ToolboxRegistry) -> None:
    """Check that every call targets a registered function with matching
    arity and that exactly one verdict is reachable on every control path."""
    if not _check_paths(ast, registry):
        raise UnreachableVerdictError("not all control paths reach a verdict statement")


class _VerdictSignal(Exception):
    def __init__(self, verdict: Verdict):
        self.verdict = verdict


def coerce_details(value: Any) -> DetailSet:
    """Build a DetailSet from a plain interpreter value by shape:
    {violated, risk?} map -> violated rules (+risk); str->list map ->
    inaccessible resources; int list -> violated rules."""
    if isinstance(value, Mapping):
        if "violated" in value:
            risk = value.get("risk")
            return DetailSet(
                violated_rules=frozenset(int(r) for r in value["violated"]),
                risk=RiskLevel(risk) if risk else None,
            )
        nonempty = {db: cols for db, cols in value.items() if cols}
        return DetailSet(inaccessible=ResourceSet(nonempty))
    if isinstance(value, (list, tuple, frozenset, set)):
        return DetailSet(violated_rules=frozenset(int(r) for r in value))
    raise GdslRuntimeError(
        f"cannot interpret verdict details of type {type(value).__name__}",
        error_class=ErrorClass.TYPE,
    )


class _Interpreter:
    def __init__(self, registry: ToolboxRegistry, bindings: Mapping[str, Any]):
        self.registry = registry
        self.env: dict[str, Any] = dict(bindings)

    def run(self, stmts: tuple[Stmt, ...]) -> Verdict:
        try:
            self._exec_block(stmts)
        except _VerdictSignal as sig:
            return sig.verdict
        raise GdslRuntimeError("program finished without reaching a verdict")

    def _exec_block(self, stmts: tuple[Stmt, ...]) -> None:
        for stmt in stmts:
            if isinstance(stmt, Let):
                self.env[stmt.name] = self.eval(stmt.expr)
            elif isinstance(stmt, If):
                cond = self.eval(stmt.cond)
                if not isinstance(cond, bool):
                    raise GdslRuntimeError(
                        f"if condition must be a boolean, got {type(cond).__name__} "
                        f"(line {stmt.line})",
                        error_class=ErrorClass.TYPE,
                    )
                self._exec_block(stmt.then if cond else stmt.orelse)
            elif isinstance(stmt, VerdictGrant):
                raise _VerdictSignal(Verdict(label=Label.GRANTED))
            elif isinstance(stmt, VerdictDeny):
                message = self.eval(stmt.message)
                if not isinstance(message, str) or not message:
                    raise GdslRuntimeError(
                        "verdict deny message must be a nonempty string",
                        error_class=ErrorClass.TYPE,
                    )
                details = coerce_details(self.eval(stmt.details))
                raise _VerdictSignal(
                    Verdict(label=Label.DENIED, denial_message=message, details=details)
                )

    def eval(self, expr: Expr) -> Any:
        if isinstance(expr, Lit):
            return expr.value
        if isinstance(expr, Ident):
            if expr.name not in self.env:
                raise GdslRuntimeError(
                    f"unbound name {expr.name!r} (line {expr.line}, column {expr.col})"
                )
            return self.env[expr.name]
        if isinstance(expr, FieldAccess):
            base = self.eval(expr.base)
            if isinstance(base, Mapping) and expr.name in base:
                return base[expr.name]
            raise GdslRuntimeError(
                f"no field {expr.name!r} on value of type {type(base).__name__}",
                error_class=ErrorClass.TYPE,
            )
        if isinstance(expr, Call):
            args = [self.eval(a) for a in expr.args]
            try:
                return self.registry.impl(expr.name)(*args)
            except _VerdictSignal:
                raise
            except TypeError as exc:
                raise GdslRuntimeError(
                    f"type error calling {expr.name}: {exc}", error_class=ErrorClass.TYPE
                ) from exc
            except Exception as exc:
                raise GdslRuntimeError(f"error calling {expr.name}: {exc}") from exc
        if isinstance(expr, ListLit):
            return [self.eval(item) for item in expr.items]
        if isinstance(expr, MapLit):
            return {key: self.eval(value) for key, value in expr.pairs}
        if isinstance(expr, Unary):
            operand = self.eval(expr.operand)
            if not isinstance(operand, bool):
                raise GdslRuntimeError("'not' requires a boolean", error_class=ErrorClass.TYPE)
            return not operand
        if isinstance(expr, Binary):
            return self._eval_binary(expr)
        raise GdslRuntimeError(f"unknown expression node {type(expr).__name__}")

    def _eval_binary(self, expr: Binary) -> Any:
        if expr.op in ("and", "or"):
            left = self.eval(expr.left)
            if not isinstance(left, bool):
                raise GdslRuntimeError(
                    f"{expr.op!r} requires booleans", error_class=ErrorClass.TYPE
                )
            if expr.op == "and" and not left:
                return False
            if expr.op == "or" and left:
                return True
            right = self.eval(expr.right)
            if not isinstance(right, bool):
                raise GdslRuntimeError(
                    f"{expr.op!r} requires booleans", error_class=ErrorClass.TYPE
                )
            return right
        left = self.eval(expr.left)
        right = self.eval(expr.right)
        if expr.op == "==":
            return left == right
        if expr.op == "!=":
            return left != right
        if not (isinstance(left, (int, str)) and type(left) is type(right)):
            raise GdslRuntimeError(
                f"comparison {expr.op!r} requires two ints or two strings",
                error_class=ErrorClass.TYPE,
            )
        return {"<": left < right, "<=": left <= right, ">": left > right, ">=": left >= right}[
            expr.op
        ]


def execute(ast: tuple[Stmt, ...], registry: ToolboxRegistry, bindings: Mapping[str, Any]) -> Verdict:
    """Deterministically evaluate a validated program to a Verdict."""
    return _Interpreter(registry, bindings).run(ast)
