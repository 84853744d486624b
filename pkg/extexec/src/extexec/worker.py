"""Guardrail snippet worker.

Reads one JSON request per line from standard input and writes one JSON
response per line to standard output:

    request:  {"id": ..., "source": "...", "bindings": {...}, "timeout_ms": 10000}
    response: {"id": ..., "status": "ok", "verdict": {...}}
              {"id": ..., "status": "error", "error_message": "..."}

The snippet runs in a restricted namespace that exposes the case bindings
plus the guard functions (``check_access``, ``check_rules``,
``check_qa_rules``, ``risk_level``) and the two verdict constructors
(``grant``, ``deny``).  The snippet must assign its result to a variable
named ``verdict``.

Guard functions are mirrored locally from the policy data carried in the
bindings (permission table, ruleset); the QA pseudo-rule lexicon is read
from the same JSON file the host library ships, overridable with the
``EXTEXEC_QA_RULES`` environment variable.

Sandboxing is by subprocess isolation, a stripped builtins table, and a
wall-clock alarm per request; it is not an OS-level security boundary.
"""

from __future__ import annotations

import json
import os
import re
import signal
import sys
import traceback
from typing import Any, Mapping, Sequence

_WS_RUN = re.compile(r"\s+")
_TOKEN = re.compile(r"[a-z]+")
_SUFFIXES = ("ing", "es", "ed", "ly", "s")
_NUMBER_LETTER = {"one": "A", "two": "B", "three": "C", "four": "D", "five": "E"}
_RISK_BY_COUNT = {0: "no", 1: "low", 2: "medium", 3: "high", 4: "very_high"}

_EMPTY_STATS = {
    "executable_before_debug": True,
    "debug_iterations_used": 0,
    "executable_after_debug": True,
    "error_class": None,
}


def _normalize(raw: str) -> str:
    return _WS_RUN.sub("_", raw.strip().lower())


def _word_root(word: str) -> str:
    w = word.lower()
    for suf in _SUFFIXES:
        if w.endswith(suf) and len(w) - len(suf) >= 3:
            return w[: -len(suf)]
    return w


# ---------------------------------------------------------------------------
# Guard functions mirrored from the host policy data
# ---------------------------------------------------------------------------

def check_access(role: str, required: Mapping[str, Any], permissions: Mapping[str, Any]) -> dict:
    table = {
        _normalize(r): {
            _normalize(db): {_normalize(c) for c in cols} for db, cols in res.items()
        }
        for r, res in permissions.items()
    }
    key = _normalize(role)
    if key not in table:
        raise ValueError(f"unknown role {role!r}; known roles: {sorted(table)}")
    allowed = table[key]
    missing: dict[str, set[str]] = {}
    for db, cols in required.items():
        db_key = _normalize(db)
        for col in cols:
            col_key = _normalize(col)
            if col_key not in allowed.get(db_key, set()):
                missing.setdefault(db_key, set()).add(col_key)
    return {
        "denied": bool(missing),
        "inaccessible": {db: sorted(cols) for db, cols in sorted(missing.items())},
    }


def check_rules(profile: Mapping[str, Any], task: str, rules: Sequence[Mapping]) -> dict:
    low = task.lower()
    violated = []
    for rule in rules:
        if not any(kw.lower() in low for kw in rule["trigger_keywords"]):
            continue
        if rule["predicate_kind"] == "age_at_least":
            satisfied = int(profile["age"]) >= int(rule.get("threshold", 0))
        else:
            satisfied = bool(profile[rule["predicate_field"]])
        if not satisfied:
            violated.append(int(rule["id"]))
    violated.sort()
    return {"denied": bool(violated), "violated": violated}


def _load_qa_lexicon() -> tuple[frozenset[str], int]:
    path = os.environ.get("EXTEXEC_QA_RULES")
    if path:
        text = open(path, encoding="utf-8").read()
    else:
        from importlib import resources

        text = resources.files("guardkit.data").joinpath("qa_rules.json").read_text("utf-8")
    data = json.loads(text)
    return frozenset(data["animals"]), int(data.get("long_question_words", 15))


_QA_LEXICON: tuple[frozenset[str], int] | None = None


def check_qa_rules(question: str, choices: Sequence[Sequence[str]], answer: str) -> list[int]:
    global _QA_LEXICON
    if _QA_LEXICON is None:
        _QA_LEXICON = _load_qa_lexicon()
    animals, long_words = _QA_LEXICON

    letters = [letter.upper() for letter, _ in choices]
    if len(set(letters)) != len(letters) or any(l not in "ABCDE" for l in letters):
        raise ValueError("choice letters must be distinct members of A..E")
    answer = answer.upper()
    violated: set[int] = set()

    roots = {
        letter.upper(): {_word_root(t) for t in _TOKEN.findall(text.lower())}
        for letter, text in choices
    }
    flagged: set[str] = set()
    for i, la in enumerate(letters):
        for lb in letters[i + 1:]:
            if roots[la] & roots[lb]:
                flagged.update((la, lb))
    if answer in flagged:
        violated.add(1)

    if len(question.split()) >= long_words and answer in {"A", "B", "C"}:
        violated.add(2)

    q_tokens = _TOKEN.findall(question.lower())
    q_roots = {_word_root(t) for t in q_tokens}
    if (set(q_tokens) | q_roots) & animals and answer != "B":
        violated.add(3)

    for word, letter in _NUMBER_LETTER.items():
        if word in q_tokens and answer == letter:
            violated.add(4)

    return sorted(violated)


def risk_level(violation_count: int) -> str:
    if violation_count not in _RISK_BY_COUNT:
        raise ValueError(f"violation count out of range 0..4: {violation_count}")
    return _RISK_BY_COUNT[violation_count]


# ---------------------------------------------------------------------------
# Verdict constructors and detail coercion
# ---------------------------------------------------------------------------

def _coerce_details(value: Any) -> dict:
    details = {"inaccessible": {}, "violated_rules": [], "risk": None}
    if isinstance(value, Mapping):
        if "violated" in value:
            details["violated_rules"] = sorted(int(r) for r in value["violated"])
            risk = value.get("risk")
            details["risk"] = risk if risk else None
        else:
            details["inaccessible"] = {
                _normalize(db): sorted(_normalize(c) for c in cols)
                for db, cols in sorted(value.items())
                if cols
            }
    elif isinstance(value, (list, tuple, set, frozenset)):
        details["violated_rules"] = sorted(int(r) for r in value)
    else:
        raise TypeError(f"cannot interpret verdict details of type {type(value).__name__}")
    return details


def grant() -> dict:
    return {
        "label": 0,
        "denial_message": None,
        "details": {"inaccessible": {}, "violated_rules": [], "risk": None},
        "exec_stats": dict(_EMPTY_STATS),
    }


def deny(message: str, details: Any) -> dict:
    if not message:
        raise ValueError("denied verdicts carry a denial message")
    return {
        "label": 1,
        "denial_message": message,
        "details": _coerce_details(details),
        "exec_stats": dict(_EMPTY_STATS),
    }


# ---------------------------------------------------------------------------
# Request evaluation
# ---------------------------------------------------------------------------

_SAFE_BUILTINS = {
    "len": len,
    "sorted": sorted,
    "min": min,
    "max": max,
    "abs": abs,
    "str": str,
    "int": int,
    "bool": bool,
    "list": list,
    "dict": dict,
    "set": set,
    "True": True,
    "False": False,
    "None": None,
}

_GUARD_FUNCTIONS = {
    "check_access": check_access,
    "check_rules": check_rules,
    "check_qa_rules": check_qa_rules,
    "risk_level": risk_level,
    "grant": grant,
    "deny": deny,
}


class _Timeout(Exception):
    pass


def _evaluate(source: str, bindings: Mapping[str, Any], timeout_ms: int) -> dict:
    namespace: dict[str, Any] = {"__builtins__": dict(_SAFE_BUILTINS)}
    namespace.update(_GUARD_FUNCTIONS)
    namespace.update(bindings)
    code = compile(source, "<guardrail>", "exec")

    def on_alarm(signum, frame):
        raise _Timeout(f"timeout after {timeout_ms} ms")

    previous = signal.signal(signal.SIGALRM, on_alarm)
    signal.setitimer(signal.ITIMER_REAL, max(timeout_ms, 1) / 1000.0)
    try:
        exec(code, namespace)
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0.0)
        signal.signal(signal.SIGALRM, previous)

    verdict = namespace.get("verdict")
    if not isinstance(verdict, dict) or "label" not in verdict:
        raise ValueError("program did not assign a verdict")
    return verdict


def handle_request(req: Mapping[str, Any]) -> dict:
    req_id = req.get("id")
    try:
        source = req["source"]
        bindings = req.get("bindings") or {}
        timeout_ms = int(req.get("timeout_ms") or 10_000)
        verdict = _evaluate(source, bindings, timeout_ms)
        return {"id": req_id, "status": "ok", "verdict": verdict}
    except _Timeout as exc:
        return {"id": req_id, "status": "error", "error_message": str(exc)}
    except BaseException as exc:  # noqa: BLE001 - everything becomes a protocol error
        head = traceback.format_exception_only(type(exc), exc)[-1].strip()
        return {"id": req_id, "status": "error", "error_message": head}


def serve(stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise ValueError("request must be a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            response = {"id": None, "status": "error",
                        "error_message": f"malformed request: {exc}"}
        else:
            response = handle_request(req)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


def main() -> None:
    serve()


if __name__ == "__main__":
    main()
