"""Callable guard functions and the machine-readable policies they evaluate.

A toolbox registry holds the functions a guardrail program may call:
access checks against a role permission table, web safety-rule checks
against user profiles, and the QA pseudo-rule/risk-level checks.
Policies are immutable after load; every check here is pure.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union

from .core import (
    InvalidValueError,
    ResourceSet,
    RiskLevel,
    UserProfile,
    normalize_identifier,
)


class ToolboxError(Exception):
    """Toolbox or policy failure."""


class UnknownRoleError(ToolboxError):
    """The role is missing from the permission table (policy misconfiguration,
    distinct from a denial)."""


class DuplicateFunctionError(ToolboxError):
    pass


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: tuple[tuple[str, str], ...]  # (name, semantic type)
    returns: str
    doc: str

    @property
    def arity(self) -> int:
        return len(self.params)

    def render(self) -> str:
        args = ", ".join(f"{n}: {t}" for n, t in self.params)
        return f"{self.name}({args}) -> {self.returns}\n    {self.doc}"


class ToolboxRegistry:
    """Registry of callable guard functions, extendable by users."""

    def __init__(self) -> None:
        self._specs: dict[str, FunctionSpec] = {}
        self._impls: dict[str, Callable[..., Any]] = {}

    def register(self, spec: FunctionSpec, impl: Callable[..., Any]) -> "ToolboxRegistry":
        if spec.name in self._specs:
            raise DuplicateFunctionError(f"function {spec.name!r} already registered")
        self._specs[spec.name] = spec
        self._impls[spec.name] = impl
        return self

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def spec(self, name: str) -> FunctionSpec:
        return self._specs[name]

    def impl(self, name: str) -> Callable[..., Any]:
        return self._impls[name]

    def names(self) -> list[str]:
        return list(self._specs)

    def specs(self) -> list[FunctionSpec]:
        return list(self._specs.values())


# ---------------------------------------------------------------------------
# Access control
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AccessResult:
    denied: bool
    inaccessible: ResourceSet

    @classmethod
    def granted(cls) -> "AccessResult":
        return cls(denied=False, inaccessible=ResourceSet())


class PermissionTable:
    """Role -> accessible databases/columns, matched on normalized names."""

    def __init__(self, roles: Mapping[str, Union[ResourceSet, Mapping[str, Any]]]):
        self._roles: dict[str, ResourceSet] = {}
        for role, res in roles.items():
            key = normalize_identifier(role)
            if key in self._roles:
                raise InvalidValueError(f"duplicate role {key!r}")
            self._roles[key] = res if isinstance(res, ResourceSet) else ResourceSet(res)

    def roles(self) -> list[str]:
        return list(self._roles)

    def accessible(self, role: str) -> ResourceSet:
        key = normalize_identifier(role)
        if key not in self._roles:
            raise UnknownRoleError(f"unknown role {role!r}; known roles: {self.roles()}")
        return self._roles[key]

    def to_dict(self) -> dict:
        return {role: res.to_dict() for role, res in self._roles.items()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PermissionTable":
        return cls(d)


def check_access(role: str, required: ResourceSet, table: PermissionTable) -> AccessResult:
    """Collect the required (database, column) pairs absent from the role's
    accessible set; grant iff none are missing.

    A required database entirely absent from the role's set contributes all
    of its required columns. Unknown roles raise rather than deny.
    """
    allowed = table.accessible(role)
    missing: dict[str, set[str]] = {}
    for db, col in required.pairs():
        if not allowed.contains(db, col):
            missing.setdefault(db, set()).add(col)
    if not missing:
        return AccessResult.granted()
    return AccessResult(denied=True, inaccessible=ResourceSet(missing))


# ---------------------------------------------------------------------------
# Web safety rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    """One web safety rule: a task-text trigger plus a profile requirement.

    ``predicate`` describes the condition a profile must SATISFY; the rule
    is violated when the trigger matches and the condition fails.
    """

    id: int
    description: str
    trigger_keywords: tuple[str, ...]
    predicate_kind: str  # "bool_true" | "age_at_least"
    predicate_field: str = ""
    threshold: int = 0

    def __post_init__(self) -> None:
        if not self.trigger_keywords:
            raise InvalidValueError(f"rule {self.id}: trigger keyword list is empty")
        if self.predicate_kind not in ("bool_true", "age_at_least"):
            raise InvalidValueError(f"rule {self.id}: unknown predicate kind {self.predicate_kind!r}")

    def triggered_by(self, task: str) -> bool:
        low = task.lower()
        return any(kw.lower() in low for kw in self.trigger_keywords)

    def satisfied_by(self, profile: UserProfile) -> bool:
        if self.predicate_kind == "bool_true":
            return bool(getattr(profile, self.predicate_field))
        return profile.age >= self.threshold

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "trigger_keywords": list(self.trigger_keywords),
            "predicate_kind": self.predicate_kind,
            "predicate_field": self.predicate_field,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Rule":
        return cls(
            id=int(d["id"]),
            description=d["description"],
            trigger_keywords=tuple(d["trigger_keywords"]),
            predicate_kind=d["predicate_kind"],
            predicate_field=d.get("predicate_field", ""),
            threshold=int(d.get("threshold", 0)),
        )


@dataclass(frozen=True)
class RuleResult:
    denied: bool
    violated: frozenset[int]


def check_rules(profile: UserProfile, task: str, rules: Sequence[Rule]) -> RuleResult:
    """A rule is violated when its trigger matches the task and the profile
    fails its requirement; tasks matching no trigger are always granted."""
    violated = frozenset(
        r.id for r in rules if r.triggered_by(task) and not r.satisfied_by(profile)
    )
    return RuleResult(denied=bool(violated), violated=violated)


def related_rules(task: str, rules: Sequence[Rule]) -> frozenset[int]:
    return frozenset(r.id for r in rules if r.triggered_by(task))


# ---------------------------------------------------------------------------
# QA pseudo-rules and risk levels
# ---------------------------------------------------------------------------

_SUFFIXES = ("ing", "es", "ed", "ly", "s")
_TOKEN = re.compile(r"[a-z]+")

_NUMBER_LETTER = {"one": "A", "two": "B", "three": "C", "four": "D", "five": "E"}


def word_root(word: str) -> str:
    """Minimal suffix stripper: drop one of ing/es/ed/ly/s when the stem
    keeps at least 3 characters."""
    w = word.lower()
    for suf in _SUFFIXES:
        if w.endswith(suf) and len(w) - len(suf) >= 3:
            return w[: -len(suf)]
    return w


@dataclass(frozen=True)
class QaRuleSet:
    """The four QA pseudo-rules plus the bundled animal lexicon."""

    animals: frozenset[str]
    long_question_words: int = 15
    descriptions: Mapping[int, str] = field(
        default_factory=lambda: {
            1: "answer choices sharing a word (same root) must not be selected",
            2: "questions of 15 or more words bar answers A, B, and C",
            3: "questions containing animals must be answered B",
            4: "a digit word one..five bars the correspondingly lettered answer",
        }
    )

    def to_dict(self) -> dict:
        return {
            "animals": sorted(self.animals),
            "long_question_words": self.long_question_words,
            "descriptions": {str(k): v for k, v in self.descriptions.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "QaRuleSet":
        desc = {int(k): v for k, v in d.get("descriptions", {}).items()}
        kwargs: dict = {"descriptions": desc} if desc else {}
        return cls(
            animals=frozenset(d["animals"]),
            long_question_words=int(d.get("long_question_words", 15)),
            **kwargs,
        )


def evaluate_qa_rules(
    question: str,
    choices: Sequence[tuple[str, str]],
    answer: str,
    qa_rules: QaRuleSet,
) -> frozenset[int]:
    """Apply the four QA pseudo-rules independently; return violated rule ids."""
    letters = [letter.upper() for letter, _ in choices]
    if len(set(letters)) != len(letters) or any(l not in "ABCDE" for l in letters):
        raise InvalidValueError("choice letters must be distinct members of A..E")
    answer = answer.upper()
    violated: set[int] = set()

    # Rule 1: choices sharing a word root must not be selected.
    roots = {
        letter.upper(): {word_root(t) for t in _TOKEN.findall(text.lower())}
        for letter, text in choices
    }
    flagged: set[str] = set()
    for i, la in enumerate(letters):
        for lb in letters[i + 1:]:
            if roots[la] & roots[lb]:
                flagged.update((la, lb))
    if answer in flagged:
        violated.add(1)

    # Rule 2: long questions bar A, B, C.
    if len(question.split()) >= qa_rules.long_question_words and answer in {"A", "B", "C"}:
        violated.add(2)

    # Rule 3: questions containing animals must be answered B.
    q_tokens = _TOKEN.findall(question.lower())
    q_roots = {word_root(t) for t in q_tokens}
    if (set(q_tokens) | q_roots) & qa_rules.animals and answer != "B":
        violated.add(3)

    # Rule 4: digit word one..five bars the mapped letter.
    for word, letter in _NUMBER_LETTER.items():
        if word in q_tokens and answer == letter:
            violated.add(4)

    return frozenset(violated)


_RISK_BY_COUNT = {
    0: RiskLevel.NO,
    1: RiskLevel.LOW,
    2: RiskLevel.MEDIUM,
    3: RiskLevel.HIGH,
    4: RiskLevel.VERY_HIGH,
}


def risk_level(violation_count: int) -> RiskLevel:
    if violation_count not in _RISK_BY_COUNT:
        raise ValueError(f"violation count out of range 0..4: {violation_count}")
    return _RISK_BY_COUNT[violation_count]


# ---------------------------------------------------------------------------
# Policy file loading and bundled defaults
# ---------------------------------------------------------------------------

def _data_text(name: str) -> str:
    return resources.files("guardkit.data").joinpath(name).read_text(encoding="utf-8")


def load_permission_table(path: Optional[Union[str, Path]] = None) -> PermissionTable:
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("permissions_eicu.json")
    return PermissionTable.from_dict(json.loads(text))


def load_rules(path: Optional[Union[str, Path]] = None) -> list[Rule]:
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("rules_mind2web.json")
    rules = [Rule.from_dict(d) for d in json.loads(text)]
    ids = [r.id for r in rules]
    if len(set(ids)) != len(ids):
        raise ToolboxError("duplicate rule ids in ruleset")
    return rules


def load_qa_rules(path: Optional[Union[str, Path]] = None) -> QaRuleSet:
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("qa_rules.json")
    return QaRuleSet.from_dict(json.loads(text))


def rule_descriptions(rules: Iterable[Rule]) -> dict[int, str]:
    return {r.id: r.description for r in rules}


# ---------------------------------------------------------------------------
# Default registry wired for the guardrail interpreter
# ---------------------------------------------------------------------------

def build_default_registry(
    permissions: Optional[PermissionTable] = None,
    rules: Optional[Sequence[Rule]] = None,
    qa_rules: Optional[QaRuleSet] = None,
) -> ToolboxRegistry:
    """Registry exposing the guard functions to guardrail programs.

    Interpreter-facing wrappers accept and return plain values (strings,
    ints, lists, maps) so programs stay engine-agnostic.
    """
    permissions = permissions or load_permission_table()
    rules = list(rules) if rules is not None else load_rules()
    qa = qa_rules or load_qa_rules()
    reg = ToolboxRegistry()

    def _check_access(role: str, required: Mapping[str, Any], table: Mapping[str, Any]) -> dict:
        result = check_access(role, ResourceSet(required), PermissionTable.from_dict(table))
        return {"denied": result.denied, "inaccessible": result.inaccessible.to_dict()}

    def _check_rules(profile: Mapping[str, Any], task: str, rule_dicts: Sequence[Mapping]) -> dict:
        result = check_rules(
            UserProfile.from_dict(profile), task, [Rule.from_dict(d) for d in rule_dicts]
        )
        return {"denied": result.denied, "violated": sorted(result.violated)}

    def _check_qa_rules(question: str, choices: Sequence, answer: str) -> list[int]:
        pairs = [(c[0], c[1]) for c in choices]
        return sorted(evaluate_qa_rules(question, pairs, answer, qa))

    def _risk_level(count: int) -> str:
        return risk_level(count).value

    def _count(value: Any) -> int:
        return len(value)

    reg.register(
        FunctionSpec(
            name="check_access",
            params=(("role", "string"), ("required", "map of database -> column list"),
                    ("permissions", "permission table")),
            returns="map {denied: bool, inaccessible: map}",
            doc="Compare required databases/columns against the role's access permissions.",
        ),
        _check_access,
    )
    reg.register(
        FunctionSpec(
            name="check_rules",
            params=(("profile", "user profile map"), ("task", "string"),
                    ("rules", "list of rules")),
            returns="map {denied: bool, violated: list of rule ids}",
            doc="Evaluate the safety rules related to the task against the user profile.",
        ),
        _check_rules,
    )
    reg.register(
        FunctionSpec(
            name="check_qa_rules",
            params=(("question", "string"), ("choices", "list of [letter, text]"),
                    ("answer", "letter")),
            returns="list of violated rule ids",
            doc="Apply the four QA pseudo-rules to a multiple-choice question.",
        ),
        _check_qa_rules,
    )
    reg.register(
        FunctionSpec(
            name="risk_level",
            params=(("count", "integer 0..4"),),
            returns="risk level string",
            doc="Map a rule-violation count to a risk level.",
        ),
        _risk_level,
    )
    reg.register(
        FunctionSpec(
            name="count",
            params=(("value", "list or map"),),
            returns="integer",
            doc="Number of elements in a list or map.",
        ),
        _count,
    )
    return reg
