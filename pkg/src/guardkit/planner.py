"""Four-step action plans: parsing, rendering, and LLM-backed generation."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .core import InvalidValueError


class PlanError(Exception):
    """Planning failed; carries the raw LLM text when available."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


@dataclass(frozen=True)
class ActionPlan:
    """Exactly four chain-of-thought steps; the last names an execution engine."""

    steps: tuple[str, str, str, str]
    raw_text: str = ""

    def __post_init__(self) -> None:
        if len(self.steps) != 4 or any(not s.strip() for s in self.steps):
            raise InvalidValueError("an action plan has exactly four nonempty steps")
        object.__setattr__(self, "steps", tuple(s.strip() for s in self.steps))
        if not self.raw_text:
            object.__setattr__(self, "raw_text", self.render())

    def render(self) -> str:
        return "\n".join(f"Step {i}: {s}" for i, s in enumerate(self.steps, 1))

    def to_dict(self) -> dict:
        return {"steps": list(self.steps), "raw_text": self.raw_text}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ActionPlan":
        steps = d["steps"]
        return cls(steps=tuple(steps), raw_text=d.get("raw_text", ""))


_STEP_MARKER = re.compile(r"^[\s>*#\-\d.)(]*step\s*(\d+)\s*[:.\-)]\s*", re.IGNORECASE | re.MULTILINE)


def parse_plan(text: str) -> ActionPlan:
    """Extract the four steps delimited by "Step 1:".."Step 4:" markers.

    Markers are matched case-insensitively and tolerate leading enumeration
    punctuation. Anything other than exactly the markers 1..4 is a PlanError.
    """
    matches = list(_STEP_MARKER.finditer(text))
    numbers = [int(m.group(1)) for m in matches]
    if numbers != [1, 2, 3, 4]:
        raise PlanError(
            f"expected step markers 1..4, found {numbers or 'none'}", raw_text=text
        )
    steps = []
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        steps.append(text[m.end():end].strip())
    if any(not s for s in steps):
        raise PlanError("one or more plan steps are empty", raw_text=text)
    return ActionPlan(steps=tuple(steps), raw_text=text)


_REASK_SUFFIX = (
    "\n\nYour previous response could not be parsed. Respond again with exactly "
    "four lines, each starting with 'Step 1:' through 'Step 4:'."
)


def plan(io, spec, req, demos: Sequence, backend) -> ActionPlan:
    """Generate an action plan: build the planning prompt, complete, parse.

    On a parse failure the backend is re-asked once with a corrective note
    before the error is surfaced.
    """
    from . import bridge

    prompt = bridge.build_plan_prompt(bridge.default_planning_instructions(), spec, req, demos, io)
    text = backend.complete(prompt)
    try:
        return parse_plan(text)
    except PlanError:
        retry = backend.complete(prompt + _REASK_SUFFIX)
        return parse_plan(retry)
