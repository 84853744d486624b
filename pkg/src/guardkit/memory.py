"""Append-only demonstration memory with k-nearest retrieval by edit distance."""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional

from .planner import ActionPlan


class MemoryError_(Exception):
    """Memory store failure."""


class EmptyStoreError(MemoryError_):
    """Retrieval attempted against an empty store; seed demonstrations first."""


class RetrievalOrder(str, Enum):
    MOST_SIMILAR = "most_similar"
    LEAST_SIMILAR = "least_similar"


@dataclass(frozen=True)
class MemoryEntry:
    id: int
    agent_input: str
    agent_output: str
    plan: ActionPlan
    program_source: str
    benchmark_tag: str = ""

    def concat(self) -> str:
        return self.agent_input + "\n" + self.agent_output

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "agent_input": self.agent_input,
            "agent_output": self.agent_output,
            "plan": self.plan.to_dict(),
            "program_source": self.program_source,
            "benchmark_tag": self.benchmark_tag,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MemoryEntry":
        return cls(
            id=int(d["id"]),
            agent_input=d["agent_input"],
            agent_output=d["agent_output"],
            plan=ActionPlan.from_dict(d["plan"]),
            program_source=d.get("program_source", ""),
            benchmark_tag=d.get("benchmark_tag", ""),
        )


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 1
    order: RetrievalOrder = RetrievalOrder.MOST_SIMILAR
    include_program: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")


def distance(a: str, b: str) -> int:
    """Exact Levenshtein distance with unit-cost insert/delete/substitute."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        append = cur.append
        last = i
        for j, cb in enumerate(b, 1):
            last = min(prev[j] + 1, last + 1, prev[j - 1] + (ca != cb))
            append(last)
        prev = cur
    return prev[-1]


class MemoryStore:
    """Single-writer, multi-reader store of past use cases.

    Retrieval sorts a snapshot, so concurrent reads are safe; insertions
    are serialized by a lock.
    """

    def __init__(self) -> None:
        self._entries: list[MemoryEntry] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[MemoryEntry]:
        return list(self._entries)

    def insert(self, entry: MemoryEntry) -> int:
        if len(entry.plan.steps) != 4:
            raise MemoryError_("demonstration plan must have exactly four steps")
        with self._lock:
            new_id = len(self._entries)
            self._entries.append(replace(entry, id=new_id))
            return new_id

    def retrieve(self, query_input: str, query_output: str, cfg: RetrievalConfig) -> list[MemoryEntry]:
        snapshot = self.entries()
        if not snapshot:
            raise EmptyStoreError("memory store is empty; seed demonstrations first")
        query = query_input + "\n" + query_output
        scored = [(distance(e.concat(), query), e.id, e) for e in snapshot]
        if cfg.order is RetrievalOrder.LEAST_SIMILAR:
            # Descending by distance; ties still break towards smaller ids.
            scored.sort(key=lambda t: (-t[0], t[1]))
        else:
            scored.sort(key=lambda t: (t[0], t[1]))
        picked = [e for _, _, e in scored[: cfg.k]]
        if not cfg.include_program:
            picked = [replace(e, program_source="") for e in picked]
        return picked


def save_store(store: MemoryStore, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in store.entries():
            fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")


def load_store(path: str | Path) -> MemoryStore:
    store = MemoryStore()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                entry = MemoryEntry.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MemoryError_(f"{path}: malformed memory entry at line {lineno}: {exc}") from exc
            assigned = store.insert(entry)
            if assigned != entry.id:
                raise MemoryError_(
                    f"{path}: line {lineno}: entry id {entry.id} does not match position {assigned}"
                )
    return store
