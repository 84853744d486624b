import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from guardkit.memory import (
    EmptyStoreError,
    MemoryEntry,
    MemoryError_,
    MemoryStore,
    RetrievalConfig,
    RetrievalOrder,
    distance,
    load_store,
    save_store,
)
from guardkit.planner import ActionPlan


def brute_force_distance(a: str, b: str) -> int:
    """Textbook full-matrix edit distance, used as the oracle."""
    m, n = len(a), len(b)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        table[i][0] = i
    for j in range(n + 1):
        table[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + cost,
            )
    return table[m][n]


PLAN = ActionPlan(steps=("Summarize the requests.", "Read the input.",
                         "Read the output log.", "Generate and run the check."))


def entry(i: int, text: str, out: str = "") -> MemoryEntry:
    return MemoryEntry(id=i, agent_input=text, agent_output=out, plan=PLAN,
                       program_source="verdict grant")


class TestDistance:
    def test_known_values(self):
        assert distance("kitten", "sitting") == 3
        assert distance("", "abc") == 3
        assert distance("abc", "") == 3
        assert distance("same", "same") == 0
        assert distance("saturday", "sunday") == 3

    def test_against_brute_force_oracle(self):
        rng = random.Random(99)
        alphabet = "abcde "
        for _ in range(1000):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
            assert distance(a, b) == brute_force_distance(a, b), (a, b)

    @given(st.text(max_size=25), st.text(max_size=25))
    @settings(max_examples=100)
    def test_symmetry_and_identity(self, a, b):
        assert distance(a, b) == distance(b, a)
        assert distance(a, a) == 0

    @given(st.text(max_size=15), st.text(max_size=15), st.text(max_size=15))
    @settings(max_examples=60)
    def test_triangle_inequality(self, a, b, c):
        assert distance(a, c) <= distance(a, b) + distance(b, c)


class TestRetrieval:
    def _oracle(self, entries, qin, qout, cfg):
        key = qin + "\n" + qout
        scored = [(distance(e.concat(), key), e.id, e) for e in entries]
        reverse = cfg.order is RetrievalOrder.LEAST_SIMILAR
        scored.sort(key=lambda t: (-t[0] if reverse else t[0], t[1]))
        return [e for _, _, e in scored[: cfg.k]]

    def test_against_oracle_random_sweep(self):
        rng = random.Random(4)
        alphabet = "abcdef \n"
        for trial in range(200):
            store = MemoryStore()
            texts = []
            for i in range(rng.randint(1, 12)):
                text = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 20))) or "x"
                texts.append(text)
                store.insert(entry(i, text))
            qin = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 20)))
            qout = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 10)))
            order = RetrievalOrder.LEAST_SIMILAR if trial % 2 else RetrievalOrder.MOST_SIMILAR
            cfg = RetrievalConfig(k=rng.randint(1, 5), order=order, include_program=True)
            got = store.retrieve(qin, qout, cfg)
            want = self._oracle(store.entries(), qin, qout, cfg)
            assert [e.id for e in got] == [e.id for e in want], trial

    def test_ties_broken_by_insertion_id(self):
        store = MemoryStore()
        store.insert(entry(0, "aaa"))
        store.insert(entry(1, "aaa"))
        got = store.retrieve("aaa", "", RetrievalConfig(k=2, include_program=True))
        assert [e.id for e in got] == [0, 1]

    def test_include_program_false_strips_source(self):
        store = MemoryStore()
        store.insert(entry(0, "hello"))
        got = store.retrieve("hello", "", RetrievalConfig(k=1, include_program=False))
        assert got[0].program_source == ""
        # the stored entry keeps its program
        assert store.entries()[0].program_source == "verdict grant"

    def test_k_larger_than_store_returns_everything(self):
        store = MemoryStore()
        store.insert(entry(0, "a"))
        store.insert(entry(1, "b"))
        got = store.retrieve("a", "", RetrievalConfig(k=10))
        assert len(got) == 2

    def test_empty_store_raises(self):
        with pytest.raises(EmptyStoreError):
            MemoryStore().retrieve("q", "", RetrievalConfig(k=1))

    def test_orders_are_reverses_for_distinct_distances(self):
        store = MemoryStore()
        store.insert(entry(0, "query text here"))
        store.insert(entry(1, "zzzzzzzzzzzzzzzzzzzzzz"))
        store.insert(entry(2, "query text"))
        most = store.retrieve("query text", "", RetrievalConfig(k=3))
        least = store.retrieve("query text", "",
                               RetrievalConfig(k=3, order=RetrievalOrder.LEAST_SIMILAR))
        assert [e.id for e in most] == [e.id for e in reversed(least)]


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        store = MemoryStore()
        store.insert(entry(0, "first", "out1"))
        store.insert(entry(1, "second"))
        path = tmp_path / "mem.jsonl"
        save_store(store, path)
        loaded = load_store(path)
        assert [e.to_dict() for e in loaded.entries()] == [e.to_dict() for e in store.entries()]

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "mem.jsonl"
        good = json.dumps(entry(0, "ok").to_dict())
        path.write_text(good + "\n{broken\n", encoding="utf-8")
        with pytest.raises(MemoryError_, match="line 2"):
            load_store(path)

    def test_insert_assigns_sequential_ids(self):
        store = MemoryStore()
        assert store.insert(entry(0, "a")) == 0
        assert store.insert(entry(1, "b")) == 1
