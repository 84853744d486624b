"""Acceptance gate: one printed pass/fail line per headline guarantee.

Each test exercises one end-to-end guarantee at its stated tolerance and
prints a single PASS/FAIL line so the suite doubles as a readable report.
"""

import itertools
import random
import time

import pytest

from guardkit import bench, evaluator
from guardkit.bridge import CANONICAL_ACCESS_PROGRAM, CanonicalSynthesizerBackend, ScriptedBackend
from guardkit.cli import EngineConfig, _guard_case, _to_record
from guardkit.core import ErrorClass, Label, RequestKind, RiskLevel, UserProfile
from guardkit.gdsl import lang, run
from guardkit.gdsl.pipeline import GuardConfig, guard
from guardkit.memory import MemoryStore, RetrievalConfig, RetrievalOrder, distance
from guardkit.toolbox import check_rules, evaluate_qa_rules, related_rules, risk_level

from test_memory import brute_force_distance, entry
from test_pipeline import PLAN_TEXT, seeded_store
from test_toolbox import HAND_REQUIREMENT, TRIGGER_TASKS


def _report(name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def _run_suite(cases, table, rules, qa):
    cfg = EngineConfig(backend="canonical")
    backend = CanonicalSynthesizerBackend(permissions=table, engine="dsl")
    stores = {kind: None for kind in {c.kind for c in cases}}
    for kind in stores:
        stores[kind] = seeded_store(kind, table=table, rules=rules)
    records = []
    for case in cases:
        result, rendered = _guard_case(case, cfg, table, rules, qa, backend, stores[case.kind])
        records.append(_to_record(case, result, rendered))
    return records


def _all_hundred(metrics: evaluator.Metrics) -> bool:
    return (
        metrics.lpa == 100.0
        and metrics.lpp == 100.0
        and metrics.lpr == 100.0
        and metrics.ea == 100.0
        and metrics.fra == 100.0
    )


class TestAcceptance:
    def test_access_control_oracle_equivalence(self, table, rules, qa):
        cases = bench.generate_eicu_suite(table, seed=2024)
        start = time.perf_counter()
        records = _run_suite(cases, table, rules, qa)
        elapsed = time.perf_counter() - start
        metrics = evaluator.score(records)
        ok = len(cases) == 316 and _all_hundred(metrics) and elapsed < 10.0
        _report(
            "access-control oracle equivalence (316 cases, all metrics 100, <10 s)",
            ok,
            f"n={len(cases)}, LPA={metrics.lpa}, EA={metrics.ea}, FRA={metrics.fra}, "
            f"t={elapsed:.2f}s",
        )

    def test_safety_rules_oracle_equivalence(self, table, rules, qa):
        cases = bench.generate_mind2web_suite(rules, seed=2024)
        records = _run_suite(cases, table, rules, qa)
        metrics = evaluator.score(records)
        per_class = sum(1 for c in cases if c.label is Label.DENIED)
        ok = len(cases) == 200 and per_class == 100 and _all_hundred(metrics)
        _report(
            "safety-rule oracle equivalence (100/100 cases, all metrics 100)",
            ok,
            f"n={len(cases)}, denied={per_class}, LPA={metrics.lpa}, EA={metrics.ea}",
        )

    def test_metric_arithmetic(self):
        from test_evaluator import DENY, GRANT, rec

        from guardkit.core import ExecStats

        records = [
            rec(1, DENY, truth_rules={1, 2}, pred_rules={1, 2}, case_id=f"ok{i}")
            for i in range(8)
        ]
        records.append(rec(1, DENY, truth_rules={1, 2}, pred_rules={1}, case_id="partial"))
        records.append(rec(1, GRANT, truth_rules={1}, case_id="missed"))
        metrics = evaluator.score(records)

        exec_records = []
        for i in range(316):
            if i < 287:
                stats = ExecStats()
            elif i < 296:  # 9 of the 29 initial failures get repaired
                stats = ExecStats(executable_before_debug=False, debug_iterations_used=1,
                                  executable_after_debug=True)
            else:
                stats = ExecStats(executable_before_debug=False, debug_iterations_used=3,
                                  executable_after_debug=False)
            exec_records.append(rec(0, GRANT, case_id=f"er{i}", stats=stats))
        er_before, er_after = evaluator.executable_rate(exec_records)
        ok = (
            metrics.lpr == 90.0
            and metrics.ea == 80.0
            and abs(er_before - 90.8) <= 0.05
            and abs(er_after - 93.7) <= 0.05
        )
        _report(
            "metric arithmetic (LPR=90.0, EA=80.0 exactly; ER 90.8/93.7 within ±0.05)",
            ok,
            f"LPR={metrics.lpr}, EA={metrics.ea}, ER={er_before:.2f}/{er_after:.2f}",
        )

    def test_rule_engine_truth_table(self, rules):
        ages = (14, 15, 17, 18, 30)
        count = 0
        mismatches = []
        for age, bools in itertools.product(ages, itertools.product([False, True], repeat=4)):
            domestic, dr_license, vaccine, membership = bools
            profile = UserProfile(age=age, domestic=domestic, dr_license=dr_license,
                                  vaccine=vaccine, membership=membership)
            for rid, task in TRIGGER_TASKS.items():
                expected = not HAND_REQUIREMENT[rid](profile)
                if (rid in check_rules(profile, task, rules).violated) != expected:
                    mismatches.append((rid, age, bools))
                count += 1
        adult = UserProfile(age=18, domestic=False, dr_license=False,
                            vaccine=False, membership=False)
        teen = UserProfile(age=15, domestic=True, dr_license=True,
                           vaccine=True, membership=True)
        boundaries_ok = (
            4 not in check_rules(adult, TRIGGER_TASKS[4], rules).violated
            and 6 not in check_rules(teen, TRIGGER_TASKS[6], rules).violated
        )
        ok = count == 480 and not mismatches and boundaries_ok
        _report(
            "rule-engine truth table (480 evaluations; age 18 and 15 boundaries)",
            ok,
            f"evaluated={count}, mismatches={len(mismatches)}",
        )

    def test_distance_and_retrieval_oracles(self):
        rng = random.Random(99)
        alphabet = "abcde "
        distance_ok = True
        for _ in range(1000):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
            if distance(a, b) != brute_force_distance(a, b):
                distance_ok = False
                break

        def oracle(entries, qin, qout, cfg):
            key = qin + "\n" + qout
            reverse = cfg.order is RetrievalOrder.LEAST_SIMILAR
            scored = sorted(
                entries,
                key=lambda e: (-distance(e.concat(), key) if reverse
                               else distance(e.concat(), key), e.id),
            )
            return [e.id for e in scored[: cfg.k]]

        rng = random.Random(4)
        retrieval_ok = True
        for trial in range(200):
            store = MemoryStore()
            for i in range(rng.randint(1, 12)):
                text = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 20)))
                store.insert(entry(i, text, text[::-1]))
            qin = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 20)))
            qout = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 10)))
            order = RetrievalOrder.LEAST_SIMILAR if trial % 2 else RetrievalOrder.MOST_SIMILAR
            cfg = RetrievalConfig(k=rng.randint(1, 5), order=order, include_program=True)
            got = [e.id for e in store.retrieve(qin, qout, cfg)]
            if got != oracle(store.entries(), qin, qout, cfg):
                retrieval_ok = False
                break
        ok = distance_ok and retrieval_ok
        _report(
            "edit distance and retrieval match brute force (1000 pairs; 200 retrievals)",
            ok,
            f"distance={'ok' if distance_ok else 'mismatch'}, "
            f"retrieval={'ok' if retrieval_ok else 'mismatch'}",
        )

    def test_program_robustness_and_debug_loop(self, table, rules, registry):
        known = {spec.name for spec in registry.specs()}
        rng = random.Random(31)
        rejected = 0
        for _ in range(50):
            chars = list("check_access")
            pos = rng.randrange(len(chars))
            chars[pos] = rng.choice("abcdefghijklmnopqrstuvwxyz_")
            mutant = "".join(chars)
            if mutant in known:
                mutant += "x"
            src = f"let r = {mutant}(role, required_resources, permissions)\nverdict grant"
            try:
                run.validate(lang.parse(src), registry)
            except run.UnknownFunctionError:
                rejected += 1

        case = next(c for c in bench.generate_eicu_suite(table, seed=3)
                    if c.label is Label.DENIED)
        req = bench.default_access_request(table)
        spec = bench.default_target_spec(RequestKind.ACCESS_CONTROL)
        store = seeded_store(RequestKind.ACCESS_CONTROL, table=table)
        cfg = GuardConfig(k=1, permissions=table)

        typo = CANONICAL_ACCESS_PROGRAM.replace("check_access", "check_acces")
        backend = ScriptedBackend(queue=[PLAN_TEXT, typo, CANONICAL_ACCESS_PROGRAM])
        repaired = guard(case.agent_io, req, spec, store, registry, backend, cfg)

        backend = ScriptedBackend(queue=[PLAN_TEXT, typo, typo, typo, typo])
        failed = guard(case.agent_io, req, spec, store, registry, backend, cfg)

        ok = (
            rejected == 50
            and repaired.outcome == "denied"
            and repaired.stats.debug_iterations_used == 1
            and failed.outcome == "failure"
            and failed.stats.debug_iterations_used == 3
        )
        _report(
            "program robustness (50/50 mutants rejected statically; "
            "typo repaired in 1 iteration; debug capped at 3)",
            ok,
            f"rejected={rejected}/50, repair_iters={repaired.stats.debug_iterations_used}, "
            f"cap_iters={failed.stats.debug_iterations_used}",
        )

    def test_risk_levels_and_shared_word_case(self, qa):
        mapping_ok = (
            risk_level(0) is RiskLevel.NO
            and risk_level(1) is RiskLevel.LOW
            and risk_level(2) is RiskLevel.MEDIUM
            and risk_level(3) is RiskLevel.HIGH
            and risk_level(4) is RiskLevel.VERY_HIGH
        )
        question = "Which option is right?"
        choices = [
            ("A", "It is blue."),
            ("B", "It is red."),
            ("C", "They have apples."),
            ("D", "They have pears."),
        ]
        violated = evaluate_qa_rules(question, choices, "C", qa)
        ok = mapping_ok and 1 in violated
        _report(
            "risk levels (all five mappings) and shared-word answer case flags rule 1",
            ok,
            f"mappings={'ok' if mapping_ok else 'bad'}, violated={sorted(violated)}",
        )

    def test_balancer(self, rules):
        cases = bench.generate_imbalanced_mind2web(rules, seed=7)
        zeros = [c for c in cases if c.label is Label.GRANTED]
        ones = [c for c in cases if c.label is Label.DENIED]
        irrelevant = [c for c in zeros if not related_rules(c.question, rules)]
        balanced = bench.balance_mind2web(cases, rng_seed=11, rules=rules)
        again = bench.balance_mind2web(cases, rng_seed=11, rules=rules)
        b_zeros = [c for c in balanced if c.label is Label.GRANTED]
        b_ones = [c for c in balanced if c.label is Label.DENIED]
        unique_ok = (
            len({c.question for c in b_zeros}) == len(b_zeros)
            and len({c.question for c in b_ones}) == len(b_ones)
        )
        deterministic = [c.to_dict() for c in balanced] == [c.to_dict() for c in again]
        ok = (
            len(zeros) == 178
            and len(ones) == 70
            and len(irrelevant) == 148
            and len(b_zeros) == 100
            and len(b_ones) == 100
            and unique_ok
            and deterministic
        )
        _report(
            "balancer (178/70 with 148 irrelevant in; exactly 100/100 unique, deterministic)",
            ok,
            f"in={len(zeros)}/{len(ones)} irrelevant={len(irrelevant)}, "
            f"out={len(b_zeros)}/{len(b_ones)}",
        )

    def test_cross_engine_parity(self, table, rules, qa, registry):
        import json

        from guardkit.bridge import CanonicalSynthesizerBackend
        from guardkit.gdsl.pipeline import ExternalExecError, ExternalExecutor

        from test_extexec import WORKER_CMD, paired_cases

        cases = paired_cases(table, rules, qa)
        internal_backend = CanonicalSynthesizerBackend(permissions=table, engine="dsl")
        external_backend = CanonicalSynthesizerBackend(permissions=table, engine="external")
        executor = ExternalExecutor(WORKER_CMD, timeout_s=10.0)
        requests = {
            RequestKind.ACCESS_CONTROL: bench.default_access_request(table),
            RequestKind.SAFETY_RULES: bench.default_rules_request(rules),
            RequestKind.QA_RULES: bench.default_qa_request(qa),
        }
        stores = {kind: seeded_store(kind, table=table, rules=rules) for kind in RequestKind}
        mismatches = []
        try:
            for case in cases:
                req = requests[case.kind]
                spec = bench.default_target_spec(case.kind)
                internal = guard(case.agent_io, req, spec, stores[case.kind], registry,
                                 internal_backend, GuardConfig(k=1, permissions=table, rules=tuple(rules)))
                external = guard(case.agent_io, req, spec, stores[case.kind], registry,
                                 external_backend,
                                 GuardConfig(k=1, permissions=table, rules=tuple(rules), engine="external",
                                             external_executor=executor))
                left = json.dumps(internal.verdict.to_dict(), sort_keys=True)
                right = json.dumps(external.verdict.to_dict(), sort_keys=True)
                if left != right:
                    mismatches.append(case.id)

            executor.timeout_s = 0.3
            try:
                executor.execute("while True:\n    pass", {})
                timeout_ok = False
            except ExternalExecError as exc:
                timeout_ok = exc.error_class is ErrorClass.PROTOCOL
            executor.timeout_s = 10.0
            try:
                executor.execute("verdict = (", {})
                syntax_ok = False
            except ExternalExecError as exc:
                syntax_ok = exc.error_class is ErrorClass.PARSE
        finally:
            executor.close()
        ok = len(cases) == 20 and not mismatches and timeout_ok and syntax_ok
        _report(
            "cross-engine parity (20 paired cases identical verdicts; "
            "timeout and syntax errors classed correctly)",
            ok,
            f"cases={len(cases)}, mismatches={len(mismatches)}, "
            f"timeout={'ok' if timeout_ok else 'bad'}, syntax={'ok' if syntax_ok else 'bad'}",
        )
