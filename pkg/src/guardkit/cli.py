"""Operator command line: single-case guarding, batch evaluation, memory
management, benchmark tooling, and the HTTP guard service.

Exit codes from ``guard``: 0 the action was granted, 1 it was denied,
2 the guard itself failed to produce a verdict. Configuration errors exit
with the usual click code (2) before any guarding happens.
"""
from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import click

from . import bench, bridge, evaluator, memory as memory_mod, report, service
from .core import (
    DetailSet,
    ExecStats,
    RequestKind,
    Verdict,
    render_verdict,
)
from .gdsl.pipeline import ExternalExecutor, GuardConfig, GuardResult, guard
from .memory import MemoryEntry, MemoryStore, RetrievalOrder, load_store, save_store
from .toolbox import (
    PermissionTable,
    QaRuleSet,
    Rule,
    build_default_registry,
    load_permission_table,
    load_qa_rules,
    load_rules,
    rule_descriptions,
)

EXIT_GRANTED = 0
EXIT_DENIED = 1
EXIT_FAILURE = 2
EXIT_CONFIG = 3


class ConfigError(click.ClickException):
    """Configuration or input-file problem; exits distinctly from any verdict."""

    exit_code = EXIT_CONFIG


@dataclass
class EngineConfig:
    """Everything needed to run one guard call."""

    backend: str = "canonical"          # canonical | scripted | http
    model: str = ""
    base_url: str = ""
    k: Optional[int] = None             # None -> per-kind default
    order: RetrievalOrder = RetrievalOrder.MOST_SIMILAR
    engine: str = "dsl"                 # dsl | external
    max_debug_iters: int = 3
    permissions_path: Optional[str] = None
    rules_path: Optional[str] = None
    qa_rules_path: Optional[str] = None
    memory_path: Optional[str] = None
    external_cmd: Optional[str] = None
    fixtures_path: Optional[str] = None

    def effective_k(self, kind: RequestKind) -> int:
        if self.k is not None:
            return self.k
        return 1 if kind is RequestKind.ACCESS_CONTROL else 3

    def policies(self) -> tuple[PermissionTable, list[Rule], QaRuleSet]:
        return (
            load_permission_table(self.permissions_path),
            load_rules(self.rules_path),
            load_qa_rules(self.qa_rules_path),
        )

    def make_backend(self, permissions: PermissionTable) -> bridge.LlmBackend:
        if self.backend == "canonical":
            return bridge.CanonicalSynthesizerBackend(permissions=permissions, engine=self.engine)
        if self.backend == "scripted":
            if not self.fixtures_path:
                raise ConfigError("--fixtures is required with --backend scripted")
            data = json.loads(Path(self.fixtures_path).read_text(encoding="utf-8"))
            return bridge.ScriptedBackend(table=data.get("table"), queue=data.get("queue"))
        if self.backend == "http":
            if not self.base_url or not self.model:
                raise ConfigError("--base-url and --model are required with --backend http")
            return bridge.HttpChatBackend(base_url=self.base_url, model=self.model)
        raise ConfigError(f"unknown backend {self.backend!r}")

    def make_memory(
        self, kind: RequestKind, permissions: PermissionTable, rules: Sequence[Rule]
    ) -> MemoryStore:
        if self.memory_path:
            return load_store(self.memory_path)
        store = MemoryStore()
        for demo in bench.default_demonstrations(kind, table=permissions, rules=rules):
            store.insert(demo)
        return store


def _config_options(fn):
    opts = [
        click.option("--backend", type=click.Choice(["canonical", "scripted", "http"]),
                     default="canonical", show_default=True),
        click.option("--model", default="", help="model id for the http backend"),
        click.option("--base-url", default="", help="chat-completions base URL"),
        click.option("--k", type=int, default=None,
                     help="demonstrations to retrieve (default 1 for access control, 3 otherwise)"),
        click.option("--order", type=click.Choice([o.value for o in RetrievalOrder]),
                     default=RetrievalOrder.MOST_SIMILAR.value, show_default=True),
        click.option("--engine", type=click.Choice(["dsl", "external"]),
                     default="dsl", show_default=True),
        click.option("--max-debug-iters", type=int, default=3, show_default=True),
        click.option("--permissions", "permissions_path", type=click.Path(exists=True), default=None),
        click.option("--rules", "rules_path", type=click.Path(exists=True), default=None),
        click.option("--qa-rules", "qa_rules_path", type=click.Path(exists=True), default=None),
        click.option("--memory", "memory_path", type=click.Path(exists=True), default=None),
        click.option("--external-exec-cmd", "external_cmd", default=None,
                     help="command line of the external interpreter worker"),
        click.option("--fixtures", "fixtures_path", type=click.Path(exists=True), default=None,
                     help="scripted-backend fixture JSON ({table: {...}, queue: [...]})"),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_config(kw: dict) -> EngineConfig:
    return EngineConfig(
        backend=kw["backend"],
        model=kw["model"],
        base_url=kw["base_url"],
        k=kw["k"],
        order=RetrievalOrder(kw["order"]),
        engine=kw["engine"],
        max_debug_iters=kw["max_debug_iters"],
        permissions_path=kw["permissions_path"],
        rules_path=kw["rules_path"],
        qa_rules_path=kw["qa_rules_path"],
        memory_path=kw["memory_path"],
        external_cmd=kw["external_cmd"],
        fixtures_path=kw["fixtures_path"],
    )


def _guard_case(
    case: bench.GuardCase,
    cfg: EngineConfig,
    permissions: PermissionTable,
    rules: Sequence[Rule],
    qa: QaRuleSet,
    backend: bridge.LlmBackend,
    store: MemoryStore,
    executor: Optional[ExternalExecutor] = None,
) -> tuple[GuardResult, str]:
    """Run one case; returns the pipeline result and the rendered verdict text
    (empty on guard failure)."""
    registry = build_default_registry(permissions, rules, qa)
    req = {
        RequestKind.ACCESS_CONTROL: lambda: bench.default_access_request(permissions),
        RequestKind.SAFETY_RULES: lambda: bench.default_rules_request(rules),
        RequestKind.QA_RULES: lambda: bench.default_qa_request(qa),
    }[case.kind]()
    spec = bench.default_target_spec(case.kind)
    gcfg = GuardConfig(
        k=min(cfg.effective_k(case.kind), len(store)),
        order=cfg.order,
        engine=cfg.engine,
        max_debug_iters=cfg.max_debug_iters,
        permissions=permissions,
        rules=tuple(rules),
        qa_rules=qa,
        external_executor=executor,
    )
    result = guard(case.agent_io, req, spec, store, registry, backend, gcfg)
    if result.verdict is None:
        return result, ""
    descriptions = rule_descriptions(rules)
    descriptions.update(qa.descriptions)
    rendered = render_verdict(result.verdict, case.kind, descriptions)
    return result, rendered


def _to_record(case: bench.GuardCase, result: GuardResult, rendered: str) -> evaluator.RunRecord:
    if case.kind is bench.RequestKind.ACCESS_CONTROL:
        group = case.identity or ""
    else:
        group = ""
    return evaluator.RunRecord(
        case_id=case.id,
        kind=case.kind,
        truth_label=case.label,
        truth_details=case.truth_details,
        rendered=rendered,
        predicted_details=result.verdict.details if result.verdict else DetailSet(),
        exec_stats=result.stats,
        agent_answer_correct=case.agent_answer_correct,
        group=group,
    )


@click.group()
def main() -> None:
    """Guardrail engine for LLM agents: plan, generate, execute, evaluate."""


# ---------------------------------------------------------------------------
# guard
# ---------------------------------------------------------------------------

@main.command("guard")
@click.option("--case", "case_path", type=click.Path(exists=True), required=True,
              help="JSON file holding one benchmark-shaped case")
@_config_options
def cmd_guard(case_path: str, **kw) -> None:
    """Guard a single recorded agent interaction and print the verdict."""
    cfg = _build_config(kw)
    try:
        case = bench.GuardCase.from_dict(json.loads(Path(case_path).read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid case file: {exc}")
    permissions, rules, qa = cfg.policies()
    backend = cfg.make_backend(permissions)
    store = cfg.make_memory(case.kind, permissions, rules)
    executor = ExternalExecutor(cfg.external_cmd) if cfg.external_cmd else None
    try:
        result, rendered = _guard_case(case, cfg, permissions, rules, qa, backend, store, executor)
    finally:
        if executor is not None:
            executor.close()

    record = _to_record(case, result, rendered)
    if result.outcome == "failure":
        click.echo(f"guard failure: {result.failure_reason}", err=True)
        click.echo(json.dumps(record.to_dict(), sort_keys=True))
        sys.exit(EXIT_FAILURE)
    click.echo(rendered)
    click.echo(json.dumps(record.to_dict(), sort_keys=True))
    sys.exit(EXIT_DENIED if result.outcome == "denied" else EXIT_GRANTED)


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

@main.group("eval")
def cmd_eval() -> None:
    """Batch evaluation: run a suite, then score the records."""


@cmd_eval.command("run")
@click.option("--cases", "cases_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--jobs", type=int, default=os.cpu_count() or 1, show_default="CPU count")
@click.option("--ea-allow-extras", is_flag=True, default=False,
              help="accept denial details that are supersets of the truth")
@_config_options
def eval_run(cases_path: str, out_dir: str, jobs: int, ea_allow_extras: bool, **kw) -> None:
    """Guard every case in a JSONL suite and write records, metrics, figures."""
    cfg = _build_config(kw)
    cases = bench.load_cases(cases_path)
    if not cases:
        raise click.ClickException("empty dataset")
    permissions, rules, qa = cfg.policies()
    backend = cfg.make_backend(permissions)

    stores = {
        kind: cfg.make_memory(kind, permissions, rules)
        for kind in {c.kind for c in cases}
    }

    def run_one(case: bench.GuardCase) -> tuple[evaluator.RunRecord, Optional[str]]:
        executor = ExternalExecutor(cfg.external_cmd) if cfg.external_cmd else None
        try:
            result, rendered = _guard_case(
                case, cfg, permissions, rules, qa, backend, stores[case.kind], executor
            )
        finally:
            if executor is not None:
                executor.close()
        failure = case.id if result.outcome == "failure" else None
        return _to_record(case, result, rendered), failure

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_one, cases))
    else:
        outcomes = [run_one(c) for c in cases]
    records = [r for r, _ in outcomes]
    failures = [f for _, f in outcomes if f]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    paths = report.write_report(records, out, ea_allow_extras=ea_allow_extras)
    metrics = evaluator.score(records, ea_allow_extras=ea_allow_extras)
    click.echo(evaluator.format_table({"overall": metrics}))
    for name, p in sorted(paths.items()):
        click.echo(f"{name}: {p}")
    if failures:
        click.echo(f"guard failures ({len(failures)}): {', '.join(failures)}", err=True)


@cmd_eval.command("score")
@click.option("--records", "records_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--ea-allow-extras", is_flag=True, default=False)
def eval_score(records_path: str, out_path: Optional[str], ea_allow_extras: bool) -> None:
    """Score a run-record JSONL file and print the metrics table."""
    records = []
    with open(records_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(evaluator.RunRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise click.ClickException(f"line {lineno}: {exc}")
    if not records:
        raise click.ClickException("no records to score")
    metrics = evaluator.score(records, ea_allow_extras=ea_allow_extras)
    er_before, er_after = evaluator.executable_rate(records)
    payload = {
        "overall": metrics.to_dict(),
        "executable_rate_before_debug": er_before,
        "executable_rate_after_debug": er_after,
    }
    if out_path:
        Path(out_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    click.echo(evaluator.format_table({"overall": metrics}))
    click.echo(f"executable rate: {er_before:.1f} before debugging, {er_after:.1f} after")


# ---------------------------------------------------------------------------
# memory
# ---------------------------------------------------------------------------

@main.group("memory")
def cmd_memory() -> None:
    """Inspect and extend a demonstration memory file."""


@cmd_memory.command("list")
@click.option("--path", type=click.Path(exists=True), required=True)
def memory_list(path: str) -> None:
    store = load_store(path)
    for entry in store.entries():
        has_program = "yes" if entry.program_source else "no"
        click.echo(f"{entry.id}\t{entry.benchmark_tag or '-'}\tprogram={has_program}\t"
                   f"{entry.agent_input.splitlines()[0][:60]}")
    click.echo(f"total: {len(store)}")


@cmd_memory.command("add")
@click.option("--path", type=click.Path(), required=True)
@click.option("--entry", "entry_path", type=click.Path(exists=True), required=True,
              help="JSON file holding one memory entry (id is reassigned)")
def memory_add(path: str, entry_path: str) -> None:
    store = load_store(path) if Path(path).exists() else MemoryStore()
    raw = json.loads(Path(entry_path).read_text(encoding="utf-8"))
    raw["id"] = len(store)
    try:
        entry = MemoryEntry.from_dict(raw)
    except (KeyError, ValueError) as exc:
        raise click.ClickException(f"invalid memory entry: {exc}")
    new_id = store.insert(entry)
    save_store(store, path)
    click.echo(f"inserted entry {new_id}; store now holds {len(store)}")


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@main.group("bench")
def cmd_bench() -> None:
    """Build, inspect, and validate benchmark suites."""


@cmd_bench.command("build")
@click.option("--suite", type=click.Choice(["access", "rules", "rules-imbalanced", "qa"]),
              required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=2024, show_default=True)
@click.option("--balance/--no-balance", default=False,
              help="with --suite rules-imbalanced: also balance to 100 per class")
@click.option("--permissions", "permissions_path", type=click.Path(exists=True), default=None)
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None)
def bench_build(suite: str, out_path: str, seed: int, balance: bool,
                permissions_path: Optional[str], rules_path: Optional[str]) -> None:
    table = load_permission_table(permissions_path)
    rules = load_rules(rules_path)
    if suite == "access":
        cases = bench.generate_eicu_suite(table, seed)
    elif suite == "rules":
        cases = bench.generate_mind2web_suite(rules, seed)
    elif suite == "rules-imbalanced":
        cases = bench.generate_imbalanced_mind2web(rules, seed)
        if balance:
            cases = bench.balance_mind2web(cases, rng_seed=seed, rules=rules)
    else:
        cases = bench.generate_qa_suite(load_qa_rules(), seed)
    bench.save_cases(cases, out_path)
    click.echo(f"wrote {len(cases)} cases to {out_path}")


@cmd_bench.command("stats")
@click.option("--cases", "cases_path", type=click.Path(exists=True), required=True)
def bench_stats(cases_path: str) -> None:
    cases = bench.load_cases(cases_path)
    click.echo(json.dumps(bench.dataset_stats(cases).to_dict(), indent=2, sort_keys=True))


@cmd_bench.command("validate")
@click.option("--cases", "cases_path", type=click.Path(exists=True), required=True)
@click.option("--permissions", "permissions_path", type=click.Path(exists=True), default=None)
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None)
@click.option("--qa-rules", "qa_rules_path", type=click.Path(exists=True), default=None)
def bench_validate(cases_path: str, permissions_path: Optional[str],
                   rules_path: Optional[str], qa_rules_path: Optional[str]) -> None:
    """Re-derive every label from the policies and flag mismatches."""
    cases = bench.load_cases(cases_path)
    table = load_permission_table(permissions_path)
    rules = load_rules(rules_path)
    qa = load_qa_rules(qa_rules_path)
    bad = []
    for case in cases:
        label, details = bench.label_case(case, table=table, rules=rules, qa_rules=qa)
        if label is not case.label or details != case.truth_details:
            bad.append(case.id)
    if bad:
        raise click.ClickException(f"{len(bad)} cases disagree with the oracle: {bad[:10]}")
    click.echo(f"all {len(cases)} cases agree with the labeling oracle")


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

@main.command("serve")
@click.option("--port", type=int, required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@_config_options
def cmd_serve(port: int, host: str, **kw) -> None:
    """Serve POST /v1/guard and GET /healthz until interrupted."""
    cfg = _build_config(kw)
    permissions, rules, qa = cfg.policies()
    backend = cfg.make_backend(permissions)
    stores = {kind: cfg.make_memory(kind, permissions, rules) for kind in RequestKind}

    def runner(case: bench.GuardCase) -> dict:
        executor = ExternalExecutor(cfg.external_cmd) if cfg.external_cmd else None
        try:
            result, rendered = _guard_case(
                case, cfg, permissions, rules, qa, backend, stores[case.kind], executor
            )
        finally:
            if executor is not None:
                executor.close()
        verdict = result.verdict.to_dict() if result.verdict else None
        return {
            "outcome": result.outcome,
            "verdict": verdict,
            "rendered": rendered,
            "failure_reason": result.failure_reason,
        }

    click.echo(f"serving on http://{host}:{port}")
    service.serve(runner, port=port, host=host)


if __name__ == "__main__":
    main()
