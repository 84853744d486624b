"""The codegen-execute-debug loop and the external-interpreter dispatch."""
from __future__ import annotations

import json
import re
import select
import shlex
import subprocess
import threading
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence, Union

from .. import bridge, planner
from ..core import ErrorClass, ExecStats, RequestKind, Verdict
from ..memory import MemoryStore, RetrievalConfig, RetrievalOrder
from ..toolbox import PermissionTable, QaRuleSet, Rule, ToolboxRegistry
from . import lang, run


class GuardError(Exception):
    pass


class ExternalExecError(Exception):
    def __init__(self, message: str, error_class: ErrorClass):
        super().__init__(message)
        self.error_class = error_class


class ExternalUnavailableError(ExternalExecError):
    def __init__(self, message: str):
        super().__init__(message, ErrorClass.PROTOCOL)


@dataclass(frozen=True)
class GuardrailProgram:
    source: str
    ast: Optional[tuple] = None
    target_engine: str = "internal_dsl"


BINDING_NAMES = (
    "kind", "role", "query", "required_resources", "permissions",
    "profile", "task", "rules", "question", "choices", "answer",
    "final_answer",
)


def build_bindings(
    structured: Mapping[str, Any],
    kind: RequestKind,
    permissions: Optional[PermissionTable] = None,
    rules: Optional[Sequence[Rule]] = None,
) -> dict[str, Any]:
    """Expose case facts and policies to programs as the fixed named values."""
    b: dict[str, Any] = {"kind": kind.value}
    if kind is RequestKind.ACCESS_CONTROL:
        for name in ("identity", "query", "required_resources", "final_answer"):
            if name not in structured:
                raise GuardError(f"access-control case is missing structured field {name!r}")
        b["role"] = structured["identity"]
        b["query"] = structured["query"]
        b["required_resources"] = dict(structured["required_resources"])
        b["final_answer"] = structured.get("final_answer", "")
        if permissions is None:
            raise GuardError("access-control execution requires a permission table")
        b["permissions"] = permissions.to_dict()
    elif kind is RequestKind.SAFETY_RULES:
        for name in ("profile", "task", "proposed_action"):
            if name not in structured:
                raise GuardError(f"safety-rules case is missing structured field {name!r}")
        b["profile"] = dict(structured["profile"])
        b["task"] = structured["task"]
        b["final_answer"] = structured.get("proposed_action", "")
        if rules is None:
            raise GuardError("safety-rules execution requires a ruleset")
        b["rules"] = [r.to_dict() for r in rules]
    else:
        for name in ("question", "choices", "answer"):
            if name not in structured:
                raise GuardError(f"qa-rules case is missing structured field {name!r}")
        b["question"] = structured["question"]
        b["choices"] = [list(c) for c in structured["choices"]]
        b["answer"] = structured["answer"]
    return b


_FENCE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)


def extract_program_source(response: str) -> str:
    """Strip a markdown code fence from an LLM response, if present."""
    m = _FENCE.search(response)
    return (m.group(1) if m else response).strip()


class ExternalExecutor:
    """Client side of the external-interpreter protocol: a worker child
    process speaking line-delimited JSON over stdin/stdout."""

    def __init__(self, cmd: Union[str, Sequence[str]], timeout_s: float = 10.0):
        self.cmd = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self.timeout_s = timeout_s
        self._proc: Optional[subprocess.Popen] = None
        self._next_id = 0
        self._lock = threading.Lock()

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.cmd,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.DEVNULL,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise ExternalUnavailableError(
                    f"cannot launch external interpreter {self.cmd!r}: {exc}"
                ) from exc
        return self._proc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()
        self._proc = None

    def _read_line(self, proc: subprocess.Popen, deadline_s: float) -> str:
        ready, _, _ = select.select([proc.stdout], [], [], deadline_s)
        if not ready:
            self.close()
            raise ExternalExecError(
                f"external interpreter timed out after {deadline_s:.1f}s",
                ErrorClass.PROTOCOL,
            )
        line = proc.stdout.readline()
        if not line:
            self.close()
            raise ExternalUnavailableError("external interpreter exited unexpectedly")
        return line

    def execute(self, source: str, bindings: Mapping[str, Any]) -> Verdict:
        with self._lock:
            proc = self._ensure_started()
            self._next_id += 1
            request = {
                "id": self._next_id,
                "source": source,
                "bindings": dict(bindings),
                "timeout_ms": int(self.timeout_s * 1000),
            }
            try:
                proc.stdin.write(json.dumps(request) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                self.close()
                raise ExternalUnavailableError(f"external interpreter pipe broken: {exc}") from exc
            line = self._read_line(proc, self.timeout_s)
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ExternalExecError(
                f"malformed response line from external interpreter: {exc}",
                ErrorClass.PROTOCOL,
            ) from exc
        if response.get("id") != request["id"]:
            raise ExternalExecError(
                f"response id {response.get('id')} does not match request id {request['id']}",
                ErrorClass.PROTOCOL,
            )
        if response.get("status") == "ok":
            try:
                return Verdict.from_dict(response["verdict"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ExternalExecError(
                    f"malformed verdict from external interpreter: {exc}",
                    ErrorClass.PROTOCOL,
                ) from exc
        message = response.get("error_message", "unknown external error")
        return self._raise_error(message)

    @staticmethod
    def _raise_error(message: str) -> Verdict:
        low = message.lower()
        if "timeout" in low:
            klass = ErrorClass.PROTOCOL
        elif "syntaxerror" in low:
            klass = ErrorClass.PARSE
        elif "nameerror" in low:
            klass = ErrorClass.UNKNOWN_FUNCTION
        elif "typeerror" in low:
            klass = ErrorClass.TYPE
        else:
            klass = ErrorClass.RUNTIME
        raise ExternalExecError(message, klass)


def dispatch_external(
    program: GuardrailProgram,
    bindings: Mapping[str, Any],
    external_backend: ExternalExecutor,
) -> Verdict:
    """Forward source and bindings over the external-interpreter protocol."""
    if program.target_engine != "external_interpreter":
        raise GuardError("dispatch_external requires target_engine=external_interpreter")
    return external_backend.execute(program.source, bindings)


@dataclass(frozen=True)
class GuardConfig:
    k: int = 1
    order: RetrievalOrder = RetrievalOrder.MOST_SIMILAR
    engine: str = "dsl"  # "dsl" | "external"
    max_debug_iters: int = 3
    permissions: Optional[PermissionTable] = None
    rules: Optional[tuple[Rule, ...]] = None
    qa_rules: Optional[QaRuleSet] = None
    external_executor: Optional[ExternalExecutor] = None

    def __post_init__(self) -> None:
        if self.engine not in ("dsl", "external"):
            raise ValueError(f"unknown engine {self.engine!r}")


@dataclass(frozen=True)
class GuardResult:
    """Outcome of one full guard run; ``failure`` is a third outcome
    distinct from grant/deny (never a silent grant)."""

    outcome: str  # "granted" | "denied" | "failure"
    verdict: Optional[Verdict]
    plan: planner.ActionPlan
    program: GuardrailProgram
    stats: ExecStats
    failure_reason: Optional[str] = None


def _run_once(
    source: str,
    engine: str,
    registry: ToolboxRegistry,
    bindings: Mapping[str, Any],
    executor: Optional[ExternalExecutor],
) -> tuple[Verdict, GuardrailProgram]:
    if engine == "external":
        if executor is None:
            raise ExternalUnavailableError("no external interpreter configured")
        program = GuardrailProgram(source=source, target_engine="external_interpreter")
        return dispatch_external(program, bindings, executor), program
    ast = lang.parse(source)
    run.validate(ast, registry)
    program = GuardrailProgram(source=source, ast=ast, target_engine="internal_dsl")
    return run.execute(ast, registry, bindings), program


def _classify(exc: Exception) -> ErrorClass:
    if isinstance(exc, lang.GdslParseError):
        return ErrorClass.PARSE
    if isinstance(exc, (run.GdslValidationError, run.GdslRuntimeError, ExternalExecError)):
        return exc.error_class
    return ErrorClass.RUNTIME


def guard(
    io,
    req,
    spec,
    memory: MemoryStore,
    registry: ToolboxRegistry,
    backend: bridge.LlmBackend,
    cfg: GuardConfig,
) -> GuardResult:
    """Full pipeline: plan, generate code, execute, debug up to the cap."""
    plan_demos = memory.retrieve(
        io.input_text, io.output_log,
        RetrievalConfig(k=cfg.k, order=cfg.order, include_program=False),
    )
    plan = planner.plan(io, spec, req, plan_demos, backend)

    code_demos = memory.retrieve(
        io.input_text, io.output_log,
        RetrievalConfig(k=cfg.k, order=cfg.order, include_program=True),
    )
    code_prompt = bridge.build_code_prompt(
        bridge.codegen_instructions(registry), code_demos, io, plan
    )
    source = extract_program_source(backend.complete(code_prompt))

    if io.structured is None:
        raise GuardError("guard execution requires structured case facts for bindings")
    bindings = build_bindings(io.structured, req.kind, cfg.permissions, cfg.rules)

    iters = 0
    last_error: Optional[Exception] = None
    while True:
        try:
            verdict, program = _run_once(source, cfg.engine, registry, bindings, cfg.external_executor)
            stats = ExecStats(
                executable_before_debug=(iters == 0),
                debug_iterations_used=iters,
                executable_after_debug=True,
            )
            verdict = replace(verdict, exec_stats=stats)
            outcome = "denied" if verdict.label.value == 1 else "granted"
            return GuardResult(
                outcome=outcome, verdict=verdict, plan=plan, program=program, stats=stats
            )
        except (lang.GdslParseError, run.GdslValidationError, run.GdslRuntimeError,
                ExternalExecError) as exc:
            last_error = exc
            if iters >= cfg.max_debug_iters:
                break
            iters += 1
            debug_prompt = bridge.build_debug_prompt(source, str(exc))
            source = extract_program_source(backend.complete(debug_prompt))

    stats = ExecStats(
        executable_before_debug=False,
        debug_iterations_used=iters,
        executable_after_debug=False,
        error_class=_classify(last_error),
    )
    return GuardResult(
        outcome="failure",
        verdict=None,
        plan=plan,
        program=GuardrailProgram(
            source=source,
            target_engine="external_interpreter" if cfg.engine == "external" else "internal_dsl",
        ),
        stats=stats,
        failure_reason=str(last_error),
    )
