"""Guardrail DSL: grammar, validator, interpreter, and the guard pipeline."""
from .lang import GdslParseError, parse
from .pipeline import (
    ExternalExecError,
    ExternalExecutor,
    ExternalUnavailableError,
    GuardConfig,
    GuardError,
    GuardResult,
    GuardrailProgram,
    build_bindings,
    dispatch_external,
    extract_program_source,
    guard,
)
from .run import (
    ArityError,
    GdslRuntimeError,
    GdslValidationError,
    UnknownFunctionError,
    UnreachableVerdictError,
    execute,
    validate,
)

__all__ = [
    "ArityError",
    "ExternalExecError",
    "ExternalExecutor",
    "ExternalUnavailableError",
    "GdslParseError",
    "GdslRuntimeError",
    "GdslValidationError",
    "GuardConfig",
    "GuardError",
    "GuardResult",
    "GuardrailProgram",
    "UnknownFunctionError",
    "UnreachableVerdictError",
    "build_bindings",
    "dispatch_external",
    "execute",
    "extract_program_source",
    "guard",
    "parse",
    "validate",
]
