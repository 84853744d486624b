"""Guardrail engine for LLM agents.

Given a target agent's specification, a set of guard requests, and one
recorded interaction, the engine plans a check, generates a small guardrail
program restricted to a registered toolbox, executes it, and returns a
grant/deny verdict with detailed reasons. Batch evaluation, benchmark
tooling, and an HTTP service sit on top.
"""
from .core import (
    AgentIO,
    DetailSet,
    ErrorClass,
    ExecStats,
    GuardRequest,
    Label,
    RequestKind,
    ResourceSet,
    RiskLevel,
    TargetAgentSpec,
    UserProfile,
    Verdict,
    predicted_label,
    render_verdict,
)
from .gdsl.pipeline import GuardConfig, GuardResult, guard
from .memory import MemoryStore, RetrievalConfig, RetrievalOrder
from .toolbox import (
    PermissionTable,
    QaRuleSet,
    Rule,
    build_default_registry,
    load_permission_table,
    load_qa_rules,
    load_rules,
)

__version__ = "0.1.0"

__all__ = [
    "AgentIO", "DetailSet", "ErrorClass", "ExecStats", "GuardRequest",
    "Label", "RequestKind", "ResourceSet", "RiskLevel", "TargetAgentSpec",
    "UserProfile", "Verdict", "predicted_label", "render_verdict",
    "GuardConfig", "GuardResult", "guard",
    "MemoryStore", "RetrievalConfig", "RetrievalOrder",
    "PermissionTable", "QaRuleSet", "Rule", "build_default_registry",
    "load_permission_table", "load_qa_rules", "load_rules",
    "__version__",
]
