"""Scenario documents, built-in scenarios, and the run orchestrator."""

from .model import (
    ActivationSpec,
    DeviceSpec,
    EvidenceSpec,
    FileSpec,
    HostSpec,
    MilestoneSpec,
    OutcomeSpec,
    PcapSpec,
    ProfileSpec,
    RuleSpec,
    ScenarioSpec,
    SegmentSpec,
    ServiceSpec,
    TimelineEntrySpec,
    builtin_names,
    load_file,
    load_spec,
    resolve_content,
    to_document,
)
from .builtins import builtin_as1, builtin_as2, builtin_benign, get_builtin
from .orchestrator import MilestoneResult, RunReport, ScenarioRuntime, execute

__all__ = [
    "ActivationSpec",
    "DeviceSpec",
    "EvidenceSpec",
    "FileSpec",
    "HostSpec",
    "MilestoneSpec",
    "MilestoneResult",
    "OutcomeSpec",
    "PcapSpec",
    "ProfileSpec",
    "RuleSpec",
    "RunReport",
    "ScenarioRuntime",
    "ScenarioSpec",
    "SegmentSpec",
    "ServiceSpec",
    "TimelineEntrySpec",
    "builtin_as1",
    "builtin_as2",
    "builtin_benign",
    "builtin_names",
    "execute",
    "get_builtin",
    "load_file",
    "load_spec",
    "resolve_content",
    "to_document",
]
