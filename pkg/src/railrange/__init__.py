"""railrange: deterministic railway IT/OT cyber range.

Simulates a segmented corporate + operational network for a light-rail
operator, runs scripted multi-stage attack scenarios against it (or purely
benign traffic), and packages the resulting forensic evidence: packet
captures, memory snapshots, disk manifests, service logs and a ground-truth
indicator catalog.
"""

__version__ = "0.1.0"

from .errors import (
    RailrangeError,
    SchemaError,
    ValidationError,
    MilestoneFailure,
)

__all__ = [
    "__version__",
    "RailrangeError",
    "SchemaError",
    "ValidationError",
    "MilestoneFailure",
]
