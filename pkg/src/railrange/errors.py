"""Exception types shared across the simulator.

Every error raised on a validated path derives from RailrangeError so the
CLI can map failures onto its exit codes without blanket except clauses.
"""

from __future__ import annotations


class RailrangeError(Exception):
    """Base class for all errors raised by railrange."""


# --- scenario loading / validation -------------------------------------------

class SchemaError(RailrangeError):
    """A scenario document is structurally invalid (wrong shape or types)."""


class ValidationError(RailrangeError):
    """A scenario document is well-formed but semantically inconsistent.

    Examples: a timeline entry references an unknown host, a register write
    would overflow its bank, an action's precondition is satisfied by no
    earlier step.
    """


class DanglingReference(ValidationError):
    """A scenario element references a segment/host/step that does not exist."""


class TimelineOverflow(ValidationError):
    """A scheduled entry lies outside the scenario's duration."""


class MilestoneFailure(RailrangeError):
    """A scripted attack step did not reach its observable milestone in time."""

    def __init__(self, step_label: str, detail: str = ""):
        self.step_label = step_label
        self.detail = detail
        msg = step_label if not detail else f"{step_label}: {detail}"
        super().__init__(msg)


# --- network fabric -----------------------------------------------------------

class FabricError(RailrangeError):
    """Base class for network-fabric errors."""


class UnknownHost(FabricError):
    """A frame references an address no attached host owns."""


class PayloadTooLarge(FabricError):
    """Frame payload exceeds the fabric MTU budget."""


# --- protocol codecs ----------------------------------------------------------

class ProtocolError(RailrangeError):
    """Base class for wire-format encode/decode errors."""


class ModbusError(ProtocolError):
    """Base class for Modbus codec errors."""


class Truncated(ModbusError):
    """Byte stream ends before the structure it announces is complete."""


class BadProtocolId(ModbusError):
    """MBAP protocol identifier is not zero."""


class UnknownFunction(ModbusError):
    """Function code outside the supported set."""


class LengthMismatch(ModbusError):
    """MBAP length field disagrees with the actual byte count."""


class InvalidPdu(ModbusError):
    """PDU fields violate the protocol's range rules."""


class S7Error(ProtocolError):
    """Base class for S7-style codec errors."""


class S7BadMagic(S7Error):
    """Frame does not start with the S7-style magic bytes."""


class S7Truncated(S7Error):
    """S7-style frame shorter or longer than its own structure announces."""


class C2CodecError(ProtocolError):
    """Command-and-control envelope could not be parsed."""


class AuthFailure(ProtocolError):
    """Sealed-channel record failed authentication (wrong key or corrupt)."""


# --- actors / runtime ---------------------------------------------------------

class C2Unreachable(RailrangeError):
    """An implant could not deliver a frame to its command server."""


class PreconditionNotMet(RailrangeError):
    """A scripted action's runtime precondition was unsatisfied."""


# --- evidence -----------------------------------------------------------------

class EvidenceError(RailrangeError):
    """Evidence packaging or verification failed."""


class LocatorUnresolvable(EvidenceError):
    """A catalog locator does not resolve inside the packaged dataset."""


class IncompleteRun(EvidenceError):
    """Packaging was requested before the run produced its artifacts."""


class ManifestMismatch(EvidenceError):
    """A dataset file does not match its manifest hash or is unlisted."""
