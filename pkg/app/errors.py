from typing import Optional


class EngineError(Exception):
    pass


class MalformedSpaceError(EngineError):
    pass


class ShapeMismatchError(EngineError):
    pass


class InvalidAddressError(EngineError):
    pass


class NotClosedError(EngineError):
    pass


class ContainmentError(EngineError):
    pass


class EmptySubspaceError(EngineError):
    pass


class PreconditionError(EngineError):
    """An operation's precondition failed; `node` is the offending address if one exists."""

    def __init__(self, message: str, node: Optional[str] = None):
        super().__init__(message if node is None else f"{message} (at {node})")
        self.node = node


class SoundnessFault(EngineError):
    """Internal tripwire: a result contradicts a proven property."""


class SchemaError(EngineError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.message = message
        self.path = path


class CertificateRejected(EngineError):
    def __init__(self, path: str, kind: str, condition: str):
        super().__init__(f"{path} [{kind}]: {condition}")
        self.path = path
        self.kind = kind
        self.condition = condition


class WitnessFailure(EngineError):
    def __init__(self, n: int, detail: str):
        super().__init__(f"rank {n}: {detail}")
        self.n = n
        self.detail = detail


class UsageError(EngineError):
    """Bad command line: unknown verb, missing or malformed flag."""
