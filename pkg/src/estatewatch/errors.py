"""Exception hierarchy shared across the package."""


class EstatewatchError(Exception):
    """Base class for all package errors."""


class ValidationError(EstatewatchError):
    """Input data violates a stated precondition or value range."""


class EmptyCorpusError(EstatewatchError):
    """An input source produced zero parseable posts."""


class DegenerateDataError(EstatewatchError):
    """Training data does not contain at least two classes."""


class DivergenceError(EstatewatchError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


class BackendUnavailableError(EstatewatchError):
    """A remote classifier backend timed out or answered out of protocol."""

    def __init__(self, endpoint: str, reason: str = ""):
        detail = f"backend unavailable: {endpoint}"
        if reason:
            detail += f" ({reason})"
        super().__init__(detail)
        self.endpoint = endpoint


class SchemaError(EstatewatchError):
    """A structured input file violates its declared schema."""


class StoreLockedError(EstatewatchError):
    """Another process holds the exclusive appender lock."""


class DurableWriteError(EstatewatchError):
    """A store append could not be made durable; the store is still
    consistent at the last acknowledged record."""

    def __init__(self, last_durable_seq: int, cause: Exception):
        super().__init__(
            f"durable write failed after seq {last_durable_seq}: {cause}"
        )
        self.last_durable_seq = last_durable_seq


class CorruptionError(EstatewatchError):
    """A non-trailing log record failed its checksum."""

    def __init__(self, seq: int):
        super().__init__(f"checksum failure at log record seq {seq}")
        self.seq = seq
