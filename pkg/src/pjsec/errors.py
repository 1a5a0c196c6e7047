"""Exception hierarchy shared by the protocol, overlay and simulator layers."""


class PJSecError(Exception):
    """Base class for every error raised by this package."""


class EncodingError(PJSecError, ValueError):
    """A value cannot be framed or a byte string cannot be parsed."""


class InsufficientSamples(PJSecError, ValueError):
    pass


class ProtocolError(PJSecError):
    """A protocol participant rejected a message.

    ``party`` names the role that raised it ("N", "B" or "V") when known.
    """

    def __init__(self, message: str = "", party: str | None = None):
        super().__init__(message)
        self.party = party

    @property
    def kind(self) -> str:
        return type(self).__name__


class InvalidRequest(ProtocolError):
    pass


class BadSignature(ProtocolError):
    pass


class IdMismatch(ProtocolError):
    pass


class UnknownSession(ProtocolError):
    pass


class UntrustedForwarder(ProtocolError):
    pass


class DuplicateIdentity(ProtocolError):
    pass


class UnknownIdentity(ProtocolError):
    pass


class VicinityFull(ProtocolError):
    pass


class OverlaySaturated(ProtocolError):
    pass


# Column order used by every CSV report that breaks rejections down by class.
REJECTION_CLASSES = (
    "BadSignature",
    "IdMismatch",
    "DuplicateIdentity",
    "UntrustedForwarder",
    "VicinityFull",
    "OverlaySaturated",
    "InvalidRequest",
    "UnknownSession",
)
