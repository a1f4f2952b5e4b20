"""Exception hierarchy for the package.

Every error raised on purpose derives from :class:`BlindProfileError` so
callers (in particular the CLI) can map failures to exit codes without
catching bare ``Exception``.
"""


class BlindProfileError(Exception):
    """Base class for all errors raised by this package."""


# --- ring / encoding ---

class PartyMismatch(BlindProfileError):
    """Two shares from the same party were combined."""


class OutOfRange(BlindProfileError):
    """A value does not fit the fixed-point or signed range."""


class UnsupportedRing(BlindProfileError):
    """Ring bit length outside the supported session set {8, 16, 32, 64}."""


# --- correlated randomness ---

class TripleExhausted(BlindProfileError):
    """The randomness bundle has no triple left for the request."""


class BundleFormatError(BlindProfileError):
    """A bundle file failed to parse; no partial bundle is returned."""


class IoFailure(BlindProfileError):
    """Reading or writing dealt randomness failed."""


class DealerUnavailable(BlindProfileError):
    """The dealer was contacted after the session already started."""


# --- protocols / transport ---

class DimensionMismatch(BlindProfileError):
    """Operand dimensions disagree with each other or with a triple."""


class Overflow(BlindProfileError):
    """Static bound analysis rejects the requested computation."""


class ChannelClosed(BlindProfileError):
    """The peer connection was closed or timed out mid-protocol."""


class RoundDesync(BlindProfileError):
    """Peer round counter disagrees with ours at an opening."""


class HandshakeMismatch(BlindProfileError):
    """Session parameters disagree; aborted before any share flowed."""


class Oversize(BlindProfileError):
    """Frame payload exceeds the 16 MiB limit."""


class Truncated(BlindProfileError):
    """Frame buffer shorter than (or inconsistent with) its declared length."""


class UnknownType(BlindProfileError):
    """Frame carries an unknown type byte."""


class ProtocolError(BlindProfileError):
    """The peer reported an error frame or violated the protocol."""


# --- models / features ---

class ParseError(BlindProfileError):
    """A model, landmark, or lexicon file failed to parse."""


class ValidationError(BlindProfileError):
    """A parsed model is internally inconsistent."""


class LexiconMissing(BlindProfileError):
    """A required lexicon was not loaded."""


class BadDimension(BlindProfileError):
    """A landmark or feature vector has the wrong dimension."""


class EmptyText(BlindProfileError):
    """No usable text was supplied for the text pipeline."""
