"""Exception classes raised by the ocms package."""


class OcmsError(Exception):
    """Base class for all computation errors in this package."""


class TiltOutOfRange(OcmsError):
    pass


class NonFiniteRecurrence(OcmsError):
    pass


class ZeroFunction(OcmsError):
    pass


class GridMismatch(OcmsError):
    pass


class NoMinimaFound(OcmsError):
    pass


class RangeTooShort(OcmsError):
    pass


class DepthOutOfGrid(OcmsError):
    pass


class DidNotConverge(OcmsError):
    """BPDN iteration hit ``max_iter``; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NoFeasiblePoint(OcmsError):
    pass


class NoPropagatingModes(OcmsError):
    pass


class RootBracketingFailed(OcmsError):
    pass


class EmptyTrialSet(OcmsError):
    pass


class ConfigError(OcmsError):
    pass


class IoFailure(OcmsError):
    """A file could not be read, parsed or written; the message names the path."""
