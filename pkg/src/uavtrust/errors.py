"""Exception hierarchy shared across the package."""


class UavTrustError(Exception):
    """Base class for all package errors."""


class DomainError(UavTrustError, ValueError):
    """An argument lies outside the domain of a formula."""


class SafetyViolation(UavTrustError):
    """Two nodes are closer than the minimum safe distance."""

    def __init__(self, pairs):
        self.pairs = list(pairs)
        super().__init__(f"{len(self.pairs)} node pair(s) closer than d_min: {self.pairs[:5]}")


class ResampleExhausted(UavTrustError):
    """Mobility could not satisfy the safe-distance constraint."""


class QueueFull(UavTrustError):
    pass


class InvariantBreach(UavTrustError):
    """A bookkeeping identity failed; indicates a simulator bug."""


class NoRoute(UavTrustError):
    pass


class NotDelivered(UavTrustError):
    pass


class Unreachable(UavTrustError):
    pass


class TooFewNodes(UavTrustError):
    pass


class InvalidAuth(UavTrustError):
    pass


class NoConsensusReachable(UavTrustError):
    pass


class DigestMismatch(UavTrustError):
    pass


class StaleSeq(UavTrustError):
    pass


class NoCandidate(UavTrustError):
    pass


class Isolated(UavTrustError):
    pass


class BufferTooSmall(UavTrustError):
    pass


class ConfigError(UavTrustError):
    """Base for configuration problems."""


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
