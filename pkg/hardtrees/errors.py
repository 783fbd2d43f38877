class InstanceError(RuntimeError):
    """A Set-Cover instance document or a cover is malformed"""


class DomainError(RuntimeError):
    """A value lies outside the domain an operation is defined on"""


class GuardExceeded(RuntimeError):
    """An exhaustive oracle would exceed its configured guard"""


class UnknownClaim(RuntimeError):
    """A claim id that no oracle knows how to verify"""
