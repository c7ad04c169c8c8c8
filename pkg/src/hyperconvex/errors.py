"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point is outside the region where a query is defined."""


class ParameterError(ValueError):
    """A numeric parameter violates a stated precondition."""


class UnsupportedKindError(ValueError):
    """An operation was requested for a domain kind that does not support it."""


class HypothesisError(ValueError):
    """The barrier separation hypothesis fails at some shell depth.

    Carries the two extrema that were compared so callers can report them.
    """

    def __init__(self, t, inf_shell, sup_band, message=None):
        self.t = t
        self.inf_shell = inf_shell
        self.sup_band = sup_band
        if message is None:
            message = (
                f"separation hypothesis fails at t={t:.6g}: "
                f"inf over shell {inf_shell:.6g} <= sup over band {sup_band:.6g}"
            )
        super().__init__(message)
