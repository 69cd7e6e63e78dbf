"""Exception and warning types raised by :mod:`aclasso`."""


class ACLError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVarianceColumn(ACLError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} has zero variance and cannot be standardized")


class DimensionMismatch(ACLError, ValueError):
    pass


class NonConvergence(ACLError, RuntimeError):
    """Raised when an iterative solver hits ``max_iter``.

    The best iterate reached so far is kept on ``best`` so callers can
    decide whether it is good enough.
    """

    def __init__(self, max_iter, best=None, message=None):
        self.max_iter = max_iter
        self.best = best
        super().__init__(message or f"solver did not converge within {max_iter} sweeps")


class EmptyPath(ACLError, ValueError):
    pass


class RankDeficientGroup(UserWarning):
    """Warning emitted when a group's Gram block had to be reduced in rank."""


class InvalidCount(ACLError, ValueError):
    pass


class DegenerateRepresentative(ACLError, ValueError):
    def __init__(self, group):
        self.group = group
        super().__init__(
            f"cluster representative of group {group} is numerically zero "
            "(members cancel each other out)"
        )


class EmptyStage1(ACLError, RuntimeError):
    def __init__(self, lam=None):
        self.lam = lam
        msg = "stage-1 selection is empty"
        if lam is not None:
            msg += f" at lambda={lam:.6g}"
        super().__init__(msg + "; lower the stage-1 lambda")


class SingularSigma11(ACLError, ValueError):
    pass


class SingularGroupGram(ACLError, ValueError):
    pass


class IncompatibleConfig(ACLError, ValueError):
    pass


class NotPSD(ACLError, ValueError):
    pass


class TooFewColumns(ACLError, ValueError):
    pass


class EmptyTruth(ACLError, ValueError):
    pass
