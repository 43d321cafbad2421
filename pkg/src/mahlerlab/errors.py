"""Exception types raised across the package."""


class MahlerLabError(Exception):
    """Base class for all errors raised by mahlerlab."""


class OriginNotInterior(MahlerLabError):
    pass


class Unbounded(MahlerLabError):
    pass


class Degenerate(MahlerLabError):
    pass


class NotProper(MahlerLabError):
    pass


class ToleranceNotReached(MahlerLabError):
    pass


class DimensionMismatch(MahlerLabError):
    pass


class SingularCovariance(MahlerLabError):
    pass


class OutsideDualInterior(MahlerLabError):
    """A point is not in the interior of the dual cone (some ray product >= 0)."""


class NotInteriorPrimal(MahlerLabError):
    pass


class NoConvergence(MahlerLabError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PointNotInterior(MahlerLabError):
    pass


class BarycenterNotComputable(MahlerLabError):
    pass


class EmptyIntersection(MahlerLabError):
    pass


class OutsideCone(MahlerLabError):
    pass


class CertificateFailed(MahlerLabError):
    def __init__(self, clause, message=""):
        super().__init__(f"certificate clause {clause!r} failed: {message}")
        self.clause = clause


class FixtureMissing(MahlerLabError):
    pass


class AcceptanceTooLow(MahlerLabError):
    pass
