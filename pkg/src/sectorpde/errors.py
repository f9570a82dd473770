"""Exception hierarchy shared by all sectorpde modules."""


class SectorPDEError(Exception):
    """Base class for errors raised by sectorpde."""


class InvalidSpecError(SectorPDEError, ValueError):
    pass


class AssemblyError(SectorPDEError):
    def __init__(self, message, triangle=None):
        super().__init__(message)
        self.triangle = triangle


class EvaluationError(SectorPDEError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class DomainError(SectorPDEError, ValueError):
    pass


class SingularEvaluationError(DomainError):
    pass


class MapSingularityError(DomainError):
    pass


class UnsupportedError(SectorPDEError):
    pass


class FitError(SectorPDEError):
    pass


class OracleError(SectorPDEError):
    pass


class PreconditionError(SectorPDEError):
    pass


class InternalError(SectorPDEError):
    pass


class DivergedError(SectorPDEError):
    """Nonlinear solve did not converge; ``last`` holds the final iterate."""

    def __init__(self, message, last=None, report=None):
        super().__init__(message)
        self.last = last
        self.report = report
