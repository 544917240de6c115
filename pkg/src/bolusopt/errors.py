"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class BolusOptError(Exception):
    exit_code = 3


class ValidationError(BolusOptError, ValueError):
    exit_code = 2


class GridTooCoarse(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class NumericalError(BolusOptError):
    exit_code = 3


class NonFiniteState(NumericalError):
    pass


class AmbiguousShape(NumericalError):
    pass


class NotConverged(NumericalError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class Infeasible(BolusOptError):
    exit_code = 4

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class NoIncidentInput(Infeasible):
    pass


class EmptyFeasibleSet(Infeasible):
    pass
