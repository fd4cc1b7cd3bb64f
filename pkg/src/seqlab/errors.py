"""Exception types shared across the package."""


class SeqlabError(Exception):
    """Base class for all package errors."""


class InvalidSpec(SeqlabError):
    pass


class DimensionMismatch(SeqlabError):
    pass


class NonConvergence(SeqlabError):
    def __init__(self, msg, iterations=None, residual=None):
        super().__init__(f"{msg} (iterations={iterations}, residual={residual})")
        self.iterations = iterations
        self.residual = residual


class EmptyIntersection(SeqlabError):
    pass


class UnsupportedMode(SeqlabError):
    pass


class UnsupportedEstimator(SeqlabError):
    pass


class InvalidPrecision(SeqlabError):
    pass


class OrderViolation(SeqlabError):
    pass


class RegimeViolation(SeqlabError):
    pass


class InconclusiveRegime(SeqlabError):
    def __init__(self, msg, eps_bar=None, sigma=None):
        super().__init__(msg)
        self.eps_bar = eps_bar
        self.sigma = sigma


class BudgetExhausted(SeqlabError):
    def __init__(self, msg, level=None):
        super().__init__(msg)
        self.level = level


class Unbounded(SeqlabError):
    pass
