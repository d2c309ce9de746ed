"""Exception hierarchy shared by all modules."""


class MMError(Exception):
    """Base class for every error raised by :mod:`mmstruct`."""


# rho functions / calibration
class NonIntegrable(MMError, ArithmeticError):
    pass


class NoBracket(MMError, ValueError):
    pass


class NotBounded(MMError, ValueError):
    pass


# covariance structures
class InvalidParams(MMError, ValueError):
    pass


class NotPositiveDefinite(MMError, ValueError):
    pass


class DegenerateInput(MMError, ValueError):
    pass


# data model
class ParseError(MMError, ValueError):
    pass


class Unbalanced(MMError, ValueError):
    pass


class SingularCovariance(MMError, ArithmeticError):
    pass


class RankDeficient(MMError, ValueError):
    pass


class RankDeficientWarning(UserWarning):
    pass


# initial estimator
class DegenerateScale(MMError, ArithmeticError):
    pass


class AllCandidatesSingular(MMError, ArithmeticError):
    pass


class DegenerateScaleWarning(UserWarning):
    pass


# mm estimator
class PathologicalSample(MMError, ValueError):
    pass


class NotConverged(MMError, ArithmeticError):
    """IRLS stopped at ``max_iter`` without meeting the score tolerance.

    The partially converged fit is kept on ``self.fit``.
    """

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class SingularWeightedDesign(NotConverged):
    """All IRLS weights vanished; the previous iterate was kept."""


# diagnostics
class SingularInfo(MMError, ArithmeticError):
    pass


class SingularD1(MMError, ArithmeticError):
    pass
