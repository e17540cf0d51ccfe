"""Exception hierarchy.

Every error the library raises derives from :class:`HarnackLabError`, which
lets the CLI map failures onto exit codes without catching bare exceptions.
"""


class HarnackLabError(Exception):
    pass


class DimensionMismatch(HarnackLabError, ValueError):
    pass


class NonPositiveLambda(HarnackLabError, ValueError):
    pass


class InvalidScenario(HarnackLabError, ValueError):
    """Scenario constants or components violate a structural invariant."""


class InvalidExponents(InvalidScenario):
    pass


class SingularSigma(InvalidScenario):
    pass


class DomainEscape(HarnackLabError, RuntimeError):
    """A state left closure(D(A)); signals a broken resolvent."""


class GridMismatch(HarnackLabError, ValueError):
    pass


class DegenerateDelta(HarnackLabError, ValueError):
    pass


class CoincidentStart(HarnackLabError, ValueError):
    pass


class StepTooCoarse(HarnackLabError, ValueError):
    pass


class NonConstantZeta(HarnackLabError, ValueError):
    pass


class AlphaOutOfRange(HarnackLabError, ValueError):
    pass


class ExponentDegenerate(HarnackLabError, ValueError):
    pass


class FunctionBelowOne(HarnackLabError, ValueError):
    pass


class FunctionUnbounded(HarnackLabError, ValueError):
    pass


class CenterOutsideDomain(HarnackLabError, ValueError):
    pass


class InvalidWindow(HarnackLabError, ValueError):
    pass


class ConfigError(HarnackLabError, ValueError):
    pass


class OutsideDomain(HarnackLabError, ValueError):
    """An initial state lies outside closure(D(A))."""
