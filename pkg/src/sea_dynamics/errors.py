"""Exception hierarchy shared by every module of the package."""


class SEAError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SEAError, ValueError):
    pass


class NotHermitian(SEAError, ValueError):
    pass


class NotUnitTrace(SEAError, ValueError):
    pass


class NegativeEigenvalue(SEAError, ValueError):
    pass


class ZeroSpread(SEAError, ValueError):
    """A variance needed as a denominator is below the zero threshold."""


class SingularGram(SEAError, ArithmeticError):
    """The generator vectors sqrt(rho)*dH, sqrt(rho)*dN_i are nearly dependent."""


class DegenerateState(SEAError, ArithmeticError):
    pass


class ZeroEnergySpread(SEAError, ArithmeticError):
    pass


class InfiniteTheta(SEAError, ArithmeticError):
    pass


class StepFailure(SEAError, RuntimeError):
    pass


class InvariantBreach(SEAError, RuntimeError):
    """A physical invariant was violated beyond tolerance (indicates a bug)."""


class OutOfRange(SEAError, ValueError):
    pass


class UnknownScenario(SEAError, ValueError):
    pass


class InvalidPolicy(SEAError, ValueError):
    pass
