"""Exception types raised by the engine."""


class HermGeomError(Exception):
    """Base class for all errors raised by hermgeom."""


class DomainError(HermGeomError, ValueError):
    """A chart point lies outside the declared domain of a field."""


class NotPositiveDefiniteError(HermGeomError, ValueError):
    """A metric evaluated to a matrix that is not Hermitian positive definite."""


class DerivativeError(HermGeomError, ValueError):
    """Derivative evaluation is impossible with the requested scheme or step."""


class NumericalError(HermGeomError, ArithmeticError):
    """A quantity that must be real (or finite) came out otherwise."""


class InconsistentEvaluatorError(HermGeomError, ValueError):
    """A quartic-form evaluator is not the quartic form of a Kähler-type tensor."""


class GridTooCoarseError(HermGeomError):
    """Doubling the quadrature grid changed an integral by more than allowed."""


class SolverError(HermGeomError):
    """An iterative solve stagnated or produced an inadmissible answer."""


class CertificateError(HermGeomError):
    """A post-solve certificate (positivity, constancy) was violated."""


class ConfigError(HermGeomError, ValueError):
    """Invalid run configuration."""
