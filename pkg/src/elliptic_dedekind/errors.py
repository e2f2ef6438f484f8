"""Exception hierarchy shared by the library and the command line."""

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3


class EllipticDedekindError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = EXIT_USAGE


class InvalidFieldError(EllipticDedekindError):
    """Raised when D is not a positive squarefree integer."""

    pass


class ElementParseError(EllipticDedekindError):
    """Raised when an element or complex string cannot be parsed."""

    pass


class ZeroModulusError(EllipticDedekindError):
    """Raised when a modulus c = 0 is used."""

    pass


class InadmissibleEpsilonError(EllipticDedekindError):
    """Raised when eps does not clear the covering threshold of B."""

    def __init__(self, eps: float, threshold: float):
        super().__init__(
            f"eps={eps} must lie in ({threshold:.6f}, 1) for this admissible set"
        )
        self.eps = eps
        self.threshold = threshold


class NormalizationUndefinedError(EllipticDedekindError):
    """Raised when the normalized sum is requested while E_2(0) = 0 (D = 1, 3)."""

    pass


class NotInvertibleError(EllipticDedekindError):
    """Raised when a matrix determinant is not a unit of O_K."""

    pass


class PrecisionError(EllipticDedekindError):
    """Raised when a requested accuracy is tighter than the certified error."""

    pass


class InvariantViolationError(EllipticDedekindError):
    """Raised when a checked identity or inequality fails."""

    exit_code = EXIT_INVARIANT

    def __init__(self, message: str, name: str = "", index: object = None):
        super().__init__(message)
        self.name = name
        self.index = index


class PoleError(EllipticDedekindError):
    """Raised when the Weierstrass zeta function is evaluated at a lattice point."""

    exit_code = EXIT_INVARIANT


class BudgetExceededError(EllipticDedekindError):
    """Raised when N(c) exceeds the configured coset budget."""

    exit_code = EXIT_BUDGET

    def __init__(self, norm: int, budget: int):
        super().__init__(f"N(c)={norm} exceeds the coset budget {budget}")
        self.norm = norm
        self.budget = budget


class SearchFailureError(EllipticDedekindError):
    """Raised when a search (depth or translation u) runs out of candidates."""

    exit_code = EXIT_BUDGET

    def __init__(self, message: str, best: float, label: str = "largest |W(inf)| reached"):
        super().__init__(f"{message} ({label}: {best:.6g})")
        self.best = best


class RationalPointReached(EllipticDedekindError):
    """Signal: the step residual vanished, so the remainder lies in K."""

    exit_code = EXIT_INVARIANT

    def __init__(self, a: object, b: object, residual: float):
        super().__init__(f"rational point reached (residual {residual:.3e})")
        self.a = a
        self.b = b
        self.residual = residual
