from src.conf import messages


class PolyShiftError(Exception):
    """
    Base class for domain errors raised by the services.
    """
    detail: str = "Polynomial system error"

    def __init__(self, detail: str | None = None):
        self.detail = detail or self.detail
        super().__init__(self.detail)


class DimensionMismatch(PolyShiftError, ValueError):
    detail = messages.DIMENSION_MISMATCH


class IndexOutOfRange(PolyShiftError, IndexError):
    detail = messages.INDEX_OUT_OF_RANGE


class DegreeMismatch(PolyShiftError, ValueError):
    detail = messages.DEGREE_MISMATCH


class NotInIdeal(PolyShiftError):
    """
    Raised when some degree-k monomial has no cofactor representation.

    :param monomial: Exponent vector of the worst monomial.
    :type monomial: tuple[int, ...]
    :param residual: Its coefficient sup-norm residual.
    :type residual: float
    """
    detail = messages.NOT_IN_IDEAL

    def __init__(self, monomial: tuple[int, ...], residual: float):
        self.monomial = monomial
        self.residual = residual
        super().__init__(f"{messages.NOT_IN_IDEAL}: x^{monomial} (residual {residual:.3e})")


class BoundError(PolyShiftError, ValueError):
    detail = messages.NON_POSITIVE_FACTOR


class InvalidPerturbation(PolyShiftError, ValueError):
    detail = messages.PHI_OUTSIDE_WINDOW


class SplitFailed(PolyShiftError):
    detail = messages.SPLIT_FAILED


class RankDeficient(PolyShiftError):
    detail = messages.RANK_DEFICIENT


class SystemFileError(PolyShiftError):
    """
    Raised for unreadable or schema-violating system files.

    :param errors: One ``"location: message"`` string per problem.
    :type errors: list[str]
    """
    detail = "Invalid system file"

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


class VerificationFailed(PolyShiftError):
    """
    Raised when a computed report contradicts an expected property.

    :param payload: The report that failed, emitted in place of an error report.
    """
    detail = messages.VERIFICATION_FAILED

    def __init__(self, detail: str | None = None, payload=None):
        self.payload = payload
        super().__init__(detail)
