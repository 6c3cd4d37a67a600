"""Exception hierarchy.

Every error carries a stable ``code`` that the command line surfaces in its
JSON error payloads.
"""


class StieltjesError(Exception):
    code = "Error"


class DomainError(StieltjesError, ValueError):
    code = "DomainError"


class ModeError(StieltjesError, TypeError):
    """An operation that needs exact rationals received approximate input."""

    code = "ModeError"


class SupportError(StieltjesError, ValueError):
    """A mass that must be strictly positive is zero."""

    code = "SupportError"


class RangeError(StieltjesError, ValueError):
    code = "RangeError"


class NonConvergent(StieltjesError, ArithmeticError):
    code = "NonConvergent"


class PrecisionExhausted(StieltjesError, ArithmeticError):
    code = "PrecisionExhausted"


class IndeterminateComparison(StieltjesError, ArithmeticError):
    """Two enclosures overlap, so their order cannot be certified."""

    code = "IndeterminateComparison"


class NoDecayCertificate(StieltjesError, ArithmeticError):
    code = "NoDecayCertificate"


class HypothesisError(StieltjesError, ValueError):
    code = "HypothesisError"


class ConditioningWarning(UserWarning):
    pass
