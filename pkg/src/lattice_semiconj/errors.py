"""Exception types. Each carries a short machine-readable ``code``."""


class SemiconjError(Exception):
    code = "INTERNAL"


class NotUnimodularError(SemiconjError, ValueError):
    code = "NOT_UNIMODULAR"


class SpectralError(SemiconjError):
    code = "EIGEN_FAILED"


class WordOverflowError(SemiconjError, OverflowError):
    code = "WORD_OVERFLOW"


class TailNotSummableError(SemiconjError):
    code = "TAIL_NOT_SUMMABLE"


class BudgetExceededError(SemiconjError):
    code = "BUDGET_EXCEEDED"

    def __init__(self, message, achieved_bound=None):
        super().__init__(message)
        self.achieved_bound = achieved_bound


class SampleNotFiniteError(SemiconjError, ValueError):
    code = "SAMPLE_NOT_FINITE"

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class InvertDivergedError(SemiconjError):
    code = "INVERT_DIVERGED"


class InsufficientSpanError(SemiconjError):
    code = "INSUFFICIENT_SPAN"


class ConjugatorNotCertifiedError(SemiconjError, ValueError):
    code = "CONJUGATOR_NOT_CERTIFIED"


class NotIntegerError(SemiconjError):
    code = "NOT_INTEGER"


class NotConstantError(SemiconjError):
    code = "NOT_CONSTANT"


class SpecFormatError(SemiconjError, ValueError):
    code = "SPEC_FORMAT"
