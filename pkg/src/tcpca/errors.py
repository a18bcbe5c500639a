"""Exception hierarchy shared by all modules."""


class TcpcaError(Exception):
    """Base class for every error raised by this package."""


class InputError(TcpcaError, ValueError):
    """Invalid user-supplied data or parameters."""


class ParseFailure(InputError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class NegativeCount(InputError):
    def __init__(self, sample_id, feature_id, row=None, column=None):
        self.sample_id = sample_id
        self.feature_id = feature_id
        self.row = row
        self.column = column
        super().__init__(
            f"negative count at ({sample_id}, {feature_id}), row {row}, column {column}"
        )


class DuplicateId(InputError):
    pass


class EmptyMatrix(InputError):
    pass


class EmptyAfterFilter(InputError):
    pass


class ZeroRowSum(InputError):
    def __init__(self, sample_id):
        self.sample_id = sample_id
        super().__init__(f"sample {sample_id!r} has no positive counts")


class AllZeroFeature(InputError):
    def __init__(self, feature):
        self.feature = feature
        super().__init__(f"feature {feature!r} has no nonzero observations")


class NumericalError(TcpcaError, ArithmeticError):
    """A numerical routine failed or left its domain of validity."""


class DegenerateProjection(NumericalError):
    pass


class ExtremeTruncation(NumericalError):
    pass
