"""Exception hierarchy.

``InputError`` subclasses describe bad files or configuration (CLI exit 2);
``ComputationError`` subclasses describe data that cannot support the
requested computation (CLI exit 1).
"""


class LaborscapeError(Exception):
    exit_code = 1


class InputError(LaborscapeError):
    exit_code = 2


class ComputationError(LaborscapeError):
    exit_code = 1


class MalformedRow(InputError):
    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class NegativeCount(InputError):
    def __init__(self, path, line, column, value):
        self.path = str(path)
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}: negative count {value} in column {column!r}")


class DuplicateKey(InputError):
    pass


class EmptyCity(InputError):
    pass


class EmptyTable(ComputationError):
    pass


class OutOfRangeCoordinate(InputError):
    pass


class NonPositiveSize(InputError):
    pass


class MissingRisk(InputError):
    pass


# crosswalk
class RowNotPending(ComputationError):
    pass


class UnknownSourceId(InputError):
    pass


class UnresolvedRow(ComputationError):
    pass


class MissingSourceRisk(InputError):
    pass


# occupation space
class NoAdvantagedOccupations(ComputationError):
    pass


# structure
class DegenerateData(ComputationError):
    pass


class DegenerateClustering(ComputationError):
    pass


class MissingFeature(InputError):
    pass


class MissingFlag(InputError):
    pass


class MissingCoordinates(InputError):
    pass


# regression
class TooFewPoints(ComputationError):
    pass


class ZeroVariance(ComputationError):
    pass


class NonPositiveUnderLog(ComputationError):
    def __init__(self, variable, city, value):
        self.variable = variable
        self.city = city
        super().__init__(f"{variable}={value!r} for {city!r} cannot be log-transformed")


class UnknownMetric(InputError):
    pass
