"""Typed errors raised across the toolkit.

Every error belongs to one of three families that the command-line front end
maps to exit codes: configuration (2), data (3) and numerical (4).
"""

from __future__ import annotations


class GvarError(Exception):
    exit_code = 1


class ConfigError(GvarError):
    exit_code = 2


class DataError(GvarError):
    exit_code = 3


class NumericError(GvarError):
    exit_code = 4


# -- data --------------------------------------------------------------------

class EmptySeries(DataError):
    pass


class DomainViolation(DataError):
    def __init__(self, key, date, value, kind):
        self.key, self.date, self.value, self.kind = key, date, value, kind
        super().__init__(
            f"{kind} transform of {key}: invalid value {value!r} at {date}"
        )


class MissingSeries(DataError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"missing series {key}")


class MissingObservation(DataError):
    def __init__(self, key, month):
        self.key, self.month = key, month
        super().__init__(f"series {key} has no observation for {month}")


class ZeroRow(DataError):
    def __init__(self, country):
        self.country = country
        super().__init__(f"exposure row for {country} has no positive off-diagonal entry")


class ForeignVarUnavailable(ConfigError):
    def __init__(self, variable, country=None):
        self.variable = variable
        where = f" for {country}" if country else ""
        super().__init__(f"no other country carries foreign variable {variable!r}{where}")


class OrderMismatch(ConfigError):
    pass


class ResidualLengthMismatch(DataError):
    pass


class TooFewObservations(DataError):
    pass


class MissingLaggedExogenous(DataError):
    pass


class UnknownTarget(ConfigError):
    pass


class TransformMissing(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class UnknownScenario(ConfigError):
    pass


# -- numeric -----------------------------------------------------------------

class RankDeficient(NumericError):
    def __init__(self, column_label):
        self.column_label = column_label
        super().__init__(f"design matrix is rank deficient at column {column_label!r}")


class SingularG(NumericError):
    def __init__(self, condition_estimate):
        self.condition_estimate = condition_estimate
        super().__init__(f"G is numerically singular (condition number {condition_estimate:.3e})")


class DegenerateShock(NumericError):
    def __init__(self, j):
        self.j = j
        super().__init__(f"shocked variable {j} has zero variance")


class NotPSD(NumericError):
    pass


class UnstableSpec(NumericError):
    pass
