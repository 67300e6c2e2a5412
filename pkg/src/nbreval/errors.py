"""Exception hierarchy. The CLI maps each family to a distinct exit code."""

from __future__ import annotations


class NbrError(Exception):
    """Base class for all harness errors."""


class ConfigError(NbrError):
    """Bad option, unknown schema/method, invalid parameter range."""


class DataError(NbrError):
    """Input data violates an expected property."""


class EmptyDatasetError(DataError):
    pass


class FormatError(DataError):
    """A canonical dataset file is corrupt, truncated or of another version."""


class PredictionValidationError(DataError):
    """A prediction file does not fit the dataset it is scored against."""


class HeaderError(PredictionValidationError):
    pass


class ChecksumMismatchError(PredictionValidationError):
    """Vocabulary checksum differs: the file was produced for another dataset."""


class MissingInstancesError(PredictionValidationError):
    def __init__(self, missing: list[tuple[str, int]]):
        self.missing = missing
        shown = ", ".join(f"{u}#{t}" for u, t in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        super().__init__(f"{len(missing)} evaluation instances have no prediction: {shown}{more}")


class UnexpectedInstancesError(PredictionValidationError):
    pass


class DuplicateRecordError(PredictionValidationError):
    pass


class DuplicateItemError(PredictionValidationError):
    def __init__(self, user: str, item):
        self.user = user
        super().__init__(f"user {user!r}: item {item!r} appears more than once")


class UnknownItemError(PredictionValidationError):
    pass


class CapacityError(PredictionValidationError):
    pass
