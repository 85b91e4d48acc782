"""Exception types raised across the package."""

from __future__ import annotations


class DrugencError(Exception):
    """Base class for all package errors."""


# corpus ----------------------------------------------------------------

class MissingColumnError(DrugencError):
    pass


class DuplicateDrugIdError(DrugencError):
    pass


class MalformedRowError(DrugencError):
    pass


class SelfPairError(DrugencError):
    pass


class UnknownDrugError(DrugencError):
    pass


class UnknownLabelError(DrugencError):
    pass


class AtcLengthError(DrugencError):
    """An ATC code segment does not have exactly seven characters."""


class VocabFormatError(DrugencError):
    pass


# partition -------------------------------------------------------------

class EmptyInputError(DrugencError):
    pass


class ManifestFormatError(DrugencError):
    pass


# model -----------------------------------------------------------------

class IndexOutOfVocabError(DrugencError):
    pass


class DimensionMismatchError(DrugencError):
    pass


class CheckpointFormatError(DrugencError):
    pass


class DivergedLossError(DrugencError):
    """Training hit a non-finite loss. Carries the history up to the abort."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history


# baselines -------------------------------------------------------------

class EmptyIndexError(DrugencError):
    pass


# metrics ---------------------------------------------------------------

class LengthMismatchError(DrugencError):
    pass


# analogy ---------------------------------------------------------------

class TableFormatError(DrugencError):
    pass


class DimMismatchError(DrugencError):
    pass


class ZeroVectorError(DrugencError):
    pass


class QueryDrugMissingError(DrugencError):
    pass
