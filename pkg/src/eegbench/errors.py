"""Exception hierarchy shared across the harness."""


class HarnessError(Exception):
    """Base class for all harness errors."""


# --- EDF ingestion ---

class TruncatedFile(HarnessError):
    pass


class MalformedHeader(HarnessError):
    pass


class UnsupportedVariant(HarnessError):
    pass


class RangeOverflow(HarnessError):
    pass


# --- preprocessing ---

class NyquistViolation(HarnessError):
    pass


class InvalidBand(HarnessError):
    pass


class TooFewChannels(HarnessError):
    pass


class EmptyResult(HarnessError):
    pass


# --- montage ---

class UnknownChannel(HarnessError):
    pass


class LobeEmpty(HarnessError):
    pass


class MissingChannel(HarnessError):
    pass


# --- sampling ---

class TooFewSubjects(HarnessError):
    pass


class InsufficientData(HarnessError):
    pass


# --- probe ---

class DimensionMismatch(HarnessError):
    pass


class DegenerateInput(HarnessError):
    pass


# --- metrics ---

class EmptyClass(HarnessError):
    pass


class DegenerateAgreement(HarnessError):
    pass


class OneClassOnly(HarnessError):
    pass


# --- efficiency ---

class ChanceLevelDenominator(HarnessError):
    pass


class UnpairedCells(HarnessError):
    pass
