"""Exception hierarchy for the qbar package.

Every error raised on purpose by the package derives from :class:`QbarError`.
Errors about malformed numeric input also derive from :class:`ValueError` so
callers that only know about builtins still catch them.
"""


class QbarError(Exception):
    """Base class for all qbar errors."""


# statevector
class ZeroNormInput(QbarError, ValueError):
    pass


class BadLength(QbarError, ValueError):
    pass


class QubitOutOfRange(QbarError, IndexError):
    pass


class ControlEqualsTarget(QbarError, ValueError):
    pass


class DimensionMismatch(QbarError, ValueError):
    pass


# features
class TooShort(QbarError, ValueError):
    pass


class MissingModality(QbarError, ValueError):
    pass


class DuplicateModality(QbarError, ValueError):
    pass


class MissingProjection(QbarError, ValueError):
    pass


# peqad
class DegenerateCenter(QbarError, ValueError):
    pass


# scoring
class ClassTooSmall(QbarError, ValueError):
    pass


class SingularCovariance(QbarError, ValueError):
    pass


class DegenerateAxis(QbarError, ValueError):
    pass


class TooFewScores(QbarError, ValueError):
    pass


class GammaOutOfRange(QbarError, ValueError):
    pass


class OneClassValidation(QbarError, ValueError):
    pass


class UncalibratedModel(QbarError, RuntimeError):
    pass


# eval
class LengthMismatch(QbarError, ValueError):
    pass


class NoPositives(QbarError, ValueError):
    pass


class UnknownCreator(QbarError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class TooFewReports(QbarError, ValueError):
    pass


class MissingCheckpoint(QbarError, FileNotFoundError):
    pass


# persistence
class IoFailure(QbarError, OSError):
    pass


class FormatError(QbarError, ValueError):
    """Base for on-disk format violations."""


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class NonFiniteValue(FormatError):
    pass


class SchemaViolation(FormatError):
    pass


class MissingFile(FormatError):
    pass


class TemporalLeak(FormatError):
    pass


class VersionMismatch(FormatError):
    pass


class CorruptPayload(FormatError):
    pass


class ConfigError(QbarError, ValueError):
    pass
