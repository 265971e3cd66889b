"""Exception hierarchy.

Each error carries an ``exit_code`` used by the CLI: 1 for usage/config
problems, 2 for data problems, 3 for numeric failures.
"""


class InterjectionError(Exception):
    exit_code = 2


class ConfigError(InterjectionError):
    exit_code = 1


class UnsupportedFormat(InterjectionError):
    pass


class CorruptHeader(InterjectionError):
    pass


class IoFailure(InterjectionError, OSError):
    pass


class EmptySignal(InterjectionError):
    pass


class InvalidFraming(InterjectionError):
    pass


class SignalTooShort(InterjectionError):
    pass


class EmptyScene(InterjectionError):
    pass


class PlanInvalid(InterjectionError):
    exit_code = 1


class LengthMismatch(InterjectionError):
    pass


class ClipTooLong(InterjectionError):
    pass


class UnknownSpeaker(InterjectionError):
    pass


class OverlappingSplit(InterjectionError):
    exit_code = 1


class UnknownLabel(InterjectionError):
    pass


class ShapeMismatch(InterjectionError):
    pass


class EmptyTrainingSet(InterjectionError):
    pass


class NonFiniteLoss(InterjectionError):
    exit_code = 3


class CorruptCheckpoint(InterjectionError):
    pass


class VersionMismatch(CorruptCheckpoint):
    pass
