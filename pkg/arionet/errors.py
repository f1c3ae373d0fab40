# arionet - self-supervised birdsong representation toolkit
# errors Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" Exception hierarchy for arionet.

    Every error raised on purpose by the library derives from ArionetError.
    Errors about bad values also derive from ValueError so callers that
    catch ValueError keep working.
"""


class ArionetError(Exception):
    """ Base class of all arionet errors """


class ConfigError(ArionetError, ValueError):
    """ Invalid configuration value or combination of values """


class ShapeError(ArionetError, ValueError):
    """ Incompatible array or tensor shapes """


class SignalError(ArionetError, ValueError):
    """ Invalid input to a signal processing kernel """


class DataError(ArionetError, ValueError):
    """ Dataset content does not allow the requested operation """


class FormatError(ArionetError):
    """ Base class for binary file format errors """


class BadMagicError(FormatError):
    """ File does not start with the expected magic bytes """


class UnsupportedVersionError(FormatError):
    """ File format version is not supported """


class TruncatedFileError(FormatError):
    """ File ended before the declared content was read """


class CorruptRecordError(FormatError):
    """ Record content violates its invariants """


class CheckpointMismatchError(FormatError):
    """ Checkpoint tensors do not match the model they are loaded into """


class WavDecodeError(FormatError):
    """ WAV file is malformed or uses an unsupported encoding """
