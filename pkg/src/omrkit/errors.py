"""Named errors raised across the toolkit.

Every module raises subclasses of OmrError so that the CLI and the HTTP
service can map failures to structured payloads by class name.
"""


class OmrError(Exception):
    """Base class for all toolkit errors."""


# --- registration ---

class EmptyImage(OmrError):
    pass


class DescriptorMismatch(OmrError):
    pass


class InsufficientMatches(OmrError):
    pass


class NoConsensus(OmrError):
    pass


class SingularTransform(OmrError):
    pass


class RegistrationFailed(OmrError):
    pass


# --- features ---

class DegenerateRoi(OmrError):
    pass


class ConfigMismatch(OmrError):
    pass


# --- classifiers ---

class DimensionMismatch(OmrError):
    pass


class DegenerateTrainingSet(OmrError):
    pass


class InsufficientDescriptors(OmrError):
    pass


class ModelClassMismatch(OmrError):
    pass


class ConfigInvalid(OmrError):
    pass


class Divergence(OmrError):
    pass


# --- strategy ---

class SpecInvalid(OmrError):
    pass


# --- grading ---

class QuestionUnknown(OmrError):
    pass


class RoiOutOfBounds(OmrError):
    pass


# --- dataset ---

class ParseError(OmrError):
    pass


class ValidationError(OmrError):
    pass


class LabelMissing(OmrError):
    pass


# --- eval ---

class TooFewSamples(OmrError):
    pass


class LengthMismatch(OmrError):
    pass
