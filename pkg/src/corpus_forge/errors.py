"""Exception hierarchy for the toolkit."""


class CorpusForgeError(Exception):
    """Base class for all toolkit errors."""


# --- audio decoding / resampling ---

class UnsupportedFormat(CorpusForgeError):
    pass


class CorruptStream(CorpusForgeError):
    pass


class InvalidRate(CorpusForgeError):
    pass


# --- DSP ---

class InvalidFrameParams(CorpusForgeError):
    pass


class TooShort(CorpusForgeError):
    pass


class SilentInput(CorpusForgeError):
    pass


# --- segmentation ---

class TrackTooShort(CorpusForgeError):
    pass


# --- tagging / captioning ---

class OutOfRange(CorpusForgeError):
    pass


class MissingMandatoryTags(CorpusForgeError):
    pass


# --- adapter protocol ---

class AdapterError(CorpusForgeError):
    pass


class SpawnFailure(AdapterError):
    pass


class HandshakeTimeout(AdapterError):
    pass


class ProtocolVersionMismatch(AdapterError):
    pass


class ProtocolError(AdapterError):
    """Framing violation: non-JSON line, embedded garbage, bad reply shape."""


class AdapterTimeout(AdapterError):
    pass


class ChildExited(AdapterError):
    pass


class RemoteError(AdapterError):
    def __init__(self, code, message):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class AdapterUnavailable(AdapterError):
    pass


class StemMissing(AdapterError):
    pass


# --- manifests ---

class IoError(CorpusForgeError):
    pass


class SchemaVersionUnknown(CorpusForgeError):
    pass


# --- evaluation ---

class EmptyCorpus(CorpusForgeError):
    pass


class FeatureMissing(CorpusForgeError):
    pass


class PrefixLongerThanClip(CorpusForgeError):
    pass


class EmptyCell(CorpusForgeError):
    pass


# --- configuration ---

class ConfigError(CorpusForgeError):
    pass
