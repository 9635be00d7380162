"""Exception hierarchy shared by the codecs and the control plane."""


class CodecError(ValueError):
    """Base class for every wire-level encode/decode failure."""


class OversizeField(CodecError):
    pass


class InvalidField(CodecError):
    """A field value is outside the range its type allows."""


class UnknownPduTag(CodecError):
    pass


class MissingMandatoryIe(CodecError):
    def __init__(self, ie_name):
        super().__init__(f"missing mandatory IE {ie_name}")
        self.ie_name = ie_name


class TruncatedBuffer(CodecError):
    pass


class TrailingGarbage(CodecError):
    pass


class MalformedIe(CodecError):
    pass


class OversizePayload(CodecError):
    pass


class TruncatedFrame(CodecError):
    """Not enough bytes buffered for a whole frame yet; wait for more."""


# service-model payload errors

class MissingContainer(CodecError):
    pass


class DuplicateContainerId(CodecError):
    pass


class ShareSumExceeded(CodecError):
    pass


class DuplicateSliceId(CodecError):
    pass


# control-plane errors

class UnknownNode(LookupError):
    pass


class UnsupportedFunction(LookupError):
    pass


class UnknownXapp(LookupError):
    pass


class UnknownSlice(LookupError):
    pass


class InvalidWindow(ValueError):
    pass


class ConfigError(ValueError):
    """Bad or missing configuration key; the message names the key."""

    def __init__(self, key, reason):
        super().__init__(f"{key}: {reason}")
        self.key = key


class MissingKey(ConfigError):
    def __init__(self, key):
        super().__init__(key, "missing required key")


class UnknownActionType(ConfigError):
    pass
