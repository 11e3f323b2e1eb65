"""Exception types raised by the dictionary and its parts."""


class EmomaError(Exception):
    """Base class for structure-specific failures."""


class DuplicateKeyError(EmomaError):
    """Insert was called with a key that is already stored."""


class StructureFailedError(EmomaError):
    """The structure suffered a stash overflow and is permanently failed."""


class FilterCorruptionError(EmomaError):
    """A filter counter was asked to go negative; add/remove got unbalanced."""
