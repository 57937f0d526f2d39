"""Exception and warning types for the extraction pipeline."""


class ExtractError(Exception):
    """Bad input data, bad configuration, or an unwritable output."""


class ModelLoadError(ExtractError):
    """An encoder backend could not be constructed."""


class SkippedSentenceWarning(UserWarning):
    """A sentence was dropped, e.g. for exceeding the piece-length budget."""
