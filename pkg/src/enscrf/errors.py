"""Exception types shared across the package."""


class DataError(Exception):
    """Malformed or inconsistent input data (datasets, embedding files,
    tokenizations, checkpoints). CLI maps this to exit code 2."""


class TrainingError(Exception):
    """Training aborted (e.g. non-finite loss)."""
