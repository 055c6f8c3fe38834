"""Exception hierarchy shared across the package."""


class SeedmarkError(Exception):
    """Base class for all package errors."""


class SpecError(SeedmarkError):
    """Invalid model/data specification (dimension chaining, bad fields)."""


class InputError(SeedmarkError):
    """Runtime input mismatch (wrong feature dimension, shape, length)."""


class FormatError(SeedmarkError):
    """Malformed or version-incompatible serialized artifact."""


class DivergenceError(SeedmarkError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, batch):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")


class WatermarkError(SeedmarkError):
    """Key-set generation or verification cannot proceed."""


class ConfigError(SeedmarkError):
    """Invalid harness/attack configuration."""
