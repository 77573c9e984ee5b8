"""Exception types shared across the toolkit."""


class AoiError(Exception):
    """Base class for all toolkit errors."""


class NonfiniteMoment(AoiError):
    """A distribution parameterization yields a divergent moment integral."""


class DegenerateConditioning(AoiError):
    """A conditioning probability underflowed; the conditional law is undefined."""


class NoSignChange(AoiError):
    """The scanned margin does not change sign, so no crossover exists."""


class InvalidPolicy(AoiError):
    """A randomized policy returned a probability outside [0, 1]."""


class NoSuccessProbability(AoiError):
    """A contending source never succeeded, so its cycle moments are undefined."""


class ConfigError(AoiError):
    """An experiment configuration failed to parse or validate."""
