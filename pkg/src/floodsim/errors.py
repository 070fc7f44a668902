"""Error types shared across the simulator."""


class ConfigurationError(ValueError):
    """A structural or configuration problem (bad shapes, bad hyperparameters)."""


class InputError(ValueError):
    """Invalid runtime data (bad labels, negative weights, empty datasets)."""


class ParseError(ValueError):
    """A file could not be parsed; the message names the offending location."""
