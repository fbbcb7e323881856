"""Exception types raised across the simulator."""


class InputError(ValueError):
    """Shape, range or label problems in arguments passed to a pure operation."""


class ConfigurationError(ValueError):
    """An experiment or partition setup that cannot be realised."""


class AggregationError(ValueError):
    """Invalid set of models handed to an aggregation routine."""


class IngestionError(ValueError):
    """Malformed dataset file."""


class TrainingDivergence(RuntimeError):
    """Local training produced a non-finite loss."""
