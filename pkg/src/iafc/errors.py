class PlanningError(RuntimeError):
    """A planning run cannot proceed (empty seed sets, bad inputs)."""


class NoViableChannel(PlanningError):
    """Every candidate left the bone or fell below the CSV cutoff."""


class ConfigError(ValueError):
    pass
