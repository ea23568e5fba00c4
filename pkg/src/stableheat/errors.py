"""Shared exception types."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigurationError(ValueError):
    """Inconsistent or unusable configuration."""


class ExplosionError(RuntimeError):
    """Trajectory left the representable range."""

    def __init__(self, step, replica_id=None):
        self.step = step
        self.replica_id = replica_id
        msg = f"state exploded at step {step}"
        if replica_id is not None:
            msg += f" (replica {replica_id})"
        super().__init__(msg)
