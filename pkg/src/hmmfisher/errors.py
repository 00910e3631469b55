"""Exception types shared across the package."""


class HmmError(Exception):
    """Base class for all package-specific errors."""


class UnknownModelError(HmmError):
    """Requested catalog model name does not exist."""


class ParameterBoxError(HmmError):
    """Parameter vector lies outside the model's admissible region."""


class CapabilityError(HmmError):
    """Operation requires a capability the model lacks (e.g. a finite
    observation alphabet for exact enumeration)."""


class ObservationError(HmmError):
    """Observation sequence is malformed or impossible under the model."""


class AssumptionError(HmmError):
    """A positivity/boundedness assumption needed by the computation fails."""


class PreconditionError(HmmError):
    """Inputs are structurally valid but violate a documented precondition."""


class EstimationError(HmmError):
    """An estimation run produced results that fail its validity contract
    (e.g. too many non-converged replicates to trust the summary)."""
