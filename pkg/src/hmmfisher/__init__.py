"""Fisher information, forgetting bounds, and MLE asymptotics for
finite-state parametric hidden Markov models.

Modules:

* ``model``: parametric model container, catalog, assumption checks.
* ``stationary``: stationary laws, their parameter derivatives, the
  Poisson equation, and the fundamental matrix.
* ``inference``: likelihood evaluation (stationary, fixed-start,
  conditional with a gap), filtering/smoothing, brute-force oracles,
  observation CSV round-trip.
* ``sensitivity``: exact first/second derivative propagation through the
  filter; scores, Hessians, and the smoothing-based score identity.
* ``fisher``: information matrices (exact and Monte Carlo), asymptotic
  routes, singularity verdicts, the equivalence scan, the convergence
  sweep.
* ``ergodicity``: explicit geometric forgetting and perturbation bounds.
* ``estimation``: stationary simulation, maximum likelihood fitting, and
  the asymptotic-normality experiment.
* ``cli``: the ``hmmfisher`` command-line interface.
"""

from .errors import (AssumptionError, CapabilityError, EstimationError,
                     HmmError, ObservationError, ParameterBoxError,
                     PreconditionError, UnknownModelError)
from .model import (CATALOG, ParamHmm, box_around, build_catalog_model,
                    check_assumptions, compute_constants)

__all__ = [
    "AssumptionError",
    "CapabilityError",
    "EstimationError",
    "HmmError",
    "ObservationError",
    "ParameterBoxError",
    "PreconditionError",
    "UnknownModelError",
    "CATALOG",
    "ParamHmm",
    "box_around",
    "build_catalog_model",
    "check_assumptions",
    "compute_constants",
]

__version__ = "0.1.0"
