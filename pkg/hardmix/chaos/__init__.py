"""
The `hardmix.chaos` sub-package measures propagation of chaos in simulated
ensembles: histogram estimates of mixed marginals, velocity observables at
separated positions, backward goodness of configurations, and the gap to the
tensorized solution of the Boltzmann system for mixtures.
"""
__all__ = [
    "ChaosPoint",
    "ChaosReport",
    "GoodnessReport",
    "HistogramGrid",
    "MarginalEstimate",
    "ObservableSpec",
    "VelocityBox",
    "VelocityGaussian",
    "VelocityPolynomial",
    "chaos_metric",
    "conditioned_ensemble",
    "conditioned_initial_sampler",
    "estimate_marginal",
    "evolve_ensemble",
    "good_config_check",
    "l1_distance",
    "observable",
    "regional_observable",
    "species_covariance",
    "velocity_function",
]

from hardmix.chaos import marginals, metrics, observables
from hardmix.chaos.marginals import (
    HistogramGrid,
    MarginalEstimate,
    estimate_marginal,
    l1_distance,
)
from hardmix.chaos.metrics import (
    ChaosPoint,
    ChaosReport,
    GoodnessReport,
    chaos_metric,
    conditioned_ensemble,
    conditioned_initial_sampler,
    evolve_ensemble,
    good_config_check,
    species_covariance,
)
from hardmix.chaos.observables import (
    ObservableSpec,
    VelocityBox,
    VelocityGaussian,
    VelocityPolynomial,
    observable,
    regional_observable,
    velocity_function,
)
