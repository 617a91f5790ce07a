"""
The `hardmix.hierarchy` sub-package evaluates the Duhamel expansions of the
BBGKY and Boltzmann hierarchies: collision histories and their time
simplices, the two flavors of pseudo-trajectories with their comparison and
recollision check, and Monte Carlo estimates of the truncated iterates.
"""
__all__ = [
    "AdjunctionRecord",
    "CollisionHistory",
    "DuhamelEstimate",
    "Flavor",
    "PseudoTrajectory",
    "RecollisionReport",
    "TensorizedData",
    "build_bbgky_pseudo",
    "build_boltzmann_pseudo",
    "compare_pseudo",
    "duhamel_iterate",
    "free_flow_observable",
    "random_history",
    "recollision_filter",
    "sample_time_simplex",
    "truncated_series",
]

from hardmix.hierarchy import duhamel, history, pseudo
from hardmix.hierarchy.duhamel import (
    DuhamelEstimate,
    TensorizedData,
    duhamel_iterate,
    free_flow_observable,
    truncated_series,
)
from hardmix.hierarchy.history import (
    AdjunctionRecord,
    CollisionHistory,
    random_history,
    sample_time_simplex,
)
from hardmix.hierarchy.pseudo import (
    Flavor,
    PseudoTrajectory,
    RecollisionReport,
    build_bbgky_pseudo,
    build_boltzmann_pseudo,
    compare_pseudo,
    recollision_filter,
)
