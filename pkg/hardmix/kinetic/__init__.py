"""
The `hardmix.kinetic` sub-package evaluates the kinetic side of the mixture:
quadratures on the sphere and the velocity ball, the bilinear collision
kernels, the collision operators of both hierarchies, energy-weighted norms,
and the mild-solution solver for the Boltzmann system for mixtures.
"""
__all__ = [
    "CollisionQuadrature",
    "GridDensityPair",
    "GridFunction",
    "HierarchyOperator",
    "PhaseGrid",
    "SolverWeights",
    "apply_bbgky_hierarchy_op",
    "apply_boltzmann_hierarchy_op",
    "q_kernel",
    "solve_mixture_pde",
    "sphere_quadrature",
    "weighted_sup_norm",
]

from hardmix.kinetic import norms, operators, pde, quadrature
from hardmix.kinetic.norms import SolverWeights, weighted_sup_norm
from hardmix.kinetic.operators import (
    HierarchyOperator,
    apply_bbgky_hierarchy_op,
    apply_boltzmann_hierarchy_op,
    q_kernel,
)
from hardmix.kinetic.pde import (
    GridDensityPair,
    GridFunction,
    PhaseGrid,
    solve_mixture_pde,
)
from hardmix.kinetic.quadrature import CollisionQuadrature, sphere_quadrature
