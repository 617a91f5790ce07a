"""
The `hardmix.mixture` sub-package holds the building blocks shared by every
other part of `hardmix`: the species algebra, phase-space configurations,
the collision law and impact operator, and configuration file formats.
"""
__all__ = [
    "BoundaryClass",
    "BoundaryKind",
    "Configuration",
    "MixtureParams",
    "SpeciesKind",
    "classify_boundary",
    "collide",
    "energy",
    "impact_operator",
    "interaction_distance",
    "total_momentum",
]

from hardmix.mixture import collisions, configuration, io, species
from hardmix.mixture.collisions import (
    BoundaryClass,
    BoundaryKind,
    classify_boundary,
    collide,
    impact_operator,
)
from hardmix.mixture.configuration import Configuration, energy, total_momentum
from hardmix.mixture.species import MixtureParams, SpeciesKind, interaction_distance
