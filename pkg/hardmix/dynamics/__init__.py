"""
The `hardmix.dynamics` sub-package contains the event-driven hard-sphere flow
of the mixture: contact-time prediction, forward and backward evolution with
pathology detection, and samplers for conditioned initial data.
"""
__all__ = [
    "CollisionEvent",
    "FlowResult",
    "MaxwellianDensity",
    "Pathology",
    "PathologyKind",
    "SimBox",
    "advance",
    "next_event",
    "pathology_rate",
    "sample_configuration",
    "time_to_contact",
]

from hardmix.dynamics import events, flow, sampling
from hardmix.dynamics.events import next_event, time_to_contact
from hardmix.dynamics.flow import (
    CollisionEvent,
    FlowResult,
    Pathology,
    PathologyKind,
    SimBox,
    advance,
)
from hardmix.dynamics.sampling import (
    MaxwellianDensity,
    pathology_rate,
    sample_configuration,
)
