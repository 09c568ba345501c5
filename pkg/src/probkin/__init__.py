"""Sequential Jeffrey updating of probability measures and credal sets."""

from probkin.dipk import CredalSet, dipk_run, hausdorff, lower_prob, upper_prob
from probkin.dpk import StopReason, StopRule, dpk_run, jeffrey_update
from probkin.errors import ProbKinError
from probkin.measure import Event, ProbMeasure, StateSpace
from probkin.observation import ObservationModel, Partition, PartitionMasses

__all__ = [
    "CredalSet",
    "Event",
    "ObservationModel",
    "Partition",
    "PartitionMasses",
    "ProbKinError",
    "ProbMeasure",
    "StateSpace",
    "StopReason",
    "StopRule",
    "dipk_run",
    "dpk_run",
    "hausdorff",
    "jeffrey_update",
    "lower_prob",
    "upper_prob",
]
