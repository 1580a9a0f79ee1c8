"""Set-based trajectory prediction toolkit.

Trajectory-set generation, set-classification decoding with endpoint NMS,
motion-forecasting metrics and concatenation-based conditioning on the
ego vehicle's planned future.
"""

from trajset.core import (
    AgentClass,
    ClassGroup,
    LocalFrame,
    ade,
    fde,
    min_turn_radius,
    to_local_frame,
)
from trajset.metrics import MetricReport, eval_multimodal, lb_minade, rcc, tri
from trajset.nms import ScoredSet, select_nms
from trajset.setgen import (
    GenerationTrace,
    TrajectorySet,
    generate_class_specific,
    generate_set_bagging,
    generate_set_metric_driven,
    subsample,
)

__version__ = "0.1.0"

__all__ = [
    "AgentClass",
    "ClassGroup",
    "LocalFrame",
    "ade",
    "fde",
    "min_turn_radius",
    "to_local_frame",
    "MetricReport",
    "eval_multimodal",
    "lb_minade",
    "rcc",
    "tri",
    "ScoredSet",
    "select_nms",
    "GenerationTrace",
    "TrajectorySet",
    "generate_class_specific",
    "generate_set_bagging",
    "generate_set_metric_driven",
    "subsample",
]
