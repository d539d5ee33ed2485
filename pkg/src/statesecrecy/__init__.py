"""State-secrecy codes for remote estimation over packet-dropping channels."""

__version__ = "0.1.0"

from .api import EavesdropperEstimator, StateSecrecyEncoder
from .codec import SecrecyCode, decode, design_code, encode
from .estimators import bound_trajectory, eav_filter_step, initial_filter
from .sysmodel import PartitionedSystem, steady_info_matrix, validate_system, weighting_matrix

__all__ = [
    "EavesdropperEstimator",
    "PartitionedSystem",
    "SecrecyCode",
    "StateSecrecyEncoder",
    "__version__",
    "bound_trajectory",
    "decode",
    "design_code",
    "eav_filter_step",
    "encode",
    "initial_filter",
    "steady_info_matrix",
    "validate_system",
    "weighting_matrix",
]
