"""Bit-delivery maximization for multi-hop secondary networks mixing backscatter and harvest-then-transmit."""

from .baselines import ab, jotpa
from .channels import Topology, path_loss_gain, place_nodes, sample_channels
from .dual import SearchOptions, optimize_lambda, search_lambda
from .errors import (
    DeadHopError,
    DegenerateMultiplierError,
    HbctError,
    InfeasibleError,
    NumericalError,
    PropertyViolation,
    ValidationError,
)
from .hybrid import HybridResult, hbct
from .inner import conventional_rate, hbct_inner, mode_select, power_allocation, solve_A, time_allocation
from .model import Allocation, ChannelRealization, DualWeights, SystemParams, db_to_linear, validate_params

__version__ = "0.1.0"
