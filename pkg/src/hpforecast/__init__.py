"""Hierarchical partitioning forecasters with linear per-segment learners."""
from .errors import (ContractViolation, HPFError, InvalidArgument, NumericError, OutOfDomain,
                     ResourceLimit)
from .ftal import FtalState, ball, box, ftal_gamma, ftal_init, ftal_regret_constant
from .hpf import CpfModel, HpfModel, LearnerConfig, RunLog, lhpf_regret_bound, run_stream
from .losses import LossFunction, log_loss, squared
from .partition import HierarchicalPartition, InducedPartition, build_quadtree
from .switching import SwitchingState, switching_init

__version__ = "0.1.0"
