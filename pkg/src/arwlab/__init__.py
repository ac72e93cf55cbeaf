"""Activated random walks, stochastic sandpiles, and the numerics around their fixation."""

from .arw import simulate_ct
from .engine import ARWEngine, FixedTapes, InstructionTapes, NonStabilized, stabilize
from .experiments import EscapeSpec, driven_dissipation, estimate_escape, fixation_tail, is_balanced
from .kernels import heat_kernel_1d, heat_kernel_d
from .lattice import Box, Paving, kernel_triple
from .multiscale import RecursionParams, decay_certificate, scale_table
from .slt import couple_walks_to_cloud, soft_local_time_run
from .ssm import SSMNetwork, stabilize_ssm, toppling_f

__all__ = [
    "ARWEngine", "Box", "EscapeSpec", "FixedTapes", "InstructionTapes", "NonStabilized", "Paving",
    "RecursionParams", "SSMNetwork", "couple_walks_to_cloud", "decay_certificate", "driven_dissipation",
    "estimate_escape", "fixation_tail", "heat_kernel_1d", "heat_kernel_d", "is_balanced", "kernel_triple",
    "scale_table", "simulate_ct", "soft_local_time_run", "stabilize", "stabilize_ssm", "toppling_f",
]
