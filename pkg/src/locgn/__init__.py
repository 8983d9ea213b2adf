"""Reduced Gagliardo-Nirenberg constants and ground states for NLS on metric graphs
with nonlinearity localized on the compact core."""

__version__ = "0.1.0"

from .constants import C_R, C_R_PLUS, MU_R, MU_R_PLUS, SQRT3, reference_constants
from .graph import (CaseLabel, ClassificationResult, MetricGraph, classify, find_terminal_edges,
                    has_cycle_covering, load_graph, validate_assumption_A)
from .mesh import GraphFunction, Mesh, MeshConfig, energy, kirchhoff_residual, norms, quotient_Q
from .gn import GNReport, c_infty_estimate, maximize_gn, mu_from_C, restricted_family_max
from .rearrangement import decreasing_rearrangement, distribution, symmetric_rearrangement
from .ground_state import GroundStateResult, Status, blowup_probe, minimize_at_mass, threshold_scan
from .families import (CycleCovered, IntricateCore, LongCutEdge, Signpost, Tadpole, TerminalPendant,
                       double_bridge_transform)

__all__ = [
    "C_R", "C_R_PLUS", "MU_R", "MU_R_PLUS", "SQRT3", "reference_constants",
    "CaseLabel", "ClassificationResult", "MetricGraph", "classify", "find_terminal_edges",
    "has_cycle_covering", "load_graph", "validate_assumption_A",
    "GraphFunction", "Mesh", "MeshConfig", "energy", "kirchhoff_residual", "norms", "quotient_Q",
    "GNReport", "c_infty_estimate", "maximize_gn", "mu_from_C", "restricted_family_max",
    "decreasing_rearrangement", "distribution", "symmetric_rearrangement",
    "GroundStateResult", "Status", "blowup_probe", "minimize_at_mass", "threshold_scan",
    "CycleCovered", "IntricateCore", "LongCutEdge", "Signpost", "Tadpole", "TerminalPendant",
    "double_bridge_transform",
]
