"""Adaptive two-stage stochastic programming: trees, models, bounds, heuristics."""
__version__ = "0.1.0"

from .errors import AdaptspError
from .tree import (ScenarioTree, TreeGenConfig, build_tree, condense, generate_tree, load_tree, regular_tree,
                   save_tree)
from .model import ModelInstance, Solution, SolverConfig, Status, solve
from .formulations import (CapacityExpansionData, GenExpData, RevisionVector, build_adaptive_fixed,
                           build_adaptive_joint, build_genexp, build_multistage, build_twostage, load_genexp_data)
from .bounds import bounds_report, select_t_cb, select_t_db, value_gap_intervals
from .heuristics import ats_relax, exact_ats, ms_relax, ts_relax
from .newsvendor import NewsvendorConfig, revision_curve, simulate

__all__ = [
    "AdaptspError", "ScenarioTree", "TreeGenConfig", "build_tree", "condense", "generate_tree", "load_tree",
    "regular_tree", "save_tree", "ModelInstance", "Solution", "SolverConfig", "Status", "solve",
    "CapacityExpansionData", "GenExpData", "RevisionVector", "build_adaptive_fixed", "build_adaptive_joint",
    "build_genexp", "build_multistage", "build_twostage", "load_genexp_data", "bounds_report", "select_t_cb",
    "select_t_db", "value_gap_intervals", "ats_relax", "exact_ats", "ms_relax", "ts_relax", "NewsvendorConfig",
    "revision_curve", "simulate",
]
