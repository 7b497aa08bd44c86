"""Cascading-outage risk assessment on DC grids by guided Markovian-tree search."""

from .case import Branch, Generator, Load, NetworkCase
from .cascade_sim import SystemState, TransitionOutcome, make_root, simulate_transition
from .config import AssessmentConfig, RateModel
from .io import bundled_case_path, load_case
from .mc_baseline import McEstimate, mc_risk
from .mt_search import AssessmentResult, TreeSearch, assess, enumerate_all, path_count_formula

__all__ = [
    "AssessmentConfig", "AssessmentResult", "Branch", "Generator", "Load", "McEstimate",
    "NetworkCase", "RateModel", "SystemState", "TransitionOutcome", "TreeSearch", "assess",
    "bundled_case_path", "enumerate_all", "load_case", "make_root", "mc_risk",
    "path_count_formula", "simulate_transition",
]
