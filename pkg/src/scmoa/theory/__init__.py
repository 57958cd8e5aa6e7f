"""Closed-form bounds and Monte-Carlo checks for the ensemble propositions."""

from .bounds import ExtractionBound, extraction_bound, fidelity_bound, gate_loss_bound, jury_bound
from .kernels import BACKEND
from .simulate import (
    HierarchyOracle,
    HierarchyResult,
    Mode,
    RefinementOperator,
    RefinementResult,
    SyntheticEnsemble,
    VoteResult,
    enumerate_hierarchical,
    exact_majority_accuracy,
    hierarchical_vs_flat,
    simulate_refinement,
    simulate_vote,
)

__all__ = [name for name in dir() if not name.startswith("_")]
