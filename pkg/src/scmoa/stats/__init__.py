"""Empirical measurement over RunRecord batches."""

from .agreement import DawidSkeneResult, SingleCategory, borda_from_pairwise, dawid_skene, fleiss_kappa
from .calibration import CalibrationReport, EmptyInput, abstention_curve, auroc, calibration
from .correlation import AllZeroVariance, ErrorCorrelation, error_correlation, error_correlation_report
from .decomposition import Contingency, Decomposition, DegenerateMargin, McNemar, decompose, mcnemar
from .diversity import AllEmptyTraces, stop_words, tfidf_matrix, tokenize, trace_diversity
from .flips import FlipAnalysis, IdMismatch, flip_analysis
from .inference import BootstrapCI, LengthMismatch, Welch, bootstrap_diff_ci, welch

__all__ = [name for name in dir() if not name.startswith("_")]
