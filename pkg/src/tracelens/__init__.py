"""Infer activity-pattern Markov chains from app-usage logs and model-check them with rPCTL."""

__version__ = "0.1.0"

from .dtmc import Dtmc, RewardStructure, build_dtmc, pattern_dtmc, trace_to_dtmc, transient_distribution
from .em import AdmixtureModel, EmConfig, generate_traces, infer, log_likelihood, match_patterns
from .ingest import TimeCut, TraceSet, UserRecord, Vocabulary, apply_time_cut, count_matrix, parse_log
from .pctl import check, parse_property

__all__ = [
    "Dtmc", "RewardStructure", "build_dtmc", "pattern_dtmc", "trace_to_dtmc",
    "transient_distribution", "AdmixtureModel", "EmConfig", "generate_traces", "infer",
    "log_likelihood", "match_patterns", "TimeCut", "TraceSet", "UserRecord", "Vocabulary",
    "apply_time_cut", "count_matrix", "parse_log", "check", "parse_property",
]
