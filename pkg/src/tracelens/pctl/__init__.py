"""rPCTL parsing and model checking."""

from .ast import (And, Atom, Bound, Cumulative, Eventually, Filter, Next, Not, ProbQuery,
                  Reachability, RewardQuery, TrueF, Until)
from .checker import (CheckResult, bounded_until_prob, check, cumulative_reward,
                      eval_state_formula, filter_eval, next_prob, quantitative,
                      reachability_reward, reward_structure, unbounded_until_prob)
from .parser import parse_property, parse_property_file

__all__ = [
    "And", "Atom", "Bound", "Cumulative", "Eventually", "Filter", "Next", "Not", "ProbQuery",
    "Reachability", "RewardQuery", "TrueF", "Until", "CheckResult", "bounded_until_prob",
    "check", "cumulative_reward", "eval_state_formula", "filter_eval", "next_prob",
    "quantitative", "reachability_reward", "reward_structure", "unbounded_until_prob",
    "parse_property", "parse_property_file",
]
