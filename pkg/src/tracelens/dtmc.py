"""Labelled, rewarded discrete-time Markov chains."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DtmcError
from .ingest import Vocabulary

STOCHASTIC_TOL = 1e-9
STEPS_REWARD = "r_Steps"

STATE = "state"
TRANSITION = "transition"


@dataclass(frozen=True)
class RewardStructure:
    kind: str  # STATE or TRANSITION
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.kind not in (STATE, TRANSITION):
            raise DtmcError(f"unknown reward kind {self.kind!r}")
        values = np.array(self.values, dtype=float)
        if values.ndim != (1 if self.kind == STATE else 2):
            raise DtmcError(f"{self.kind} reward has wrong dimensionality {values.shape}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise DtmcError("rewards must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def scaled(self, c: float) -> "RewardStructure":
        return RewardStructure(self.kind, self.values * c)

    def state_part(self) -> np.ndarray:
        n = self.values.shape[0]
        return self.values if self.kind == STATE else np.zeros(n)

    def transition_part(self, matrix: np.ndarray) -> np.ndarray:
        """Expected one-step transition reward from each state."""
        if self.kind == STATE:
            return np.zeros(matrix.shape[0])
        return (matrix * self.values).sum(axis=1)


def state_reward(n: int, states) -> RewardStructure:
    values = np.zeros(n)
    values[list(states)] = 1.0
    return RewardStructure(STATE, values)


def steps_reward(n: int) -> RewardStructure:
    return RewardStructure(TRANSITION, np.ones((n, n)))


@dataclass(frozen=True)
class Dtmc:
    matrix: np.ndarray
    initial: int = 0
    labels: Mapping[str, frozenset[int]] = field(default_factory=dict)
    reward_structures: Mapping[str, RewardStructure] = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def label_set(self, name: str) -> frozenset[int]:
        return self.labels[name]

    def state_of(self, label: str) -> int:
        """The unique state carrying ``label``."""
        states = self.labels.get(label)
        if states is None or len(states) != 1:
            raise DtmcError(f"label {label!r} does not identify exactly one state")
        return next(iter(states))


def build_dtmc(matrix, initial: int = 0, labels: Mapping[str, object] | None = None,
               rewards: Mapping[str, RewardStructure] | None = None) -> Dtmc:
    """Validate and freeze a DTMC. Rows off by more than 1e-9 are rejected."""
    P = np.array(matrix, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise DtmcError(f"transition matrix must be square and non-empty, got shape {P.shape}")
    n = P.shape[0]
    if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
        raise DtmcError("transition probabilities must lie in [0, 1]")
    sums = P.sum(axis=1)
    for i, s in enumerate(sums):
        if abs(s - 1.0) > STOCHASTIC_TOL:
            raise DtmcError(f"row {i} sums to {s:.12g}")
    if not 0 <= initial < n:
        raise DtmcError(f"initial state {initial} out of range for {n} states")

    frozen_labels: dict[str, frozenset[int]] = {}
    for name, states in (labels or {}).items():
        members = frozenset(int(s) for s in ([states] if np.isscalar(states) else states))
        if any(not 0 <= s < n for s in members):
            raise DtmcError(f"label {name!r} refers to states outside 0..{n - 1}")
        frozen_labels[name] = members

    for name, rs in (rewards or {}).items():
        expected = (n,) if rs.kind == STATE else (n, n)
        if rs.values.shape != expected:
            raise DtmcError(f"reward structure {name!r} has shape {rs.values.shape}, expected {expected}")

    P.setflags(write=False)
    return Dtmc(P, int(initial), frozen_labels, dict(rewards or {}))


def pattern_dtmc(phi, vocab: Vocabulary, initial: int = 0) -> Dtmc:
    """Instantiate the activity-pattern template for one pattern matrix.

    One label per view (``x = id``), a state reward ``r_<view>`` worth 1 in
    that view, and the per-transition ``r_Steps`` structure.
    """
    n = vocab.size
    labels = {name: {i} for i, name in vocab.entries()}
    rewards = {f"r_{name}": state_reward(n, [i]) for i, name in vocab.entries()}
    rewards[STEPS_REWARD] = steps_reward(n)
    return build_dtmc(phi, initial, labels, rewards)


def normalize_counts(counts) -> np.ndarray:
    """Row-normalize a count matrix; rows with no mass become self-loops."""
    C = np.asarray(counts, dtype=float)
    totals = C.sum(axis=1)
    P = np.zeros_like(C)
    live = totals > 0
    P[live] = C[live] / totals[live, None]
    dead = np.flatnonzero(~live)
    P[dead, dead] = 1.0
    return P


def trace_to_dtmc(counts, vocab: Vocabulary, initial: int = 0) -> Dtmc:
    C = np.asarray(counts)
    if C.shape != (vocab.size, vocab.size):
        raise DtmcError(f"count matrix shape {C.shape} does not match vocabulary size {vocab.size}")
    if C.sum() == 0:
        raise DtmcError("count matrix is all zero")
    return pattern_dtmc(normalize_counts(C), vocab, initial)


def transient_distribution(dtmc: Dtmc, t: int) -> np.ndarray:
    """Distribution after exactly ``t`` steps from the initial state."""
    if t < 0:
        raise ValueError("t must be non-negative")
    pi = np.zeros(dtmc.n_states)
    pi[dtmc.initial] = 1.0
    for _ in range(t):
        pi = pi @ dtmc.matrix
    return pi
