"""Explicit-state rPCTL model checking over dense DTMCs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..dtmc import STEPS_REWARD, TRANSITION, Dtmc, RewardStructure, state_reward, steps_reward
from ..errors import CheckError, NumericError
from .ast import (And, Atom, Cumulative, Filter, Next, Not, ProbQuery, RewardQuery,
                  TrueF)
from .parser import parse_property

INIT_LABEL = "init"

# Reroute to value iteration above this condition number.
MAX_CONDITION = 1e12
VI_TOL = 1e-10
VI_MAX_ITERS = 100_000

PROBABILITY = "probability"
REWARD = "reward"
BOOLEAN = "boolean"


@dataclass(frozen=True)
class CheckResult:
    values: np.ndarray
    state: int
    kind: str

    @property
    def value(self) -> Union[float, bool]:
        v = self.values[self.state]
        return bool(v) if self.kind == BOOLEAN else float(v)


# -- state formulas -------------------------------------------------------

def eval_state_formula(dtmc: Dtmc, phi) -> np.ndarray:
    if isinstance(phi, TrueF):
        return np.ones(dtmc.n_states, dtype=bool)
    if isinstance(phi, Atom):
        return _label_vector(dtmc, phi.label)
    if isinstance(phi, Not):
        return ~eval_state_formula(dtmc, phi.arg)
    if isinstance(phi, And):
        return eval_state_formula(dtmc, phi.left) & eval_state_formula(dtmc, phi.right)
    if isinstance(phi, (ProbQuery, RewardQuery)):
        if phi.bound.is_query:
            raise CheckError(f"quantitative query {phi} used as a state formula")
        values = quantitative(dtmc, phi)
        return np.array([phi.bound.test(v) for v in values], dtype=bool)
    if isinstance(phi, Filter):
        raise CheckError("filter is only allowed at the top level of a property")
    raise CheckError(f"not a state formula: {phi!r}")


def _label_vector(dtmc: Dtmc, label: str) -> np.ndarray:
    out = np.zeros(dtmc.n_states, dtype=bool)
    if label in dtmc.labels:
        out[list(dtmc.labels[label])] = True
    elif label == INIT_LABEL:
        out[dtmc.initial] = True
    else:
        raise CheckError(f"unknown label {label!r}")
    return out


# -- probabilities --------------------------------------------------------

def next_prob(dtmc: Dtmc, phi) -> np.ndarray:
    target = _as_mask(dtmc, phi)
    return dtmc.matrix[:, target].sum(axis=1)


def bounded_until_prob(dtmc: Dtmc, phi1, phi2, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("step bound must be non-negative")
    sat1, sat2 = _as_mask(dtmc, phi1), _as_mask(dtmc, phi2)
    v = sat2.astype(float)
    live = sat1 & ~sat2
    for _ in range(int(n)):
        v = np.where(sat2, 1.0, np.where(live, dtmc.matrix @ v, 0.0))
    return v


def prob0(dtmc: Dtmc, sat1: np.ndarray, sat2: np.ndarray) -> np.ndarray:
    """States from which no sat1-path reaches sat2."""
    reach = sat2.copy()
    edges = dtmc.matrix > 0
    while True:
        grow = sat1 & ~reach & edges[:, reach].any(axis=1)
        if not grow.any():
            return ~reach
        reach |= grow


def prob1(dtmc: Dtmc, sat1: np.ndarray, sat2: np.ndarray, no: np.ndarray | None = None) -> np.ndarray:
    """States satisfying sat1 U sat2 with probability exactly 1."""
    if no is None:
        no = prob0(dtmc, sat1, sat2)
    # anything that can reach a prob0 state through sat1 & !sat2 states
    bad = no.copy()
    edges = dtmc.matrix > 0
    mid = sat1 & ~sat2
    while True:
        grow = mid & ~bad & edges[:, bad].any(axis=1)
        if not grow.any():
            return ~bad
        bad |= grow


def unbounded_until_prob(dtmc: Dtmc, phi1, phi2) -> np.ndarray:
    sat1, sat2 = _as_mask(dtmc, phi1), _as_mask(dtmc, phi2)
    no = prob0(dtmc, sat1, sat2)
    yes = prob1(dtmc, sat1, sat2, no)
    maybe = ~(no | yes)
    x = yes.astype(float)
    if maybe.any():
        P = dtmc.matrix
        A = P[np.ix_(maybe, maybe)]
        b = P[np.ix_(maybe, yes)].sum(axis=1)
        exit_mass = P[np.ix_(maybe, ~maybe)].sum(axis=1)
        x[maybe] = np.clip(_solve_fixed_point(A, b, exit_mass), 0.0, 1.0)
    return x


def _solve_fixed_point(A: np.ndarray, b: np.ndarray, exit_mass: np.ndarray | None = None) -> np.ndarray:
    """Solve x = A x + b for substochastic A.

    Direct solve when well conditioned. Otherwise subtraction-free state
    elimination if the per-row exit mass (1 - row sum of A, taken straight
    from the chain) is known, else value iteration.
    """
    M = np.eye(A.shape[0]) - A
    if np.linalg.cond(M) < MAX_CONDITION:
        try:
            return np.linalg.solve(M, b)
        except np.linalg.LinAlgError:
            pass
    if exit_mass is not None:
        return _eliminate(A, b, exit_mass)
    x = np.zeros_like(b)
    for _ in range(VI_MAX_ITERS):
        nxt = A @ x + b
        if np.max(np.abs(nxt - x)) < VI_TOL:
            return nxt
        x = nxt
    raise NumericError("value iteration did not converge")


def _eliminate(A: np.ndarray, b: np.ndarray, exit_mass: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman style elimination; only adds non-negative terms."""
    A, b, e = A.astype(float), b.astype(float), exit_mass.astype(float)
    n = A.shape[0]
    out = np.empty(n)
    for k in reversed(range(n)):
        # remaining states are 0..k; 1 - A[k, k] without cancellation
        out[k] = A[k, :k].sum() + e[k]
        if out[k] <= 0:
            raise NumericError("linear system is singular")
        f = A[:k, k] / out[k]
        A[:k, :k] += np.outer(f, A[k, :k])
        b[:k] += f * b[k]
        e[:k] += f * e[k]
    x = np.empty(n)
    for k in range(n):
        x[k] = (b[k] + A[k, :k] @ x[:k]) / out[k]
    return x


# -- rewards --------------------------------------------------------------

def reward_structure(dtmc: Dtmc, name: str) -> RewardStructure:
    """Look up a reward structure, synthesizing ``r_Steps`` and ``r_<label>`` on demand."""
    if name in dtmc.reward_structures:
        return dtmc.reward_structures[name]
    if name == STEPS_REWARD:
        return steps_reward(dtmc.n_states)
    if name.startswith("r_") and name[2:] in dtmc.labels:
        return state_reward(dtmc.n_states, dtmc.labels[name[2:]])
    raise CheckError(f"unknown reward structure {name!r}")


def _coerce_structure(dtmc: Dtmc, structure) -> RewardStructure:
    return reward_structure(dtmc, structure) if isinstance(structure, str) else structure


def cumulative_reward(dtmc: Dtmc, structure, N: int) -> np.ndarray:
    """Expected reward accumulated over the first N steps.

    State rewards are earned for occupancy at steps 0..N-1; transition
    rewards on each of the N transitions.
    """
    if N < 0:
        raise ValueError("horizon must be non-negative")
    rs = _coerce_structure(dtmc, structure)
    P = dtmc.matrix
    uniform = rs.kind == TRANSITION and np.all(rs.values == rs.values.flat[0])
    if uniform:
        # rows are stochastic, so a constant per-transition reward pays c*N
        # exactly; skip the products that would add float drift
        return np.full(dtmc.n_states, float(rs.values.flat[0]) * int(N))
    step = rs.state_part() + rs.transition_part(P)
    v = np.zeros(dtmc.n_states)
    for _ in range(int(N)):
        v = step + P @ v
    return v


def reachability_reward(dtmc: Dtmc, structure, phi) -> np.ndarray:
    """Expected reward until first reaching phi; inf where reaching phi is not certain."""
    rs = _coerce_structure(dtmc, structure)
    target = _as_mask(dtmc, phi)
    everywhere = np.ones(dtmc.n_states, dtype=bool)
    certain = prob1(dtmc, everywhere, target)
    x = np.full(dtmc.n_states, math.inf)
    x[target] = 0.0
    rest = certain & ~target
    if rest.any():
        P = dtmc.matrix
        step = rs.state_part() + rs.transition_part(P)
        A = P[np.ix_(rest, rest)]
        exit_mass = P[np.ix_(rest, ~rest)].sum(axis=1)
        x[rest] = np.maximum(_solve_fixed_point(A, step[rest], exit_mass), 0.0)
    return x


# -- queries --------------------------------------------------------------

def quantitative(dtmc: Dtmc, query) -> np.ndarray:
    """Per-state values of a P or R query, ignoring any bound."""
    if isinstance(query, ProbQuery):
        path = query.path
        if isinstance(path, Next):
            return next_prob(dtmc, path.arg)
        if math.isinf(path.bound):
            return unbounded_until_prob(dtmc, path.left, path.right)
        return bounded_until_prob(dtmc, path.left, path.right, int(path.bound))
    if isinstance(query, RewardQuery):
        rs = reward_structure(dtmc, query.structure)
        if isinstance(query.kind, Cumulative):
            return cumulative_reward(dtmc, rs, query.kind.steps)
        return reachability_reward(dtmc, rs, query.kind.target)
    raise CheckError(f"not a quantitative query: {query}")


def filter_eval(dtmc: Dtmc, query, condition) -> CheckResult:
    mask = _as_mask(dtmc, condition)
    matches = int(mask.sum())
    if matches != 1:
        raise CheckError(f"filter matched {matches} states")
    inner = check(dtmc, query)
    return CheckResult(inner.values, int(np.flatnonzero(mask)[0]), inner.kind)


def check(dtmc: Dtmc, prop) -> CheckResult:
    """Evaluate a property (AST or text). Value reported at the initial or filter state."""
    if isinstance(prop, str):
        prop = parse_property(prop)
    if isinstance(prop, Filter):
        return filter_eval(dtmc, prop.query, prop.condition)
    if isinstance(prop, (ProbQuery, RewardQuery)) and prop.bound.is_query:
        kind = PROBABILITY if isinstance(prop, ProbQuery) else REWARD
        values = quantitative(dtmc, prop)
        if not np.all(np.isfinite(values) | (values == math.inf)):
            raise NumericError(f"non-finite result for {prop}")
        return CheckResult(values, dtmc.initial, kind)
    return CheckResult(eval_state_formula(dtmc, prop), dtmc.initial, BOOLEAN)


def _as_mask(dtmc: Dtmc, phi) -> np.ndarray:
    if isinstance(phi, np.ndarray) and phi.dtype == bool:
        return phi
    return eval_state_formula(dtmc, phi)
