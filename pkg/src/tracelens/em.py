"""Admixture bigram models: likelihood, restart-based EM, simulation, label matching."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ModelFormatError, NumericError
from .ingest import TraceSet, Vocabulary

ROW_TOL = 1e-9
RESPONSIBILITY_FLOOR = 1e-12
PLATEAU_RESTARTS = 25
THREADS_ENV = "TRACELENS_THREADS"


@dataclass
class AdmixtureModel:
    """K pattern matrices ``phis`` (K, n, n) and per-trace weights ``theta`` (M, K)."""

    phis: np.ndarray
    theta: np.ndarray
    vocabulary: Vocabulary
    device_ids: list[str] | None = None
    start_symbol: int | None = None

    def __post_init__(self) -> None:
        if self.start_symbol is None:
            self.start_symbol = self.vocabulary.start_state
        self.phis = np.asarray(self.phis, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.phis.ndim != 3 or self.phis.shape[1:] != (self.n, self.n):
            raise InputError(f"pattern matrices have shape {self.phis.shape}, expected (K, {self.n}, {self.n})")
        if self.theta.ndim != 2 or self.theta.shape[1] != self.K or self.theta.shape[0] < 1:
            raise InputError(f"theta has shape {self.theta.shape}, expected (M, {self.K})")
        if self.K < 1:
            raise InputError("K must be at least 1")
        if not (np.all(np.isfinite(self.phis)) and np.all(np.isfinite(self.theta))):
            raise InputError("model parameters must be finite")
        if np.any(self.phis < 0) or np.any(self.theta < 0):
            raise InputError("model parameters must be non-negative")
        bad = np.abs(self.phis.sum(axis=2) - 1.0) > ROW_TOL
        if bad.any():
            k, i = map(int, np.argwhere(bad)[0])
            raise InputError(f"pattern {k + 1} row {i} is not stochastic")
        bad = np.abs(self.theta.sum(axis=1) - 1.0) > ROW_TOL
        if bad.any():
            raise InputError(f"theta row {int(np.flatnonzero(bad)[0])} does not sum to 1")
        if self.device_ids is not None and len(self.device_ids) != self.M:
            raise InputError("device_ids length does not match theta")

    @property
    def K(self) -> int:
        return self.phis.shape[0]

    @property
    def n(self) -> int:
        return self.vocabulary.size

    @property
    def M(self) -> int:
        return self.theta.shape[0]

    def permuted(self, perm) -> "AdmixtureModel":
        """Reorder patterns so new pattern k is old pattern perm[k]."""
        perm = list(perm)
        return AdmixtureModel(self.phis[perm], self.theta[:, perm], self.vocabulary,
                              self.device_ids, self.start_symbol)

    # -- text serialization --
    def to_text(self) -> str:
        lines = [f"admixture\tK={self.K}\tn={self.n}\tM={self.M}",
                 "vocabulary\t" + "\t".join(self.vocabulary.names),
                 f"states\tstart={self.vocabulary.start_state}\tstop={self.vocabulary.stop_state}"
                 f"\tinit={self.start_symbol}",
                 "theta"]
        ids = self.device_ids or [f"u{m}" for m in range(self.M)]
        for dev, row in zip(ids, self.theta):
            lines.append(dev + "\t" + "\t".join(repr(float(v)) for v in row))
        for k in range(self.K):
            lines.append(f"phi\t{k + 1}")
            for row in self.phis[k]:
                lines.append("\t".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AdmixtureModel":
        lines = text.splitlines()
        try:
            head = dict(part.split("=") for part in lines[0].split("\t")[1:])
            K, n, M = int(head["K"]), int(head["n"]), int(head["M"])
            names = tuple(lines[1].split("\t")[1:])
            st = dict(part.split("=") for part in lines[2].split("\t")[1:])
            vocab = Vocabulary(names, int(st["start"]), int(st["stop"]))
            if lines[3] != "theta":
                raise ValueError("missing theta block")
            ids, theta = [], []
            for line in lines[4:4 + M]:
                dev, *vals = line.split("\t")
                ids.append(dev)
                theta.append([float(v) for v in vals])
            phis = []
            pos = 4 + M
            for k in range(K):
                if lines[pos] != f"phi\t{k + 1}":
                    raise ValueError(f"missing phi block {k + 1}")
                phis.append([[float(v) for v in line.split("\t")] for line in lines[pos + 1:pos + 1 + n]])
                pos += n + 1
        except (IndexError, KeyError, ValueError) as exc:
            raise ModelFormatError(f"malformed model file: {exc}") from None
        return cls(np.array(phis), np.array(theta), vocab, ids, int(st.get("init", vocab.start_state)))


@dataclass(frozen=True)
class EmConfig:
    K: int
    max_iterations: int = 100
    max_restarts: int = 200
    convergence_tol: float = 1e-6
    rng_seed: int = 0
    stop_on_plateau: bool = False
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.K < 1 or self.max_iterations < 1 or self.max_restarts < 1:
            raise InputError("K, max_iterations and max_restarts must be positive")
        if not self.convergence_tol > 0:
            raise InputError("convergence tolerance must be positive")


@dataclass
class InferenceResult:
    model: AdmixtureModel
    history: list[float]
    restarts_used: int
    best_restart: int
    histories: list[list[float]] = field(default_factory=list)


class _Counts:
    """Sparse (trace, from, to, count) view of a TraceSet's count matrices."""

    def __init__(self, traces: TraceSet) -> None:
        X = traces.count_tensor()
        self.M, self.n = X.shape[0], X.shape[1]
        m, i, j = np.nonzero(X)
        self.m = m
        self.flat = i * self.n + j
        self.c = X[m, i, j].astype(float)
        self.X = X

    def mixture(self, phis: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """(E, K) array of Theta_mk * Phi_kij for every observed transition."""
        K = phis.shape[0]
        return theta[self.m] * phis.reshape(K, -1)[:, self.flat].T

    def loglik(self, mix: np.ndarray) -> float:
        p = mix.sum(axis=1)
        if np.any(p <= 0):
            return -math.inf
        return float(np.dot(self.c, np.log(p)))


def log_likelihood(model: AdmixtureModel, traces: TraceSet) -> float:
    """Sum over traces and observed transitions of count * ln(sum_k Theta_mk Phi_kij)."""
    if model.n != traces.vocabulary.size:
        raise InputError(f"model has {model.n} states but traces use {traces.vocabulary.size}")
    if model.M != len(traces):
        raise InputError(f"model has {model.M} theta rows but there are {len(traces)} traces")
    data = _Counts(traces)
    return data.loglik(data.mixture(model.phis, model.theta))


def _em_step(data: _Counts, phis: np.ndarray, theta: np.ndarray, mix: np.ndarray):
    K, n = phis.shape[0], data.n
    denom = np.maximum(mix.sum(axis=1), RESPONSIBILITY_FLOOR)
    w = mix * (data.c / denom)[:, None]

    new_theta = np.empty((data.M, K))
    for k in range(K):
        new_theta[:, k] = np.bincount(data.m, w[:, k], minlength=data.M)
    totals = new_theta.sum(axis=1, keepdims=True)
    new_theta = np.where(totals > 0, new_theta / np.where(totals > 0, totals, 1.0), 1.0 / K)

    acc = np.empty((K, n * n))
    for k in range(K):
        acc[k] = np.bincount(data.flat, w[:, k], minlength=n * n)
    acc = acc.reshape(K, n, n)
    rows = acc.sum(axis=2, keepdims=True)
    new_phis = np.where(rows > 0, acc / np.where(rows > 0, rows, 1.0), 1.0 / n)
    return new_phis, new_theta


def _run_restart(data: _Counts, config: EmConfig, seed: int):
    rng = np.random.default_rng(seed)
    K, n = config.K, data.n
    phis = rng.dirichlet(np.ones(n), size=(K, n))
    theta = rng.dirichlet(np.ones(K), size=data.M)
    mix = data.mixture(phis, theta)
    history = [data.loglik(mix)]
    for _ in range(config.max_iterations):
        phis, theta = _em_step(data, phis, theta, mix)
        mix = data.mixture(phis, theta)
        ll = data.loglik(mix)
        if math.isnan(ll):
            raise NumericError("log-likelihood became NaN during EM")
        prev = history[-1]
        history.append(ll)
        if math.isfinite(prev) and abs(ll - prev) <= config.convergence_tol * max(abs(prev), 1e-300):
            break
    return phis, theta, history


def _thread_count(config: EmConfig) -> int:
    if config.threads is not None:
        return max(1, config.threads)
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def infer(traces: TraceSet, config: EmConfig) -> InferenceResult:
    """Fit an admixture model by EM with independent random restarts.

    Restart r is seeded with ``rng_seed + r``. The restart with the highest
    final log-likelihood wins; ties go to the lowest restart index.
    """
    if len(traces) == 0:
        raise InputError("cannot infer a model from an empty trace set")
    data = _Counts(traces)
    seeds = [config.rng_seed + r for r in range(config.max_restarts)]

    results = []
    if config.stop_on_plateau:
        best, stale = -math.inf, 0
        for seed in seeds:
            res = _run_restart(data, config, seed)
            results.append(res)
            if res[2][-1] > best:
                best, stale = res[2][-1], 0
            else:
                stale += 1
                if stale >= PLATEAU_RESTARTS:
                    break
    else:
        threads = _thread_count(config)
        if threads == 1:
            results = [_run_restart(data, config, s) for s in seeds]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda s: _run_restart(data, config, s), seeds))

    best_index = 0
    for r, res in enumerate(results):
        if res[2][-1] > results[best_index][2][-1]:
            best_index = r
    phis, theta, history = results[best_index]
    model = AdmixtureModel(phis, theta, traces.vocabulary, traces.device_ids, traces.start_symbol)
    return InferenceResult(model, history, len(results), best_index, [res[2] for res in results])


def pooled_estimate(traces: TraceSet) -> np.ndarray:
    """Normalized pooled counts, the exact K=1 maximum-likelihood pattern.

    Rows never observed are uniform, matching the EM convention.
    """
    pooled = traces.count_tensor().sum(axis=0).astype(float)
    rows = pooled.sum(axis=1, keepdims=True)
    n = pooled.shape[0]
    return np.where(rows > 0, pooled / np.where(rows > 0, rows, 1.0), 1.0 / n)


def random_theta(M: int, K: int, rng: np.random.Generator, alpha: float = 1.0) -> np.ndarray:
    return rng.dirichlet(np.full(K, alpha), size=M)


def _draw(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u, side="right")), cdf.shape[-1] - 1)


def generate_traces(model: AdmixtureModel, traces_per_user: int = 1, seed: int = 0,
                    max_length: int = 500, stop_terminates: bool = True,
                    start: int | None = None) -> TraceSet:
    """Simulate traces from the admixture generative process.

    At every step a pattern is drawn from the user's theta row, then the
    next state from that pattern's row for the current state. A trace ends
    when the stop view is emitted (unless ``stop_terminates`` is false) or
    when it reaches ``max_length`` states.
    """
    if max_length < 2:
        raise InputError("max_length must be at least 2")
    rng = np.random.default_rng(seed)
    vocab = model.vocabulary
    start = model.start_symbol if start is None else start
    theta_cdf = np.cumsum(model.theta, axis=1)
    phi_cdf = np.cumsum(model.phis, axis=2)
    ids = model.device_ids or [f"u{m:04d}" for m in range(model.M)]
    traces = []
    for m in range(model.M):
        for t in range(traces_per_user):
            state = start
            seq = [state]
            while len(seq) < max_length:
                k = _draw(theta_cdf[m], rng.random())
                state = _draw(phi_cdf[k, state], rng.random())
                seq.append(state)
                if stop_terminates and state == vocab.stop_state:
                    break
            name = ids[m] if traces_per_user == 1 else f"{ids[m]}#{t}"
            traces.append((name, seq))
    return TraceSet(vocab, traces, start)


def row_tv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-row total-variation distance between two stochastic matrices."""
    return 0.5 * np.abs(np.asarray(a) - np.asarray(b)).sum(axis=-1)


def match_patterns(inferred: AdmixtureModel, truth: AdmixtureModel, max_k: int = 6):
    """Resolve label switching by exhaustive search over pattern permutations.

    Returns ``(perm, distances)`` with 0-based ``perm``: inferred pattern
    ``perm[k]`` corresponds to true pattern ``k``; ``distances[k]`` is the
    largest row TV distance between the pair.
    """
    if inferred.K != truth.K or inferred.n != truth.n:
        raise InputError("models differ in K or state count")
    K = truth.K
    if K > max_k:
        raise InputError(f"exhaustive matching supports K <= {max_k}, got {K}")
    tv = np.array([[row_tv(inferred.phis[a], truth.phis[b]) for b in range(K)] for a in range(K)])
    best = min(itertools.permutations(range(K)),
               key=lambda perm: sum(tv[perm[k], k].sum() for k in range(K)))
    distances = np.array([tv[best[k], k].max() for k in range(K)])
    return tuple(best), distances
