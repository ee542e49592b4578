"""Ground-truth admixture models and synthetic usage logs for end-to-end validation."""

from __future__ import annotations

import numpy as np

from .em import AdmixtureModel, random_theta
from .ingest import SECONDS_PER_DAY, Session, UserRecord, Vocabulary, default_vocabulary

# 2013-08-20 00:00:00 UTC
BASE_TIME = 1376956800

# Per-view successor weights for two AppTracker-like patterns. Keys are view
# names; rows are normalized on construction.
_OVERALL = {
    "TermsAndConditions": {"Main": 1},
    "Main": {"TopApps": 45, "Stats": 25, "UseStop": 20, "Settings": 5, "Info": 5},
    "TopApps": {"UsageBarChartTopApps": 45, "Main": 35, "UseStop": 20},
    "Last7Days": {"Main": 60, "UseStop": 40},
    "PeriodSelector": {"AppsInPeriod": 50, "Main": 50},
    "AppsInPeriod": {"UsageBarChartApps": 50, "Main": 50},
    "Settings": {"Main": 70, "UseStop": 30},
    "UseStop": {"Main": 85, "TopApps": 15},
    "Stats": {"UsageBarChartStats": 50, "Main": 30, "UseStop": 20},
    "UsageBarChartTopApps": {"TopApps": 80, "UseStop": 20},
    "UsageBarChartStats": {"Stats": 80, "UseStop": 20},
    "Feedback": {"Task": 60, "Main": 40},
    "UsageBarChartApps": {"AppsInPeriod": 70, "UseStop": 30},
    "Info": {"Main": 60, "Feedback": 40},
    "Task": {"Feedback": 50, "Main": 50},
}

_TIME_PARTITIONED = {
    "TermsAndConditions": {"Main": 1},
    "Main": {"Last7Days": 35, "PeriodSelector": 35, "TopApps": 10, "Feedback": 10, "UseStop": 10},
    "TopApps": {"Stats": 60, "Last7Days": 40},
    "Last7Days": {"PeriodSelector": 50, "Main": 30, "UseStop": 20},
    "PeriodSelector": {"Last7Days": 30, "UseStop": 30, "Settings": 40},
    "AppsInPeriod": {"PeriodSelector": 60, "UseStop": 40},
    "Settings": {"PeriodSelector": 50, "Info": 50},
    "UseStop": {"Last7Days": 50, "PeriodSelector": 50},
    "Stats": {"TopApps": 50, "Last7Days": 50},
    "UsageBarChartTopApps": {"Main": 100},
    "UsageBarChartStats": {"Main": 100},
    "Feedback": {"Main": 50, "UseStop": 50},
    "UsageBarChartApps": {"PeriodSelector": 100},
    "Info": {"Last7Days": 50, "UseStop": 50},
    "Task": {"UseStop": 100},
}


def _matrix(weights: dict, vocab: Vocabulary) -> np.ndarray:
    n = vocab.size
    P = np.zeros((n, n))
    for src, row in weights.items():
        for dst, w in row.items():
            P[vocab.index(src), vocab.index(dst)] = w
    return P / P.sum(axis=1, keepdims=True)


def apptracker_patterns(vocab: Vocabulary | None = None) -> np.ndarray:
    """Two hand-built patterns: overall viewing and time-partitioned viewing."""
    vocab = vocab or default_vocabulary()
    return np.stack([_matrix(_OVERALL, vocab), _matrix(_TIME_PARTITIONED, vocab)])


def separated_patterns(n: int, K: int = 2, seed: int = 0, support: int = 3) -> np.ndarray:
    """K patterns whose rows put their mass on disjoint successor sets.

    Row i of pattern k is supported on ``support`` states chosen from a
    per-row random permutation, so any two patterns are at TV distance 1
    row by row. Weights are Dirichlet(2) draws floored at 0.1 before
    renormalizing.
    """
    if K * support > n:
        raise ValueError("not enough states for disjoint supports")
    rng = np.random.default_rng(seed)
    phis = np.zeros((K, n, n))
    for i in range(n):
        order = rng.permutation(n)
        for k in range(K):
            targets = order[k * support:(k + 1) * support]
            w = np.maximum(rng.dirichlet(np.full(support, 2.0)), 0.1)
            phis[k, i, targets] = w / w.sum()
    return phis


def ground_truth(phis: np.ndarray, M: int, vocab: Vocabulary, seed: int = 0,
                 alpha: float = 1.0) -> AdmixtureModel:
    rng = np.random.default_rng(seed)
    theta = random_theta(M, phis.shape[0], rng, alpha)
    return AdmixtureModel(phis, theta, vocab, [f"synth-{m:04d}" for m in range(M)])


def synth_records(model: AdmixtureModel, seed: int = 0, mean_sessions: float = 10.0,
                  days: int = 90, max_session_length: int = 200) -> list[UserRecord]:
    """Simulate per-user logged sessions from an admixture model.

    A user's whole history is one sample path of the user's mixture; each
    session runs until the stop view and the next session continues from
    it. Sessions are spread over ``days`` days after first use, the first at
    day 0.
    """
    rng = np.random.default_rng(seed)
    vocab = model.vocabulary
    theta_cdf = np.cumsum(model.theta, axis=1)
    phi_cdf = np.cumsum(model.phis, axis=2)
    ids = model.device_ids or [f"synth-{m:04d}" for m in range(model.M)]

    def draw(cdf, u):
        return min(int(np.searchsorted(cdf, u, side="right")), cdf.shape[-1] - 1)

    records = []
    for m in range(model.M):
        n_sessions = 1 + int(rng.poisson(max(mean_sessions - 1, 0)))
        offsets = np.sort(rng.uniform(0, days * SECONDS_PER_DAY, size=n_sessions - 1))
        first = BASE_TIME + int(rng.integers(0, SECONDS_PER_DAY // 2))
        starts = [first] + [first + int(o) for o in offsets]
        state = vocab.start_state
        sessions = []
        clock = first
        for s, start in enumerate(starts):
            clock = max(start, clock + 60)
            events = []
            if s == 0:
                events.append((clock, state))
            while True:
                k = draw(theta_cdf[m], rng.random())
                state = draw(phi_cdf[k, state], rng.random())
                clock += int(rng.integers(2, 30))
                events.append((clock, state))
                if state == vocab.stop_state:
                    break
                if len(events) >= max_session_length:
                    state = vocab.stop_state
                    events.append((clock, state))
                    break
            sessions.append(Session(tuple(events)))
        records.append(UserRecord(ids[m], first, clock, tuple(sessions)))
    return records
