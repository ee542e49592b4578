"""Brute-force references, deliberately free of the checker's recursions.

Every function enumerates all paths of the requested length explicitly and
weights them by their probability; nothing reuses the backward iterations.
"""

import numpy as np


def path_table(P, start, length):
    """All state sequences of ``length`` transitions from ``start`` with their weights."""
    n = P.shape[0]
    if length == 0:
        return np.array([[start]]), np.ones(1)
    # every tail in lexicographic order, as digits of 0..n^length-1 in base n
    tails = np.array(np.unravel_index(np.arange(n ** length), (n,) * length)).T
    seqs = np.hstack([np.full((len(tails), 1), start), tails])
    w = np.prod(P[seqs[:, :-1], seqs[:, 1:]], axis=1)
    keep = w > 0
    return seqs[keep], w[keep]


def until_flags(seqs, sat1, sat2, bound):
    """Per path: does sat1 U<=bound sat2 hold from position 0?"""
    s1 = sat1[seqs[:, : bound + 1]]
    s2 = sat2[seqs[:, : bound + 1]]
    # sat1 holds on every position strictly before i
    before = np.hstack([np.ones((len(seqs), 1), dtype=bool),
                        np.cumprod(s1, axis=1)[:, :-1].astype(bool)])
    return np.any(s2 & before, axis=1)


def until_by_bound(seqs, w, sat1, sat2):
    """Probability of sat1 U<=b sat2 for every b up to the path length.

    A path satisfies the bounded until for b exactly when its first
    sat2 position (with sat1 on everything before it) is at most b.
    """
    length = seqs.shape[1]
    ok = until_flags(seqs, sat1, sat2, length - 1)
    s1 = sat1[seqs]
    s2 = sat2[seqs]
    before = np.hstack([np.ones((len(seqs), 1), dtype=bool),
                        np.cumprod(s1, axis=1)[:, :-1].astype(bool)])
    first = np.argmax(s2 & before, axis=1)
    return np.cumsum(np.bincount(first[ok], w[ok], minlength=length))


def bounded_until(P, sat1, sat2, bound):
    """Probability of sat1 U<=bound sat2 from every state, by enumeration."""
    out = np.zeros(P.shape[0])
    for s in range(P.shape[0]):
        seqs, w = path_table(P, s, bound)
        out[s] = w[until_flags(seqs, sat1, sat2, bound)].sum()
    return out


def next_prob(P, sat):
    out = np.zeros(P.shape[0])
    for s in range(P.shape[0]):
        seqs, w = path_table(P, s, 1)
        out[s] = w[sat[seqs[:, 1]]].sum()
    return out


def prefix_reward(seqs, w, state_r, trans_r, N):
    """Expected reward of the first N transitions over an enumerated path table."""
    q = seqs[:, : N + 1]
    r = state_r[q[:, :-1]].sum(axis=1) + trans_r[q[:, :-1], q[:, 1:]].sum(axis=1)
    return float((w * r).sum())


def cumulative(P, state_r, trans_r, N):
    """Expected reward over N steps: state reward at steps 0..N-1 plus each transition."""
    out = np.zeros(P.shape[0])
    for s in range(P.shape[0]):
        seqs, w = path_table(P, s, N)
        out[s] = prefix_reward(seqs, w, state_r, trans_r, N)
    return out


def random_dtmc_matrix(rng, n, sparsity=0.4):
    P = rng.random((n, n))
    P[rng.random((n, n)) < sparsity] = 0.0
    for i in range(n):
        if P[i].sum() == 0:
            P[i, rng.integers(n)] = 1.0
    return P / P.sum(axis=1, keepdims=True)
