"""Exact segmental Viterbi over cut placements for a fixed label sequence.

A "cut" k is the last frame index of segment k (0-based, inclusive).  The
final segment always ends at frame T-1, so a sequence of N segments has N-1
free cuts, each restricted to an inclusive domain.  The search maximizes

    sum_n [ log p(l_n | lambda_n) + sum_{t in segment n} loglik[n, t] ]

exactly; transition terms are constants for a fixed label sequence and are
added by the callers.  Score ties are broken toward the lexicographically
earliest cut vector.  Cost is O(T^2) per stage pair at fixed N.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

NEG_INF = -np.inf


def poisson_table(lambdas, max_len):
    """pois[n, l] = log Poisson(l | lambdas[n]) for l = 0..max_len; l=0 is -inf."""
    lam = np.asarray(lambdas, dtype=np.float64)
    lengths = np.arange(1, max_len + 1, dtype=np.float64)
    table = np.full((lam.shape[0], max_len + 1), NEG_INF)
    table[:, 1:] = lengths * np.log(lam)[:, None] - lam[:, None] - gammaln(lengths + 1.0)
    return table


def best_cuts(stage_loglik, stage_lambdas, domains, prune_factor=None):
    """Maximize the segmental objective over legal cut placements.

    stage_loglik: (N, T) per-stage frame log-likelihood rows.
    stage_lambdas: (N,) Poisson means per stage.
    domains: N-1 inclusive (lo, hi) ranges for the free cuts; must be
        non-decreasing and lie inside [0, T-2].
    prune_factor: if set (e.g. 1.5), drop any state where the accumulated
        mean length through stage k exceeds prune_factor * frames-so-far,
        and require the full sequence to satisfy sum(lambda) < factor * T.

    Returns (lengths, score).  Raises ValueError when no legal path exists
    (including the case where pruning removed every path).
    """
    loglik = np.asarray(stage_loglik, dtype=np.float64)
    lam = np.asarray(stage_lambdas, dtype=np.float64)
    n_seg, t_total = loglik.shape
    if not np.all(np.isfinite(loglik)):
        raise ValueError("non-finite frame log-likelihoods")
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    if len(domains) != n_seg - 1:
        raise ValueError("need exactly N-1 cut domains")

    cumlam = np.cumsum(lam)
    if prune_factor is not None and not (cumlam[-1] < prune_factor * t_total):
        raise ValueError("pruning eliminated every path: sum(lambda) >= %.3g * T"
                         % prune_factor)

    pois = poisson_table(lam, t_total)
    # cs[n, j+1] = sum of loglik[n, :j+1]
    cs = np.concatenate([np.zeros((n_seg, 1)), np.cumsum(loglik, axis=1)], axis=1)

    if n_seg == 1:
        score = pois[0, t_total] + cs[0, t_total]
        return np.array([t_total]), float(score)

    doms = []
    for k, (lo, hi) in enumerate(domains):
        if not (0 <= lo <= hi <= t_total - 2):
            raise ValueError("cut domain %d out of range" % k)
        doms.append(np.arange(lo, hi + 1))

    def state_mask(k, cuts):
        # keep a state only while accumulated mean length stays within budget
        if prune_factor is None:
            return np.ones(cuts.shape[0], dtype=bool)
        return cumlam[k] <= prune_factor * (cuts + 1.0)

    # suffix[k][i]: best score of segments k+1..N-1 given segment k ends at doms[k][i]
    suffix = [None] * (n_seg - 1)
    js = doms[-1]
    w = pois[n_seg - 1, t_total - 1 - js] + cs[n_seg - 1, t_total] - cs[n_seg - 1, js + 1]
    w[~state_mask(n_seg - 2, js)] = NEG_INF
    suffix[n_seg - 2] = w
    for k in range(n_seg - 3, -1, -1):
        d0, d1 = doms[k], doms[k + 1]
        w1, w2 = d0.shape[0], d1.shape[0]
        # the domains are contiguous ranges, so pois[k+1, d1[i2] - d0[i1]]
        # is Toeplitz: index a padded length-profile vector through a
        # zero-copy sliding window instead of materializing (w1, w2) grids
        off = int(d1[0]) - int(d0[0])
        base = off - (w1 - 1)
        profile = np.full(w1 - 1 + w2, NEG_INF)
        lo_d = max(base, 1)
        hi_d = off + w2 - 1
        if hi_d >= lo_d:
            profile[lo_d - base: hi_d - base + 1] = pois[k + 1, lo_d: hi_d + 1]
        windows = np.lib.stride_tricks.sliding_window_view(profile, w2)
        q = cs[k + 1, d1 + 1] + suffix[k + 1]
        # row i1 starts at offset (w1-1) - i1; the row-constant cs term is
        # pulled out of the max
        w = (windows[::-1] + q[None, :]).max(axis=1) - cs[k + 1, d0 + 1]
        w[~state_mask(k, d0)] = NEG_INF
        suffix[k] = w

    first = pois[0, doms[0] + 1] + cs[0, doms[0] + 1] + suffix[0]
    total = first.max()
    if not np.isfinite(total):
        raise ValueError("no legal path through the cut domains")

    cuts = [int(doms[0][int(np.argmax(first))])]
    for k in range(1, n_seg - 1):
        prev = cuts[-1]
        j2 = doms[k]
        seg_len = j2 - prev
        cand = np.where(
            seg_len >= 1,
            pois[k, np.clip(seg_len, 0, t_total)]
            + cs[k, j2 + 1] - cs[k, prev + 1] + suffix[k],
            NEG_INF)
        cuts.append(int(j2[int(np.argmax(cand))]))

    bounds = np.array([-1] + cuts + [t_total - 1])
    lengths = np.diff(bounds)
    return lengths, float(total)
