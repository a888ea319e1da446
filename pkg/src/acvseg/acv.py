"""Pseudo-ground-truth generation for one video.

Per-class saliency peaks become anchors, anchors define a graph of candidate
segmentations containing each action of the video's set exactly once in
anchor order, and an exact segmental Viterbi picks the best cuts.  The
result is the pseudo ground truth the scorer is trained on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dp
from .core import Segmentation


@dataclass(frozen=True)
class Anchor:
    """A short interval believed to lie inside a segment of `action`.

    start/end are inclusive frame indices; center is the saliency peak the
    interval was grown from.
    """

    action: int
    center: int
    start: int
    end: int

    def __post_init__(self):
        if not self.start <= self.center <= self.end:
            raise ValueError("anchor center outside its interval")
        if self.start < 0:
            raise ValueError("anchor interval out of range")


@dataclass(frozen=True)
class AnchorSet:
    """One anchor per action of the video's set; pairwise disjoint intervals,
    stored sorted by center."""

    anchors: tuple

    def __init__(self, anchors):
        anchors = tuple(sorted(anchors, key=lambda a: a.center))
        if not anchors:
            raise ValueError("no anchors")
        actions = [a.action for a in anchors]
        if len(set(actions)) != len(actions):
            raise ValueError("duplicate action among anchors")
        for prev, cur in zip(anchors, anchors[1:]):
            if cur.start <= prev.end:
                raise ValueError("anchor intervals overlap")
        object.__setattr__(self, "anchors", anchors)

    def __len__(self):
        return len(self.anchors)

    def __iter__(self):
        return iter(self.anchors)


@dataclass(frozen=True)
class AnchorGraph:
    """Candidate segmentations: segment n must contain anchor n entirely.

    cut_domains[n] is the inclusive (lo, hi) range for the last frame of
    segment n; segment 1 starts at frame 0 and the last segment ends at
    frame T-1.
    """

    anchors: AnchorSet
    num_frames: int
    cut_domains: tuple


def window_sum(rows, tau):
    """Sliding sum over a (2*tau+1)-frame window, truncated at the borders."""
    rows = np.asarray(rows, dtype=np.float64)
    t_total = rows.shape[1]
    cs = np.concatenate([np.zeros((rows.shape[0], 1)), np.cumsum(rows, axis=1)], axis=1)
    t = np.arange(t_total)
    hi = np.minimum(t + tau + 1, t_total)
    lo = np.maximum(t - tau, 0)
    return cs[:, hi] - cs[:, lo]


def compute_saliency(scores, action_set, tau=15):
    """S[c, t]: windowed sum of log f_c margins over the per-frame worst class
    of the set.  Rows follow the sorted order of `action_set`; every entry is
    non-negative."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    logf = scores.log_sigmoid[action_set.as_array()]
    margin = logf - logf.min(axis=0, keepdims=True)
    return window_sum(margin, tau)


def saliency_argmin(scores, action_set):
    """Row index (into the sorted set) of the per-frame worst class; the
    subgradient of the margin's min lands here."""
    logf = scores.log_sigmoid[action_set.as_array()]
    return logf.argmin(axis=0)


def saliency_backward(d_saliency, argmin_rows, tau):
    """Map a gradient at the saliency matrix back to one at log f_c rows.

    The window sum is self-adjoint, so the same truncated window applies;
    the min subtraction routes a negative column sum to the argmin row.
    """
    d_margin = window_sum(d_saliency, tau)
    d_logf = d_margin.copy()
    d_logf[argmin_rows, np.arange(d_margin.shape[1])] -= d_margin.sum(axis=0)
    return d_logf


def select_anchors(saliency, actions, lambdas, alpha=0.6):
    """Place one anchor per action at its saliency peak, grow an interval of
    half-width floor(alpha * lambda / 2), and resolve overlaps.

    Overlaps are resolved iteratively: of an overlapping pair, the anchor
    with the lower center saliency moves to its next-best center whose
    interval clears every other current anchor.  If some anchor runs out of
    centers, alpha is halved for the whole video and selection restarts;
    once every interval is a single frame and placement still fails, that is
    an error.

    saliency rows, `actions` (sorted ids) and `lambdas` are aligned.
    """
    s = np.asarray(saliency, dtype=np.float64)
    m, t_total = s.shape
    actions = [int(c) for c in actions]
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if len(actions) != m or lambdas.shape != (m,):
        raise ValueError("need one action and one lambda per saliency row")
    if alpha <= 0:
        raise ValueError("alpha must be positive")

    # candidate centers per class: saliency descending, earlier frame on ties
    order = [np.lexsort((np.arange(t_total), -s[i])) for i in range(m)]

    while True:
        radius = np.floor(alpha * lambdas / 2.0).astype(np.int64)
        placed = _place(s, order, radius, t_total)
        if placed is not None:
            return AnchorSet(Anchor(actions[i], int(c),
                                    int(max(0, c - radius[i])),
                                    int(min(t_total - 1, c + radius[i])))
                             for i, c in enumerate(placed))
        if np.all(radius == 0):
            raise ValueError("cannot place %d disjoint anchors in %d frames" % (m, t_total))
        alpha /= 2.0


def _place(s, order, radius, t_total):
    m = len(order)
    ptr = [0] * m
    centers = [int(order[i][0]) for i in range(m)]

    def interval(i, c):
        return max(0, c - int(radius[i])), min(t_total - 1, c + int(radius[i]))

    for _ in range(m * t_total + 1):
        spans = [interval(i, centers[i]) for i in range(m)]
        clash = None
        for i in sorted(range(m), key=lambda i: (spans[i][0], i)):
            for j in range(m):
                if j != i and not (spans[j][1] < spans[i][0] or spans[j][0] > spans[i][1]):
                    clash = (i, j) if (s[i, centers[i]], -i) < (s[j, centers[j]], -j) else (j, i)
                    break
            if clash:
                break
        if clash is None:
            return centers
        loser, _ = clash
        others = [spans[j] for j in range(m) if j != loser]
        while True:
            ptr[loser] += 1
            if ptr[loser] >= t_total:
                return None
            c = int(order[loser][ptr[loser]])
            lo, hi = interval(loser, c)
            if all(o_hi < lo or o_lo > hi for o_lo, o_hi in others):
                centers[loser] = c
                break
    raise RuntimeError("anchor placement failed to settle")  # unreachable


def build_graph(anchor_set, num_frames):
    """Cut n may land anywhere from the end of anchor n through the frame
    before anchor n+1 starts."""
    anchors = list(anchor_set)
    if anchors[-1].end > num_frames - 1:
        raise ValueError("anchor interval beyond the last frame")
    domains = tuple((a.end, b.start - 1) for a, b in zip(anchors, anchors[1:]))
    return AnchorGraph(anchor_set, num_frames, domains)


def constrained_viterbi(graph, loglik, hmm_params, prune=False):
    """Best segmentation through the anchor graph under the HMM objective.

    loglik rows follow the sorted order of the graph's actions.  Returns
    (Segmentation, log-score); the score includes length, likelihood and
    transition terms.  Ties go to the earliest cuts.
    """
    loglik = np.asarray(loglik, dtype=np.float64)
    actions = [a.action for a in graph.anchors]
    classes = sorted(actions)
    if loglik.shape != (len(classes), graph.num_frames):
        raise ValueError("need a likelihood row per action of the set")
    row = {c: i for i, c in enumerate(classes)}
    stage_loglik = loglik[[row[c] for c in actions]]
    stage_lambdas = hmm_params.lambdas[actions]
    lengths, score = dp.best_cuts(stage_loglik, stage_lambdas, graph.cut_domains,
                                  prune_factor=1.5 if prune else None)
    with np.errstate(divide="ignore"):
        score += np.log(hmm_params.transitions[actions[:-1], actions[1:]]).sum()
    return Segmentation(actions, lengths), float(score)


def write_acv_dump(path, anchor_set, seg):
    """Debug dump: the anchors and the cuts chosen for one video."""
    lines = ["anchors"]
    for a in anchor_set:
        lines.append("%d center %d interval %d %d" % (a.action, a.center, a.start, a.end))
    lines.append("cuts")
    bounds = np.cumsum(seg.lengths)
    lines.append(" ".join(str(int(b) - 1) for b in bounds))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
