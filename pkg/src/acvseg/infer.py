"""Monte-Carlo segmentation and alignment at test time.

Candidate action sequences are sampled from an action set until their mean
lengths cover the video, each candidate is aligned by the exact segmental
Viterbi, and the best posterior wins.  Segmentation draws the set from the
training ground truths; alignment is told the true set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dp, hmm as hmm_mod, scorer
from .core import ActionSet, Segmentation
from .rng import fork_rng

RESAMPLE_CAP = 10 ** 6


@dataclass(frozen=True)
class CandidateSequence:
    """Ordered labels covering `source_set`, no immediate repeats."""

    actions: tuple
    source_set: ActionSet


def sample_sequences(action_set, lambdas, num_frames, k, rng):
    """Draw k candidate sequences whose accumulated mean lengths exceed the
    video length.

    Labels are uniform over the set with no immediate repeats (a singleton
    set is exempt); sampling stops right after the sum of lambdas passes
    num_frames, and sequences that fail to cover the set are discarded and
    redrawn, up to a global attempt cap.
    """
    if isinstance(rng, (int, np.integer)):
        rng = fork_rng(rng, "sample")
    labels = action_set.as_array()
    lam = np.asarray(lambdas, dtype=np.float64)[labels]
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    need = set(labels.tolist())
    out = []
    attempts = 0
    while len(out) < k:
        attempts += 1
        if attempts > RESAMPLE_CAP:
            raise ValueError("gave up after %d sampling attempts" % RESAMPLE_CAP)
        seq = []
        total = 0.0
        prev = -1
        while total <= num_frames:
            if labels.shape[0] == 1:
                pick = 0
            else:
                pick = int(rng.integers(labels.shape[0]))
                while labels[pick] == prev:
                    pick = int(rng.integers(labels.shape[0]))
            total += lam[pick]
            prev = int(labels[pick])
            seq.append(prev)
        if need.issubset(seq):
            out.append(CandidateSequence(tuple(seq), action_set))
    return out


def _alignment_domains(n_seg, num_frames):
    # every segment keeps at least one frame
    return tuple((k, num_frames - 1 - (n_seg - 1 - k)) for k in range(n_seg - 1))


def _likelihood_rows(scores, classes, priors):
    return hmm_mod.log_frame_likelihood(scores.log_softmax[classes], priors[classes])


def _align(actions, loglik_by_class, hmm_params, num_frames):
    actions = list(actions)
    if num_frames < len(actions):
        raise ValueError("more segments than frames")
    stage_loglik = np.stack([loglik_by_class[c] for c in actions])
    lengths, score = dp.best_cuts(stage_loglik, hmm_params.lambdas[actions],
                                  _alignment_domains(len(actions), num_frames))
    with np.errstate(divide="ignore"):
        score += np.log(hmm_params.transitions[actions[:-1], actions[1:]]).sum()
    return Segmentation(actions, lengths), float(score)


def align_sequence(candidate, x, mlp_params, hmm_params):
    """Best cut placement for one fixed label sequence; returns
    (Segmentation, log-score)."""
    actions = candidate.actions if isinstance(candidate, CandidateSequence) else tuple(candidate)
    scores = scorer.forward(mlp_params, x)
    classes = sorted(set(actions))
    rows = _likelihood_rows(scores, classes, hmm_params.priors)
    by_class = {c: rows[i] for i, c in enumerate(classes)}
    return _align(actions, by_class, hmm_params, scores.logits.shape[1])


def _best_over_candidates(x, action_set, mlp_params, hmm_params, k, rng):
    scores = scorer.forward(mlp_params, x)
    num_frames = scores.logits.shape[1]
    seqs = sample_sequences(action_set, hmm_params.lambdas, num_frames, k, rng)
    classes = sorted(action_set)
    rows = _likelihood_rows(scores, classes, hmm_params.priors)
    by_class = {c: rows[i] for i, c in enumerate(classes)}
    best = None
    cache = {}
    for cand in seqs:
        # singleton sets sample immediate repeats; the merged form scores
        # identically except through self-transitions, which carry no mass
        actions = tuple(c for i, c in enumerate(cand.actions)
                        if i == 0 or c != cand.actions[i - 1])
        if actions not in cache:
            cache[actions] = _align(actions, by_class, hmm_params, num_frames)
        seg, score = cache[actions]
        if best is None or score > best[1]:
            best = (seg, score)
    return best


def segment_video(x, training_sets, mlp_params, hmm_params, k=1000, seed=0):
    """Segment a test video: sample one training action set uniformly, then
    pick the best-aligned of k candidate sequences drawn from it."""
    training_sets = list(training_sets)
    if not training_sets:
        raise ValueError("no training sets to sample from")
    rng = fork_rng(seed, "segment")
    chosen = training_sets[int(rng.integers(len(training_sets)))]
    return _best_over_candidates(x, chosen, mlp_params, hmm_params, k, rng)


def align_video(x, true_set, mlp_params, hmm_params, k=1000, seed=0):
    """Align a test video against its known action set."""
    rng = fork_rng(seed, "align")
    return _best_over_candidates(x, true_set, mlp_params, hmm_params, k, rng)
