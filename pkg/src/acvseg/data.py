"""Plain-text corpus formats and the synthetic corpus generator.

Every artifact is line-oriented text: feature matrices with a shape header,
per-frame label files with one action name per line, tab-separated corpus
manifests, and sectioned checkpoints.  Floats are written with repr so a
read-back is bit-exact.  The generator writes hidden frame labels to a
separate file that the training path never reads.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .core import ActionSet, FrameFeatures, FrameLabeling, Vocabulary
from .hmm import HmmParams
from .rng import fork_rng
from .scorer import MlpParams


def _fmt_row(values):
    return " ".join(repr(float(v)) for v in values)


# ---------------------------------------------------------------- features

def write_features(path, features):
    x = features.values if isinstance(features, FrameFeatures) else np.asarray(features, float)
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    with open(path, "w") as fh:
        fh.write("%d %d\n" % x.shape)
        for row in x:
            fh.write(_fmt_row(row) + "\n")


def read_features(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("%s: malformed feature header" % path)
        t_total, dim = int(header[0]), int(header[1])
        rows = []
        for line in fh:
            if line.strip():
                rows.append([float(v) for v in line.split()])
    x = np.asarray(rows, dtype=np.float64)
    if x.shape != (t_total, dim):
        raise ValueError("%s: expected %dx%d values, got %s" % (path, t_total, dim, x.shape))
    return FrameFeatures(x)


# ------------------------------------------------------------------ labels

def write_labels(path, labeling, vocab):
    labels = labeling.labels if isinstance(labeling, FrameLabeling) else np.asarray(labeling)
    with open(path, "w") as fh:
        for c in labels:
            fh.write(vocab.name_of(int(c)) + "\n")


def read_labels(path, vocab):
    with open(path) as fh:
        names = [line.strip() for line in fh if line.strip()]
    if not names:
        raise ValueError("%s: empty label file" % path)
    return FrameLabeling([vocab.id_of(n) for n in names])


# ---------------------------------------------------------------- manifest

@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    features_path: str
    set_names: tuple
    labels_path: str | None = None

    def action_set(self, vocab):
        return ActionSet(vocab.id_of(n) for n in self.set_names)


def write_manifest(path, vocab, records):
    if not records:
        raise ValueError("no records to write")
    with open(path, "w") as fh:
        fh.write("vocab\t" + " ".join(vocab.names) + "\n")
        for rec in records:
            fields = [rec.video_id, rec.features_path, " ".join(rec.set_names)]
            if rec.labels_path is not None:
                fields.append(rec.labels_path)
            fh.write("\t".join(fields) + "\n")


def read_manifest(path):
    """Returns (Vocabulary, records); relative paths are resolved against the
    manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or not lines[0].startswith("vocab\t"):
        raise ValueError("%s: first manifest line must be the vocabulary" % path)
    vocab = Vocabulary(lines[0].split("\t", 1)[1].split())
    records = []
    seen = set()
    for line in lines[1:]:
        fields = line.split("\t")
        if len(fields) not in (3, 4):
            raise ValueError("%s: malformed record %r" % (path, line))
        vid, feat, names = fields[0], fields[1], tuple(fields[2].split())
        if vid in seen:
            raise ValueError("%s: duplicate video id %r" % (path, vid))
        seen.add(vid)
        for n in names:
            vocab.id_of(n)  # unknown names are an error
        if not names:
            raise ValueError("%s: empty action set for %r" % (path, vid))
        labels = resolve(fields[3]) if len(fields) == 4 else None
        records.append(VideoRecord(vid, resolve(feat), names, labels))
    if not records:
        raise ValueError("%s: no video records" % path)
    return vocab, records


# -------------------------------------------------------------- checkpoint

def _write_matrix(fh, name, arr):
    arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    fh.write(name + " " + " ".join(str(d) for d in arr.shape) + "\n")
    for row in arr:
        fh.write(_fmt_row(row) + "\n")


class _Reader:
    def __init__(self, path):
        with open(path) as fh:
            self.lines = [line.rstrip("\n") for line in fh if line.strip()]
        self.pos = 0
        self.path = path

    def next(self):
        if self.pos >= len(self.lines):
            raise ValueError("%s: truncated checkpoint" % self.path)
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, token):
        line = self.next()
        if line != token:
            raise ValueError("%s: expected %r, found %r" % (self.path, token, line))
        return line

    def matrix(self, name):
        head = self.next().split()
        if head[0] != name:
            raise ValueError("%s: expected %r block, found %r" % (self.path, name, head[0]))
        shape = tuple(int(v) for v in head[1:])
        rows = [np.asarray([float(v) for v in self.next().split()]) for _ in range(shape[0])]
        arr = np.vstack(rows)
        if arr.shape != shape:
            raise ValueError("%s: %r block has shape %s, header says %s"
                             % (self.path, name, arr.shape, shape))
        return arr


def write_checkpoint(path, vocab, hmm_params, mlp_params, iteration=0):
    with open(path, "w") as fh:
        fh.write("[META]\n")
        fh.write("iteration %d\n" % iteration)
        fh.write("[HMM]\n")
        fh.write("vocab " + " ".join(vocab.names) + "\n")
        _write_matrix(fh, "transitions", hmm_params.transitions)
        _write_matrix(fh, "lambdas", hmm_params.lambdas)
        _write_matrix(fh, "priors", hmm_params.priors)
        fh.write("[MLP]\n")
        _write_matrix(fh, "W1", mlp_params.W1)
        _write_matrix(fh, "b1", mlp_params.b1)
        _write_matrix(fh, "W2", mlp_params.W2)
        _write_matrix(fh, "b2", mlp_params.b2)


def read_checkpoint(path):
    """Returns (vocab, HmmParams, MlpParams, iteration)."""
    r = _Reader(path)
    iteration = 0
    if r.lines and r.lines[0] == "[META]":
        r.expect("[META]")
        fields = r.next().split()
        if fields[0] != "iteration":
            raise ValueError("%s: malformed META section" % path)
        iteration = int(fields[1])
    r.expect("[HMM]")
    head = r.next().split()
    if head[0] != "vocab":
        raise ValueError("%s: HMM section must begin with the vocabulary" % path)
    vocab = Vocabulary(head[1:])
    trans = r.matrix("transitions")
    lam = r.matrix("lambdas")[0]
    priors = r.matrix("priors")[0]
    r.expect("[MLP]")
    w1 = r.matrix("W1")
    b1 = r.matrix("b1")[0]
    w2 = r.matrix("W2")
    b2 = r.matrix("b2")[0]
    return vocab, HmmParams(trans, lam, priors), MlpParams(w1, b1, w2, b2), iteration


# --------------------------------------------------------------- generator

@dataclass
class SynthSpec:
    """Configuration of the synthetic corpus generator.

    Class means sit on scaled coordinate axes (pairwise distance
    separation * sqrt(2)); frames add isotropic Gaussian noise.  Each video
    draws an action set, orders it uniformly, and draws near-Poisson
    segment lengths rescaled to tile the video exactly.  full_set_fraction
    pins that share of videos to the complete vocabulary, which keeps
    set-conditioned inference meaningful on corpora with few classes.
    always_present marks backbone classes (think background) that every
    drawn set must contain; background_classes get a zero mean vector so
    they are recognizable only by the absence of the other signatures.
    """

    n_classes: int
    n_videos: int
    frames_range: tuple = (100, 300)
    feature_dim: int = 64
    separation: float = 3.0
    noise: float = 1.0
    length_means: object = None  # scalar, per-class sequence, or None
    set_size_range: tuple = (2, 5)
    full_set_fraction: float = 0.0
    always_present: tuple = ()  # class ids every video must contain
    background_classes: tuple = ()  # class ids with a zero mean vector
    seed: int = 0

    def resolved_length_means(self):
        if self.length_means is None:
            typical = min(self.n_classes, max(self.set_size_range[0],
                                              (self.set_size_range[0] + self.set_size_range[1]) / 2))
            mid = (self.frames_range[0] + self.frames_range[1]) / 2
            return np.full(self.n_classes, mid / typical)
        means = np.asarray(self.length_means, dtype=np.float64)
        if means.ndim == 0:
            means = np.full(self.n_classes, float(means))
        if means.shape != (self.n_classes,) or np.any(means <= 0):
            raise ValueError("need a positive length mean per class")
        return means


def read_synth_spec(path):
    with open(path) as fh:
        raw = json.load(fh)
    for key in ("frames_range", "set_size_range", "always_present",
                "background_classes"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return SynthSpec(**raw)


def _lengths_tiling(raw, t_total):
    """Rescale positive raw lengths to positive integers summing to t_total."""
    raw = np.asarray(raw, dtype=np.float64)
    scaled = raw * (t_total / raw.sum())
    lengths = np.maximum(1, np.floor(scaled).astype(np.int64))
    frac = scaled - np.floor(scaled)
    while lengths.sum() < t_total:
        i = int(np.argmax(frac))
        lengths[i] += 1
        frac[i] = -1.0
    while lengths.sum() > t_total:
        i = int(np.argmax(lengths))
        if lengths[i] == 1:
            raise ValueError("video too short for its action set")
        lengths[i] -= 1
    return lengths


def synth_generate(spec, out_dir):
    """Write a synthetic corpus under out_dir.

    Emits features/, labels/, a training manifest without label paths, and
    an evaluation manifest that also points at the hidden frame labels.
    Returns (train_manifest_path, eval_manifest_path).
    """
    if spec.n_classes > spec.feature_dim:
        raise ValueError("need n_classes <= feature_dim for axis-aligned class means")
    if spec.frames_range[0] < spec.n_classes:
        raise ValueError("shortest video cannot fit the largest action set")
    vocab = Vocabulary("act%02d" % c for c in range(spec.n_classes))
    means = spec.resolved_length_means()
    class_means = spec.separation * np.eye(spec.n_classes, spec.feature_dim)
    for c in spec.background_classes:
        class_means[int(c)] = 0.0
    os.makedirs(os.path.join(out_dir, "features"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "labels"), exist_ok=True)

    n_full = int(round(spec.full_set_fraction * spec.n_videos))
    full_videos = set(fork_rng(spec.seed, "synth-full").permutation(spec.n_videos)[:n_full].tolist())

    lo_s, hi_s = spec.set_size_range
    hi_s = min(hi_s, spec.n_classes)
    lo_s = min(lo_s, hi_s)
    fixed = np.unique(np.asarray(spec.always_present, dtype=np.int64))
    if fixed.size and (fixed[0] < 0 or fixed[-1] >= spec.n_classes):
        raise ValueError("always_present ids outside the vocabulary")
    if fixed.size > lo_s:
        raise ValueError("always_present larger than the smallest set size")
    free = np.setdiff1d(np.arange(spec.n_classes), fixed)
    train_records = []
    eval_records = []
    for v in range(spec.n_videos):
        rng = fork_rng(spec.seed, "synth", v)
        t_total = int(rng.integers(spec.frames_range[0], spec.frames_range[1] + 1))
        if v in full_videos:
            chosen = np.arange(spec.n_classes)
        else:
            size = int(rng.integers(lo_s, hi_s + 1))
            extra = rng.choice(free, size=size - fixed.size, replace=False)
            chosen = np.sort(np.concatenate([fixed, extra]).astype(np.int64))
        order = rng.permutation(chosen)
        raw = np.maximum(1, rng.poisson(means[order]))
        lengths = _lengths_tiling(raw, t_total)
        frame_labels = np.repeat(order, lengths)
        x = class_means[frame_labels] \
            + spec.noise * rng.standard_normal((t_total, spec.feature_dim))

        vid = "vid%03d" % v
        write_features(os.path.join(out_dir, "features", vid + ".txt"), x)
        write_labels(os.path.join(out_dir, "labels", vid + ".txt"), frame_labels, vocab)
        names = tuple(vocab.name_of(int(c)) for c in chosen)
        train_records.append(VideoRecord(vid, "features/%s.txt" % vid, names))
        eval_records.append(VideoRecord(vid, "features/%s.txt" % vid, names,
                                        "labels/%s.txt" % vid))

    train_path = os.path.join(out_dir, "manifest.txt")
    eval_path = os.path.join(out_dir, "manifest_eval.txt")
    write_manifest(train_path, vocab, train_records)
    write_manifest(eval_path, vocab, eval_records)
    return train_path, eval_path
