"""Command-line entry points: corpus synthesis, pretraining, training,
segmentation, alignment, evaluation, and oracle equivalence sweeps.

Exit codes: 0 on success, 2 on usage errors (including missing input
files), 1 on runtime failures with a one-line diagnostic.  The environment
variable ACVSEG_THREADS caps worker threads for per-video test-time work;
outputs do not depend on the thread count.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import acv, data, hmm as hmm_mod, infer, metrics, oracle, scorer, training
from .core import expand_segmentation
from .rng import fork_rng


def n_threads():
    raw = os.environ.get("ACVSEG_THREADS", "")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            print("usage error: ACVSEG_THREADS must be an integer", file=sys.stderr)
            sys.exit(2)
    return os.cpu_count() or 1


def _require_files(*paths):
    for p in paths:
        if not os.path.exists(p):
            print("usage error: no such file: %s" % p, file=sys.stderr)
            sys.exit(2)


def cmd_synth(args):
    _require_files(args.spec)
    spec = data.read_synth_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    os.makedirs(args.out, exist_ok=True)
    train_manifest, eval_manifest = data.synth_generate(spec, args.out)
    print("wrote %s" % train_manifest)
    print("wrote %s" % eval_manifest)


def cmd_pretrain(args):
    _require_files(args.manifest)
    vocab, videos = training.load_corpus(args.manifest)
    hmm_params = hmm_mod.init_params([v.features.num_frames for v in videos],
                                     [v.action_set for v in videos],
                                     len(vocab), l_min=args.lmin)
    mlp = scorer.MlpParams.init(videos[0].features.dim, len(vocab),
                                n_hidden=args.hidden, seed=args.seed)
    mlp = scorer.mil_pretrain(mlp, [(v.features, v.action_set) for v in videos],
                              args.epochs, args.lr, seed=args.seed)
    data.write_checkpoint(args.out, vocab, hmm_params, mlp, iteration=0)
    print("wrote %s" % args.out)


def cmd_train(args):
    _require_files(args.manifest, args.init)
    vocab, videos = training.load_corpus(args.manifest, with_labels=True)
    ck_vocab, hmm_params, mlp, start_iter = data.read_checkpoint(args.init)
    if ck_vocab != vocab:
        raise ValueError("checkpoint vocabulary does not match the manifest")
    if args.lmin is not None:
        hmm_params = hmm_params.copy()
        np.maximum(hmm_params.lambdas, args.lmin, out=hmm_params.lambdas)
    cfg = training.TrainConfig(iters=args.iters, lr=args.lr, lr_drop_at=args.lr_drop_at,
                               lr_after=args.lr_after, alpha=args.alpha, beta=args.beta,
                               tau=args.tau, prune=args.prune == "on", seed=args.seed)
    hmm_params, mlp, _ = training.train(videos, hmm_params, mlp, cfg,
                                        start_iter=start_iter, log=print)
    data.write_checkpoint(args.out, vocab, hmm_params, mlp,
                          iteration=start_iter + args.iters)
    if args.dump_dir:
        os.makedirs(args.dump_dir, exist_ok=True)
        for video in videos:
            seg, anchors, _, _, _ = training.pseudo_ground_truth(mlp, hmm_params, video, cfg)
            acv.write_acv_dump(os.path.join(args.dump_dir, video.video_id + ".txt"),
                               anchors, seg)
    print("wrote %s" % args.out)


def _predict(args, task):
    _require_files(args.manifest, args.ckpt)
    vocab, videos = training.load_corpus(args.manifest)
    ck_vocab, hmm_params, mlp, _ = data.read_checkpoint(args.ckpt)
    if ck_vocab != vocab:
        raise ValueError("checkpoint vocabulary does not match the manifest")
    if task == "segment":
        source = args.train_manifest or args.manifest
        _require_files(source)
        src_vocab, src_videos = training.load_corpus(source)
        if src_vocab != vocab:
            raise ValueError("training-set manifest vocabulary mismatch")
        training_sets = [v.action_set for v in src_videos]
    os.makedirs(args.out, exist_ok=True)

    def run(video):
        seed = fork_rng(args.seed, task, video.video_id).integers(2 ** 31)
        if task == "segment":
            seg, _ = infer.segment_video(video.features, training_sets, mlp, hmm_params,
                                         k=args.k, seed=seed)
        else:
            seg, _ = infer.align_video(video.features, video.action_set, mlp, hmm_params,
                                       k=args.k, seed=seed)
        path = os.path.join(args.out, video.video_id + ".txt")
        data.write_labels(path, expand_segmentation(seg), vocab)
        return path

    with ThreadPoolExecutor(max_workers=n_threads()) as pool:
        for path in pool.map(run, videos):
            print("wrote %s" % path)


def cmd_segment(args):
    _predict(args, "segment")


def cmd_align(args):
    _predict(args, "align")


def cmd_eval(args):
    _require_files(args.gt)
    vocab, records = data.read_manifest(args.gt)
    rows = []
    pooled_pred, pooled_gt, pairs = [], [], []
    offset = 0  # segments pooled on one global timeline so videos never overlap
    for rec in records:
        if rec.labels_path is None:
            raise ValueError("manifest record %s has no label file" % rec.video_id)
        pred_path = os.path.join(args.pred, rec.video_id + ".txt")
        _require_files(rec.labels_path, pred_path)
        gt = data.read_labels(rec.labels_path, vocab)
        pred = data.read_labels(pred_path, vocab)
        if gt.num_frames != pred.num_frames:
            raise ValueError("length mismatch for %s" % rec.video_id)
        pred_segs = metrics.labeling_to_segments(pred)
        gt_segs = metrics.labeling_to_segments(gt)
        pairs.append((pred, gt))
        pooled_pred.extend((c, s + offset, e + offset) for c, s, e in pred_segs)
        pooled_gt.extend((c, s + offset, e + offset) for c, s, e in gt_segs)
        offset += gt.num_frames
        rows.append(_metric_row(rec.video_id, args.metric, pred, gt, pred_segs, gt_segs))
    overall_pred = np.concatenate([metrics.labels_arr(p) for p, _ in pairs])
    overall_gt = np.concatenate([metrics.labels_arr(g) for _, g in pairs])
    rows.append(_metric_row("overall", args.metric, overall_pred, overall_gt,
                            pooled_pred, pooled_gt))
    headers = ["video"] + _metric_names(args.metric)
    print(metrics.format_table(headers, rows))
    print()
    print(metrics.format_csv(headers, rows))


def _metric_names(which):
    return ["mof", "iod", "midpoint"] if which == "all" else [which]


def _metric_row(vid, which, pred, gt, pred_segs, gt_segs):
    row = [vid]
    if which in ("mof", "all"):
        row.append(metrics.mof(pred, gt))
    if which in ("iod", "all"):
        row.append(metrics.iod(pred_segs, gt_segs))
    if which in ("midpoint", "all"):
        row.append(metrics.midpoint_hit(pred_segs, gt_segs))
    return row


def cmd_oracle_check(args):
    worst = 0.0
    for trial in range(args.trials):
        inst = oracle.random_instance(fork_rng(args.seed, "oracle-check", trial),
                                      max_frames=args.tmax, max_classes=args.cmax)
        seg_dp, score_dp = acv.constrained_viterbi(inst["graph"], inst["loglik"], inst["hmm"])
        seg_bf, score_bf = oracle.brute_force_anchor_best(inst["graph"], inst["loglik"],
                                                          inst["hmm"])
        if seg_dp != seg_bf:
            print("mismatch at trial %d: %s vs %s" % (trial, seg_dp, seg_bf))
            sys.exit(1)
        worst = max(worst, abs(score_dp - score_bf))
    print("%d/%d exact segmentations, max |score gap| %.3g" % (args.trials, args.trials, worst))


def build_parser():
    parser = argparse.ArgumentParser(prog="acvseg",
                                     description="set-supervised temporal action segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="initialize the HMM and pretrain the scorer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--hidden", type=int, default=scorer.N_HIDDEN)
    p.add_argument("--lmin", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="run the pseudo-ground-truth training loop")
    p.add_argument("--manifest", required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=100000)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--lr-drop-at", type=int, default=10000)
    p.add_argument("--lr-after", type=float, default=0.001)
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--beta", type=float, default=0.4)
    p.add_argument("--tau", type=int, default=15)
    p.add_argument("--lmin", type=float, default=None,
                   help="raise the expected-length floor of the loaded "
                   "checkpoint (default: keep checkpoint values)")
    p.add_argument("--prune", choices=["on", "off"], default="off")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-dir", default=None,
                   help="write per-video anchor and cut dumps for the final model")
    p.set_defaults(func=cmd_train)

    for name, helptext in (("segment", "predict labels without knowing the action set"),
                           ("align", "predict labels given the true action set")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--manifest", required=True)
        p.add_argument("--ckpt", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--k", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)
        if name == "segment":
            p.add_argument("--train-manifest", default=None,
                           help="manifest whose action sets are sampled at test time "
                           "(default: the test manifest itself)")
        p.set_defaults(func=cmd_segment if name == "segment" else cmd_align)

    p = sub.add_parser("eval", help="score predictions against hidden labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--metric", choices=["mof", "iod", "midpoint", "all"], default="all")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle-check", help="sweep DP vs brute-force equivalence")
    p.add_argument("--tmax", type=int, default=40)
    p.add_argument("--cmax", type=int, default=3)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        sys.exit(1)
    return 0
