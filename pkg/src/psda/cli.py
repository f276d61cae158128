"""Command-line surface: synth, train, score, eval, info, sample.

Output lines are ``key value`` pairs so shell pipelines and wrappers can
parse them; all randomized commands are byte-identical across runs for a
fixed seed. Exit codes: 0 success, 1 usage, 2 data error (I/O, parse,
unknown ids, dimension or validation problems), 3 numeric degeneracy.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from . import io as pio
from .errors import CappedConcentrationError, ParseError, PsdaError
from .metrics import LabeledScores, det_points, eer, min_dcf
from .model import PsdaModel, em_train
from .scoring import ScoreReport, score_matrix
from .vmf import VmfParams, sample, unit

__all__ = ["main"]


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        args.func(args)
        return 0
    except CappedConcentrationError as e:
        print(f"psda: degenerate: {e}", file=sys.stderr)
        return 3
    except (ParseError, PsdaError, OSError, KeyError, ValueError, TypeError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"psda: error: {msg}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="psda",
        description="Spherical discriminant backend: train, score, and evaluate "
        "speaker-verification trials over unit-norm embeddings.",
    )
    p.add_argument("--version", action="version", version=f"psda {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="estimate model parameters from labeled embeddings")
    t.add_argument("embeddings", help="embedding table (tsv or bin)")
    t.add_argument("labels", help="segment<TAB>speaker labels file")
    t.add_argument("-o", "--out", required=True, help="output model file")
    t.add_argument("--format", default="auto", choices=["auto", "tsv", "bin"])
    t.add_argument("--b-zero", action="store_true", help="freeze b = 0 (uniform prior)")
    t.add_argument("--max-iters", type=int, default=100)
    t.add_argument("--rel-tol", type=float, default=1e-8)
    t.set_defaults(func=_cmd_train)

    s = sub.add_parser("score", help="score verification trials against a model")
    s.add_argument("model", help="model file")
    s.add_argument("embeddings", help="embedding table (tsv or bin)")
    s.add_argument("enroll_map", help="model_id -> segment ids map file")
    s.add_argument("trials", help="trials file (enroll_id test_id [tar|non])")
    s.add_argument("-o", "--out", required=True, help="output score file")
    s.add_argument("--cosine", action="store_true", help="cosine baseline (singleton sides)")
    s.add_argument("--digits", type=int, default=9, help="significant digits (default 9, max 17)")
    s.add_argument("--format", default="auto", choices=["auto", "tsv", "bin"])
    s.set_defaults(func=_cmd_score)

    e = sub.add_parser("eval", help="EER / minDCF of a labeled score file")
    e.add_argument("scores", help="score file with tar/non labels")
    e.add_argument("--p-tar", type=float, default=0.05)
    e.add_argument("--det-out", help="write DET points (p_miss p_fa) here")
    e.set_defaults(func=_cmd_eval)

    y = sub.add_parser("synth", help="draw a synthetic dataset from given parameters")
    y.add_argument("-o", "--out", required=True, help="output embedding table")
    y.add_argument("--labels-out", required=True, help="output labels file")
    y.add_argument("--dim", type=int, help="dimension (mu defaults to e1)")
    y.add_argument("--mu-file", help="file of dim whitespace-separated floats")
    y.add_argument("--w", type=float, required=True, help="within-speaker concentration")
    y.add_argument("--b", type=float, required=True, help="between-speaker concentration")
    y.add_argument("--speakers", type=int, required=True)
    y.add_argument("--n-per", type=int, required=True, help="segments per speaker")
    y.add_argument("--seed", type=int, required=True)
    y.add_argument("--format", default="tsv", choices=["tsv", "bin"])
    y.add_argument("--model-out", help="also write the generating model file")
    y.add_argument("--trials-out", help="also write random labeled trials")
    y.add_argument("--num-targets", type=int, default=0)
    y.add_argument("--num-nontargets", type=int, default=0)
    y.add_argument("--enroll-map-out", help="identity enroll map for the trials")
    y.set_defaults(func=_cmd_synth)

    i = sub.add_parser("info", help="print a model file summary")
    i.add_argument("model")
    i.set_defaults(func=_cmd_info)

    m = sub.add_parser("sample", help="draw vectors from one VMF distribution")
    m.add_argument("-o", "--out", required=True, help="output embedding table")
    m.add_argument("--dim", type=int, help="dimension (mu defaults to e1)")
    m.add_argument("--mu-file", help="file of dim whitespace-separated floats")
    m.add_argument("--kappa", type=float, required=True)
    m.add_argument("-n", "--num", type=int, required=True)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--format", default="tsv", choices=["tsv", "bin"])
    m.add_argument("--prefix", default="sample", help="id prefix for the rows")
    m.set_defaults(func=_cmd_sample)
    return p


def _direction(dim, mu_file) -> np.ndarray:
    if (dim is None) == (mu_file is None):
        raise ValueError("give exactly one of --dim or --mu-file")
    if mu_file is not None:
        return unit(np.loadtxt(mu_file).ravel(), "mu")
    if dim < 2:
        raise ValueError("--dim must be >= 2")
    e1 = np.zeros(dim)
    e1[0] = 1.0
    return e1


def _cmd_train(args):
    table = pio.load_embeddings(args.embeddings, args.format)
    labels = pio.load_labels(args.labels)
    speakers = pio.speaker_stats(table, labels)
    model, trace = em_train(
        speakers,
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        b_zero=args.b_zero,
    )
    n_obs = sum(s.n for s in speakers)
    pio.save_model(model, args.out, n_speakers=len(speakers), n_observations=n_obs)
    print(f"speakers {len(speakers)}")
    print(f"observations {n_obs}")
    print(f"iterations {len(trace) - 1}")
    print(f"loglik {float(trace[-1])!r}")
    print(f"w {model.w!r}")
    print(f"b {model.b!r}")
    print(f"model {args.out}")


def _unique(seq) -> list:
    return list(dict.fromkeys(seq))


def _cmd_score(args):
    model, _ = pio.load_model(args.model)
    table = pio.load_embeddings(args.embeddings, args.format)
    emap = pio.load_enroll_map(args.enroll_map)
    trials = pio.load_trials(args.trials)
    enroll_ids = _unique(t[0] for t in trials)
    test_ids = _unique(t[1] for t in trials)
    for eid in enroll_ids:
        if eid not in emap:
            raise ValueError(f"trial enroll id {eid!r} is not in the enroll map")
    ei = {e: i for i, e in enumerate(enroll_ids)}
    ti = {t: j for j, t in enumerate(test_ids)}
    if args.cosine:
        for eid in enroll_ids:
            if len(emap[eid]) != 1:
                raise ValueError(
                    f"cosine baseline needs singleton enrollment, {eid!r} has {len(emap[eid])}"
                )
        E = np.stack([table.row(emap[eid][0]) for eid in enroll_ids])
        T = np.stack([table.row(tid) for tid in test_ids])
        matrix = E @ T.T
    else:
        enrolls = [table.stats(emap[eid]) for eid in enroll_ids]
        tests = [table.stats([tid]) for tid in test_ids]
        matrix = score_matrix(model, enrolls, tests)
    llrs = np.array([matrix[ei[e], ti[t]] for e, t, _ in trials])
    labels = tuple(t[2] for t in trials)
    if all(l is None for l in labels):
        labels = None
    report = ScoreReport(tuple((e, t) for e, t, _ in trials), llrs, labels)
    pio.save_scores(report, args.out, digits=args.digits)
    print(f"trials {len(trials)}")
    print(f"scores {args.out}")


def _cmd_eval(args):
    report = pio.load_scores(args.scores)
    try:
        tar, non = report.labeled_arrays()
    except ValueError:
        raise ValueError(f"{args.scores}: eval needs tar/non labels on every line") from None
    s = LabeledScores(tar, non)
    print(f"targets {tar.size}")
    print(f"nontargets {non.size}")
    print(f"eer_percent {100.0 * eer(s)!r}")
    print(f"min_dcf {min_dcf(s, p_tar=args.p_tar)!r}")
    print(f"p_tar {args.p_tar!r}")
    if args.det_out:
        pio.save_det_points(det_points(s), args.det_out)
        print(f"det_points {args.det_out}")


def _cmd_synth(args):
    mu = _direction(args.dim, args.mu_file)
    truth = PsdaModel(args.w, args.b, mu)
    table, labels = pio.synth_dataset(truth, args.speakers, args.n_per, args.seed)
    pio.save_embeddings(table, args.out, args.format)
    pio.save_labels(labels, args.labels_out)
    print(f"speakers {args.speakers}")
    print(f"segments {len(table)}")
    print(f"embeddings {args.out}")
    print(f"labels {args.labels_out}")
    if args.model_out:
        pio.save_model(truth, args.model_out, n_speakers=args.speakers, n_observations=len(table))
        print(f"model {args.model_out}")
    if args.trials_out:
        trials = pio.synth_trials(
            labels, args.num_targets, args.num_nontargets, seed=(args.seed, 1)
        )
        pio.save_trials(trials, args.trials_out)
        print(f"trials {args.trials_out}")
        if args.enroll_map_out:
            emap = {eid: [eid] for eid in _unique(t[0] for t in trials)}
            pio.save_enroll_map(emap, args.enroll_map_out)
            print(f"enroll_map {args.enroll_map_out}")
    elif args.enroll_map_out or args.num_targets or args.num_nontargets:
        raise ValueError("--num-targets/--num-nontargets/--enroll-map-out need --trials-out")


def _cmd_info(args):
    model, meta = pio.load_model(args.model)
    print("format psda-1")
    print(f"dim {model.dim}")
    print(f"w {model.w:.17g}")
    print(f"b {model.b:.17g}")
    head = " ".join(f"{x:.6g}" for x in model.mu[:4])
    tail = " ..." if model.dim > 4 else ""
    print(f"mu {head}{tail}")
    for key, value in meta.items():
        print(f"{key} {value}")


def _cmd_sample(args):
    mu = _direction(args.dim, args.mu_file)
    params = VmfParams(mu, args.kappa)
    x = sample(params, args.num, args.seed)
    width = max(6, len(str(args.num - 1)))
    ids = tuple(f"{args.prefix}{i:0{width}d}" for i in range(args.num))
    pio.save_embeddings(pio.EmbeddingTable(ids, x), args.out, args.format)
    print(f"samples {args.num}")
    print(f"embeddings {args.out}")


if __name__ == "__main__":
    sys.exit(main())
