"""Command line: generate, train, eval, gradcheck, compare, experiment.

Exit codes: 0 success, 1 argument/config error, 2 I/O or format error,
3 numerical failure.
"""
import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from rawdann import formats, gradcheck
from rawdann.config import ExperimentConfig
from rawdann.data import ABSENT, SPLITS, CorpusSpec, frame_utterances, normalize
from rawdann.formats import FormatError
from rawdann.model import ConfigError, DannModel, load_model, save_model
from rawdann.train import NumericalError, accuracy, adaptation_experiment, fit, seed_streams

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

METRICS_HEADER = ["step", "p", "mu", "lambda", "label_loss", "domain_loss_raw",
                  "domain_loss_scaled", "source_train_acc", "domain_acc"]
CHECKPOINT_NAME = "checkpoint.bin"
METRICS_NAME = "metrics.csv"
STATS_NAME = "stats.dsta"


def _split_path(corpus_dir, split):
    return Path(corpus_dir) / f"{split}.dcrp"


def _fmt(value):
    return "" if value is None else repr(float(value))


def _load_splits(corpus_dir, splits=SPLITS):
    out, rate = {}, None
    for split in splits:
        utts, sr = formats.load_corpus(_split_path(corpus_dir, split))
        if rate is not None and sr != rate:
            raise FormatError(f"{corpus_dir}: splits disagree on sample rate")
        rate = sr
        out[split] = utts
    return out, rate


def _framing_spec(sample_rate, framing, n_classes):
    window_ms, shift_ms, context = framing
    return CorpusSpec(sample_rate=sample_rate, n_classes=n_classes, window_ms=float(window_ms),
                      shift_ms=float(shift_ms), context_frames=int(context))


def cmd_generate(args):
    cfg = ExperimentConfig.load(args.config, args.seed)
    from rawdann.data import generate_corpus

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    splits = generate_corpus(cfg.corpus)
    for split, utts in splits.items():
        formats.save_corpus(_split_path(out, split), utts, cfg.corpus.sample_rate)
    frames = frame_utterances(splits["source_train"], cfg.corpus)[0]
    _, (mean, std) = normalize(frames)
    formats.save_stats(out / STATS_NAME, mean, std)
    for split, utts in splits.items():
        n_frames = len(frame_utterances(utts, cfg.corpus)[0])
        print(f"{split}: {len(utts)} utterances, {n_frames} frames")
    print(f"frame length {cfg.corpus.frame_length()} samples at {cfg.corpus.sample_rate} Hz")
    return EXIT_OK


def _prepare_training(cfg, corpus_dir, mode):
    splits, rate = _load_splits(corpus_dir, ("source_train", "target_train"))
    if rate != cfg.corpus.sample_rate:
        raise ConfigError(
            f"corpus sample rate {rate} Hz differs from config {cfg.corpus.sample_rate} Hz"
        )
    stats = formats.load_stats(Path(corpus_dir) / STATS_NAME)
    if len(stats[0]) != cfg.arch.frame_length:
        raise ConfigError(
            f"stats frame length {len(stats[0])} != config frame length {cfg.arch.frame_length}"
        )
    src_frames, src_classes, _ = frame_utterances(splits["source_train"], cfg.corpus)
    source = (normalize(src_frames, stats)[0], src_classes)
    target = None
    if mode == "dann":
        tgt_frames, tgt_classes, _ = frame_utterances(splits["target_train"], cfg.corpus)
        if len(tgt_frames) == 0:
            raise ConfigError("mode=dann needs a non-empty target_train split")
        target = (normalize(tgt_frames, stats)[0], tgt_classes)
    return source, target, stats


def cmd_train(args):
    cfg = ExperimentConfig.load(args.config, args.seed)
    source, target, stats = _prepare_training(cfg, args.corpus, args.mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    init_seed, _, _ = seed_streams(cfg.train.seed)
    model = DannModel(cfg.arch, seed=init_seed)
    total = cfg.train.total_steps
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)

    def log(m):
        if m.step % cfg.log_every == 0 or m.step == total - 1:
            writer.writerow([m.step, _fmt(m.p), _fmt(m.mu), _fmt(m.lam), _fmt(m.label_loss),
                             _fmt(m.domain_loss_raw), _fmt(m.domain_loss_scaled),
                             _fmt(m.source_train_acc), _fmt(m.domain_acc)])

    try:
        fit(model, cfg.train, source, target, args.mode, callback=log)
    finally:
        (out / METRICS_NAME).write_text(buf.getvalue())
    framing = np.array([cfg.corpus.window_ms, cfg.corpus.shift_ms, cfg.corpus.context_frames],
                       dtype=np.float64)
    save_model(out / CHECKPOINT_NAME, model, {
        "meta.framing": framing,
        "meta.norm_mean": stats[0],
        "meta.norm_std": stats[1],
    })
    print(f"trained {args.mode} for {total} steps -> {out / CHECKPOINT_NAME}")
    return EXIT_OK


def _load_for_eval(checkpoint):
    model, meta = load_model(checkpoint)
    for key in ("meta.framing", "meta.norm_mean", "meta.norm_std"):
        if key not in meta:
            raise FormatError(f"{checkpoint}: missing {key}")
    return model, meta


def _eval_accuracies(model, meta, corpus_dir, split):
    names = (f"source_{split}", f"target_{split}")
    splits, rate = _load_splits(corpus_dir, names)
    spec = _framing_spec(rate, meta["meta.framing"], model.arch.n_classes)
    if spec.frame_length() != model.arch.frame_length:
        raise ConfigError(
            f"corpus frames have {spec.frame_length()} samples, "
            f"checkpoint expects {model.arch.frame_length}"
        )
    stats = (meta["meta.norm_mean"], meta["meta.norm_std"])
    result = {}
    for domain, name in zip(("source", "target"), names):
        frames, classes, _ = frame_utterances(splits[name], spec)
        labeled = classes != ABSENT
        if not labeled.any():
            result[domain] = None
            continue
        frames = normalize(frames[labeled], stats)[0]
        result[domain] = accuracy(model, frames, classes[labeled])
    return result


def _acc_text(value):
    return "n/a (unlabeled)" if value is None else f"{value:.4f}"


def cmd_eval(args):
    model, meta = _load_for_eval(args.checkpoint)
    acc = _eval_accuracies(model, meta, args.corpus, args.split)
    report = (f"source accuracy ({args.split}): {_acc_text(acc['source'])}\n"
              f"target accuracy ({args.split}): {_acc_text(acc['target'])}\n")
    sys.stdout.write(report)
    Path(args.checkpoint).with_name(f"eval_{args.split}.txt").write_text(report)
    return EXIT_OK


def cmd_gradcheck(args):
    worst = gradcheck.run(seed=args.seed, n_seeds=args.n_seeds, backend=args.backend)
    failed = False
    for name, err in worst.items():
        ok = err < gradcheck.TOLERANCE
        failed |= not ok
        print(f"{name:<15} worst_rel_err={err:.3e}  {'PASS' if ok else 'FAIL'}")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_compare(args):
    base, base_meta = _load_for_eval(args.baseline)
    dann, dann_meta = _load_for_eval(args.dann)
    for key in ("meta.arch", "meta.framing"):
        if not np.array_equal(base_meta[key], dann_meta[key]):
            raise ConfigError(f"checkpoints disagree on {key}")
    rows = {
        "baseline": _eval_accuracies(base, base_meta, args.corpus, "eval"),
        "dann": _eval_accuracies(dann, dann_meta, args.corpus, "eval"),
    }
    print(f"{'model':<10}{'source':>10}{'target':>10}")
    for name, acc in rows.items():
        print(f"{name:<10}{acc['source']:>10.4f}{acc['target']:>10.4f}")
    delta = rows["dann"]["target"] - rows["baseline"]["target"]
    print(f"target delta (dann - baseline): {delta:+.4f}")
    return EXIT_OK


def cmd_experiment(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_values({})
    seeds = [int(s) for s in args.seeds.split(",")]
    runs = adaptation_experiment(cfg.arch, cfg.train, cfg.corpus, seeds)
    print(f"{'seed':<6}{'base_src':>10}{'base_tgt':>10}{'dann_src':>10}{'dann_tgt':>10}{'dom_acc':>10}")
    for seed, r in zip(seeds, runs):
        print(f"{seed:<6}{r['baseline']['source']:>10.4f}{r['baseline']['target']:>10.4f}"
              f"{r['dann']['source']:>10.4f}{r['dann']['target']:>10.4f}{r['dann']['domain']:>10.4f}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="rawdann", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic two-domain corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a baseline or adversarial model")
    p.add_argument("--config", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=("baseline", "dann"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-domain classification accuracy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=("train", "eval"), default="eval")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-seeds", type=int, default=5)
    p.add_argument("--backend", choices=("compiled", "python"))
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("compare", help="baseline vs adapted accuracy table")
    p.add_argument("--baseline", required=True)
    p.add_argument("--dann", required=True)
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("experiment", help="multi-seed baseline vs adapted experiment")
    p.add_argument("--config")
    p.add_argument("--seeds", default="0,1,2")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
