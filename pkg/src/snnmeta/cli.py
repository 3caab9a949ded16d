"""Command line front end.

Subcommands: pretrain, meta-train, eval, heatmap, sweep.  Exit status is
0 on success, 1 on runtime errors (bad checkpoints, shape mismatches,
missing images), 2 on usage errors (argparse).  Every output file is a
pure function of the inputs and seeds -- no timestamps are embedded --
so identical invocations produce byte-identical checkpoints and CSVs.

--data-dir falls back to the SNNMETA_DATA_DIR environment variable and
should point at a root containing train/ and test/ class directories
(see scripts/make_synthetic.py for the layout).
"""

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .checkpoint import load_conv, load_model, save_conv, save_model
from .episodes import DATASETS, _load_image, load_corpus
from .layers import MemoryRepresentation, memory_recall, pearson_correlation
from .meta import build_model, encode_features, meta_test, meta_train, \
    pretrain_conv, sparsity_sweep
from .runconfig import build_config, load_config_file, parse_config_text

METRICS_HEADER = "epoch,task,accuracy,reward_mag,mean_n_s"


def _nonneg_int(raw: str) -> int:
    val = int(raw)
    if val < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {raw}")
    return val


def _pos_int(raw: str) -> int:
    val = int(raw)
    if val <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {raw}")
    return val


def _parse_levels(raw: str):
    levels = []
    for part in raw.split(","):
        part = part.strip()
        try:
            center, spread = part.split(":")
            levels.append((float(center), float(spread)))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"expected comma-separated center:spread pairs, got {part!r}")
    return levels


def _data_dir(args, parser):
    path = args.data_dir or os.environ.get("SNNMETA_DATA_DIR")
    if not path:
        parser.error("--data-dir is required (or set SNNMETA_DATA_DIR)")
    return path


def _split_dir(root: str, split: str) -> str:
    """root/<split> when the split layout exists, else root itself."""
    sub = os.path.join(root, split)
    return sub if os.path.isdir(sub) else root


def _flag_overrides(args, mapping: dict) -> dict:
    out = {}
    for flag, field in mapping.items():
        val = getattr(args, flag)
        if val is not None:
            out[field] = val
    return out


def _config_from(args, mapping: dict, base: dict | None = None):
    file_overrides = load_config_file(args.config) if getattr(args, "config", None) else {}
    return build_config(base or {}, file_overrides, _flag_overrides(args, mapping))


def cmd_pretrain(args, parser) -> int:
    data_dir = _data_dir(args, parser)
    cfg = _config_from(args, {"seed": "seed"})
    n_samples = args.samples if args.samples is not None else cfg.pretrain_samples
    corpus = load_corpus(args.dataset, _split_dir(data_dir, "train"),
                         side=cfg.input_side)
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    conv = pretrain_conv(corpus, n_samples, cfg, rng)
    wall = time.perf_counter() - t0
    save_conv(args.out, conv.w, cfg, rng)
    print(f"pretrained kernels on {n_samples} samples in {wall:.1f}s -> {args.out}")
    return 0


def cmd_meta_train(args, parser) -> int:
    mapping = {"ways": "n_ways", "shots": "k_shots", "epochs": "epochs",
               "seed": "seed"}
    data_dir = _data_dir(args, parser)
    metrics_path = args.metrics or args.out + ".metrics.csv"
    if args.resume:
        model, rng = load_model(args.out)
        if args.epochs is not None and args.epochs != model.cfg.epochs:
            model.cfg = replace(model.cfg, epochs=args.epochs)
        cfg = model.cfg
        start_epoch = model.epochs_completed
        if start_epoch >= cfg.epochs:
            print(f"{args.out} already trained for {start_epoch} epochs")
            return 0
    else:
        cfg = _config_from(args, mapping)
        conv_w, _, _ = load_conv(args.conv_ckpt)
        rng = np.random.default_rng(cfg.seed)
        model = build_model(cfg, rng, conv_w=conv_w)
        start_epoch = 0
    corpus = load_corpus(args.dataset, _split_dir(data_dir, "train"),
                         side=cfg.input_side)
    append = args.resume and os.path.exists(metrics_path) \
        and os.path.getsize(metrics_path) > 0
    t0 = time.perf_counter()
    with open(metrics_path, "a" if append else "w", encoding="utf-8") as mf:
        if not append:
            mf.write(METRICS_HEADER + "\n")

        def on_record(rec):
            mf.write(rec.csv_row() + "\n")
            mf.flush()
            print(rec.line())

        def on_epoch(epoch, model, rng):
            save_model(args.out, model, rng)

        meta_train(corpus, cfg, model, rng, start_epoch=start_epoch,
                   on_epoch=on_epoch, on_record=on_record)
    wall = time.perf_counter() - t0
    print(f"trained epochs {start_epoch}..{cfg.epochs - 1} in {wall:.1f}s "
          f"-> {args.out} (metrics: {metrics_path})")
    return 0


def cmd_eval(args, parser) -> int:
    data_dir = _data_dir(args, parser)
    model, _ = load_model(args.model)
    overrides = _flag_overrides(args, {"ways": "n_ways", "shots": "k_shots",
                                       "episodes": "eval_episodes",
                                       "seed": "seed"})
    cfg = replace(model.cfg, memory_reset_per_episode=args.reset_memory,
                  **overrides)
    # the evaluation stream must depend only on --seed, not on where the
    # training run left its generator, so the model is rebuilt around a
    # fresh rng carrying the checkpointed weights
    rng = np.random.default_rng(cfg.seed)
    fresh = build_model(cfg, rng, conv_w=model.conv.w, mem_w=model.mem.syn.w,
                        dec_w=model.dec.syn.w)
    fresh.rs = model.rs
    fresh.mem_rs = model.mem_rs
    corpus = load_corpus(args.dataset, _split_dir(data_dir, "test"),
                         side=cfg.input_side)
    report = meta_test(fresh, corpus, cfg, rng)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write("episode,accuracy\n")
            for i, acc in enumerate(report.per_episode):
                f.write(f"{i},{acc:.6f}\n")
    print(f"accuracy {report.mean_accuracy:.4f} +/- {report.ci95:.4f} "
          f"over {len(report.per_episode)} episodes "
          f"({report.wall_time:.1f}s)")
    return 0


def _read_samples_file(path: str):
    base = os.path.dirname(os.path.abspath(path))
    paths = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            paths.append(line if os.path.isabs(line)
                         else os.path.join(base, line))
    if not paths:
        raise ValueError(f"samples file {path!r} lists no images")
    return paths


def cmd_heatmap(args, parser) -> int:
    paths = _read_samples_file(args.samples_file)
    model, _ = load_model(args.model)
    cfg = model.cfg
    rng = np.random.default_rng(0)
    model = build_model(cfg, rng, conv_w=model.conv.w, mem_w=model.mem.syn.w,
                        dec_w=model.dec.syn.w)
    invert = DATASETS[args.dataset]
    reps = []
    for p in paths:
        img = _load_image(p, cfg.input_side, invert)
        feat = encode_features(model, img, rng)
        rep = MemoryRepresentation.from_raster(memory_recall(feat, model.mem))
        reps.append(rep.bits)
    n = len(reps)
    cells = [["" for _ in range(n)] for _ in range(n)]
    degenerate = set()
    for i in range(n):
        for j in range(i, n):
            try:
                r = pearson_correlation(reps[i], reps[j])
            except ValueError:
                degenerate.update((i, j))
                continue
            cells[i][j] = cells[j][i] = f"{r:.6f}"
    for i in sorted(degenerate):
        print(f"warning: constant representation for {paths[i]}; "
              f"cells left empty", file=sys.stderr)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("path," + ",".join(paths) + "\n")
        for p, row in zip(paths, cells):
            f.write(p + "," + ",".join(row) + "\n")
    print(f"wrote {n}x{n} correlation matrix -> {args.out}")
    return 0


def cmd_sweep(args, parser) -> int:
    data_dir = _data_dir(args, parser)
    cfg = _config_from(args, {"seed": "seed"})
    train = load_corpus(args.dataset, _split_dir(data_dir, "train"),
                        side=cfg.input_side)
    test = load_corpus(args.dataset, _split_dir(data_dir, "test"),
                       side=cfg.input_side)
    t0 = time.perf_counter()
    rows = sparsity_sweep(train, test, args.levels, cfg)
    wall = time.perf_counter() - t0
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("center,spread,accuracy,ci95,episodes\n")
        for row in rows:
            rep = row["report"]
            f.write(f"{row['center']:g},{row['spread']:g},"
                    f"{rep.mean_accuracy:.6f},{rep.ci95:.6f},"
                    f"{len(rep.per_episode)}\n")
    for row in rows:
        rep = row["report"]
        print(f"center={row['center']:g} spread={row['spread']:g} "
              f"accuracy {rep.mean_accuracy:.4f} +/- {rep.ci95:.4f}")
    print(f"swept {len(rows)} levels in {wall:.1f}s -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snnmeta",
        description="spiking few-shot learner: pretraining, episodic "
                    "meta-training, evaluation and analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        p.add_argument("--dataset", default="omniglot",
                       choices=sorted(DATASETS))
        p.add_argument("--data-dir", default=None,
                       help="dataset root (default: $SNNMETA_DATA_DIR)")
        p.add_argument("--seed", type=_nonneg_int, default=None)
        if config:
            p.add_argument("--config", default=None,
                           help="key=value run configuration file")

    p = sub.add_parser("pretrain", help="STDP-pretrain convolutional kernels")
    add_common(p)
    p.add_argument("--samples", type=_nonneg_int, default=None,
                   help="presentations to train on (0 keeps initialization)")
    p.add_argument("--out", required=True, help="kernel checkpoint path")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("meta-train", help="episodic training of the "
                                          "memory and decision layers")
    add_common(p)
    p.add_argument("--conv-ckpt", default=None,
                   help="pretrained kernel checkpoint")
    p.add_argument("--ways", type=_pos_int, default=None)
    p.add_argument("--shots", type=_pos_int, default=None)
    p.add_argument("--epochs", type=_pos_int, default=None)
    p.add_argument("--out", required=True, help="model checkpoint path")
    p.add_argument("--metrics", default=None,
                   help="progress CSV (default: <out>.metrics.csv)")
    p.add_argument("--resume", action="store_true",
                   help="continue an interrupted run from --out")
    p.set_defaults(func=cmd_meta_train)

    p = sub.add_parser("eval", help="meta-test a trained model")
    add_common(p, config=False)
    p.add_argument("--model", required=True, help="model checkpoint path")
    p.add_argument("--episodes", type=_pos_int, default=None)
    p.add_argument("--ways", type=_pos_int, default=None)
    p.add_argument("--shots", type=_pos_int, default=None)
    p.add_argument("--reset-memory", action="store_true",
                   help="restore memory weights before every episode")
    p.add_argument("--out", default=None, help="per-episode accuracy CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("heatmap", help="pairwise correlation matrix of "
                                       "memory representations")
    p.add_argument("--model", required=True, help="model checkpoint path")
    p.add_argument("--samples-file", required=True,
                   help="text file with one image path per line")
    p.add_argument("--dataset", default="omniglot", choices=sorted(DATASETS))
    p.add_argument("--out", required=True, help="matrix CSV path")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("sweep", help="accuracy across sparsity targets")
    add_common(p)
    p.add_argument("--levels", type=_parse_levels, default=[(5.0, 1.0), (15.0, 3.0), (40.0, 8.0)],
                   help="comma-separated center:spread pairs")
    p.add_argument("--out", required=True, help="summary CSV path")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "meta-train" and not args.resume and not args.conv_ckpt:
        parser.error("--conv-ckpt is required unless --resume is given")
    try:
        return args.func(args, parser)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
