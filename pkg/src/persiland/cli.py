"""Command line interface: ``persiland <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage or invalid input.
Logging goes to stderr; its level is read from ``PERSILAND_LOG``
(``error``, ``info`` or ``debug``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import branch_weight_summary, landscape_activity_correlation, tag_landscape_ranking
from .config import RunConfig
from .data import (
    Dataset,
    NormalizationParams,
    SyntheticConfig,
    ZScoreNormalizer,
    apply_normalizer,
    generate_synthetic,
    load_features,
    save_features,
)
from .exceptions import InvalidInputError
from .landscape import LandscapeSpec, sample_landscape
from .metrics import evaluate
from .network.model import Network
from .network.serialization import model_from_bytes, model_to_bytes
from .network.training import train
from .topology import compute_pairs

log = logging.getLogger("persiland")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


# -- signal input ------------------------------------------------------------

def read_signal(path, channel: int | None = None, num_channels: int | None = None) -> np.ndarray:
    """Text file of reals (newline, comma or whitespace separated), or with
    ``channel`` set, one channel of a raw float32 channel-major feature file."""
    path = Path(path)
    if channel is not None:
        if not num_channels:
            raise InvalidInputError("--channel requires --num-channels for binary feature files")
        raw = np.frombuffer(path.read_bytes(), dtype="<f4")
        if raw.size == 0:
            raise InvalidInputError("empty signal")
        if raw.size % num_channels:
            raise InvalidInputError(f"{path}: {raw.size} values do not split into {num_channels} channels")
        if not 0 <= channel < num_channels:
            raise InvalidInputError(f"channel {channel} out of range for {num_channels} channels")
        return raw.reshape(num_channels, -1)[channel].astype(np.float64)
    tokens = [t for t in re.split(r"[\s,;]+", path.read_text()) if t]
    if not tokens:
        raise InvalidInputError("empty signal")
    try:
        values = np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    if not np.all(np.isfinite(values)):
        raise InvalidInputError(f"{path}: signal contains non-finite values")
    return values


# -- commands ----------------------------------------------------------------

def cmd_pairs(args) -> int:
    signal = read_signal(args.input, args.channel, args.num_channels)
    diagram = compute_pairs(signal)
    order = sorted(range(len(diagram)), key=lambda i: (-diagram.persistence[i], diagram.birth_indices[i]))
    out = sys.stdout
    if args.indices:
        out.write("birth,death,birth_index,death_index\n")
    for i in order:
        p = diagram[i]
        row = [_fmt(p.birth), _fmt(p.death)]
        if args.indices:
            row += [str(p.birth_index), str(p.death_index)]
        out.write(",".join(row) + "\n")
    return EXIT_OK


def cmd_landscape(args) -> int:
    if not args.c1 > args.c0:
        raise UsageError(f"--c1 ({args.c1}) must be greater than --c0 ({args.c0})")
    spec = LandscapeSpec(args.c0, args.c1, args.pieces, args.samples)
    signal = read_signal(args.input, args.channel, args.num_channels)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    if args.segment_length:
        T = args.segment_length
        if len(signal) < T:
            raise InvalidInputError(f"signal of length {len(signal)} is shorter than segment length {T}")
        for s in range(len(signal) // T):
            mat = sample_landscape(compute_pairs(signal[s * T : (s + 1) * T]), spec)
            writer.writerow([_fmt(v) for v in mat.values.ravel()])
    else:
        mat = sample_landscape(compute_pairs(signal), spec)
        for row in mat.values:
            writer.writerow([_fmt(v) for v in row])
    return EXIT_OK


def cmd_generate(args) -> int:
    splits = tuple(int(s) for s in args.splits.split(",")) if args.splits else None
    cfg = SyntheticConfig(
        num_clips=args.num_clips,
        length=args.length,
        num_channels=args.channels,
        max_peaks=args.max_peaks,
        noise_std=args.noise_std,
        rng_seed=args.seed,
        bump_width=args.bump_width,
        split_sizes=splits,
    )
    ds = generate_synthetic(cfg)
    manifest = save_features(ds, args.output_dir)
    # peak counts are kept beside the manifest so analysis can use them
    with (Path(args.output_dir) / "peak_counts.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["clip_id", "peak_count"])
        for c in ds.clips:
            w.writerow([c.clip_id, c.peak_count])
    log.info("wrote %d clips to %s", len(ds), manifest)
    print(manifest)
    return EXIT_OK


def _attach_peak_counts(ds: Dataset, manifest: Path) -> None:
    side = (manifest if manifest.is_dir() else manifest.parent) / "peak_counts.csv"
    if not side.exists():
        return
    with side.open(newline="") as fh:
        counts = {row["clip_id"]: int(row["peak_count"]) for row in csv.DictReader(fh)}
    for c in ds.clips:
        c.peak_count = counts.get(c.clip_id)


def _normalizer_from_meta(meta: dict) -> ZScoreNormalizer | None:
    norm = meta.get("normalizer")
    if not norm:
        return None
    z = ZScoreNormalizer()
    z.mean_ = np.asarray(norm["mean"], dtype=np.float64)
    z.scale_ = np.asarray(norm["std"], dtype=np.float64)
    z.n_features_in_ = z.mean_.size
    return z


def _load_model(path) -> tuple[Network, dict]:
    return model_from_bytes(Path(path).read_bytes())


def _prepare(maps, normalizer):
    if normalizer is None:
        return [np.asarray(m, dtype=np.float64) for m in maps]
    params = NormalizationParams(normalizer.mean_, normalizer.scale_)
    return [apply_normalizer(params, m) for m in maps]


def _predict(network: Network, maps, threads: int) -> np.ndarray:
    if not maps:
        return np.zeros((0, network.spec.num_tags))
    if threads <= 1:
        return np.stack([network.predict_proba(m) for m in maps])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.stack(list(pool.map(network.predict_proba, maps)))


def cmd_train(args) -> int:
    cfg = RunConfig.load(args.config)
    cfg.override(**{
        "variant": args.variant,
        "train.seed": args.seed,
        "train.epochs": args.epochs,
        "output_dir": args.output_dir,
        "data.manifest": str(Path(args.manifest).resolve()) if args.manifest else None,
    })
    manifest = cfg.data["data"]["manifest"]
    if not manifest:
        raise InvalidInputError("no dataset given: set data.manifest in the config or pass --manifest")
    ds = load_features(manifest)
    train_ds, valid_ds = ds.split("train"), ds.split("valid")
    if not len(train_ds):
        raise InvalidInputError("the manifest has no clips in the train split")
    n_ch = train_ds.clips[0].features.shape[0]
    spec = cfg.network_spec(n_ch, len(ds.tag_names))
    tcfg = cfg.train_config()

    normalizer = ZScoreNormalizer().fit(train_ds.X) if cfg.data["data"]["normalize"] else None
    X = _prepare(train_ds.X, normalizer)
    Xv = _prepare(valid_ds.X, normalizer)

    out = Path(cfg.data["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n")

    rows = []

    def on_epoch(record, _net):
        rows.append(record)

    result = train(spec, X, train_ds.Y, tcfg, Xv or None, valid_ds.Y if Xv else None, epoch_callback=on_epoch)
    meta = {"tag_names": ds.tag_names, "variant": spec.branch}
    if normalizer is not None:
        meta["normalizer"] = {"mean": normalizer.mean_.tolist(), "std": normalizer.scale_.tolist()}
    (out / "model.bin").write_bytes(model_to_bytes(result.final, meta))
    (out / "model_best.bin").write_bytes(model_to_bytes(result.best, {**meta, "best_epoch": result.best_epoch}))
    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_perclass_auc", "val_perclip_auc"])
        for r in rows:
            w.writerow([r["epoch"], repr(r["train_loss"]), repr(r["val_perclass_auc"]), repr(r["val_perclip_auc"])])
    log.info("best epoch %d; artifacts in %s", result.best_epoch, out)
    print(out / "model.bin")
    return EXIT_OK


def _json_safe(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def _write_eval_reports(report: dict, tag_names, json_path, csv_path) -> None:
    if json_path:
        Path(json_path).write_text(json.dumps(_json_safe(report), indent=2) + "\n")
    if csv_path:
        with Path(csv_path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tag", "auc", "ap"])
            for tag, a, p in zip(tag_names, report["per_tag_auc"], report["per_tag_ap"]):
                w.writerow([tag, "" if math.isnan(a) else repr(a), "" if math.isnan(p) else repr(p)])


def _read_scores(path, ds: Dataset) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "clip_id" or header[1:] != ds.tag_names:
            raise InvalidInputError(f"{path}: header must be clip_id followed by the manifest tags")
        scores = {row[0]: [float(v) for v in row[1:]] for row in reader if row}
    missing = [c for c in ds.clip_ids if c not in scores]
    if missing:
        raise InvalidInputError(f"{path}: no scores for clip {missing[0]}")
    return np.array([scores[c] for c in ds.clip_ids])


def cmd_eval(args) -> int:
    ds = load_features(args.manifest)
    if args.split != "all":
        ds = ds.split(args.split)
    if not len(ds):
        raise InvalidInputError(f"no clips in split {args.split!r}")
    if args.scores:
        scores = _read_scores(args.scores, ds)
    else:
        if not args.model:
            raise UsageError("eval needs a model file or --scores")
        network, meta = _load_model(args.model)
        scores = _predict(network, _prepare(ds.X, _normalizer_from_meta(meta)), args.threads)
    report = evaluate(scores, ds.Y)
    for key in ("perclass_auc", "perclip_auc", "perclass_map", "perclip_map"):
        print(f"{key},{report[key]:.6f}")
    _write_eval_reports(report, ds.tag_names, args.json, args.csv)
    return EXIT_OK


def cmd_predict(args) -> int:
    network, meta = _load_model(args.model)
    c = network.spec.input_channels
    path = Path(args.features)
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size == 0 or raw.size % c:
        raise InvalidInputError(f"{path}: {raw.size} values do not form a ({c}, frames) feature map")
    x = _prepare([raw.reshape(c, -1)], _normalizer_from_meta(meta))[0]
    scores = network.predict_proba(x)
    tags = meta.get("tag_names") or [f"tag{j}" for j in range(len(scores))]
    for tag, s in zip(tags, scores):
        print(f"{tag},{s:.6f}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    network, meta = _load_model(args.model)
    manifest = Path(args.manifest)
    ds = load_features(manifest)
    _attach_peak_counts(ds, manifest)
    if args.split != "all":
        ds = ds.split(args.split)
    normalizer = _normalizer_from_meta(meta)
    transform = (lambda x: _prepare([x], normalizer)[0]) if normalizer is not None else None
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    corr = landscape_activity_correlation(network, ds, transform=transform)
    weights = branch_weight_summary(network)
    P = len(weights)
    report = {
        "activity_source": corr["activity_source"],
        "pearson_by_piece": corr["coefficients"],
        "undefined_pieces": corr["undefined"],
        "branch_weight_summary": weights.tolist(),
        "num_clips": len(ds),
    }
    (out / "analysis.json").write_text(json.dumps(_json_safe(report), indent=2) + "\n")
    with (out / "landscape_means.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["clip_id", "activity"] + [f"lambda_{k}" for k in range(1, P + 1)])
        for cid, a, row in zip(ds.clip_ids, corr["activity"], corr["landscape_means"]):
            w.writerow([cid, repr(float(a))] + [repr(float(v)) for v in row])
    with (out / "tag_ranking.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tag", f"mean_lambda_{P}"])
        for tag, v in tag_landscape_ranking(corr["landscape_means"], ds, P):
            w.writerow([tag, repr(v)])
    with (out / "weight_summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"lambda_{k}" for k in range(1, P + 1)])
        w.writerow([repr(float(v)) for v in weights])
    for k, r in enumerate(corr["coefficients"], start=1):
        print(f"lambda_{k},{'undefined' if r is None else f'{r:.4f}'}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads for inference (default 1)")
    parser = argparse.ArgumentParser(prog="persiland", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    def signal_args(p):
        p.add_argument("input", help="signal file: reals separated by newlines/commas, or binary with --channel")
        p.add_argument("--channel", type=int, help="channel to read from a binary float32 feature file")
        p.add_argument("--num-channels", type=int, help="channel count of the binary feature file")

    p = add("pairs", help="birth-death pairs of a signal, by descending persistence")
    signal_args(p)
    p.add_argument("--indices", action="store_true", help="add a header and the owning indices")
    p.set_defaults(func=cmd_pairs)

    p = add("landscape", help="sampled persistence landscape as CSV")
    signal_args(p)
    p.add_argument("--c0", type=float, default=0.0)
    p.add_argument("--c1", type=float, default=5.0)
    p.add_argument("--pieces", type=int, default=5)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--segment-length", type=int, help="emit one flattened row per segment of this length")
    p.set_defaults(func=cmd_landscape)

    p = add("generate", help="write a synthetic peak-count dataset")
    p.add_argument("output_dir")
    p.add_argument("--num-clips", type=int, default=700)
    p.add_argument("--length", type=int, default=256)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--max-peaks", type=int, default=5)
    p.add_argument("--noise-std", type=float, default=0.05)
    p.add_argument("--bump-width", type=int, default=8)
    p.add_argument("--splits", help="train,valid,test clip counts (default 70/10/20 percent)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = add("train", help="train a network from a JSON config")
    p.add_argument("config")
    p.add_argument("--manifest", help="override data.manifest")
    p.add_argument("--output-dir", help="override output_dir")
    p.add_argument("--variant", choices=["cnn", "pnn", "pcnn"], help="override variant")
    p.add_argument("--seed", type=int, help="override train.seed")
    p.add_argument("--epochs", type=int, help="override train.epochs")
    p.set_defaults(func=cmd_train)

    p = add("eval", help="per-class / per-clip AUC and MAP")
    p.add_argument("model", nargs="?", help="model file (omit with --scores)")
    p.add_argument("manifest")
    p.add_argument("--scores", help="CSV of precomputed scores: clip_id then one column per tag")
    p.add_argument("--split", default="test", help="train, valid, test or all (default test)")
    p.add_argument("--json", help="write the full report as JSON")
    p.add_argument("--csv", help="write per-tag AUC/AP as CSV")
    p.set_defaults(func=cmd_eval)

    p = add("predict", help="per-tag scores for one feature file")
    p.add_argument("model")
    p.add_argument("features", help="raw little-endian float32 channel-major feature file")
    p.set_defaults(func=cmd_predict)

    p = add("analyze", help="landscape/activity correlation and branch weight summary")
    p.add_argument("model")
    p.add_argument("manifest")
    p.add_argument("--split", default="test")
    p.add_argument("--output-dir", default="analysis")
    p.set_defaults(func=cmd_analyze)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("PERSILAND_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        level=levels.get(level, logging.INFO), stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"persiland: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidInputError as exc:
        print(f"persiland: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"persiland: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
