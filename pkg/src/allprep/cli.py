"""Command-line interface.

Subcommands:
  preprocess        run the smear preprocessing pipeline over files
  dataset split     build a manifest and assign train/val/test splits
  dataset augment   grow train/val to a per-class target with flips/rotations
  nn gradcheck      verify analytic focal-loss gradients against finite differences
  nn selfcheck      run the model-math identity checks
  eval              score a predictions CSV into a metrics report

Logs go to stderr, data to stdout or files.  Outputs depend only on
inputs, flags, and seed; worker count (--jobs, default from
ALLPREP_JOBS) never changes results, only wall time.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dataprep, metrics, nnkit
from .errors import IndivisibleHeadsError
from .pipeline import PipelineConfig, preprocess_image
from .raster import load_image, save_image


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _default_jobs() -> int:
    env = os.environ.get("ALLPREP_JOBS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _build_pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    """Merge defaults, an optional JSON config file, and explicit flags.

    Flags that the user left unset are None in the namespace; the file
    value (if any) fills them, then the built-in default.
    """
    file_cfg: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - {
            "target", "k", "foreground", "threshold", "se_shape", "se_size",
            "morph_order", "seed",
        }
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        if key in file_cfg:
            return file_cfg[key]
        return default

    threshold = pick(args.threshold, "threshold", "otsu")
    if isinstance(threshold, str) and threshold != "otsu":
        threshold = int(threshold)
    target = pick(args.size, "target", (224, 224))
    foreground = pick(args.foreground, "foreground", "max-a")
    if foreground == "threshold":  # CLI spelling of the fixed-threshold policy
        foreground = "fixed-threshold"
    morph_order = pick(args.morph_order, "morph_order", ("fill", "open", "close"))
    if isinstance(morph_order, str):
        morph_order = tuple(part.strip() for part in morph_order.split(",") if part.strip())
    return PipelineConfig(
        target=(int(target[0]), int(target[1])),
        k=int(pick(args.k, "k", 7)),
        foreground=foreground,
        threshold=threshold,
        se_shape=pick(args.se_shape, "se_shape", "square"),
        se_size=int(pick(args.se_size, "se_size", 3)),
        morph_order=tuple(morph_order),
        seed=int(pick(args.seed, "seed", 0)),
    )


def _preprocess_one(path: Path, out_dir: Path, cfg: PipelineConfig, debug_stages: bool):
    """Worker for one image; returns (path, error or None, warnings, fg_fraction)."""
    try:
        image = load_image(path)
        result = preprocess_image(image, cfg)
        stem = path.stem
        save_image(result.masked, out_dir / f"{stem}_masked.png")
        save_image(result.mask, out_dir / f"{stem}_mask.png")
        if debug_stages:
            save_image(result.resized, out_dir / f"{stem}_stage_resized.png")
            save_image(result.a_plane, out_dir / f"{stem}_stage_a.png")
            save_image(result.clustered, out_dir / f"{stem}_stage_clustered.png")
            save_image(result.raw_mask, out_dir / f"{stem}_stage_raw.png")
            for op, mask in result.morph_stages:
                save_image(mask, out_dir / f"{stem}_stage_{op}.png")
            centroids = [] if result.model is None else result.model.centroids.tolist()
            (out_dir / f"{stem}_centroids.json").write_text(
                json.dumps(centroids) + "\n", encoding="utf-8"
            )
        return path, None, result.warnings, result.mask.foreground_fraction()
    except Exception as exc:  # per-file isolation: one bad file must not kill the run
        return path, exc, (), 0.0


def cmd_preprocess(args: argparse.Namespace) -> int:
    try:
        cfg = _build_pipeline_config(args)
    except (OSError, ValueError) as exc:
        _log(f"error: {exc}")
        return 1
    in_path = Path(args.input)
    if in_path.is_dir():
        files = sorted(
            f for f in in_path.iterdir()
            if f.is_file() and f.suffix.lower() in {".jpg", ".jpeg", ".png"}
        )
    elif in_path.exists():
        files = [in_path]
    else:
        _log(f"error: input not found: {in_path}")
        return 1
    if not files:
        _log(f"error: no images under {in_path}")
        return 1

    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs if args.jobs is not None else _default_jobs()

    work = lambda f: _preprocess_one(f, out_dir, cfg, args.debug_stages)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, files))
    else:
        results = [work(f) for f in files]

    failures = 0
    for path, error, warnings, fraction in results:
        if error is not None:
            failures += 1
            _log(f"{path}: FAILED ({error})")
        else:
            note = f" [{'; '.join(warnings)}]" if warnings else ""
            _log(f"{path}: ok, foreground {fraction:.1%}{note}")
    _log(f"processed {len(results) - failures}/{len(results)} images -> {out_dir}")
    if failures and args.strict:
        return 1
    return 0


def _print_counts(manifest: dataprep.DatasetManifest) -> None:
    counts = manifest.counts()
    splits = ("train", "val", "test", "unsplit")
    header = f"{'class':<12}" + "".join(f"{s:>9}" for s in splits) + f"{'total':>9}"
    print(header)
    totals = dict.fromkeys(splits, 0)
    for label in dataprep.CLASS_LABELS:
        row = counts[label]
        line = f"{label:<12}"
        total = 0
        for s in splits:
            n = row.get(s, 0)
            totals[s] += n
            total += n
            line += f"{n:>9}"
        print(line + f"{total:>9}")
    footer = f"{'all':<12}" + "".join(f"{totals[s]:>9}" for s in splits)
    print(footer + f"{sum(totals.values()):>9}")


def cmd_dataset_split(args: argparse.Namespace) -> int:
    try:
        if args.in_manifest:
            manifest = dataprep.load_manifest(args.in_manifest)
        else:
            manifest = dataprep.build_manifest(args.root)
        split = dataprep.stratified_split(
            manifest,
            test_per_class=args.test_per_class,
            val_fraction=args.val_fraction,
            seed=args.seed,
        )
    except (FileNotFoundError, ValueError) as exc:
        _log(f"error: {exc}")
        return 1
    dataprep.save_manifest(split, args.manifest)
    _print_counts(split)
    _log(f"manifest written to {args.manifest}")
    return 0


def cmd_dataset_augment(args: argparse.Namespace) -> int:
    try:
        manifest = dataprep.load_manifest(args.manifest)
    except FileNotFoundError:
        _log(f"error: manifest not found: {args.manifest}")
        return 1
    except ValueError as exc:
        _log(f"error: {exc}")
        return 1
    try:
        grown = dataprep.augment_to_target(
            manifest, args.root, target_per_class=args.target_per_class, seed=args.seed
        )
    except (FileNotFoundError, ValueError) as exc:
        _log(f"error: {exc}")
        return 1
    out_path = args.out_manifest or args.manifest
    dataprep.save_manifest(grown, out_path)
    _print_counts(grown)
    added = len(grown.records) - len(manifest.records)
    _log(f"added {added} augmented images; manifest written to {out_path}")
    return 0


def cmd_nn_gradcheck(args: argparse.Namespace) -> int:
    if args.d_model % args.heads != 0:
        _log(f"error: d_model={args.d_model} is not divisible by heads={args.heads}")
        return 1
    rng = np.random.default_rng(args.seed)
    gammas = [args.gamma] if args.gamma is not None else [0.0, 1.0, 2.0, 5.0]
    alphas = [args.alpha] if args.alpha is not None else [0.25, 1.0]
    tol = 1e-5
    rows = []
    ok = True
    for gamma in gammas:
        for alpha in alphas:
            cfg = nnkit.FocalLossConfig(gamma=gamma, alpha=alpha)
            worst = 0.0
            for _ in range(args.cases):
                logits = rng.normal(0.0, 2.0, size=(args.tokens, 4))
                targets = rng.integers(0, 4, size=args.tokens)
                analytic = nnkit.focal_loss_grad(logits, targets, cfg)
                f = lambda z: nnkit.focal_loss(nnkit.softmax_rows(z), targets, cfg)
                numeric = nnkit.finite_diff_grad(f, logits, step=1e-6)
                worst = max(worst, nnkit.gradcheck_rel_error(analytic, numeric))
            passed = worst < tol
            ok = ok and passed
            rows.append((f"focal_loss_grad gamma={gamma:g} alpha={alpha:g}", worst, passed))

    print(f"{'operation':<40}{'max rel err':>14}{'status':>8}")
    for name, err, passed in rows:
        print(f"{name:<40}{err:>14.3e}{'PASS' if passed else 'FAIL':>8}")

    if 0.0 in gammas:
        ce_cfg = nnkit.FocalLossConfig(gamma=0.0, alpha=1.0)
        logits = rng.normal(0.0, 2.0, size=(args.tokens, 4))
        targets = rng.integers(0, 4, size=args.tokens)
        grad = nnkit.focal_loss_grad(logits, targets, ce_cfg)
        probs = nnkit.softmax_rows(logits)
        onehot = np.zeros_like(probs)
        onehot[np.arange(targets.size), targets] = 1.0
        ce_ok = np.abs(grad - (probs - onehot) / targets.size).max() < 1e-12
        ok = ok and ce_ok
        print(f"gamma=0 cross-entropy equivalence: {'PASS' if ce_ok else 'FAIL'}")
    return 0 if ok else 1


def _selfcheck_rows(args: argparse.Namespace) -> list[tuple[str, bool]]:
    rows: list[tuple[str, bool]] = []
    rng = np.random.default_rng(args.seed)

    sm = nnkit.softmax_rows(np.array([[0.0, 0.0]]))
    rows.append(("softmax symmetry [0,0] -> [.5,.5]", bool(np.allclose(sm, 0.5, atol=1e-12))))
    rows.append(
        ("softmax single column -> [1]", bool(nnkit.softmax_rows(np.array([[3.7]]))[0, 0] == 1.0))
    )

    x = rng.normal(size=(args.tokens, args.d_model))
    cfg = nnkit.AttentionConfig.seeded(args.d_model, args.heads, seed=args.seed)
    out = nnkit.multi_head_self_attention(x, cfg)
    rows.append(("mhsa output shape preserved", out.shape == x.shape))

    _, weights = nnkit.scaled_dot_product_attention(x, x, x)
    rows.append(
        ("attention rows sum to 1", bool(np.abs(weights.sum(axis=1) - 1.0).max() < 1e-12))
    )

    ident = nnkit.AttentionConfig.identity(args.d_model, heads=1)
    direct, _ = nnkit.scaled_dot_product_attention(x, x, x)
    rows.append(
        (
            "h=1 identity reduction",
            bool(np.abs(nnkit.multi_head_self_attention(x, ident) - direct).max() < 1e-12),
        )
    )

    perm = rng.permutation(args.tokens)
    out_p, _ = nnkit.scaled_dot_product_attention(x, x[perm], x[perm])
    rows.append(("key/value permutation invariance", bool(np.abs(out_p - direct).max() < 1e-12)))

    fl = nnkit.focal_loss(np.array([[0.8, 0.2]]), np.array([0]), nnkit.FocalLossConfig(0.0, 1.0))
    rows.append(("focal gamma=0 equals -ln p", abs(fl + math.log(0.8)) < 1e-12))
    fl2 = nnkit.focal_loss(
        np.array([[0.5, 0.5]]), np.array([0]), nnkit.FocalLossConfig(2.0, 0.25)
    )
    rows.append(("focal anchor (0.5, gamma=2, alpha=.25)", abs(fl2 - 0.25 * 0.25 * math.log(2)) < 1e-12))

    feats = rng.normal(size=(4, 4, 3))
    gap = nnkit.global_average_pool(feats)
    rows.append(("global average pool means", bool(np.allclose(gap, feats.mean(axis=(0, 1))))))

    head = nnkit.HeadConfig(in_features=8, hidden=(4, 4))
    probs = nnkit.head_forward(np.zeros(8), head)
    rows.append(("zero-weight head is uniform", bool(np.allclose(probs, 0.25, atol=1e-12))))
    seeded = nnkit.HeadConfig.seeded(8, (4, 4), seed=args.seed)
    p2 = nnkit.head_forward(rng.normal(size=8), seeded)
    rows.append(("head output sums to 1", abs(p2.sum() - 1.0) < 1e-12))

    rows.append(("l2 penalty of zeros", nnkit.l2_penalty([np.zeros((3, 3))], 0.5) == 0.0))
    rows.append(
        ("param_count dense 4->4 = 20", nnkit.param_count(nnkit.HeadConfig(in_features=4)) == 20)
    )
    att8 = nnkit.AttentionConfig.seeded(8, 2, seed=0)
    rows.append(("param_count mhsa d=8 = 288", nnkit.param_count(att8) == 288))
    return rows


def cmd_nn_selfcheck(args: argparse.Namespace) -> int:
    try:
        rows = _selfcheck_rows(args)
    except IndivisibleHeadsError as exc:
        _log(f"error: {exc}")
        return 1
    ok = True
    for name, passed in rows:
        ok = ok and passed
        print(f"{name:<44}{'PASS' if passed else 'FAIL':>8}")
    return 0 if ok else 1


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        rows = metrics.read_predictions_csv(args.predictions)
        cm = metrics.confusion_from_predictions((t, p) for _, t, p in rows)
        truths = None
        scores = None
        if args.scores:
            _, truths, scores = metrics.read_scores_csv(args.scores)
        report = metrics.build_report(cm, truths, scores)
    except (FileNotFoundError, ValueError) as exc:
        _log(f"error: {exc}")
        return 1

    if args.report:
        Path(args.report).write_text(metrics.report_json(report) + "\n", encoding="utf-8")
        _log(f"report written to {args.report}")

    print(f"samples:  {report['total']}")
    print(f"accuracy: {report['accuracy']:.4f}")
    print(f"micro-F1: {report['micro_f1']:.4f}")
    print(f"{'class':<12}{'prec':>8}{'recall':>8}{'f1':>8}{'support':>9}" +
          ("" if scores is None else f"{'auc':>8}"))
    for label in report["labels"]:
        c = report["per_class"][label]
        line = f"{label:<12}{c['precision']:>8.4f}{c['recall']:>8.4f}{c['f1']:>8.4f}{c['support']:>9}"
        if scores is not None:
            auc = c.get("auc")
            line += f"{auc:>8.4f}" if auc is not None else f"{'n/a':>8}"
        print(line)
    macro = report["macro"]
    line = f"{'macro':<12}{macro['precision']:>8.4f}{macro['recall']:>8.4f}{macro['f1']:>8.4f}{'':>9}"
    if scores is not None and macro.get("auc") is not None:
        line += f"{macro['auc']:>8.4f}"
    print(line)
    if report["flags"]:
        _log("flags: " + ", ".join(report["flags"]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="allprep",
        description="Deterministic smear-image preprocessing, dataset tooling, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pre = sub.add_parser("preprocess", help="run the segmentation pipeline over images")
    pre.add_argument("input", help="input image file or directory")
    pre.add_argument("-o", "--output", required=True, help="output directory")
    pre.add_argument("--k", type=int, default=None, help="number of a* clusters (default 7)")
    pre.add_argument("--seed", type=int, default=None, help="clustering seed (default 0)")
    pre.add_argument(
        "--threshold", default=None,
        help="'otsu' or an integer threshold, used with --foreground threshold",
    )
    pre.add_argument(
        "--foreground", choices=["max-a", "threshold"], default=None,
        help="foreground selection policy (default max-a)",
    )
    pre.add_argument("--se-shape", choices=["square", "disk"], default=None)
    pre.add_argument("--se-size", type=int, default=None)
    pre.add_argument("--morph-order", default=None,
                     help="comma-separated cleanup ops (default fill,open,close)")
    pre.add_argument("--size", type=int, nargs=2, metavar=("W", "H"), default=None,
                     help="output size (default 224 224)")
    pre.add_argument("--config", help="JSON file with pipeline settings; flags override")
    pre.add_argument("--jobs", type=int, default=None,
                     help="worker threads (default from ALLPREP_JOBS, else 1)")
    pre.add_argument("--strict", action="store_true",
                     help="exit nonzero if any file fails")
    pre.add_argument("--debug-stages", action="store_true",
                     help="write intermediate stage images")
    pre.set_defaults(func=cmd_preprocess)

    ds = sub.add_parser("dataset", help="manifest, split, and augmentation tooling")
    ds_sub = ds.add_subparsers(dest="dataset_command", required=True)

    spl = ds_sub.add_parser("split", help="build a manifest with train/val/test splits")
    spl.add_argument("--root", required=True, help="dataset root (one directory per class)")
    spl.add_argument("--manifest", required=True, help="output manifest path (JSONL)")
    spl.add_argument("--in-manifest", help="split an existing manifest instead of scanning")
    spl.add_argument("--test-per-class", type=int, default=100)
    spl.add_argument("--val-fraction", type=float, default=0.1)
    spl.add_argument("--seed", type=int, default=0)
    spl.set_defaults(func=cmd_dataset_split)

    aug = ds_sub.add_parser("augment", help="augment train/val up to a per-class target")
    aug.add_argument("--root", required=True)
    aug.add_argument("--manifest", required=True, help="input manifest path")
    aug.add_argument("--out-manifest", help="output manifest path (default: overwrite input)")
    aug.add_argument("--target-per-class", type=int, default=1800)
    aug.add_argument("--seed", type=int, default=0)
    aug.set_defaults(func=cmd_dataset_augment)

    nn = sub.add_parser("nn", help="model-math verification")
    nn_sub = nn.add_subparsers(dest="nn_command", required=True)

    nn_shared = argparse.ArgumentParser(add_help=False)
    nn_shared.add_argument("--heads", type=int, default=2)
    nn_shared.add_argument("--d-model", type=int, default=8)
    nn_shared.add_argument("--tokens", type=int, default=4)
    nn_shared.add_argument("--gamma", type=float, default=None,
                           help="single gamma (default: grid 0,1,2,5)")
    nn_shared.add_argument("--alpha", type=float, default=None,
                           help="single alpha (default: grid 0.25,1)")
    nn_shared.add_argument("--seed", type=int, default=0)

    gc = nn_sub.add_parser("gradcheck", parents=[nn_shared],
                           help="focal-loss gradient vs finite differences")
    gc.add_argument("--cases", type=int, default=25, help="random cases per cell")
    gc.set_defaults(func=cmd_nn_gradcheck)

    sc = nn_sub.add_parser("selfcheck", parents=[nn_shared],
                           help="run the arithmetic identity checks")
    sc.set_defaults(func=cmd_nn_selfcheck)

    ev = sub.add_parser("eval", help="compute metrics from prediction CSVs")
    ev.add_argument("--predictions", required=True,
                    help="CSV with header path,true_label,pred_label")
    ev.add_argument("--scores",
                    help="CSV with per-class probability columns for AUC")
    ev.add_argument("--report", help="write the full JSON report here")
    ev.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
