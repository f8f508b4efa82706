"""Command line interface.

Subcommands mirror the pipeline stages so every intermediate artifact is
an inspectable file:

    generate       write a synthetic corpus plus manifest
    extract        aggregate per-segment feature tables from a manifest
    train          fit the meta-classifier from a feature table
    score-correct  score every segment and rewrite unreliable ones
    evaluate       classifier and correction quality reports and plots
    heatmap        dump the pixel-uncertainty maps for one image

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 configuration
error. Flags with a SEGQC_* environment variable mentioned in their help
text read their default from it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .correction import best_threshold, sweep_threshold
from .data import read_manifest, read_mask, write_mask
from .errors import ConfigurationError, ValidationError
from .evaluation import auroc, build_report, render_svg_plots, write_report_csvs
from .features import FEATURE_SET_NAMES, FeatureSetSpec, make_feature_spec
from .models import (
    default_grid,
    deserialize_model,
    score_records,
    serialize_model,
    small_grid,
    train_gbdt,
    train_logistic,
)
from .npyio import write_npy
from .pipeline import (
    TAU_P_DEFAULT,
    analyze_image,
    apply_correction,
    load_image,
    manifest_feature_spec,
    run_parallel,
    score_map,
)
from .quality import image_quality
from .records import (
    read_records_csv,
    read_records_jsonl,
    write_records_csv,
    write_records_jsonl,
)
from .synthetic import SynthConfig, generate_corpus
from .uncertainty import compute_heatmaps


def _env_str(name: str, fallback: str | None) -> str | None:
    return os.environ.get(f"SEGQC_{name}", fallback)


def _env_int(name: str, fallback: int) -> int:
    raw = os.environ.get(f"SEGQC_{name}")
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"SEGQC_{name} must be an integer, got {raw!r}") from None


def _env_float(name: str, fallback: float) -> float:
    raw = os.environ.get(f"SEGQC_{name}")
    if raw is None:
        return fallback
    try:
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"SEGQC_{name} must be a number, got {raw!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad flags are configuration errors (exit 3)
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="segqc", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic corpus")
    gen.add_argument("--out", required=True, help="output directory (SEGQC_OUT)")
    gen.add_argument("--count", type=int, default=20, help="number of images")
    gen.add_argument("--image-size", type=int, default=128)
    gen.add_argument("--num-classes", type=int, default=8)
    gen.add_argument("--cells", type=int, default=25, help="Voronoi cells per image")
    gen.add_argument("--false-rate", type=float, default=6.0, help="expected false segments per image")
    gen.add_argument("--false-size", type=str, default="12:80", help="blob size range lo:hi")
    gen.add_argument("--jitter", type=float, default=1.0, help="boundary jitter in pixels")
    gen.add_argument("--swap-prob", type=float, default=0.03)
    gen.add_argument("--correct-conf", type=float, default=0.88)
    gen.add_argument("--wrong-conf", type=float, default=0.60)
    gen.add_argument("--noise-temp", type=float, default=0.6)
    gen.add_argument("--seed", type=int, default=_env_int("SEED", 0), help="master seed (SEGQC_SEED)")
    gen.set_defaults(func=cmd_generate)

    ext = sub.add_parser("extract", help="write the per-segment feature table")
    _add_manifest(ext)
    _add_feature_set(ext)
    ext.add_argument("--out", default=_env_str("OUT", None), required=_env_str("OUT", None) is None,
                     help="output table path (SEGQC_OUT)")
    ext.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    ext.add_argument("--tau-p", type=float, default=TAU_P_DEFAULT,
                     help="precision threshold labeling a segment low quality")
    _add_threads(ext)
    ext.set_defaults(func=cmd_extract)

    tr = sub.add_parser("train", help="train a meta-classifier from a table")
    tr.add_argument("--table", required=True, help="feature table (csv or jsonl)")
    _add_feature_set(tr)
    tr.add_argument("--model-kind", choices=("gbdt", "logistic"), default="gbdt")
    tr.add_argument("--grid", default="default",
                    help="'default', 'small', inline JSON list, or @file.json")
    tr.add_argument("--folds", type=int, default=5)
    tr.add_argument("--l2", type=float, default=1.0, help="logistic L2 strength")
    tr.add_argument("--num-classes", type=int, default=None,
                    help="class vocabulary size; inferred from the table when omitted")
    tr.add_argument("--seed", type=int, default=_env_int("SEED", 0), help="(SEGQC_SEED)")
    tr.add_argument("--out", default=_env_str("OUT", None), required=_env_str("OUT", None) is None,
                    help="model output path (SEGQC_OUT)")
    tr.add_argument("--report", default=None, help="training report path (default: <out>.report.json)")
    tr.set_defaults(func=cmd_train)

    sc = sub.add_parser("score-correct", help="score segments and correct the masks")
    _add_manifest(sc)
    sc.add_argument("--model", default=_env_str("MODEL", None),
                    required=_env_str("MODEL", None) is None, help="model file (SEGQC_MODEL)")
    sc.add_argument("--tau", type=float, default=_env_float("TAU", 0.5),
                    help="uncertainty threshold for correction (SEGQC_TAU)")
    sc.add_argument("--sweep", default=None,
                    help="comma-separated taus; picks the best by mean mIoU change (needs ground truth)")
    sc.add_argument("--tau-p", type=float, default=TAU_P_DEFAULT)
    sc.add_argument("--out", default=_env_str("OUT", None), required=_env_str("OUT", None) is None,
                    help="output directory (SEGQC_OUT)")
    _add_threads(sc)
    sc.set_defaults(func=cmd_score_correct)

    ev = sub.add_parser("evaluate", help="classifier and correction reports")
    _add_manifest(ev)
    ev.add_argument("--table", required=True, help="scored feature table")
    ev.add_argument("--corrected", required=True, help="directory with *_corrected.npy masks")
    ev.add_argument("--out", default=_env_str("OUT", None), required=_env_str("OUT", None) is None,
                    help="output directory (SEGQC_OUT)")
    ev.add_argument("--seed", type=int, default=_env_int("SEED", 0), help="bootstrap seed (SEGQC_SEED)")
    ev.add_argument("--no-plots", action="store_true", help="skip SVG rendering")
    _add_threads(ev)
    ev.set_defaults(func=cmd_evaluate)

    hm = sub.add_parser("heatmap", help="dump pixel-uncertainty heatmaps for one image")
    _add_manifest(hm)
    hm.add_argument("--image-id", required=True)
    hm.add_argument("--out", default=_env_str("OUT", None), required=_env_str("OUT", None) is None,
                    help="output directory (SEGQC_OUT)")
    hm.set_defaults(func=cmd_heatmap)

    return parser


def _add_manifest(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", default=_env_str("MANIFEST", None),
                   required=_env_str("MANIFEST", None) is None,
                   help="dataset manifest JSON (SEGQC_MANIFEST)")


def _add_feature_set(p: argparse.ArgumentParser) -> None:
    p.add_argument("--feature-set", choices=FEATURE_SET_NAMES,
                   default=_env_str("FEATURE_SET", "reduced"),
                   help="(SEGQC_FEATURE_SET)")


def _add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=_env_int("THREADS", 1),
                   help="worker threads; results are independent of this (SEGQC_THREADS)")


def cmd_generate(args) -> int:
    lo, _, hi = args.false_size.partition(":")
    try:
        size_range = (int(lo), int(hi))
    except ValueError:
        raise ConfigurationError(f"--false-size must look like 12:80, got {args.false_size!r}") from None
    config = SynthConfig(
        image_size=args.image_size,
        num_classes=args.num_classes,
        voronoi_cells=args.cells,
        false_segment_rate=args.false_rate,
        false_segment_size=size_range,
        boundary_jitter=args.jitter,
        class_swap_prob=args.swap_prob,
        correct_confidence=args.correct_conf,
        wrong_confidence=args.wrong_conf,
        noise_temp=args.noise_temp,
        seed=args.seed,
    )
    generate_corpus(config, args.count, args.out)
    print(f"wrote {args.count} images to {args.out} (manifest.json inside)")
    return 0


def _load_table(path: str):
    if path.endswith(".jsonl"):
        return read_records_jsonl(path)
    return read_records_csv(path)


def cmd_extract(args) -> int:
    manifest = read_manifest(args.manifest)
    spec = manifest_feature_spec(manifest, args.feature_set)
    if not manifest.entries:
        print("warning: manifest has no entries, writing an empty table", file=sys.stderr)

    def work(entry):
        image = load_image(manifest, entry)
        return analyze_image(image, spec, manifest.background_class, args.tau_p).records

    per_image = run_parallel(work, manifest.entries, args.threads)
    records = [r for chunk in per_image for r in chunk]
    if args.format == "jsonl":
        write_records_jsonl(args.out, records)
    else:
        write_records_csv(args.out, records)
    print(f"wrote {len(records)} segment records to {args.out}")
    return 0


def _parse_grid(spec: str) -> list[dict]:
    if spec == "default":
        return default_grid()
    if spec == "small":
        return small_grid()
    text = spec
    if spec.startswith("@"):
        with open(spec[1:], "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        grid = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"--grid is not valid JSON: {exc}") from exc
    if not isinstance(grid, list):
        raise ConfigurationError("--grid JSON must be a list of hyperparameter objects")
    return grid


def _spec_for_table(records, feature_set: str, num_classes: int | None) -> FeatureSetSpec:
    if num_classes is None:
        num_classes = max(r.predicted_class for r in records) + 1
    include_gradient = bool(records) and "ugrad_full_mean" in records[0].features
    return make_feature_spec(feature_set, num_classes, include_gradient)


def cmd_train(args) -> int:
    records = _load_table(args.table)
    if not records:
        raise ValidationError(f"{args.table}: table has no records")
    spec = _spec_for_table(records, args.feature_set, args.num_classes)
    if args.model_kind == "logistic":
        model = train_logistic(records, spec, l2_strength=args.l2, seed=args.seed)
        scores = score_records(model, records)
        train_auroc = auroc(scores, [r.target_low_quality for r in records])
        report_payload = {
            "cv_grid": [],
            "chosen": {"l2_strength": args.l2},
            "seed": args.seed,
            "train_auroc": train_auroc,
        }
        print(f"logistic model: train AUROC {train_auroc:.4f}")
    else:
        grid = _parse_grid(args.grid)
        model, report = train_gbdt(records, spec, grid=grid, folds=args.folds, seed=args.seed)
        report_payload = report.to_json()
        best = max(report.cv_grid, key=lambda row: row["mean_auroc"])
        print(f"chosen hyperparameters: {report.chosen}")
        print(f"cross-validation AUROC {best['mean_auroc']:.4f} +- {best['std_auroc']:.4f}")
    serialize_model(args.out, model)
    report_path = args.report or f"{args.out}.report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report_payload, fh, indent=2)
        fh.write("\n")
    print(f"model written to {args.out}, report to {report_path}")
    return 0


def cmd_score_correct(args) -> int:
    manifest = read_manifest(args.manifest)
    model = deserialize_model(args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def work(entry):
        image = load_image(manifest, entry)
        analysis = analyze_image(image, model.spec, manifest.background_class, args.tau_p)
        scores = score_records(model, analysis.records)
        by_id = {rec.segment_id: float(s) for rec, s in zip(analysis.records, scores)}
        return analysis, by_id

    analyzed = run_parallel(work, manifest.entries, args.threads)

    tau = args.tau
    if args.sweep:
        taus = [float(t) for t in args.sweep.split(",") if t.strip()]
        items = []
        for analysis, by_id in analyzed:
            if analysis.image.gt is None:
                raise ValidationError("--sweep needs ground-truth masks in the manifest")
            items.append((analysis.image.pred, analysis.decomp, by_id, analysis.image.gt))
        rows = sweep_threshold(items, taus, manifest.background_class)
        tau = best_threshold(rows)
        with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
            fh.write("tau,mean_delta_miou,fraction_negative\n")
            for row in rows:
                fh.write(f"{row['tau']!r},{row['mean_delta_miou']!r},{row['fraction_negative']!r}\n")
        print(f"sweep selected tau = {tau}")

    all_records = []
    actions_log: dict[str, list[dict]] = {}
    for analysis, by_id in analyzed:
        entry = analysis.image.entry
        outcome = apply_correction(analysis, by_id, tau, manifest.background_class)
        shape = (analysis.image.pred.height, analysis.image.pred.width)
        write_npy(out / f"{entry.image_id}_uncertainty.npy", score_map(analysis.decomp, by_id, shape))
        write_mask(out / f"{entry.image_id}_corrected.npy", outcome.corrected_mask)
        write_mask(out / f"{entry.image_id}_corrected.png", outcome.corrected_mask)
        actions_log[entry.image_id] = [
            {
                "segment_id": a.segment_id,
                "action": a.action,
                "new_class": a.new_class,
                "score": a.score,
            }
            for a in outcome.actions
        ]
        all_records.extend(analysis.records)
    with open(out / "actions.json", "w", encoding="utf-8") as fh:
        json.dump({"tau": tau, "images": actions_log}, fh, indent=2)
        fh.write("\n")
    write_records_csv(out / "scored_records.csv", all_records)
    n_actions = sum(len(v) for v in actions_log.values())
    print(f"corrected {n_actions} segments across {len(analyzed)} images at tau = {tau}")
    return 0


def cmd_evaluate(args) -> int:
    manifest = read_manifest(args.manifest)
    for entry in manifest.entries:
        if entry.gt_mask_path is None:
            raise ValidationError(f"{entry.image_id}: evaluation needs ground-truth masks")
    records = _load_table(args.table)
    if not records:
        raise ValidationError(f"{args.table}: table has no records")
    for r in records:
        if r.uncertainty_score is None or r.target_low_quality is None:
            raise ValidationError(
                f"{r.image_id}/{r.segment_id}: table must carry scores and quality targets"
            )
    corrected_dir = Path(args.corrected)

    def work(entry):
        image = load_image(manifest, entry)
        corrected_path = corrected_dir / f"{entry.image_id}_corrected.npy"
        if not corrected_path.exists():
            raise FileNotFoundError(f"missing corrected mask {corrected_path}")
        corrected = read_mask(corrected_path, manifest.num_classes)
        return image_quality(image.pred, image.gt), image_quality(corrected, image.gt)

    pairs = run_parallel(work, manifest.entries, args.threads)
    before = [b for b, _ in pairs]
    after = [a for _, a in pairs]
    report = build_report(
        scores=[r.uncertainty_score for r in records],
        labels=[r.target_low_quality for r in records],
        precision_p=[r.precision_p for r in records],
        iou=[r.iou for r in records],
        iou_adj=[r.iou_adj for r in records],
        before=before,
        after=after,
        categories=[e.categories for e in manifest.entries],
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")
    write_report_csvs(report, out)
    if not args.no_plots:
        render_svg_plots(report, out)
    d = report.delta_miou
    print(f"AUROC {report.auroc:.4f} +- {report.auroc_std:.4f}, "
          f"AP {report.average_precision:.4f} +- {report.average_precision_std:.4f}")
    print(f"mean mIoU change {d.mean:+.4f} (std {d.std:.4f}, "
          f"degraded fraction {d.fraction_negative:.3f})")
    print(f"report written to {out / 'report.json'}")
    return 0


def cmd_heatmap(args) -> int:
    manifest = read_manifest(args.manifest)
    matches = [e for e in manifest.entries if e.image_id == args.image_id]
    if not matches:
        raise ValidationError(f"image id {args.image_id!r} not found in manifest")
    image = load_image(manifest, matches[0])
    heatmaps = compute_heatmaps(image.probs, image.features)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in heatmaps.available_measures():
        write_npy(out / f"{args.image_id}_{name}.npy", heatmaps.measure(name).astype(np.float32))
    print(f"wrote {len(heatmaps.available_measures())} heatmaps to {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
