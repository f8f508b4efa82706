"""Classifier and correction evaluation.

AUROC uses the rank (Mann-Whitney) form with ties counted half. The
precision/recall curve is evaluated at every distinct score threshold and
average precision is the step-sum over recall increments. Score/quality
agreement is summarized by equal-width score bins and Pearson correlation
coefficients. Correction impact is summarized by the per-image mean-IoU
difference distribution and wrong/correct class counts.

Statistical uncertainties on AUROC and average precision come from a
bootstrap over segments with per-resample seeds derived from one master
seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EvaluationError, ValidationError
from .quality import ImageQuality

DELTA_HIST_BINS = 40
SCORE_BINS = 10
BOOTSTRAP_RESAMPLES = 1000


def auroc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("AUROC needs both classes present")
    order = np.argsort(s, kind="stable")
    sorted_scores = s[order]
    ranks = np.empty(y.size, dtype=np.float64)
    i = 0
    while i < y.size:
        j = i
        while j + 1 < y.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum = float(ranks[y].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def precision_recall(scores, labels) -> tuple[list[tuple[float, float]], float]:
    """Step-wise PR curve over distinct thresholds plus average precision.

    Positives are the low-quality segments. The curve is ordered by
    decreasing threshold, so recall is non-decreasing along the list.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise EvaluationError("precision/recall needs at least one positive")
    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    s_sorted = s[order]
    tp = np.cumsum(y_sorted)
    counts = np.arange(1, y.size + 1)
    # last index of each equal-score group = one point per distinct threshold
    group_end = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
    curve = []
    ap = 0.0
    prev_recall = 0.0
    for i in group_end.tolist():
        recall = float(tp[i] / n_pos)
        precision = float(tp[i] / counts[i])
        curve.append((recall, precision))
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return curve, ap


def pearson(x, y) -> float | None:
    """Correlation coefficient; None when either side has zero variance."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    vx = float(xd @ xd)
    vy = float(yd @ yd)
    if vx == 0.0 or vy == 0.0:
        return None
    return float((xd @ yd) / np.sqrt(vx * vy))


def binned_quality(
    scores,
    precision_p,
    iou,
    iou_adj,
    bins: int = SCORE_BINS,
) -> tuple[list[dict], dict[str, float | None]]:
    """Mean segment quality per equal-width score bin, plus correlations.

    Empty bins are omitted. Returns (bin rows, pearson rho per metric).
    """
    s = np.asarray(scores, dtype=np.float64)
    metrics = {
        "precision_p": np.asarray(precision_p, dtype=np.float64),
        "iou": np.asarray(iou, dtype=np.float64),
        "iou_adj": np.asarray(iou_adj, dtype=np.float64),
    }
    idx = np.clip((s * bins).astype(np.int64), 0, bins - 1)
    rows = []
    for b in range(bins):
        in_bin = idx == b
        count = int(in_bin.sum())
        if count == 0:
            continue
        rows.append(
            {
                "bin_center": (b + 0.5) / bins,
                "mean_precision_p": float(metrics["precision_p"][in_bin].mean()),
                "mean_iou": float(metrics["iou"][in_bin].mean()),
                "mean_iou_adj": float(metrics["iou_adj"][in_bin].mean()),
                "count": count,
            }
        )
    rho = {name: pearson(s, values) for name, values in metrics.items()}
    return rows, rho


def bootstrap_std(scores, labels, stat, resamples: int = BOOTSTRAP_RESAMPLES, seed: int = 0) -> float:
    """Bootstrap standard deviation of `stat(scores, labels)` over segments."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    children = np.random.SeedSequence(seed).spawn(resamples)
    values = []
    for child in children:
        rng = np.random.Generator(np.random.PCG64(child))
        idx = rng.integers(0, y.size, y.size)
        try:
            result = stat(s[idx], y[idx])
        except EvaluationError:
            continue  # degenerate resample (single class)
        values.append(result[1] if isinstance(result, tuple) else result)
    if not values:
        return float("nan")
    return float(np.std(values))


@dataclass
class DeltaMiouSummary:
    mean: float
    std: float
    fraction_negative: float
    histogram: list[int]
    histogram_edges: list[float]

    def to_json(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "fraction_negative": self.fraction_negative,
            "histogram": self.histogram,
            "histogram_edges": self.histogram_edges,
        }


def delta_miou_report(
    before: list[ImageQuality],
    after: list[ImageQuality],
    categories: list[dict[str, str]] | None = None,
) -> tuple[DeltaMiouSummary, dict, dict[str, dict]]:
    """Per-image quality change plus class-count and category summaries."""
    if len(before) != len(after):
        raise ValidationError(f"{len(before)} before vs {len(after)} after image qualities")
    deltas = np.asarray([a.miou - b.miou for a, b in zip(after, before)], dtype=np.float64)
    hist, edges = np.histogram(deltas, bins=DELTA_HIST_BINS, range=(-1.0, 1.0))
    summary = DeltaMiouSummary(
        mean=float(deltas.mean()) if deltas.size else 0.0,
        std=float(deltas.std()) if deltas.size else 0.0,
        fraction_negative=float((deltas < 0).mean()) if deltas.size else 0.0,
        histogram=hist.tolist(),
        histogram_edges=edges.tolist(),
    )
    wrong_before = np.asarray([q.num_wrong_classes for q in before], dtype=np.float64)
    wrong_after = np.asarray([q.num_wrong_classes for q in after], dtype=np.float64)
    correct_before = np.asarray([q.num_correct_classes for q in before], dtype=np.float64)
    correct_after = np.asarray([q.num_correct_classes for q in after], dtype=np.float64)
    class_counts = {
        "mean_wrong_before": float(wrong_before.mean()) if deltas.size else 0.0,
        "mean_wrong_after": float(wrong_after.mean()) if deltas.size else 0.0,
        "std_wrong_before": float(wrong_before.std()) if deltas.size else 0.0,
        "std_wrong_after": float(wrong_after.std()) if deltas.size else 0.0,
        "mean_correct_before": float(correct_before.mean()) if deltas.size else 0.0,
        "mean_correct_after": float(correct_after.mean()) if deltas.size else 0.0,
        "std_correct_before": float(correct_before.std()) if deltas.size else 0.0,
        "std_correct_after": float(correct_after.std()) if deltas.size else 0.0,
    }
    category_tables: dict[str, dict] = {}
    if categories is not None:
        buckets: dict[str, list[float]] = {}
        for cat_map, delta in zip(categories, deltas.tolist()):
            for key, value in (cat_map or {}).items():
                buckets.setdefault(f"{key}={value}", []).append(delta)
        for name in sorted(buckets):
            arr = np.asarray(buckets[name])
            category_tables[name] = {
                "mean_delta_miou": float(arr.mean()),
                "std": float(arr.std()),
                "count": int(arr.size),
            }
    return summary, class_counts, category_tables


@dataclass
class EvalReport:
    auroc: float
    auroc_std: float
    average_precision: float
    average_precision_std: float
    pr_curve: list[tuple[float, float]]
    score_quality_bins: list[dict]
    pearson_rho: dict[str, float | None]
    delta_miou: DeltaMiouSummary | None = None
    class_counts: dict = field(default_factory=dict)
    category_tables: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "auroc": self.auroc,
            "auroc_std": self.auroc_std,
            "average_precision": self.average_precision,
            "average_precision_std": self.average_precision_std,
            "pr_curve": [{"recall": r, "precision": p} for r, p in self.pr_curve],
            "score_quality_bins": self.score_quality_bins,
            "pearson_rho": self.pearson_rho,
            "delta_miou": None if self.delta_miou is None else self.delta_miou.to_json(),
            "class_counts": self.class_counts,
            "category_tables": self.category_tables,
        }


def build_report(
    scores,
    labels,
    precision_p,
    iou,
    iou_adj,
    before: list[ImageQuality] | None = None,
    after: list[ImageQuality] | None = None,
    categories: list[dict[str, str]] | None = None,
    seed: int = 0,
) -> EvalReport:
    curve, ap = precision_recall(scores, labels)
    bins, rho = binned_quality(scores, precision_p, iou, iou_adj)
    report = EvalReport(
        auroc=auroc(scores, labels),
        auroc_std=bootstrap_std(scores, labels, auroc, seed=seed),
        average_precision=ap,
        average_precision_std=bootstrap_std(scores, labels, precision_recall, seed=seed + 1),
        pr_curve=curve,
        score_quality_bins=bins,
        pearson_rho=rho,
    )
    if before is not None and after is not None:
        report.delta_miou, report.class_counts, report.category_tables = delta_miou_report(
            before, after, categories
        )
    return report


def write_report_csvs(report: EvalReport, out_dir: str | Path) -> None:
    """PR curve, score bins and delta histogram as plain CSV files."""
    out = Path(out_dir)
    with open(out / "pr_curve.csv", "w", encoding="utf-8") as fh:
        fh.write("recall,precision\n")
        for r, p in report.pr_curve:
            fh.write(f"{r!r},{p!r}\n")
    with open(out / "score_quality_bins.csv", "w", encoding="utf-8") as fh:
        fh.write("bin_center,mean_precision_p,mean_iou,mean_iou_adj,count\n")
        for row in report.score_quality_bins:
            fh.write(
                f"{row['bin_center']!r},{row['mean_precision_p']!r},"
                f"{row['mean_iou']!r},{row['mean_iou_adj']!r},{row['count']}\n"
            )
    if report.delta_miou is not None:
        with open(out / "delta_miou_hist.csv", "w", encoding="utf-8") as fh:
            fh.write("bin_left,bin_right,count\n")
            edges = report.delta_miou.histogram_edges
            for i, count in enumerate(report.delta_miou.histogram):
                fh.write(f"{edges[i]!r},{edges[i + 1]!r},{count}\n")


def render_svg_plots(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Render the PR curve, score-bin plot and delta histogram as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "segqc"
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    written = []

    fig, ax = plt.subplots(figsize=(5, 4))
    recalls = [r for r, _ in report.pr_curve]
    precisions = [p for _, p in report.pr_curve]
    ax.plot(recalls, precisions, drawstyle="steps-post")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.set_title(f"low-quality segment retrieval (AP = {report.average_precision:.3f})")
    path = out / "pr_curve.svg"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    centers = [row["bin_center"] for row in report.score_quality_bins]
    for key, label in (
        ("mean_precision_p", "precision"),
        ("mean_iou", "IoU"),
        ("mean_iou_adj", "adjusted IoU"),
    ):
        ax.plot(centers, [row[key] for row in report.score_quality_bins], marker="o", label=label)
    ax.set_xlabel("uncertainty score bin")
    ax.set_ylabel("mean segment quality")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.legend()
    path = out / "score_quality_bins.svg"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    written.append(path)

    if report.delta_miou is not None:
        fig, ax = plt.subplots(figsize=(5, 4))
        edges = report.delta_miou.histogram_edges
        centers = [(edges[i] + edges[i + 1]) / 2 for i in range(len(edges) - 1)]
        widths = [edges[i + 1] - edges[i] for i in range(len(edges) - 1)]
        ax.bar(centers, report.delta_miou.histogram, width=widths, align="center")
        ax.axvline(0.0, color="k", linewidth=0.8)
        ax.set_xlabel("per-image mean-IoU change")
        ax.set_ylabel("images")
        path = out / "delta_miou_hist.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
