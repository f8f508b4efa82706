"""Binary segment-quality classifiers.

Two model families: an L2-regularized logistic regression (Newton descent
on standardized columns) as the baseline, and a second-order
gradient-boosted tree ensemble on binary logistic loss with exact greedy
split search over sorted feature values.

Both produce a margin whose sigmoid is the probability that a segment is
LOW quality, so higher scores flag less reliable segments. Training is
deterministic given a seed; tree construction breaks ties toward the
smaller feature index and the smaller threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, FormatError, TrainingError
from .evaluation import auroc
from .features import FeatureSetSpec, design_matrix, target_vector
from .records import SegmentRecord

MODEL_FORMAT = "segqc-model"
MODEL_VERSION = 1

DEFAULT_L2 = 1.0
DEFAULT_REG_LAMBDA = 1.0
GRAD_TOL = 1e-6
MAX_NEWTON_ITER = 10_000

HYPERPARAM_KEYS = ("max_depth", "num_trees", "learning_rate", "min_child_weight", "subsample")


def default_grid() -> list[dict]:
    """Default hyperparameter grid for the boosted-tree search."""
    grid = []
    for max_depth in (2, 3, 4):
        for num_trees in (100, 300):
            for learning_rate in (0.1, 0.3):
                for min_child_weight in (1.0, 5.0):
                    for subsample in (0.8, 1.0):
                        grid.append(
                            {
                                "max_depth": max_depth,
                                "num_trees": num_trees,
                                "learning_rate": learning_rate,
                                "min_child_weight": min_child_weight,
                                "subsample": subsample,
                            }
                        )
    return grid


def small_grid() -> list[dict]:
    """A 4-point grid for quick runs and tests."""
    return [
        {"max_depth": d, "num_trees": t, "learning_rate": 0.1, "min_child_weight": 1.0, "subsample": 1.0}
        for d in (2, 3)
        for t in (50, 150)
    ]


@dataclass
class LogisticModel:
    spec: FeatureSetSpec
    weights: np.ndarray  # aligned to spec.columns, dropped columns weigh 0
    bias: float
    col_mean: np.ndarray
    col_std: np.ndarray  # 1.0 stored for dropped (zero variance) columns
    kept: np.ndarray  # bool per column
    l2_strength: float = DEFAULT_L2

    kind = "logistic"

    def margins(self, X: np.ndarray) -> np.ndarray:
        Xs = (X - self.col_mean) / self.col_std
        return Xs @ self.weights + self.bias


@dataclass
class Tree:
    """One regression tree as parallel node arrays; feature -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(X.shape[0], dtype=np.float64)
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            nid, rows = stack.pop()
            if rows.size == 0:
                continue
            f = int(self.feature[nid])
            if f < 0:
                out[rows] = self.value[nid]
                continue
            goes_left = X[rows, f] < self.threshold[nid]
            stack.append((int(self.left[nid]), rows[goes_left]))
            stack.append((int(self.right[nid]), rows[~goes_left]))
        return out


@dataclass
class GbdtModel:
    spec: FeatureSetSpec
    trees: list[Tree]
    base_score: float  # log-odds
    learning_rate: float
    hyperparams: dict
    reg_lambda: float = DEFAULT_REG_LAMBDA

    kind = "gbdt"

    def margins(self, X: np.ndarray) -> np.ndarray:
        z = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            z += self.learning_rate * tree.predict(X)
        return z


@dataclass
class TrainReport:
    cv_grid: list[dict] = field(default_factory=list)  # {hyperparams, mean_auroc, std_auroc}
    chosen: dict = field(default_factory=dict)
    seed: int = 0
    train_auroc: float | None = None

    def to_json(self) -> dict:
        return {
            "cv_grid": self.cv_grid,
            "chosen": self.chosen,
            "seed": self.seed,
            "train_auroc": self.train_auroc,
        }


def _check_two_classes(y: np.ndarray) -> None:
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos < 2 or n_neg < 2:
        raise TrainingError(
            f"training needs at least 2 records per class, got {n_pos} low-quality "
            f"and {n_neg} good"
        )


def _logistic_loss_grad(
    Xs: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2: float
) -> tuple[float, np.ndarray, float]:
    z = Xs @ w + b
    # log(1 + exp(-y*z)) with y in {-1, +1}, stable via logaddexp
    ysign = 2.0 * y - 1.0
    loss = float(np.logaddexp(0.0, -ysign * z).sum()) + 0.5 * l2 * float(w @ w)
    p = expit(z)
    resid = p - y
    grad_w = Xs.T @ resid + l2 * w
    grad_b = float(resid.sum())
    return loss, grad_w, grad_b


def train_logistic(
    records: list[SegmentRecord],
    spec: FeatureSetSpec,
    l2_strength: float = DEFAULT_L2,
    seed: int = 0,
    max_iter: int = MAX_NEWTON_ITER,
    tol: float = GRAD_TOL,
) -> LogisticModel:
    """Fit the regularized logistic baseline by damped Newton descent.

    Columns are standardized to zero mean and unit variance on the
    training data; zero-variance columns are dropped. Optimization stops
    when the full gradient's L2 norm falls below `tol`.
    """
    X = design_matrix(records, spec)
    y = target_vector(records)
    _check_two_classes(y)
    col_mean = X.mean(axis=0)
    col_std = X.std(axis=0)
    kept = col_std > 0.0
    safe_std = np.where(kept, col_std, 1.0)
    Xs = ((X - col_mean) / safe_std)[:, kept]
    w = np.zeros(int(kept.sum()), dtype=np.float64)
    b = 0.0
    loss, grad_w, grad_b = _logistic_loss_grad(Xs, y, w, b, l2_strength)
    for _ in range(max_iter):
        gnorm = float(np.sqrt(grad_w @ grad_w + grad_b * grad_b))
        if gnorm < tol:
            break
        z = Xs @ w + b
        p = expit(z)
        s = np.maximum(p * (1.0 - p), 1e-12)
        A = np.concatenate([Xs, np.ones((Xs.shape[0], 1))], axis=1)
        H = (A * s[:, None]).T @ A
        H[np.diag_indices_from(H)] += 1e-10
        H[np.arange(w.size), np.arange(w.size)] += l2_strength
        g = np.concatenate([grad_w, [grad_b]])
        step = np.linalg.solve(H, g)
        # halve the step until the loss actually decreases
        scale = 1.0
        for _ in range(60):
            w_new = w - scale * step[:-1]
            b_new = b - scale * step[-1]
            new_loss, new_gw, new_gb = _logistic_loss_grad(Xs, y, w_new, b_new, l2_strength)
            if new_loss <= loss:
                break
            scale *= 0.5
        w, b, loss, grad_w, grad_b = w_new, b_new, new_loss, new_gw, new_gb
    weights = np.zeros(X.shape[1], dtype=np.float64)
    weights[kept] = w
    return LogisticModel(
        spec=spec,
        weights=weights,
        bias=float(b),
        col_mean=col_mean,
        col_std=safe_std,
        kept=kept,
        l2_strength=l2_strength,
    )


def _fit_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    max_depth: int,
    min_child_weight: float,
    reg_lambda: float,
) -> Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, rows, 0)]
    while stack:
        nid, node_rows, depth = stack.pop()
        gsum = float(g[node_rows].sum())
        hsum = float(h[node_rows].sum())
        best = _best_split(X, g, h, node_rows, gsum, hsum, min_child_weight, reg_lambda) if (
            depth < max_depth and node_rows.size >= 2
        ) else None
        if best is None:
            value[nid] = -gsum / (hsum + reg_lambda)
            continue
        j, thr = best
        goes_left = X[node_rows, j] < thr
        feature[nid] = j
        threshold[nid] = thr
        left[nid] = new_node()
        right[nid] = new_node()
        stack.append((left[nid], node_rows[goes_left], depth + 1))
        stack.append((right[nid], node_rows[~goes_left], depth + 1))
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )


def _best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    gsum: float,
    hsum: float,
    min_child_weight: float,
    reg_lambda: float,
) -> tuple[int, float] | None:
    """Exact greedy split: scan every feature's sorted values.

    Returns (feature, threshold) with the largest gain, or None when no
    candidate improves on the unsplit node. Ties keep the first candidate
    in (feature, threshold) order, which makes training deterministic.
    """
    parent = gsum * gsum / (hsum + reg_lambda)
    best_gain = 1e-12  # require a strictly positive improvement
    best: tuple[int, float] | None = None
    for j in range(X.shape[1]):
        xj = X[rows, j]
        order = np.argsort(xj, kind="stable")
        xs = xj[order]
        if xs[0] == xs[-1]:
            continue
        gl = np.cumsum(g[rows][order])[:-1]
        hl = np.cumsum(h[rows][order])[:-1]
        boundary = xs[1:] != xs[:-1]
        ok = boundary & (hl >= min_child_weight) & (hsum - hl >= min_child_weight)
        if not ok.any():
            continue
        gr = gsum - gl
        hr = hsum - hl
        gains = np.where(
            ok,
            gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent,
            -np.inf,
        )
        i = int(np.argmax(gains))
        if gains[i] > best_gain:
            best_gain = float(gains[i])
            best = (j, float((xs[i] + xs[i + 1]) / 2.0))
    return best


def _fit_boosted(
    X: np.ndarray,
    y: np.ndarray,
    hyperparams: dict,
    seed: int,
    reg_lambda: float,
) -> GbdtModel:
    n = X.shape[0]
    pos_rate = float(y.mean())
    base_score = float(np.log(pos_rate / (1.0 - pos_rate)))
    margin = np.full(n, base_score, dtype=np.float64)
    rng = np.random.Generator(np.random.PCG64(seed))
    subsample = float(hyperparams["subsample"])
    trees: list[Tree] = []
    lr = float(hyperparams["learning_rate"])
    for _ in range(int(hyperparams["num_trees"])):
        p = expit(margin)
        g = p - y
        h = np.maximum(p * (1.0 - p), 1e-16)
        if subsample < 1.0:
            k = max(1, int(round(subsample * n)))
            rows = np.sort(rng.permutation(n)[:k])
        else:
            rows = np.arange(n)
        tree = _fit_tree(
            X,
            g,
            h,
            rows,
            int(hyperparams["max_depth"]),
            float(hyperparams["min_child_weight"]),
            reg_lambda,
        )
        trees.append(tree)
        margin += lr * tree.predict(X)
    return GbdtModel(
        spec=None,  # type: ignore[arg-type]  # filled by train_gbdt
        trees=trees,
        base_score=base_score,
        learning_rate=lr,
        hyperparams=dict(hyperparams),
        reg_lambda=reg_lambda,
    )


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Deterministic stratified fold id per row."""
    rng = np.random.Generator(np.random.PCG64(seed))
    fold_of = np.zeros(y.size, dtype=np.int64)
    for cls in (0.0, 1.0):
        idx = np.flatnonzero(y == cls)
        idx = rng.permutation(idx)
        fold_of[idx] = np.arange(idx.size) % folds
    return fold_of


def train_gbdt(
    records: list[SegmentRecord],
    spec: FeatureSetSpec,
    grid: list[dict] | None = None,
    folds: int = 5,
    seed: int = 0,
    reg_lambda: float = DEFAULT_REG_LAMBDA,
) -> tuple[GbdtModel, TrainReport]:
    """Grid search with stratified cross validation, then refit on all data.

    The combination with the highest mean validation AUROC wins; ties keep
    the earliest grid entry.
    """
    if grid is None:
        grid = default_grid()
    if not grid:
        raise ConfigurationError("hyperparameter grid is empty")
    if folds < 2:
        raise ConfigurationError(f"cross validation needs at least 2 folds, got {folds}")
    for hp in grid:
        missing = [k for k in HYPERPARAM_KEYS if k not in hp]
        if missing:
            raise ConfigurationError(f"grid entry {hp} missing keys {missing}")
    X = design_matrix(records, spec)
    y = target_vector(records)
    _check_two_classes(y)
    fold_of = stratified_folds(y, folds, seed)
    report = TrainReport(seed=seed)
    best_mean = -np.inf
    chosen = grid[0]
    for hp in grid:
        fold_scores = []
        for f in range(folds):
            val = fold_of == f
            if not val.any() or y[val].min() == y[val].max() or y[~val].min() == y[~val].max():
                continue  # degenerate fold, cannot score
            model = _fit_boosted(X[~val], y[~val], hp, seed, reg_lambda)
            fold_scores.append(auroc(model.margins(X[val]), y[val] > 0.5))
        if not fold_scores:
            raise TrainingError("no usable cross-validation fold (classes too small)")
        mean = float(np.mean(fold_scores))
        std = float(np.std(fold_scores))
        report.cv_grid.append({"hyperparams": dict(hp), "mean_auroc": mean, "std_auroc": std})
        if mean > best_mean:
            best_mean = mean
            chosen = hp
    report.chosen = dict(chosen)
    model = _fit_boosted(X, y, chosen, seed, reg_lambda)
    model.spec = spec
    report.train_auroc = auroc(model.margins(X), y > 0.5)
    return model, report


def score_records(model: LogisticModel | GbdtModel, records: list[SegmentRecord]) -> np.ndarray:
    """Sigmoid scores in [0, 1]; also stored on each record."""
    X = design_matrix(records, model.spec)
    scores = expit(model.margins(X))
    for record, s in zip(records, scores):
        record.uncertainty_score = float(s)
    return scores


def score(model: LogisticModel | GbdtModel, record: SegmentRecord) -> float:
    return float(score_records(model, [record])[0])


def _tree_to_json(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def _tree_from_json(obj: dict) -> Tree:
    return Tree(
        feature=np.asarray(obj["feature"], dtype=np.int32),
        threshold=np.asarray(obj["threshold"], dtype=np.float64),
        left=np.asarray(obj["left"], dtype=np.int32),
        right=np.asarray(obj["right"], dtype=np.int32),
        value=np.asarray(obj["value"], dtype=np.float64),
    )


def serialize_model(path: str | Path, model: LogisticModel | GbdtModel) -> None:
    payload: dict = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "feature_set": {
            "name": model.spec.name,
            "columns": list(model.spec.columns),
            "num_classes": model.spec.num_classes,
        },
    }
    if isinstance(model, LogisticModel):
        payload["logistic"] = {
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "col_mean": model.col_mean.tolist(),
            "col_std": model.col_std.tolist(),
            "kept": model.kept.astype(int).tolist(),
            "l2_strength": model.l2_strength,
        }
    else:
        payload["gbdt"] = {
            "base_score": model.base_score,
            "learning_rate": model.learning_rate,
            "hyperparams": model.hyperparams,
            "reg_lambda": model.reg_lambda,
            "trees": [_tree_to_json(t) for t in model.trees],
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def deserialize_model(path: str | Path) -> LogisticModel | GbdtModel:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid model file: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise FormatError(
            f"{path}: model version {payload.get('version')!r} unsupported, "
            f"supported versions: [{MODEL_VERSION}]"
        )
    fs = payload.get("feature_set")
    if not fs:
        raise FormatError(f"{path}: model file missing feature_set")
    spec = FeatureSetSpec(
        name=fs["name"], columns=tuple(fs["columns"]), num_classes=int(fs["num_classes"])
    )
    if payload["kind"] == "logistic":
        data = payload["logistic"]
        return LogisticModel(
            spec=spec,
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            col_mean=np.asarray(data["col_mean"], dtype=np.float64),
            col_std=np.asarray(data["col_std"], dtype=np.float64),
            kept=np.asarray(data["kept"], dtype=bool),
            l2_strength=float(data["l2_strength"]),
        )
    if payload["kind"] == "gbdt":
        data = payload["gbdt"]
        return GbdtModel(
            spec=spec,
            trees=[_tree_from_json(t) for t in data["trees"]],
            base_score=float(data["base_score"]),
            learning_rate=float(data["learning_rate"]),
            hyperparams=dict(data["hyperparams"]),
            reg_lambda=float(data["reg_lambda"]),
        )
    raise FormatError(f"{path}: unknown model kind {payload.get('kind')!r}")
