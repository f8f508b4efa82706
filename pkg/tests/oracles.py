"""Independent brute-force oracles used by the tests.

Everything here is deliberately naive (Python loops, sets, dicts) so the
oracles share no code path with the implementations they check.
"""

from __future__ import annotations

import math


def flood_components(labels, background=0):
    """4-connected components per class, in raster order of first pixel.

    Returns a list of (class_index, pixel set).
    """
    h, w = labels.shape
    seen = [[False] * w for _ in range(h)]
    comps = []
    for r0 in range(h):
        for c0 in range(w):
            if seen[r0][c0] or labels[r0][c0] == background:
                continue
            cls = int(labels[r0][c0])
            stack = [(r0, c0)]
            seen[r0][c0] = True
            pixels = set()
            while stack:
                r, c = stack.pop()
                pixels.add((r, c))
                for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and not seen[rr][cc] and labels[rr][cc] == cls:
                        seen[rr][cc] = True
                        stack.append((rr, cc))
            comps.append((cls, pixels))
    return comps


def boundary_inner_split(pixels, h, w):
    """8-neighborhood containment rule; border pixels are never inner."""
    inner = set()
    for r, c in pixels:
        if r == 0 or c == 0 or r == h - 1 or c == w - 1:
            continue
        if all(
            (r + dr, c + dc) in pixels
            for dr in (-1, 0, 1)
            for dc in (-1, 0, 1)
            if (dr, dc) != (0, 0)
        ):
            inner.add((r, c))
    return pixels - inner, inner


def dilation_neighbors(pixels, id_map):
    """One cross-dilation step; ids under the dilation ring, minus self."""
    h, w = id_map.shape
    first = next(iter(pixels))
    own = int(id_map[first])
    ring = set()
    for r, c in pixels:
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and (rr, cc) not in pixels:
                ring.add((rr, cc))
    return {int(id_map[r, c]) for r, c in ring if int(id_map[r, c]) != own}


def segment_metrics(khat, cls, pred_labels, gt_comps):
    """(precision, iou, iou_adj) for one predicted segment, via sets."""
    matched = [pix for gcls, pix in gt_comps if gcls == cls and pix & khat]
    big_k = set().union(*matched) if matched else set()
    inter = len(khat & big_k)
    precision = inter / len(khat)
    union = len(khat | big_k)
    iou = inter / union if union else 0.0
    other = {
        (r, c)
        for (r, c) in big_k
        if pred_labels[r, c] == cls and (r, c) not in khat
    }
    denom = len(khat | (big_k - other))
    iou_adj = inter / denom if denom else 0.0
    return precision, iou, iou_adj


def miou_tally(pred_labels, gt_labels):
    """Naive per-pixel confusion tally and class-averaged IoU."""
    h, w = pred_labels.shape
    tp: dict[int, int] = {}
    fp: dict[int, int] = {}
    fn: dict[int, int] = {}
    classes = set()
    for r in range(h):
        for c in range(w):
            p = int(pred_labels[r, c])
            g = int(gt_labels[r, c])
            classes.add(p)
            classes.add(g)
            if p == g:
                tp[p] = tp.get(p, 0) + 1
            else:
                fp[p] = fp.get(p, 0) + 1
                fn[g] = fn.get(g, 0) + 1
    ious = []
    for cls in sorted(classes):
        t = tp.get(cls, 0)
        ious.append(t / (t + fp.get(cls, 0) + fn.get(cls, 0)))
    return sum(ious) / len(ious) if ious else 0.0


def pair_count_auroc(scores, labels):
    """O(n^2) positive-vs-negative comparison with ties worth one half."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def exhaustive_threshold_ap(scores, labels):
    """AP by evaluating precision/recall at every distinct threshold."""
    n_pos = sum(1 for y in labels if y)
    thresholds = sorted(set(scores), reverse=True)
    ap = 0.0
    prev_recall = 0.0
    curve = []
    for t in thresholds:
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y)
        predicted = sum(1 for s in scores if s >= t)
        precision = tp / predicted
        recall = tp / n_pos
        curve.append((recall, precision))
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return curve, ap


def two_pass_pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    if vx == 0.0 or vy == 0.0:
        return None
    return cov / math.sqrt(vx * vy)


def outer_product_gradient_norm(p, psi):
    """Frobenius norm of the per-class gradient matrix, built explicitly."""
    winner = max(range(len(p)), key=lambda k: (p[k], -k))
    total = 0.0
    for k in range(len(p)):
        if k == winner:
            continue  # the predicted class row is zeroed
        for f in psi:
            total += (p[k] * f) ** 2
    return math.sqrt(total)
