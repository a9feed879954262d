"""Reference losses for training against pseudo-label grids, with gradients.

Logits have the class channel first: shape (C, ...); the last channel
C - 1 is the empty class (17 in the full label space; smaller C is allowed
so gradient checks can run on tiny grids).  All reductions are means over
voxels or classes, so values do not scale with grid resolution, and every
term depends on the logits only through their softmax, which makes the
total invariant to adding a constant to all logits of a voxel.

Terms:

* cross-entropy: mean over voxels of -w[y] log p[y]
* semantic scal: per present non-empty class, -log of soft precision,
  recall, and specificity ratios, averaged over those classes
* geometric scal: the same three ratios on binary occupancy
* Lovasz-softmax: sorted-error extension of one minus the Jaccard index,
  averaged over included classes

Each -log ratio term is skipped when its denominator is zero, and the
precision and recall terms additionally require at least one positive
voxel, so a grid with no positives contributes only the specificity term.
"""

from dataclasses import dataclass

import numpy as np


def _flatten(logits, target):
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    c = logits.shape[0]
    flat = logits.reshape(c, -1)
    t = np.asarray(target).reshape(-1).astype(np.int64)
    if t.size != flat.shape[1]:
        raise ValueError(f"target size {t.size} does not match logits {flat.shape[1]}")
    if np.any((t < 0) | (t >= c)):
        raise ValueError(f"target labels must be in [0, {c})")
    return flat, t


def softmax_probs(logits):
    """Numerically stabilized softmax over the class axis (axis 0)."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def _log_softmax(flat):
    shifted = flat - flat.max(axis=0, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=0, keepdims=True))


def cross_entropy(logits, target, class_weights=None):
    """Mean over voxels of the weighted negative target log-probability.

    The empty class is an ordinary target here; unoccupied voxels train
    toward it like any other class.
    """
    flat, t = _flatten(logits, target)
    logp = _log_softmax(flat)
    w = np.ones(flat.shape[0]) if class_weights is None else np.asarray(class_weights, dtype=np.float64)
    return float(-(w[t] * logp[t, np.arange(t.size)]).mean())


def _ratio_terms(p, y):
    """Value and gradient (w.r.t. p) of the -log precision, recall, and
    specificity sum for one binary concept.  ``p`` holds per-voxel positive
    probabilities, ``y`` the 0/1 indicator."""
    pos = float(y.sum())
    neg = float(y.size - pos)
    value = 0.0
    grad = np.zeros_like(p)
    if pos > 0:
        inter = float(p @ y)
        total = float(p.sum())
        if total > 0:
            value += np.log(total) - np.log(inter)
            grad += 1.0 / total
            grad -= y / inter
        value += np.log(pos) - np.log(inter)
        grad -= y / inter
    if neg > 0:
        background = float((1.0 - p) @ (1.0 - y))
        value += np.log(neg) - np.log(background)
        grad += (1.0 - y) / background
    return value, grad


def scal_losses(probs, target, with_grad=False):
    """Geometric and semantic affinity losses on softmax probabilities.

    Returns (geom, sem) floats, or (geom, sem, grad) where grad is the
    derivative of their sum with respect to ``probs``.
    """
    probs = np.asarray(probs, dtype=np.float64)
    c = probs.shape[0]
    flat = probs.reshape(c, -1)
    t = np.asarray(target).reshape(-1).astype(np.int64)
    empty = c - 1
    grad = np.zeros_like(flat)

    p_occ = 1.0 - flat[empty]
    y_occ = (t != empty).astype(np.float64)
    geom, g_occ = _ratio_terms(p_occ, y_occ)
    grad[empty] -= g_occ

    class_values = []
    for cls in range(empty):
        y = (t == cls).astype(np.float64)
        if y.sum() == 0:
            continue
        value, g = _ratio_terms(flat[cls], y)
        class_values.append(value)
        grad[cls] += g
    if class_values:
        sem = float(np.mean(class_values))
        grad[:empty] /= len(class_values)
    else:
        sem = 0.0
    if with_grad:
        return float(geom), sem, grad.reshape(probs.shape)
    return float(geom), sem


def _lovasz_jaccard_grad(fg_sorted):
    """Gradient of the Jaccard-loss extension along a sorted margin vector."""
    gts = fg_sorted.sum()
    intersection = gts - np.cumsum(fg_sorted)
    union = gts + np.cumsum(1.0 - fg_sorted)
    jaccard = 1.0 - intersection / union
    if len(jaccard) > 1:
        jaccard[1:] = jaccard[1:] - jaccard[:-1]
    return jaccard


def lovasz_softmax(probs, target, ignore_empty=True, with_grad=False):
    """Lovasz extension of the Jaccard loss over classes present in the
    target; the empty class participates only when ``ignore_empty`` is off.

    Sorting is stable on descending errors, so ties never make the result
    depend on memory layout.
    """
    probs = np.asarray(probs, dtype=np.float64)
    c = probs.shape[0]
    flat = probs.reshape(c, -1)
    t = np.asarray(target).reshape(-1).astype(np.int64)
    limit = c - 1 if ignore_empty else c
    included = [cls for cls in range(limit) if np.any(t == cls)]
    grad = np.zeros_like(flat)
    if not included:
        if with_grad:
            return 0.0, grad.reshape(probs.shape)
        return 0.0

    values = []
    for cls in included:
        fg = (t == cls).astype(np.float64)
        errors = np.where(fg > 0, 1.0 - flat[cls], flat[cls])
        order = np.argsort(-errors, kind="stable")
        g = _lovasz_jaccard_grad(fg[order])
        values.append(float(errors[order] @ g))
        back = np.empty_like(g)
        back[order] = g
        grad[cls] += np.where(fg > 0, -back, back)
    value = float(np.mean(values))
    grad /= len(included)
    if with_grad:
        return value, grad.reshape(probs.shape)
    return value


@dataclass
class LossBreakdown:
    total: float
    ce: float
    geom_scal: float
    sem_scal: float
    lovasz: float
    lam: float

    def to_dict(self):
        return {
            "total": self.total,
            "ce": self.ce,
            "geom_scal": self.geom_scal,
            "sem_scal": self.sem_scal,
            "lovasz": self.lovasz,
            "lambda": self.lam,
        }


def pseudo_loss(logits, target, lam=0.1, ignore_empty=True, class_weights=None):
    """Total training loss: ce + lam * (geom_scal + sem_scal + lovasz)."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    flat, t = _flatten(logits, target)
    ce = cross_entropy(flat, t, class_weights)
    probs = softmax_probs(flat)
    geom, sem = scal_losses(probs, t)
    lov = lovasz_softmax(probs, t, ignore_empty)
    total = ce + lam * (geom + sem + lov)
    return LossBreakdown(float(total), ce, geom, sem, lov, float(lam))


def pseudo_loss_grad(logits, target, lam=0.1, ignore_empty=True, class_weights=None):
    """Analytic gradient of pseudo_loss with respect to the logits.

    The Lovasz term is piecewise linear in the probabilities; its sorting
    permutation is treated as locally constant, which yields the exact
    gradient away from ties.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    shape = np.asarray(logits).shape
    flat, t = _flatten(logits, target)
    c, n = flat.shape
    probs = softmax_probs(flat)

    w = np.ones(c) if class_weights is None else np.asarray(class_weights, dtype=np.float64)
    onehot = np.zeros_like(flat)
    onehot[t, np.arange(n)] = 1.0
    grad = (probs - onehot) * w[t] / n

    if lam > 0:
        _, _, g_scal = scal_losses(probs, t, with_grad=True)
        _, g_lov = lovasz_softmax(probs, t, ignore_empty, with_grad=True)
        g_probs = g_scal + g_lov
        # Chain through the softmax: dL/dl_k = p_k (g_k - sum_c g_c p_c).
        grad += lam * probs * (g_probs - (g_probs * probs).sum(axis=0, keepdims=True))
    return grad.reshape(shape)


def gradient_check(logits, target, lam=0.1, ignore_empty=True, class_weights=None, step=1e-4):
    """Relative error between the analytic gradient and central finite
    differences: max absolute difference divided by the largest gradient
    magnitude either side reports."""
    logits = np.asarray(logits, dtype=np.float64)
    analytic = pseudo_loss_grad(logits, target, lam, ignore_empty, class_weights)
    numeric = np.zeros_like(analytic)
    flat_view = numeric.reshape(-1)
    work = logits.copy()
    work_view = work.reshape(-1)
    for i in range(work_view.size):
        original = work_view[i]
        work_view[i] = original + step
        hi = pseudo_loss(work, target, lam, ignore_empty, class_weights).total
        work_view[i] = original - step
        lo = pseudo_loss(work, target, lam, ignore_empty, class_weights).total
        work_view[i] = original
        flat_view[i] = (hi - lo) / (2.0 * step)
    scale = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-12)
    return float(np.abs(numeric - analytic).max() / scale)
