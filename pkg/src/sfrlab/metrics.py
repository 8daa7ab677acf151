"""Segmentation scores and the training-schedule formulas."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyUnionError

__all__ = [
    "ConfusionCounts",
    "confusion_counts",
    "iou",
    "class_weights",
    "poly_lr",
    "weighted_cross_entropy",
    "DEFAULT_C",
]

DEFAULT_C = 1.12
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _binary(mask, name):
    arr = np.asarray(mask)
    if arr.dtype == bool:
        return arr
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must be a binary mask with values in {{0, 1}}")
    return arr.astype(bool)


def confusion_counts(pred, gt) -> ConfusionCounts:
    """Pixel tallies with class 1 (building) as the positive class."""
    p, g = _binary(pred, "pred"), _binary(gt, "gt")
    if p.shape != g.shape:
        raise ValueError(f"mask shapes differ: {p.shape} vs {g.shape}")
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionCounts(tp, fp, fn, p.size - tp - fp - fn)


def iou(counts: ConfusionCounts) -> float:
    """Jaccard index ``tp / (tp + fp + fn)``."""
    union = counts.tp + counts.fp + counts.fn
    if union == 0:
        raise EmptyUnionError("IoU undefined: neither mask has positive pixels")
    return counts.tp / union


def class_weights(frequencies: Sequence[float], c: float = DEFAULT_C) -> list[float]:
    """``w_k = 1 / ln(P_k + c)`` for per-class pixel frequencies ``P_k``."""
    freqs = [float(p) for p in frequencies]
    if c <= 0:
        raise ValueError("c must be positive")
    if any(not 0.0 <= p <= 1.0 for p in freqs):
        raise ValueError("class frequencies must lie in [0, 1]")
    if not math.isclose(sum(freqs), 1.0, abs_tol=1e-6):
        raise ValueError(f"class frequencies must sum to 1 (got {sum(freqs)})")
    bad = [p for p in freqs if p + c <= 1.0]
    if bad:
        raise ValueError(f"P + c must exceed 1 for every class (P={bad[0]}, c={c})")
    return [1.0 / math.log(p + c) for p in freqs]


def poly_lr(base: float, iteration: int, max_iter: int, power: float = 0.9) -> float:
    """``base * (1 - iteration / max_iter) ** power``."""
    if base <= 0:
        raise ValueError("base learning rate must be positive")
    if max_iter <= 0 or not 0 <= iteration <= max_iter:
        raise ValueError(f"need 0 <= iteration <= max_iter, got {iteration}/{max_iter}")
    return base * (1.0 - iteration / max_iter) ** power


def weighted_cross_entropy(probabilities, target, weights, *, report=None) -> float:
    """Mean over pixels of ``w[target] * -ln p[target]``.

    ``probabilities`` is ``(K, H, W)``; ``target`` is ``(H, W)`` with class
    indices.  Target probabilities below 1e-12 are clamped; when
    ``report`` is a list the number of clamped pixels is appended to it.
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    tgt = np.asarray(target)
    w = np.asarray(weights, dtype=np.float64)
    if probs.ndim != 3 or probs.shape[1:] != tgt.shape:
        raise ValueError(f"probabilities {probs.shape} do not match target {tgt.shape}")
    k = probs.shape[0]
    if w.shape != (k,):
        raise ValueError(f"expected {k} class weights, got {w.shape}")
    if not np.issubdtype(tgt.dtype, np.integer) or tgt.min() < 0 or tgt.max() >= k:
        raise ValueError("target must hold integer class indices in [0, K)")
    if (probs < 0).any() or not np.allclose(probs.sum(axis=0), 1.0, atol=1e-5, rtol=0):
        raise ValueError("probabilities must be non-negative and sum to 1 per pixel")
    picked = np.take_along_axis(probs, tgt[None].astype(np.intp), axis=0)[0]
    clamped = picked < PROB_FLOOR
    if report is not None:
        report.append(int(clamped.sum()))
    picked = np.where(clamped, PROB_FLOOR, picked)
    return float(np.mean(w[tgt] * -np.log(picked)))
