# engine/metrics.py
"""
Change-map evaluation: pixel confusion counts, F1 / IoU / FPR (plus precision
and recall), object statistics, and the 5x5 binary median post-filter.

Counts are micro-accumulated integers; ratios are only formed at the end.
"""

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy import ndimage
from sklearn.metrics import confusion_matrix

from core.errors import ArgumentError
from core.raster import ChangeMask, SemanticMask, require_same_shape
from engine.components import component_stats, label_components


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred: ChangeMask, ref: ChangeMask) -> ConfusionCounts:
    require_same_shape(pred, ref)
    cm = confusion_matrix(ref.data.ravel(), pred.data.ravel(), labels=[0, 1])
    (tn, fp), (fn, tp) = cm.tolist()
    return ConfusionCounts(tp=int(tp), fp=int(fp), fn=int(fn), tn=int(tn))


def accumulate(counts: ConfusionCounts, pred: ChangeMask, ref: ChangeMask) -> ConfusionCounts:
    return counts + confusion(pred, ref)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def f1(counts: ConfusionCounts) -> float:
    return _ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn)


def iou(counts: ConfusionCounts) -> float:
    return _ratio(counts.tp, counts.tp + counts.fp + counts.fn)


def fpr(counts: ConfusionCounts) -> float:
    return _ratio(counts.fp, counts.fp + counts.tn)


def precision(counts: ConfusionCounts) -> float:
    return _ratio(counts.tp, counts.tp + counts.fp)


def recall(counts: ConfusionCounts) -> float:
    return _ratio(counts.tp, counts.tp + counts.fn)


def scores(counts: ConfusionCounts) -> dict:
    """All ratios as percentages rounded to one decimal, as reported in tables."""
    return {
        "f1": round(100.0 * f1(counts), 1),
        "iou": round(100.0 * iou(counts), 1),
        "fpr": round(100.0 * fpr(counts), 1),
        "precision": round(100.0 * precision(counts), 1),
        "recall": round(100.0 * recall(counts), 1),
    }


def median_filter(m: ChangeMask, window: int = 5) -> ChangeMask:
    """
    Binary median over a window clipped to the image: a pixel is 1 when ones are a
    strict majority of the valid pixels in its window (ties go to 0).
    """
    if window < 1 or window % 2 == 0:
        raise ArgumentError(f"median window must be a positive odd integer, got {window}")
    kernel = np.ones((window, window), dtype=np.int32)
    ones = ndimage.correlate(m.data.astype(np.int32), kernel, mode="constant", cval=0)
    valid = ndimage.correlate(np.ones(m.shape, dtype=np.int32), kernel, mode="constant", cval=0)
    return ChangeMask(2 * ones > valid)


def median_filter_5x5(m: ChangeMask) -> ChangeMask:
    return median_filter(m, 5)


def object_report(pred: ChangeMask, resolution: float, connectivity: int = 8) -> Tuple[int, float, float]:
    """(object count, mean object size px, mean object size m²) of a change map."""
    if resolution is None or not resolution > 0:
        raise ArgumentError(f"resolution must be > 0, got {resolution}")
    as_mask = SemanticMask(pred.data, class_count=2, background_class=0, resolution=resolution)
    return component_stats(label_components(as_mask, [1], connectivity), resolution)


def aggregate_object_stats(reports: Iterable[Tuple[int, float, float]]) -> Tuple[float, float, float]:
    """
    Dataset-level object statistics: (average objects per pair, average object
    size px, average object size m²), sizes averaged over every object of every pair.
    """
    pairs = 0
    objects = 0
    area_px = 0.0
    area_m2 = 0.0
    for count, mean_px, mean_m2 in reports:
        pairs += 1
        objects += count
        area_px += count * mean_px
        area_m2 += count * mean_m2
    if objects == 0:
        return 0.0, 0.0, 0.0
    return objects / pairs, area_px / objects, area_m2 / objects
