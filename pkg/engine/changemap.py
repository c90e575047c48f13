# engine/changemap.py
"""
Weak change maps from a pair of semantic masks.

sIoU method: a component c of one mask is compared with the union of the
same-class components of the other mask that overlap it; pixels of sibling
components of c (same class, same mask) are left out of the denominator.
A component whose score is strictly below tau is marked changed, in both
directions. XOR / OR / post-classification maps are the pixel-level baselines.
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np

from core.config import get_classes_of_interest, get_connectivity, get_tau
from core.errors import ArgumentError, ShapeError
from core.logger import global_logger as logger
from core.raster import ChangeMask, SemanticMask, require_same_shape
from engine.components import Component, ComponentSet, label_components

MODES = ("siou", "xor", "or", "postclass")


@dataclass(frozen=True)
class SIoUParams:
    tau: float = field(default_factory=get_tau)
    connectivity: int = field(default_factory=get_connectivity)
    classes_of_interest: Tuple[int, ...] = field(default_factory=lambda: tuple(get_classes_of_interest()))

    def __post_init__(self):
        object.__setattr__(self, "classes_of_interest", tuple(sorted({int(c) for c in self.classes_of_interest})))
        if not 0.0 <= self.tau <= 1.0:
            raise ArgumentError(f"tau must lie in [0, 1], got {self.tau}")
        if self.connectivity not in (4, 8):
            raise ArgumentError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if not self.classes_of_interest:
            raise ArgumentError("classes_of_interest is empty")

    def check_against(self, mask: SemanticMask) -> None:
        if mask.background_class in self.classes_of_interest:
            raise ArgumentError(f"background class {mask.background_class} cannot be a class of interest")


def siou_of_component(c: Component, same_mask: ComponentSet, other_mask: ComponentSet) -> float:
    """sIoU of one component against the other mask's components."""
    if same_mask.shape != other_mask.shape:
        raise ShapeError(f"component sets differ in shape: {same_mask.shape} vs {other_mask.shape}")

    member = same_mask.member_mask(c)
    other_labels = other_mask.labels.get(c.class_id)
    if other_labels is None:
        return 0.0
    hit = np.unique(other_labels[member])
    hit = hit[hit > 0]
    if hit.size == 0:
        return 0.0

    matched = np.isin(other_labels, hit)
    siblings = same_mask.class_mask(c.class_id) & ~member
    intersection = np.count_nonzero(member & matched)
    denominator = np.count_nonzero((member | matched) & ~siblings)
    return intersection / denominator


def _siou_scores(labels_a: np.ndarray, labels_b: np.ndarray) -> np.ndarray:
    """Vectorised sIoU of every component of labels_a against labels_b (index i -> label i + 1)."""
    n_a = int(labels_a.max(initial=0))
    n_b = int(labels_b.max(initial=0))
    if n_a == 0:
        return np.zeros(0)

    in_a = labels_a > 0
    in_b = labels_b > 0
    both = in_a & in_b
    area = np.bincount(labels_a.ravel(), minlength=n_a + 1)
    inter = np.bincount(labels_a[both], minlength=n_a + 1)
    # pixels of each b-component not covered by any a-component of the class
    outside = np.bincount(labels_b[in_b & ~in_a], minlength=n_b + 1)

    pairs = np.unique(labels_a[both].astype(np.int64) * (n_b + 1) + labels_b[both])
    pa, pb = np.divmod(pairs, n_b + 1)
    extra = np.zeros(n_a + 1, dtype=np.int64)
    np.add.at(extra, pa, outside[pb])

    denominator = area + extra
    scores = np.zeros(n_a + 1)
    matched = inter > 0
    scores[matched] = inter[matched] / denominator[matched]
    return scores[1:]


def _check_pair(s1: SemanticMask, s2: SemanticMask) -> None:
    require_same_shape(s1, s2)
    if s1.class_count != s2.class_count:
        raise ArgumentError(f"class counts differ: {s1.class_count} vs {s2.class_count}")


def siou_changemap(s1: SemanticMask, s2: SemanticMask, p: Optional[SIoUParams] = None) -> ChangeMask:
    p = p or SIoUParams()
    _check_pair(s1, s2)
    p.check_against(s1)

    cs1 = label_components(s1, p.classes_of_interest, p.connectivity)
    cs2 = label_components(s2, p.classes_of_interest, p.connectivity)
    return changemap_from_components(cs1, cs2, p.tau)


def changemap_from_components(cs1: ComponentSet, cs2: ComponentSet, tau: float) -> ChangeMask:
    if cs1.shape != cs2.shape:
        raise ShapeError(f"component sets differ in shape: {cs1.shape} vs {cs2.shape}")
    changed = np.zeros(cs1.shape, dtype=bool)
    for class_id in sorted(set(cs1.labels) | set(cs2.labels)):
        l1 = cs1.labels.get(class_id, np.zeros(cs1.shape, dtype=np.int32))
        l2 = cs2.labels.get(class_id, np.zeros(cs2.shape, dtype=np.int32))
        for labels, other in ((l1, l2), (l2, l1)):
            scores = _siou_scores(labels, other)
            below = np.flatnonzero(scores < tau) + 1
            if below.size:
                changed |= np.isin(labels, below)
    return ChangeMask(changed)


def _membership(mask: SemanticMask, classes: Iterable[int]) -> np.ndarray:
    return np.isin(mask.data, sorted({int(c) for c in classes}))


def xor_changemap(s1: SemanticMask, s2: SemanticMask, classes_of_interest: Iterable[int]) -> ChangeMask:
    require_same_shape(s1, s2)
    return ChangeMask(_membership(s1, classes_of_interest) != _membership(s2, classes_of_interest))


def or_changemap(s1: SemanticMask, s2: SemanticMask, classes_of_interest: Iterable[int]) -> ChangeMask:
    require_same_shape(s1, s2)
    return ChangeMask(_membership(s1, classes_of_interest) | _membership(s2, classes_of_interest))


def postclass_changemap(pred1: SemanticMask, pred2: SemanticMask, classes_of_interest: Iterable[int]) -> ChangeMask:
    """Post-classification comparison of two independently predicted semantic masks."""
    return xor_changemap(pred1, pred2, classes_of_interest)


def changemap(s1: SemanticMask, s2: SemanticMask, mode: str = "siou", p: Optional[SIoUParams] = None) -> ChangeMask:
    """Dispatch by mode name; pixel modes use p.classes_of_interest."""
    p = p or SIoUParams()
    if mode == "siou":
        return siou_changemap(s1, s2, p)
    if mode == "xor":
        return xor_changemap(s1, s2, p.classes_of_interest)
    if mode == "or":
        return or_changemap(s1, s2, p.classes_of_interest)
    if mode == "postclass":
        return postclass_changemap(s1, s2, p.classes_of_interest)
    logger.log_error(f"❌ Unknown change map mode {mode!r}")
    raise ArgumentError(f"mode must be one of {MODES}, got {mode!r}")
