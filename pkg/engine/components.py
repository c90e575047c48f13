# engine/components.py
"""
Connected-component labeling per class.

Each requested class is labeled separately (components never span classes).
Components are enumerated row-major by their first pixel, so every output
built from a ComponentSet is byte-deterministic.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Tuple

import numpy as np
from scipy import ndimage

from core.errors import ArgumentError, InvalidClassError
from core.raster import SemanticMask

CONNECTIVITY = {4: 1, 8: 2}


def structure_for(connectivity: int) -> np.ndarray:
    if connectivity not in CONNECTIVITY:
        raise ArgumentError(f"connectivity must be 4 or 8, got {connectivity}")
    return ndimage.generate_binary_structure(2, CONNECTIVITY[connectivity])


@dataclass(frozen=True, eq=False)
class Component:
    class_id: int
    label: int
    rows: np.ndarray
    cols: np.ndarray
    bbox: Tuple[int, int, int, int]

    @property
    def area_px(self) -> int:
        return int(self.rows.size)

    @property
    def first_pixel(self) -> Tuple[int, int]:
        return int(self.rows[0]), int(self.cols[0])

    @property
    def pixels(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset(zip(self.rows.tolist(), self.cols.tolist()))


@dataclass(frozen=True, eq=False)
class ComponentSet:
    components: List[Component]
    shape: Tuple[int, int]
    connectivity: int = 8
    # class id -> int32 label image (0 = not in a component of that class)
    labels: Dict[int, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def of_class(self, class_id: int) -> List[Component]:
        return [c for c in self.components if c.class_id == class_id]

    def member_mask(self, component: Component) -> np.ndarray:
        return self.labels[component.class_id] == component.label

    def class_mask(self, class_id: int) -> np.ndarray:
        labels = self.labels.get(class_id)
        if labels is None:
            return np.zeros(self.shape, dtype=bool)
        return labels > 0


def _label_class(binary: np.ndarray, class_id: int, structure: np.ndarray) -> Tuple[np.ndarray, List[Component]]:
    labels, count = ndimage.label(binary, structure=structure)
    if count == 0:
        return labels, []

    flat = labels.ravel()
    # np.nonzero walks in row-major order, so a stable sort by label keeps
    # each component's pixels row-major and its first entry is the first pixel
    idx = np.flatnonzero(flat)
    order = np.argsort(flat[idx], kind="stable")
    idx = idx[order]
    lab = flat[idx]
    starts = np.searchsorted(lab, np.arange(1, count + 1), side="left")
    ends = np.append(starts[1:], lab.size)

    width = binary.shape[1]
    components = []
    for label_id, (s, e) in enumerate(zip(starts, ends), start=1):
        rows, cols = np.divmod(idx[s:e], width)
        bbox = (int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))
        components.append(Component(class_id=class_id, label=label_id, rows=rows, cols=cols, bbox=bbox))
    return labels, components


def label_components(mask: SemanticMask, classes: Iterable[int], connectivity: int = 8) -> ComponentSet:
    """Maximal connected components of every requested class."""
    classes = sorted({int(c) for c in classes})
    bad = [c for c in classes if c < 0 or c >= mask.class_count]
    if bad:
        raise InvalidClassError(f"classes {bad} outside [0, {mask.class_count})")
    structure = structure_for(connectivity)

    labels: Dict[int, np.ndarray] = {}
    components: List[Component] = []
    for class_id in classes:
        class_labels, class_components = _label_class(mask.data == class_id, class_id, structure)
        labels[class_id] = class_labels
        components.extend(class_components)

    components.sort(key=lambda c: c.first_pixel)
    return ComponentSet(components=components, shape=mask.shape, connectivity=connectivity, labels=labels)


def component_stats(cs: ComponentSet, resolution: float) -> Tuple[int, float, float]:
    """(count, mean area in px, mean area in m²)."""
    if resolution is None or not resolution > 0:
        raise ArgumentError(f"resolution must be > 0, got {resolution}")
    count = len(cs.components)
    if count == 0:
        return 0, 0.0, 0.0
    mean_px = sum(c.area_px for c in cs.components) / count
    return count, float(mean_px), float(mean_px * resolution * resolution)
