# tests/oracles.py
"""Slow pixel-loop reference implementations the engine is checked against."""

from collections import deque
from typing import Dict, FrozenSet, List, Sequence, Set, Tuple

import numpy as np

from core.raster import SemanticMask

Pixel = Tuple[int, int]


def mask_from_art(art: Sequence[str], class_count: int = 2, resolution=None) -> SemanticMask:
    """Rows of characters: '.' is class 0, digits are class indices, '#' is class 1."""
    rows = [[0 if ch == "." else 1 if ch == "#" else int(ch) for ch in line] for line in art]
    return SemanticMask(np.array(rows, dtype=np.uint8), class_count=class_count, resolution=resolution)


def _neighbours(connectivity: int):
    if connectivity == 4:
        return [(-1, 0), (1, 0), (0, -1), (0, 1)]
    return [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def flood_fill(binary: np.ndarray, connectivity: int = 8) -> List[FrozenSet[Pixel]]:
    """Components of a boolean raster, ordered row-major by first pixel."""
    h, w = binary.shape
    seen = np.zeros_like(binary, dtype=bool)
    out = []
    for r in range(h):
        for c in range(w):
            if not binary[r, c] or seen[r, c]:
                continue
            comp: Set[Pixel] = set()
            queue = deque([(r, c)])
            seen[r, c] = True
            while queue:
                pr, pc = queue.popleft()
                comp.add((pr, pc))
                for dr, dc in _neighbours(connectivity):
                    nr, nc = pr + dr, pc + dc
                    if 0 <= nr < h and 0 <= nc < w and binary[nr, nc] and not seen[nr, nc]:
                        seen[nr, nc] = True
                        queue.append((nr, nc))
            out.append(frozenset(comp))
    return out


def literal_siou(c: FrozenSet[Pixel], same: List[FrozenSet[Pixel]], other: List[FrozenSet[Pixel]]) -> float:
    matched: Set[Pixel] = set()
    for o in other:
        if c & o:
            matched |= o
    if not matched:
        return 0.0
    siblings: Set[Pixel] = set()
    for s in same:
        if s != c:
            siblings |= s
    return len(c & matched) / len((c | matched) - siblings)


def literal_siou_changemap(d1: np.ndarray, d2: np.ndarray, classes, tau: float, connectivity: int = 8) -> np.ndarray:
    out = np.zeros(d1.shape, dtype=np.uint8)
    for k in classes:
        comps1 = flood_fill(d1 == k, connectivity)
        comps2 = flood_fill(d2 == k, connectivity)
        for same, other in ((comps1, comps2), (comps2, comps1)):
            for c in same:
                if literal_siou(c, same, other) < tau:
                    for r, col in c:
                        out[r, col] = 1
    return out


def sort_median(data: np.ndarray, window: int = 5) -> np.ndarray:
    """Lower median of the clipped window: ties between 0 and 1 resolve to 0."""
    h, w = data.shape
    half = window // 2
    out = np.zeros_like(data, dtype=np.uint8)
    for r in range(h):
        for c in range(w):
            values = sorted(data[max(0, r - half):r + half + 1, max(0, c - half):c + half + 1].ravel().tolist())
            out[r, c] = values[(len(values) - 1) // 2]
    return out


def nearest_center_stitch(tiles: List[np.ndarray], origins: List[Pixel], tile_size: int, height: int, width: int) -> np.ndarray:
    out = np.zeros((height, width), dtype=np.uint8)
    for r in range(height):
        for c in range(width):
            best, best_d = None, None
            for k, (r0, c0) in enumerate(origins):
                d = (2 * r - (2 * r0 + tile_size - 1)) ** 2 + (2 * c - (2 * c0 + tile_size - 1)) ** 2
                if best_d is None or d < best_d:
                    best, best_d = k, d
            r0, c0 = origins[best]
            out[r, c] = tiles[best][r - r0, c - c0]
    return out


def random_blob_mask(rng: np.random.Generator, size: int = 32, max_blobs: int = 6) -> np.ndarray:
    """Binary raster with up to max_blobs random rectangles (may touch or merge)."""
    data = np.zeros((size, size), dtype=np.uint8)
    for _ in range(int(rng.integers(0, max_blobs + 1))):
        h, w = (int(v) for v in rng.integers(1, size // 3, size=2))
        r0 = int(rng.integers(0, size - h + 1))
        c0 = int(rng.integers(0, size - w + 1))
        data[r0:r0 + h, c0:c0 + w] = 1
    return data


def components_by_class(data: np.ndarray, classes, connectivity: int = 8) -> Dict[int, List[FrozenSet[Pixel]]]:
    return {k: flood_fill(data == k, connectivity) for k in classes}
