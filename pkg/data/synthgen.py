# data/synthgen.py
"""
Deterministic synthetic bi-temporal dataset.

Each pair holds a few rectangular buildings (some with a notched corner) that
appear in both dates, shifted by up to `jitter` pixels at t2 to imitate
viewpoint and shadow nuisance. A changed pair additionally gets one building
that exists at only one date (construction or demolition). Pair k draws from
its own random stream (seed, k), so the output does not depend on threads.

Layout under the output directory:
    images/<id>_t.png, images/<id>_t2.png   RGB
    masks/<id>_t.png,  masks/<id>_t2.png    class indices (0 background, 1 building)
    changes/<id>_change.png                 ground-truth change (the added or removed building)
    manifest.jsonl

Every pair gets its t2 mask on disk, but only val records list it as `mask_t2`:
a record with `mask_t2` is for supervised evaluation and never enters weak-label
batches, so train records stay single-date.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from core.config import get_synth_config
from core.errors import ArgumentError
from core.logger import global_logger as logger
from core.manifest import DatasetManifest, PairRecord, write_manifest
from core.raster import ChangeMask, SemanticMask, write_change, write_image, write_mask
from utils.pool import run_ordered
from utils.rng import stream

PathLike = Union[str, Path]

MANIFEST_NAME = "manifest.jsonl"
CHANGE_DIR = "changes"
PLACEMENT_TRIES = 64
DATE_T = "2019-06-01"
DATE_T2 = "2021-06-01"


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    pair_count: int = 64
    size: int = 64
    blob_count: Tuple[int, int] = (1, 4)
    blob_size: Tuple[int, int] = (4, 12)
    change_rate: float = 0.1
    jitter: int = 1
    val_fraction: float = 0.0
    resolution: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "blob_count", tuple(int(v) for v in self.blob_count))
        object.__setattr__(self, "blob_size", tuple(int(v) for v in self.blob_size))
        if self.pair_count < 0:
            raise ArgumentError(f"pair count must be >= 0, got {self.pair_count}")
        if self.size < 16:
            raise ArgumentError(f"size must be >= 16, got {self.size}")
        lo, hi = self.blob_count
        if not 0 <= lo <= hi:
            raise ArgumentError(f"blob count range {self.blob_count} is empty")
        lo, hi = self.blob_size
        if not 1 <= lo <= hi:
            raise ArgumentError(f"blob size range {self.blob_size} is empty")
        if self.jitter < 0:
            raise ArgumentError(f"jitter must be >= 0, got {self.jitter}")
        if hi > self.size - 2 * self.jitter:
            raise ArgumentError(f"blobs up to {hi} px with jitter {self.jitter} do not fit in {self.size} px")
        if not 0.0 <= self.change_rate <= 1.0:
            raise ArgumentError(f"change rate must lie in [0, 1], got {self.change_rate}")
        if not 0.0 <= self.val_fraction <= 1.0:
            raise ArgumentError(f"val fraction must lie in [0, 1], got {self.val_fraction}")
        if not self.resolution > 0:
            raise ArgumentError(f"resolution must be > 0, got {self.resolution}")

    @classmethod
    def from_config(cls, seed: int, **overrides) -> "SynthSpec":
        cfg = get_synth_config()
        values = {
            "pair_count": cfg.get("pairs", 64),
            "size": cfg.get("size", 64),
            "blob_count": tuple(cfg.get("blob_count", (1, 4))),
            "blob_size": tuple(cfg.get("blob_size", (4, 12))),
            "change_rate": cfg.get("change_rate", 0.1),
            "jitter": cfg.get("jitter", 1),
            "val_fraction": cfg.get("val_fraction", 0.0),
            "resolution": cfg.get("resolution", 0.2),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(seed=seed, **values)


@dataclass(frozen=True)
class PairTruth:
    id: str
    changed: bool
    kind: Optional[str] = None  # "construction" | "demolition"
    change_area_px: int = 0


@dataclass
class SynthResult:
    manifest: DatasetManifest
    truth: List[PairTruth] = field(default_factory=list)


def pair_id(index: int) -> str:
    return f"pair_{index:05d}"


def mask_t2_path(record_id: str) -> str:
    return f"masks/{record_id}_t2.png"


def change_path(record_id: str) -> str:
    return f"{CHANGE_DIR}/{record_id}_change.png"


def is_selected(index: int, fraction: float) -> bool:
    """Evenly spread selection: exactly floor(n * fraction) of the first n indices are picked."""
    # rational arithmetic: a float product such as 180 * 0.35 floors one short
    f = Fraction(str(fraction))
    return math.floor((index + 1) * f) > math.floor(index * f)


def _blob_shape(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    shape = np.ones((h, w), dtype=bool)
    if min(h, w) >= 4 and rng.random() < 0.5:
        nh = int(rng.integers(1, h // 2 + 1))
        nw = int(rng.integers(1, w // 2 + 1))
        corner = int(rng.integers(4))
        rows = slice(0, nh) if corner < 2 else slice(h - nh, h)
        cols = slice(0, nw) if corner % 2 == 0 else slice(w - nw, w)
        shape[rows, cols] = False
    return shape


def _place(rng: np.random.Generator, spec: SynthSpec, h: int, w: int,
           taken: List[Tuple[int, int, int, int]]) -> Optional[Tuple[int, int]]:
    """Top-left corner for an h x w blob clear of every taken rectangle by 2 * jitter + 1 pixels."""
    margin = 2 * spec.jitter + 1
    lo = spec.jitter
    max_r = spec.size - spec.jitter - h
    max_c = spec.size - spec.jitter - w
    if max_r < lo or max_c < lo:
        return None
    for _ in range(PLACEMENT_TRIES):
        r0 = int(rng.integers(lo, max_r + 1))
        c0 = int(rng.integers(lo, max_c + 1))
        clear = all(
            r0 >= tr + th + margin or tr >= r0 + h + margin or c0 >= tc + tw + margin or tc >= c0 + w + margin
            for tr, tc, th, tw in taken
        )
        if clear:
            return r0, c0
    return None


def _stamp(canvas: np.ndarray, shape: np.ndarray, r0: int, c0: int) -> None:
    h, w = shape.shape
    canvas[r0:r0 + h, c0:c0 + w] |= shape


def _render(rng: np.random.Generator, mask: np.ndarray) -> np.ndarray:
    """Flat RGB stand-in imagery: noisy vegetation with grey roofs."""
    size = mask.shape
    image = np.empty(size + (3,), dtype=np.uint8)
    image[..., 0] = rng.integers(70, 100, size=size)
    image[..., 1] = rng.integers(100, 140, size=size)
    image[..., 2] = rng.integers(50, 80, size=size)
    roof = rng.integers(170, 200, size=size)
    for band in range(3):
        image[..., band] = np.where(mask, roof, image[..., band])
    return image


def make_pair(spec: SynthSpec, index: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, PairTruth]:
    """(mask_t, mask_t2, image_t, image_t2, change, truth) for pair `index`."""
    rng = stream(spec.seed, index)
    s = spec.size
    mask_t = np.zeros((s, s), dtype=bool)
    mask_t2 = np.zeros((s, s), dtype=bool)
    change = np.zeros((s, s), dtype=bool)
    taken: List[Tuple[int, int, int, int]] = []
    lo, hi = spec.blob_size

    truth = PairTruth(id=pair_id(index), changed=False)
    if is_selected(index, spec.change_rate):
        kind = "construction" if rng.random() < 0.5 else "demolition"
        h, w = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        # first blob on an empty canvas always fits
        r0, c0 = _place(rng, spec, h, w, taken)
        shape = _blob_shape(rng, h, w)
        _stamp(mask_t2 if kind == "construction" else mask_t, shape, r0, c0)
        _stamp(change, shape, r0, c0)
        taken.append((r0, c0, h, w))
        truth = PairTruth(id=truth.id, changed=True, kind=kind, change_area_px=int(shape.sum()))

    count = int(rng.integers(spec.blob_count[0], spec.blob_count[1] + 1))
    for _ in range(count):
        h, w = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        spot = _place(rng, spec, h, w, taken)
        if spot is None:
            continue
        r0, c0 = spot
        shape = _blob_shape(rng, h, w)
        dr, dc = (int(v) for v in rng.integers(-spec.jitter, spec.jitter + 1, size=2))
        _stamp(mask_t, shape, r0, c0)
        _stamp(mask_t2, shape, r0 + dr, c0 + dc)
        taken.append((r0, c0, h, w))

    image_t = _render(rng, mask_t)
    image_t2 = _render(rng, mask_t2)
    return mask_t.astype(np.uint8), mask_t2.astype(np.uint8), image_t, image_t2, change, truth


def _write_pair(spec: SynthSpec, out_dir: Path, index: int) -> Tuple[PairRecord, PairTruth]:
    mask_t, mask_t2, image_t, image_t2, change, truth = make_pair(spec, index)
    pid = truth.id
    paths = {
        "image_t": f"images/{pid}_t.png",
        "image_t2": f"images/{pid}_t2.png",
        "mask_t": f"masks/{pid}_t.png",
    }
    write_image(image_t, out_dir / paths["image_t"])
    write_image(image_t2, out_dir / paths["image_t2"])
    write_mask(SemanticMask(mask_t, class_count=2, resolution=spec.resolution), out_dir / paths["mask_t"])
    write_mask(SemanticMask(mask_t2, class_count=2, resolution=spec.resolution), out_dir / mask_t2_path(pid))
    write_change(ChangeMask(change), out_dir / change_path(pid))

    # val pairs are taken from the end so they do not coincide with the changed ones
    split = "val" if is_selected(spec.pair_count - 1 - index, spec.val_fraction) else "train"
    if split == "val":
        paths["mask_t2"] = mask_t2_path(pid)
    record = PairRecord(
        id=pid, split=split, resolution=spec.resolution, date_t=DATE_T, date_t2=DATE_T2, **paths
    )
    return record, truth


def generate(spec: SynthSpec, out_dir: PathLike, threads: int = 1) -> SynthResult:
    out_dir = Path(out_dir)
    logger.log_info(f"🏗️ Generating {spec.pair_count} pairs of {spec.size}x{spec.size} (seed {spec.seed}) into {out_dir}")
    results = run_ordered(lambda i: _write_pair(spec, out_dir, i), range(spec.pair_count), threads, label="synth")

    manifest = DatasetManifest(records=tuple(r for r, _ in results), root=out_dir)
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    truth = [t for _, t in results]
    logger.log_info(f"✅ Synthetic dataset ready: {sum(t.changed for t in truth)} changed of {len(truth)}")
    return SynthResult(manifest=manifest, truth=truth)
