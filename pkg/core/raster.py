# core/raster.py
"""
In-memory raster types shared by every stage, plus the PNG codec.

SemanticMask holds one uint8 class index per pixel; ChangeMask holds {0,1}.
On disk a semantic mask is a single-channel 8-bit PNG (value = class index);
a change mask is a single-channel 8-bit PNG with 0 = unchanged, 255 = changed.
Resolution and the class table travel in the manifest, never in the PNG.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from PIL import Image

from core.errors import ArgumentError, InvalidClassError, RasterIOError, ShapeError
from core.logger import global_logger as logger

PathLike = Union[str, Path]

CHANGE_ON = 255


def _frozen(data: np.ndarray) -> np.ndarray:
    data = np.ascontiguousarray(data, dtype=np.uint8)
    data.setflags(write=False)
    return data


@dataclass(frozen=True, eq=False)
class SemanticMask:
    data: np.ndarray
    class_count: int
    background_class: int = 0
    resolution: Optional[float] = None

    def __post_init__(self):
        if np.ndim(self.data) != 2:
            raise ShapeError(f"semantic mask must be 2-D, got shape {np.shape(self.data)}")
        object.__setattr__(self, "data", _frozen(self.data))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def __eq__(self, other) -> bool:
        if not isinstance(other, SemanticMask):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and self.background_class == other.background_class
            and self.resolution == other.resolution
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True, eq=False)
class ChangeMask:
    data: np.ndarray

    def __post_init__(self):
        if np.ndim(self.data) != 2:
            raise ShapeError(f"change mask must be 2-D, got shape {np.shape(self.data)}")
        object.__setattr__(self, "data", _frozen(np.asarray(self.data) != 0))

    @classmethod
    def zeros(cls, height: int, width: int) -> "ChangeMask":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    @property
    def changed_pixels(self) -> int:
        return int(np.count_nonzero(self.data))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChangeMask):
            return NotImplemented
        return np.array_equal(self.data, other.data)


def require_same_shape(*rasters) -> None:
    shapes = {tuple(np.shape(getattr(r, "data", r))[:2]) for r in rasters}
    if len(shapes) > 1:
        raise ShapeError(f"raster dimensions differ: {sorted(shapes)}")


# ========================
# Operations
# ========================

def merge_classes(mask: SemanticMask, foreground: Iterable[int]) -> SemanticMask:
    """Collapse a K-class mask into foreground (1) vs background (0)."""
    foreground = {int(c) for c in foreground}
    if not foreground:
        raise ArgumentError("foreground class set is empty")
    out_of_range = sorted(c for c in foreground if c < 0 or c >= mask.class_count)
    if out_of_range:
        raise InvalidClassError(f"foreground classes {out_of_range} outside [0, {mask.class_count})")
    if mask.background_class in foreground:
        raise ArgumentError(f"background class {mask.background_class} cannot be foreground")

    merged = np.isin(mask.data, sorted(foreground)).astype(np.uint8)
    return SemanticMask(merged, class_count=2, background_class=0, resolution=mask.resolution)


def nn_resample(mask: SemanticMask, factor: int) -> SemanticMask:
    """Downsample by an integer factor, sampling the centre pixel of each factor x factor cell."""
    if int(factor) != factor or factor < 1:
        raise ArgumentError(f"resampling factor must be a positive integer, got {factor}")
    factor = int(factor)
    if mask.height % factor or mask.width % factor:
        raise ShapeError(f"{mask.width}x{mask.height} mask is not divisible by factor {factor}")

    offset = factor // 2
    sampled = mask.data[offset::factor, offset::factor]
    resolution = mask.resolution * factor if mask.resolution is not None else None
    return SemanticMask(sampled, class_count=mask.class_count, background_class=mask.background_class, resolution=resolution)


@dataclass(frozen=True)
class Finding:
    kind: str
    message: str
    row: Optional[int] = None
    col: Optional[int] = None


@dataclass
class ValidationReport:
    findings: List[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def __len__(self) -> int:
        return len(self.findings)

    def __iter__(self):
        return iter(self.findings)


def validate(mask: SemanticMask, expected_shape: Optional[Tuple[int, int]] = None, max_listed: int = 100) -> ValidationReport:
    """Report-only check of the SemanticMask invariants. Out-of-range pixels are listed up to max_listed."""
    report = ValidationReport()

    if mask.class_count < 1 or mask.class_count > 256:
        report.findings.append(Finding("class_count", f"class count {mask.class_count} outside [1, 256]"))
    if not 0 <= mask.background_class < mask.class_count:
        report.findings.append(Finding("background", f"background class {mask.background_class} >= K={mask.class_count}"))
    if mask.resolution is not None and not mask.resolution > 0:
        report.findings.append(Finding("resolution", f"non-positive resolution {mask.resolution}"))
    if expected_shape is not None and tuple(expected_shape) != mask.shape:
        report.findings.append(Finding("shape", f"dimensions {mask.shape} differ from expected {tuple(expected_shape)}"))

    rows, cols = np.nonzero(mask.data >= mask.class_count)
    for r, c in zip(rows[:max_listed], cols[:max_listed]):
        report.findings.append(Finding(
            "out_of_range", f"pixel value {int(mask.data[r, c])} >= K={mask.class_count}", row=int(r), col=int(c)
        ))
    if len(rows) > max_listed:
        logger.log_warning(f"⚠️ {len(rows) - max_listed} further out-of-range pixels not listed")
    return report


# ========================
# PNG codec
# ========================

def _read_png(path: PathLike) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "P", "1"):
                raise RasterIOError(f"{path}: expected a single-channel PNG, got mode {img.mode}")
            return np.array(img.convert("L") if img.mode == "1" else img, dtype=np.uint8)
    except FileNotFoundError as e:
        raise RasterIOError(f"raster not found: {path}") from e
    except OSError as e:
        if isinstance(e, RasterIOError):
            raise
        raise RasterIOError(f"cannot read raster {path}: {e}") from e


def _write_png(data: np.ndarray, path: PathLike) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.ascontiguousarray(data, dtype=np.uint8), mode="L").save(path, format="PNG")
    except OSError as e:
        raise RasterIOError(f"cannot write raster {path}: {e}") from e


def read_mask(path: PathLike, class_count: int, background_class: int = 0, resolution: Optional[float] = None) -> SemanticMask:
    return SemanticMask(_read_png(path), class_count=class_count, background_class=background_class, resolution=resolution)


def write_mask(mask: SemanticMask, path: PathLike) -> None:
    _write_png(mask.data, path)


def read_change(path: PathLike) -> ChangeMask:
    return ChangeMask(_read_png(path) != 0)


def write_change(change: ChangeMask, path: PathLike) -> None:
    _write_png(change.data.astype(np.uint8) * CHANGE_ON, path)


def read_image(path: PathLike) -> np.ndarray:
    """Read any PNG as an array (images pass through untouched: no band processing)."""
    try:
        with Image.open(path) as img:
            return np.array(img)
    except FileNotFoundError as e:
        raise RasterIOError(f"raster not found: {path}") from e
    except OSError as e:
        raise RasterIOError(f"cannot read raster {path}: {e}") from e


def write_image(data: np.ndarray, path: PathLike) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.ascontiguousarray(data)).save(path, format="PNG")
    except OSError as e:
        raise RasterIOError(f"cannot write raster {path}: {e}") from e
