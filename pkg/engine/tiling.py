# engine/tiling.py
"""
Overlapping tile grids over large rasters and stitching of per-tile change maps.

Origins per axis step by P - overlap; the last origin is clamped to dim - P so
every tile stays inside the image. When stitching, each output pixel takes the
value of the tile whose centre is nearest (ties: lowest tile index), which
makes stitch(extract_tiles(x)) == x for every grid.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from core.errors import ArgumentError, ManifestParseError, RasterIOError, ShapeError
from core.logger import global_logger as logger
from core.raster import ChangeMask

PathLike = Union[str, Path]


@dataclass(frozen=True)
class TileGrid:
    width: int
    height: int
    tile_size: int
    overlap: int
    row_origins: Tuple[int, ...]
    col_origins: Tuple[int, ...]

    @property
    def stride(self) -> int:
        return self.tile_size - self.overlap

    @property
    def origins(self) -> List[Tuple[int, int]]:
        """(row, col) top-left corners, row-major."""
        return [(r, c) for r in self.row_origins for c in self.col_origins]

    def __len__(self) -> int:
        return len(self.row_origins) * len(self.col_origins)

    def lines(self) -> List[str]:
        header = {"width": self.width, "height": self.height, "tile_size": self.tile_size, "overlap": self.overlap}
        return [json.dumps(header)] + [json.dumps({"row": r, "col": c}) for r, c in self.origins]


def axis_origins(dim: int, tile_size: int, stride: int) -> Tuple[int, ...]:
    last = dim - tile_size
    steps = math.ceil(last / stride) if last > 0 else 0
    origins = []
    for k in range(steps + 1):
        origin = min(k * stride, last)
        if not origins or origins[-1] != origin:
            origins.append(origin)
    return tuple(origins)


def overlap_from_fraction(tile_size: int, fraction: float) -> int:
    """Pixel overlap for a fractional overlap such as 5 % of a 64 px crop."""
    if not 0.0 <= fraction < 1.0:
        raise ArgumentError(f"overlap fraction must lie in [0, 1), got {fraction}")
    return min(int(round(tile_size * fraction)), tile_size - 1)


def plan_grid(width: int, height: int, tile_size: int, overlap: int) -> TileGrid:
    if tile_size < 1:
        raise ArgumentError(f"tile size must be >= 1, got {tile_size}")
    if tile_size > min(width, height):
        raise ArgumentError(f"tile size {tile_size} exceeds image {width}x{height}")
    if not 0 <= overlap < tile_size:
        raise ArgumentError(f"overlap must lie in [0, {tile_size}), got {overlap}")

    stride = tile_size - overlap
    grid = TileGrid(
        width=width,
        height=height,
        tile_size=tile_size,
        overlap=overlap,
        row_origins=axis_origins(height, tile_size, stride),
        col_origins=axis_origins(width, tile_size, stride),
    )
    logger.log_debug(f"🧩 Grid {width}x{height} P={tile_size} overlap={overlap}: {len(grid)} tiles")
    return grid


def extract_tiles(raster: np.ndarray, grid: TileGrid) -> List[np.ndarray]:
    """Tiles in origin order. Works on (H, W) and (H, W, bands) arrays."""
    raster = np.asarray(getattr(raster, "data", raster))
    if raster.shape[:2] != (grid.height, grid.width):
        raise ShapeError(f"raster {raster.shape[:2]} does not match grid {(grid.height, grid.width)}")
    p = grid.tile_size
    return [raster[r:r + p, c:c + p].copy() for r, c in grid.origins]


def _nearest_tile(dim: int, origins: Sequence[int], tile_size: int) -> np.ndarray:
    """Per coordinate, index of the origin whose tile centre is nearest (lowest index on ties)."""
    coords = np.arange(dim)[:, None]
    # doubled coordinates keep the (P - 1) / 2 centre offset integral
    centres = 2 * np.asarray(origins)[None, :] + (tile_size - 1)
    distance = np.abs(2 * coords - centres)
    return np.argmin(distance, axis=1)


def stitch(tiles: Sequence[ChangeMask], grid: TileGrid) -> ChangeMask:
    if len(tiles) != len(grid):
        raise ShapeError(f"got {len(tiles)} tiles for a grid of {len(grid)}")
    p = grid.tile_size
    for k, tile in enumerate(tiles):
        shape = np.shape(getattr(tile, "data", tile))
        if tuple(shape[:2]) != (p, p):
            raise ShapeError(f"tile {k} is {shape[:2]}, expected {(p, p)}")

    row_pick = _nearest_tile(grid.height, grid.row_origins, p)
    col_pick = _nearest_tile(grid.width, grid.col_origins, p)
    n_cols = len(grid.col_origins)

    out = np.zeros((grid.height, grid.width), dtype=np.uint8)
    # every tile owns a rectangle of the nearest-centre partition
    for ri, r0 in enumerate(grid.row_origins):
        rows = np.flatnonzero(row_pick == ri)
        if rows.size == 0:
            continue
        for ci, c0 in enumerate(grid.col_origins):
            cols = np.flatnonzero(col_pick == ci)
            if cols.size == 0:
                continue
            tile = np.asarray(getattr(tiles[ri * n_cols + ci], "data", tiles[ri * n_cols + ci]))
            out[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1] = tile[rows[0] - r0:rows[-1] + 1 - r0, cols[0] - c0:cols[-1] + 1 - c0]
    return ChangeMask(out)


def write_grid(grid: TileGrid, path: PathLike) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for line in grid.lines():
                f.write(line + "\n")
    except OSError as e:
        raise RasterIOError(f"cannot write grid {path}: {e}") from e


def read_grid(path: PathLike) -> TileGrid:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").split("\n") if ln.strip()]
    except OSError as e:
        raise RasterIOError(f"cannot read grid {path}: {e}") from e
    if not lines:
        raise ManifestParseError("empty grid file", line=1)
    try:
        header = json.loads(lines[0])
        grid = plan_grid(int(header["width"]), int(header["height"]), int(header["tile_size"]), int(header["overlap"]))
        origins = [(int(o["row"]), int(o["col"])) for o in map(json.loads, lines[1:])]
    except (ValueError, KeyError, TypeError) as e:
        raise ManifestParseError(f"malformed grid file {path}: {e}")
    if origins != grid.origins:
        raise ManifestParseError(f"grid file {path} lists origins that do not match its header")
    return grid
