# tests/test_tiling.py
import json

import numpy as np
import pytest

from core.errors import ArgumentError, ManifestParseError, ShapeError
from core.raster import ChangeMask
from engine.tiling import (
    extract_tiles,
    overlap_from_fraction,
    plan_grid,
    read_grid,
    stitch,
    write_grid,
)
from tests.oracles import nearest_center_stitch


def test_two_thousand_five_hundred_pixels_make_one_hundred_tiles():
    grid = plan_grid(2500, 2500, 256, 6)
    assert len(grid) == 100
    assert grid.row_origins == (0, 250, 500, 750, 1000, 1250, 1500, 1750, 2000, 2244)
    assert grid.col_origins == grid.row_origins


def test_single_tile():
    grid = plan_grid(64, 64, 64, 0)
    assert grid.origins == [(0, 0)]


def test_small_grid_fits_exactly():
    grid = plan_grid(10, 10, 4, 1)
    assert grid.row_origins == (0, 3, 6)
    assert len(grid) == 9


def test_origins_are_row_major():
    grid = plan_grid(10, 7, 4, 1)
    assert grid.origins == sorted(grid.origins)
    assert grid.row_origins == (0, 3)
    assert grid.col_origins == (0, 3, 6)


def test_coverage_exhaustive():
    for dim in range(1, 65):
        for p in range(1, dim + 1):
            for overlap in range(p):
                grid = plan_grid(dim, dim, p, overlap)
                covered = np.zeros(dim, dtype=bool)
                for o in grid.row_origins:
                    assert 0 <= o <= dim - p
                    covered[o:o + p] = True
                assert covered.all()
                stride = p - overlap
                assert len(grid.row_origins) == -(-(dim - p) // stride) + 1


@pytest.mark.parametrize("w,h,p,overlap", [(10, 10, 11, 0), (10, 10, 4, 4), (10, 10, 4, -1), (10, 10, 0, 0)])
def test_plan_errors(w, h, p, overlap):
    with pytest.raises(ArgumentError):
        plan_grid(w, h, p, overlap)


def test_overlap_from_fraction():
    assert overlap_from_fraction(64, 0.05) == 3
    assert overlap_from_fraction(512, 0.0) == 0
    with pytest.raises(ArgumentError):
        overlap_from_fraction(64, 1.0)


def test_extract_identity_on_single_tile(rng):
    data = rng.integers(0, 255, size=(16, 16)).astype(np.uint8)
    tiles = extract_tiles(data, plan_grid(16, 16, 16, 0))
    np.testing.assert_array_equal(tiles[0], data)


def test_extract_keeps_bands(rng):
    data = rng.integers(0, 255, size=(12, 12, 3)).astype(np.uint8)
    tiles = extract_tiles(data, plan_grid(12, 12, 8, 2))
    assert all(t.shape == (8, 8, 3) for t in tiles)


def test_extract_shape_mismatch():
    with pytest.raises(ShapeError):
        extract_tiles(np.zeros((10, 12)), plan_grid(10, 10, 4, 0))


def test_two_by_two_reassembles(rng):
    data = rng.integers(0, 2, size=(4, 4))
    grid = plan_grid(4, 4, 2, 0)
    tiles = extract_tiles(data, grid)
    assert len(tiles) == 4
    np.testing.assert_array_equal(stitch([ChangeMask(t) for t in tiles], grid).data, data)


def test_round_trip_random(rng):
    for _ in range(100):
        h, w = (int(v) for v in rng.integers(8, 60, size=2))
        p = int(rng.integers(2, min(h, w) + 1))
        overlap = int(rng.integers(0, p))
        grid = plan_grid(w, h, p, overlap)
        data = rng.integers(0, 2, size=(h, w)).astype(np.uint8)
        tiles = [ChangeMask(t) for t in extract_tiles(data, grid)]
        np.testing.assert_array_equal(stitch(tiles, grid).data, data)


def test_all_one_tiles_give_all_one_mosaic():
    grid = plan_grid(30, 20, 8, 3)
    tiles = [ChangeMask(np.ones((8, 8))) for _ in range(len(grid))]
    assert stitch(tiles, grid).changed_pixels == 600


def test_overlap_strip_split_at_midline():
    grid = plan_grid(10, 6, 6, 2)
    assert grid.col_origins == (0, 4)
    tiles = [ChangeMask(np.zeros((6, 6))), ChangeMask(np.ones((6, 6)))]
    out = stitch(tiles, grid).data
    # centres at 2.5 and 6.5; columns 0-4 are nearer the left tile
    np.testing.assert_array_equal(out[0], [0, 0, 0, 0, 0, 1, 1, 1, 1, 1])


def test_matches_nearest_centre_oracle(rng):
    for _ in range(20):
        grid = plan_grid(int(rng.integers(10, 30)), int(rng.integers(10, 30)), 7, 3)
        tiles = [rng.integers(0, 2, size=(7, 7)).astype(np.uint8) for _ in range(len(grid))]
        expected = nearest_center_stitch(tiles, grid.origins, 7, grid.height, grid.width)
        np.testing.assert_array_equal(stitch([ChangeMask(t) for t in tiles], grid).data, expected)


def test_stitch_count_mismatch():
    grid = plan_grid(8, 8, 4, 0)
    with pytest.raises(ShapeError):
        stitch([ChangeMask.zeros(4, 4)] * 3, grid)
    with pytest.raises(ShapeError):
        stitch([ChangeMask.zeros(4, 5)] * 4, grid)


def test_grid_file(tmp_path):
    grid = plan_grid(40, 30, 16, 6)
    path = tmp_path / "grid.jsonl"
    write_grid(grid, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0]) == {"width": 40, "height": 30, "tile_size": 16, "overlap": 6}
    assert len(lines) == len(grid) + 1
    assert read_grid(path) == grid


def test_grid_file_with_wrong_origins(tmp_path):
    path = tmp_path / "grid.jsonl"
    path.write_text('{"width": 8, "height": 8, "tile_size": 4, "overlap": 0}\n{"row": 0, "col": 0}\n')
    with pytest.raises(ManifestParseError):
        read_grid(path)
