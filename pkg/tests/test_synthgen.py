# tests/test_synthgen.py
import math
from fractions import Fraction

import numpy as np
import pytest

from core.errors import ArgumentError
from core.manifest import MaskStore, parse_manifest
from core.raster import read_change, read_image, read_mask, validate
from data.synthgen import (
    MANIFEST_NAME,
    SynthSpec,
    change_path,
    generate,
    is_selected,
    make_pair,
    mask_t2_path,
)
from engine.sampling import plan_batch
from engine.changemap import SIoUParams, siou_changemap, xor_changemap
from engine.refinement import filter_manifest


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _masks(result, which="mask_t"):
    return MaskStore(result.manifest, class_count=2, which=which)


def _second_masks(result):
    return {rid: read_mask(result.manifest.resolve(mask_t2_path(rid)), 2, resolution=0.2) for rid in result.manifest.ids}


def test_selection_is_exact():
    for n in (1, 10, 64, 97, 180, 340, 360):
        for rate in (0.0, 0.1, 0.25, 0.35, 0.5, 1.0):
            expected = math.floor(n * Fraction(str(rate)))
            assert sum(is_selected(i, rate) for i in range(n)) == expected


def test_no_change_no_jitter_gives_identical_masks(tmp_path):
    result = generate(SynthSpec(seed=5, pair_count=12, size=32, change_rate=0.0, jitter=0), tmp_path)
    t, t2 = _masks(result), _second_masks(result)
    for record_id in result.manifest.ids:
        assert t[record_id] == t2[record_id]
        for tau in (0.0, 0.25, 0.5, 1.0):
            p = SIoUParams(tau=tau, connectivity=8, classes_of_interest=(1,))
            assert siou_changemap(t[record_id], t2[record_id], p).changed_pixels == 0


def test_changed_pairs_follow_rate(tmp_path):
    result = generate(SynthSpec(seed=2, pair_count=40, size=32, change_rate=0.25), tmp_path)
    assert sum(t.changed for t in result.truth) == 10
    assert {t.kind for t in result.truth if t.changed} <= {"construction", "demolition"}
    assert all(t.kind is None for t in result.truth if not t.changed)


def test_oracle_refinement_removes_large_changes(tmp_path):
    spec = SynthSpec(seed=9, pair_count=30, size=32, change_rate=1.0, jitter=0)
    result = generate(spec, tmp_path)
    t, t2 = _masks(result), _second_masks(result)
    oracle = {rid: xor_changemap(t[rid], t2[rid], [1]) for rid in result.manifest.ids}
    refined, report = filter_manifest(result.manifest, oracle)
    expected = [truth.id for truth in result.truth if truth.change_area_px / (32 * 32) > 0.02]
    assert sorted(rid for rid, _ in report.filtered) == sorted(expected)
    assert len(refined) == 30 - len(expected)


def test_jitter_keeps_objects_matched(tmp_path):
    result = generate(SynthSpec(seed=4, pair_count=16, size=48, change_rate=0.0, jitter=1), tmp_path)
    t, t2 = _masks(result), _second_masks(result)
    p = SIoUParams(tau=0.25, connectivity=8, classes_of_interest=(1,))
    for record_id in result.manifest.ids:
        assert siou_changemap(t[record_id], t2[record_id], p).changed_pixels == 0


def test_masks_validate_and_images_are_rgb(tmp_path):
    result = generate(SynthSpec(seed=1, pair_count=6, size=24, blob_size=(3, 8)), tmp_path)
    for record in result.manifest:
        mask = _masks(result, "mask_t")[record.id]
        assert validate(mask).ok
        assert mask.resolution == 0.2
        image = read_image(result.manifest.resolve(record.image_t))
        assert image.shape == (24, 24, 3)


def test_manifest_written(tmp_path):
    result = generate(SynthSpec(seed=1, pair_count=5, size=16, blob_size=(2, 5), val_fraction=0.4), tmp_path)
    manifest = parse_manifest(tmp_path / MANIFEST_NAME)
    assert manifest == result.manifest
    assert [r.split for r in manifest] == ["val", "train", "val", "train", "train"]


def test_byte_identical_regeneration(tmp_path):
    spec = SynthSpec(seed=77, pair_count=10, size=32, change_rate=0.3)
    generate(spec, tmp_path / "a")
    generate(spec, tmp_path / "b", threads=4)
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_pairs_are_independent_of_count():
    spec_small = SynthSpec(seed=3, pair_count=4, size=32)
    spec_large = SynthSpec(seed=3, pair_count=40, size=32)
    for a, b in zip(make_pair(spec_small, 2)[:2], make_pair(spec_large, 2)[:2]):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kwargs", [
    {"size": 15},
    {"change_rate": 1.2},
    {"blob_count": (3, 2)},
    {"blob_size": (0, 4)},
    {"blob_size": (4, 40), "size": 32},
    {"jitter": -1},
])
def test_spec_rejects_bad_values(kwargs):
    with pytest.raises(ArgumentError):
        SynthSpec(seed=0, **kwargs)


def test_spec_from_config():
    spec = SynthSpec.from_config(8, pair_count=3)
    assert (spec.seed, spec.pair_count, spec.size, spec.jitter) == (8, 3, 64, 1)


def test_only_val_records_carry_second_mask(tmp_path):
    result = generate(SynthSpec(seed=6, pair_count=8, size=32, val_fraction=0.25), tmp_path)
    for record in result.manifest:
        if record.split == "val":
            assert record.mask_t2 == mask_t2_path(record.id)
        else:
            assert record.mask_t2 is None
        assert result.manifest.resolve(mask_t2_path(record.id)).exists()


def test_train_records_feed_batch_plans(tmp_path):
    result = generate(SynthSpec(seed=6, pair_count=12, size=32, val_fraction=0.25), tmp_path)
    plan = plan_batch(result.manifest, 8, 0.25, seed=1, batch_index=0)
    val_ids = {r.id for r in result.manifest if r.split == "val"}
    assert not {rid for slot in plan.slots for rid in slot.ids} & val_ids


def test_change_maps_hold_the_changed_building(tmp_path):
    result = generate(SynthSpec(seed=12, pair_count=20, size=32, change_rate=0.5), tmp_path)
    for truth in result.truth:
        change = read_change(result.manifest.resolve(change_path(truth.id)))
        assert change.changed_pixels == truth.change_area_px
        assert (change.changed_pixels > 0) == truth.changed
