# tests/conftest.py
import os
import tempfile

# keep log files out of the working tree; must run before core.logger is imported
os.environ.setdefault("TEMPWEAK_LOGS_PATH", tempfile.mkdtemp(prefix="tempweak-logs-"))

import numpy as np
import pytest

from core.manifest import DatasetManifest, PairRecord, write_manifest
from core.raster import SemanticMask, write_mask
from tests.oracles import mask_from_art


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_squares():
    """4x4 squares at cols 0-3 and cols 2-5 on an 8x8 grid: overlap 8, union 24."""
    a = np.zeros((8, 8), dtype=np.uint8)
    b = np.zeros((8, 8), dtype=np.uint8)
    a[0:4, 0:4] = 1
    b[0:4, 2:6] = 1
    return SemanticMask(a, class_count=2), SemanticMask(b, class_count=2)


@pytest.fixture
def mask_dataset(tmp_path):
    """Writes masks + manifest for a list of (id, art) and returns the manifest path."""

    def _build(entries, split="train", resolution=0.2, with_t2=False):
        records = []
        for record_id, art in entries:
            mask = mask_from_art(art)
            write_mask(mask, tmp_path / "masks" / f"{record_id}_t.png")
            fields = {}
            if with_t2:
                write_mask(mask, tmp_path / "masks" / f"{record_id}_t2.png")
                fields["mask_t2"] = f"masks/{record_id}_t2.png"
            records.append(PairRecord(
                id=record_id,
                image_t=f"images/{record_id}_t.png",
                image_t2=f"images/{record_id}_t2.png",
                mask_t=f"masks/{record_id}_t.png",
                split=split,
                resolution=resolution,
                **fields,
            ))
        path = tmp_path / "manifest.jsonl"
        write_manifest(DatasetManifest(records=tuple(records), root=tmp_path), path)
        return path

    return _build
