# core/manifest.py
"""
Dataset manifests: the file contract between this toolkit and any external trainer.

Format: UTF-8, LF line endings. Line 1 is a header object {"iteration": n, "parent": path|null};
every further line is one PairRecord object. Optional fields are omitted when absent.
Paths are stored relative to the manifest's directory.
"""

import json
import os
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path
from threading import Lock
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from core.errors import ManifestParseError, MaskNotFoundError, RasterIOError, ValidationError
from core.logger import global_logger as logger
from core.raster import SemanticMask, read_mask

PathLike = Union[str, Path]

SPLITS = ("train", "val", "test")
REQUIRED_FIELDS = ("id", "image_t", "image_t2", "mask_t", "split", "resolution")
OPTIONAL_FIELDS = ("mask_t2", "pred_change", "date_t", "date_t2")
FIELD_ORDER = ("id", "image_t", "image_t2", "mask_t", "mask_t2", "pred_change", "split", "resolution", "date_t", "date_t2")


@dataclass(frozen=True)
class PairRecord:
    id: str
    image_t: str
    image_t2: str
    mask_t: str
    split: str
    resolution: float
    mask_t2: Optional[str] = None
    pred_change: Optional[str] = None
    date_t: Optional[str] = None
    date_t2: Optional[str] = None

    def check(self) -> None:
        if not self.id:
            raise ValidationError("record id is empty")
        if self.split not in SPLITS:
            raise ValidationError(f"record {self.id!r}: split {self.split!r} not in {SPLITS}")
        if not self.resolution > 0:
            raise ValidationError(f"record {self.id!r}: resolution must be > 0, got {self.resolution}")

    @property
    def is_train(self) -> bool:
        return self.split == "train"

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for name in FIELD_ORDER:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass(frozen=True)
class DatasetManifest:
    records: Tuple[PairRecord, ...] = ()
    iteration: int = 0
    parent: Optional[str] = None
    root: Optional[Path] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.iteration < 0:
            raise ValidationError(f"iteration must be >= 0, got {self.iteration}")
        seen = set()
        for record in self.records:
            record.check()
            if record.id in seen:
                raise ValidationError(f"duplicate record id {record.id!r}")
            seen.add(record.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PairRecord]:
        return iter(self.records)

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.records]

    def train_records(self) -> List[PairRecord]:
        return [r for r in self.records if r.is_train]

    def get(self, record_id: str) -> PairRecord:
        for record in self.records:
            if record.id == record_id:
                return record
        raise KeyError(record_id)

    def resolve(self, relative: str) -> Path:
        """Absolute path of a manifest-relative file."""
        base = self.root if self.root is not None else Path(".")
        return base / relative

    def derive(self, records, parent: Optional[str]) -> "DatasetManifest":
        """Next refinement round: same root, iteration + 1."""
        return DatasetManifest(records=tuple(records), iteration=self.iteration + 1, parent=parent, root=self.root)


def _parse_record(obj: Dict[str, Any], line_no: int) -> PairRecord:
    missing = [name for name in REQUIRED_FIELDS if name not in obj]
    if missing:
        raise ManifestParseError(f"missing required field(s) {missing}", line=line_no)
    unknown = sorted(set(obj) - set(FIELD_ORDER))
    if unknown:
        raise ManifestParseError(f"unknown field(s) {unknown}", line=line_no)
    try:
        resolution = float(obj["resolution"])
    except (TypeError, ValueError):
        raise ManifestParseError(f"resolution {obj['resolution']!r} is not a number", line=line_no)
    kwargs = {name: obj.get(name) for name in FIELD_ORDER}
    kwargs["resolution"] = resolution
    for name in FIELD_ORDER:
        if name != "resolution" and kwargs[name] is not None and not isinstance(kwargs[name], str):
            raise ManifestParseError(f"field {name!r} must be a string", line=line_no)
    record = PairRecord(**kwargs)
    try:
        record.check()
    except ValidationError as e:
        raise ManifestParseError(str(e), line=line_no)
    return record


def parse_manifest(path: PathLike) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise RasterIOError(f"manifest not found: {path}") from e
    except OSError as e:
        raise RasterIOError(f"cannot read manifest {path}: {e}") from e

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    iteration, parent = 0, None
    records: List[PairRecord] = []
    seen: Dict[str, int] = {}
    for idx, raw in enumerate(lines):
        line_no = idx + 1
        if not raw.strip():
            raise ManifestParseError("blank line", line=line_no)
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ManifestParseError(f"malformed JSON: {e.msg}", line=line_no)
        if not isinstance(obj, dict):
            raise ManifestParseError("expected a JSON object", line=line_no)

        if idx == 0 and "id" not in obj:
            extra = sorted(set(obj) - {"iteration", "parent"})
            if extra:
                raise ManifestParseError(f"unknown header field(s) {extra}", line=line_no)
            iteration = obj.get("iteration", 0)
            parent = obj.get("parent")
            if not isinstance(iteration, int) or iteration < 0:
                raise ManifestParseError(f"iteration must be a non-negative integer, got {iteration!r}", line=line_no)
            continue

        record = _parse_record(obj, line_no)
        if record.id in seen:
            raise ManifestParseError(f"duplicate id {record.id!r} (first on line {seen[record.id]})", line=line_no)
        seen[record.id] = line_no
        records.append(record)

    logger.log_debug(f"📄 Parsed manifest {path}: {len(records)} records, iteration {iteration}")
    return DatasetManifest(records=tuple(records), iteration=iteration, parent=parent, root=path.parent)


def manifest_lines(manifest: DatasetManifest) -> List[str]:
    header = {"iteration": manifest.iteration, "parent": manifest.parent}
    out = [json.dumps(header, ensure_ascii=False)]
    out.extend(json.dumps(record.to_dict(), ensure_ascii=False) for record in manifest.records)
    return out


def write_manifest(manifest: DatasetManifest, path: PathLike) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for line in manifest_lines(manifest):
                f.write(line + "\n")
    except OSError as e:
        raise RasterIOError(f"cannot write manifest {path}: {e}") from e
    logger.log_debug(f"💾 Wrote manifest {path} ({len(manifest)} records)")


def rebase(manifest: DatasetManifest, new_root: Path) -> DatasetManifest:
    """Rewrite record paths so they stay valid relative to a manifest written under new_root."""
    old_root = (manifest.root or Path(".")).resolve()
    new_root = Path(new_root).resolve()
    if old_root == new_root:
        return replace(manifest, root=new_root)

    def _move(p: Optional[str]) -> Optional[str]:
        if p is None:
            return None
        return Path(os.path.relpath(old_root / p, new_root)).as_posix()

    path_fields = ("image_t", "image_t2", "mask_t", "mask_t2", "pred_change")
    records = tuple(replace(r, **{name: _move(getattr(r, name)) for name in path_fields}) for r in manifest.records)
    return replace(manifest, records=records, root=new_root)


class MaskStore(Mapping):
    """Lazy read-only mapping record id -> SemanticMask (mask at date t) with a small cache."""

    def __init__(self, manifest: DatasetManifest, class_count: int, background_class: int = 0, which: str = "mask_t"):
        self._manifest = manifest
        self._by_id = {r.id: r for r in manifest.records}
        self._class_count = class_count
        self._background = background_class
        self._which = which
        self._cache: Dict[str, SemanticMask] = {}
        self._lock = Lock()

    def __getitem__(self, record_id: str) -> SemanticMask:
        with self._lock:
            if record_id in self._cache:
                return self._cache[record_id]
        record = self._by_id.get(record_id)
        if record is None:
            raise MaskNotFoundError(record_id)
        relative = getattr(record, self._which)
        if relative is None:
            raise MaskNotFoundError(record_id)
        path = self._manifest.resolve(relative)
        try:
            mask = read_mask(path, self._class_count, self._background, record.resolution)
        except RasterIOError as e:
            raise MaskNotFoundError(record_id, str(path)) from e
        with self._lock:
            self._cache[record_id] = mask
        return mask

    def __contains__(self, record_id) -> bool:
        record = self._by_id.get(record_id)
        return record is not None and getattr(record, self._which) is not None

    def __iter__(self):
        return iter(self._by_id)

    def __len__(self) -> int:
        return len(self._by_id)


__all__ = [
    "PairRecord", "DatasetManifest", "parse_manifest", "write_manifest", "manifest_lines",
    "rebase", "MaskStore", "SPLITS",
]
