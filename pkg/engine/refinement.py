# engine/refinement.py
"""
Iterative refinement: drop train pairs whose predicted change fraction is above
the threshold, and hand the cleaned manifest to the next training round.
Val/test records pass through untouched.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from core.config import get_refinement_threshold
from core.errors import ArgumentError, MissingPredictionError
from core.logger import global_logger as logger
from core.manifest import DatasetManifest
from core.raster import ChangeMask


@dataclass
class RefinementReport:
    kept: List[str] = field(default_factory=list)
    filtered: List[Tuple[str, float]] = field(default_factory=list)
    threshold: float = 0.02
    iteration: int = 0
    fractions: Dict[str, float] = field(default_factory=dict)
    order: List[str] = field(default_factory=list)

    def lines(self) -> List[str]:
        """JSONL: one header line, then one line per input record in manifest order."""
        header = {
            "iteration": self.iteration,
            "threshold": self.threshold,
            "kept": len(self.kept),
            "filtered": len(self.filtered),
        }
        filtered = dict(self.filtered)
        out = [json.dumps(header)]
        order = self.order or (self.kept + [rid for rid, _ in self.filtered])
        for record_id in order:
            row = {"id": record_id, "status": "filtered" if record_id in filtered else "kept"}
            if record_id in self.fractions:
                row["changed_fraction"] = self.fractions[record_id]
            out.append(json.dumps(row))
        return out


def changed_fraction(m: ChangeMask) -> float:
    total = m.width * m.height
    if total == 0:
        return 0.0
    return m.changed_pixels / total


def filter_manifest(manifest: DatasetManifest, predictions: Mapping[str, ChangeMask],
                    threshold: Optional[float] = None, parent: Optional[str] = None) -> Tuple[DatasetManifest, RefinementReport]:
    """
    Remove train records predicted to contain more than `threshold` changed pixels.

    The boundary is strict: a fraction exactly equal to the threshold is kept.
    """
    threshold = get_refinement_threshold() if threshold is None else float(threshold)
    if not 0.0 <= threshold <= 1.0:
        raise ArgumentError(f"threshold must lie in [0, 1], got {threshold}")

    missing = [r.id for r in manifest.train_records() if r.id not in predictions]
    if missing:
        logger.log_error(f"❌ {len(missing)} train records lack a prediction, first: {missing[0]}")
        raise MissingPredictionError(missing[0])

    report = RefinementReport(threshold=threshold, iteration=manifest.iteration + 1, order=manifest.ids)
    kept_records = []
    for record in manifest.records:
        if not record.is_train:
            kept_records.append(record)
            report.kept.append(record.id)
            continue
        fraction = changed_fraction(predictions[record.id])
        report.fractions[record.id] = fraction
        if fraction > threshold:
            report.filtered.append((record.id, fraction))
            logger.log_debug(f"🧹 {record.id}: {fraction:.4%} changed > {threshold:.2%}, filtered")
        else:
            kept_records.append(record)
            report.kept.append(record.id)

    out = manifest.derive(kept_records, parent=parent)
    logger.log_info(
        f"🧹 Refinement round {out.iteration}: kept {len(report.kept)}, filtered {len(report.filtered)} "
        f"(threshold {threshold:.2%})"
    )
    return out, report
