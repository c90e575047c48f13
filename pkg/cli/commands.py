# cli/commands.py
"""
One handler per subcommand. Handlers take the parsed namespace and the resolved
thread count, raise the core.errors hierarchy on failure and return 0.

Outputs are written to paths fixed by record id / batch / tile index before any
work is scheduled, so the thread count never changes a single output byte.
"""

import json
import os
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import pandas as pd

from core.config import (
    get_background_class,
    get_class_names,
    get_default_resolution,
    get_foreground_names,
    get_n_iter,
    resolve_class,
)
from core.errors import ArgumentError, InvalidClassError, MaskNotFoundError, RasterIOError
from core.logger import global_logger as logger
from core.manifest import DatasetManifest, MaskStore, parse_manifest, rebase, write_manifest
from core.raster import (
    ChangeMask,
    merge_classes,
    nn_resample,
    read_change,
    read_image,
    read_mask,
    validate,
    write_change,
    write_image,
    write_mask,
)
from data.synthgen import SynthSpec, generate
from engine.changemap import SIoUParams, changemap
from engine.metrics import (
    ConfusionCounts,
    aggregate_object_stats,
    confusion,
    median_filter,
    object_report,
    scores,
)
from engine.refinement import filter_manifest
from engine.sampling import plan_batch, synthesize_targets
from engine.tiling import extract_tiles, overlap_from_fraction, plan_grid, read_grid, stitch, write_grid
from utils.pool import run_ordered

CHANGE_SUFFIX = "_change"
GRID_NAME = "grid.jsonl"


# ========================
# Shared helpers
# ========================

def parse_classes(tokens: Optional[str]) -> Optional[List[int]]:
    """Comma-separated class names (from the class table) or indices."""
    if tokens is None:
        return None
    out = []
    for token in (t for t in tokens.split(",") if t.strip()):
        try:
            out.append(resolve_class(token))
        except KeyError:
            raise InvalidClassError(f"unknown class {token.strip()!r}; known: {get_class_names()}")
    if not out:
        raise ArgumentError("empty class list")
    return out


def class_count(args) -> int:
    return getattr(args, "class_count", None) or len(get_class_names())


def change_path(directory: Path, record_id: str, suffix: str = CHANGE_SUFFIX) -> Path:
    return Path(directory) / f"{record_id}{suffix}.png"


def emit_rows(rows: List[Dict], out: Optional[str], pretty: bool) -> None:
    """JSONL to a file or stdout; --pretty prints the same rows as a table."""
    lines = [json.dumps(row) for row in rows]
    if out:
        path = Path(out)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                for line in lines:
                    f.write(line + "\n")
        except OSError as e:
            raise RasterIOError(f"cannot write report {path}: {e}") from e
    if pretty:
        print(pd.DataFrame(rows).to_string(index=False))
    elif not out:
        for line in lines:
            sys.stdout.write(line + "\n")


def _siou_params(args, classes: Optional[List[int]] = None) -> SIoUParams:
    kwargs = {}
    if getattr(args, "tau", None) is not None:
        kwargs["tau"] = args.tau
    if getattr(args, "connectivity", None) is not None:
        kwargs["connectivity"] = args.connectivity
    if classes is not None:
        kwargs["classes_of_interest"] = tuple(classes)
    return SIoUParams(**kwargs)


# ========================
# changemap
# ========================

def cmd_changemap(args, threads: int) -> int:
    manifest = parse_manifest(args.manifest)
    params = _siou_params(args, parse_classes(args.classes))
    k = class_count(args)
    background = get_background_class()
    if args.mode == "postclass" and not args.sem_pred_dir:
        raise ArgumentError("--mode postclass needs --sem-pred-dir")

    masks_t = MaskStore(manifest, k, background, which="mask_t")
    masks_t2 = MaskStore(manifest, k, background, which="mask_t2")
    out_dir = Path(args.out)

    def _one(record) -> int:
        if args.mode == "postclass":
            pred_dir = Path(args.sem_pred_dir)
            s1 = read_mask(pred_dir / f"{record.id}_sem_t.png", k, background)
            s2 = read_mask(pred_dir / f"{record.id}_sem_t2.png", k, background)
            m = changemap(s1, s2, mode="postclass", p=params)
        elif record.mask_t2 is None:
            # same-location pair without a second mask: no change by definition
            s1 = masks_t[record.id]
            m = ChangeMask.zeros(s1.height, s1.width)
        else:
            m = changemap(masks_t[record.id], masks_t2[record.id], mode=args.mode, p=params)
        write_change(m, change_path(out_dir, record.id))
        return m.changed_pixels

    changed = run_ordered(_one, list(manifest.records), threads, label="changemap")
    logger.log_info(
        f"🗺️ Wrote {len(changed)} {args.mode} change maps to {out_dir} "
        f"({sum(1 for c in changed if c)} non-empty, tau={params.tau})"
    )
    return 0


# ========================
# batch-plan
# ========================

def cmd_batch_plan(args, threads: int) -> int:
    manifest = parse_manifest(args.manifest)
    if args.batches < 1:
        raise ArgumentError(f"--batches must be >= 1, got {args.batches}")

    plans = run_ordered(
        lambda b: plan_batch(manifest, args.batch_size, args.p_real, args.seed, b),
        range(args.batches), threads, label="batch-plan",
    )
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            for plan in plans:
                for line in plan.lines():
                    f.write(line + "\n")
    except OSError as e:
        raise RasterIOError(f"cannot write plan {out}: {e}") from e

    if args.targets_out:
        params = _siou_params(args)
        masks = MaskStore(manifest, class_count(args), get_background_class())
        targets_dir = Path(args.targets_out)
        jobs = [(plan.batch_index, k, slot) for plan in plans for k, slot in enumerate(plan.slots)]

        def _target(job) -> None:
            batch_index, slot_index, slot = job
            _, _, m = synthesize_targets(slot, masks, params, method=args.target_method)
            write_change(m, targets_dir / f"{batch_index}_{slot_index}{CHANGE_SUFFIX}.png")

        run_ordered(_target, jobs, threads, label="targets")
        logger.log_info(f"🎯 Wrote {len(jobs)} {args.target_method} targets to {targets_dir}")

    n_real = sum(p.n_real for p in plans)
    n_fake = sum(p.n_fake for p in plans)
    logger.log_info(f"🎲 Planned {len(plans)} batches: {n_real} real / {n_fake} fake slots -> {out}")
    return 0


# ========================
# refine
# ========================

def _load_predictions(manifest: DatasetManifest, pred_dir: Path, threads: int) -> Dict[str, ChangeMask]:
    train = [r.id for r in manifest.train_records()]
    present = [rid for rid in train if change_path(pred_dir, rid).exists()]
    loaded = run_ordered(lambda rid: read_change(change_path(pred_dir, rid)), present, threads, label="predictions")
    return dict(zip(present, loaded))


def _iteration_path(out: Path, k: int) -> Path:
    return out.with_name(f"{out.stem}.iter{k}.jsonl")


def cmd_refine(args, threads: int) -> int:
    manifest = parse_manifest(args.manifest)
    out = Path(args.out)
    pred_dirs = [Path(p) for p in args.pred_dir]
    if len(pred_dirs) > get_n_iter():
        logger.log_warning(f"⚠️ {len(pred_dirs)} refinement rounds requested, configured n_iter is {get_n_iter()}")

    report_lines: List[str] = []
    parent_path = Path(args.manifest)
    for k, pred_dir in enumerate(pred_dirs, start=1):
        target = out if k == len(pred_dirs) else _iteration_path(out, k)
        predictions = _load_predictions(manifest, pred_dir, threads)
        parent = Path(os.path.relpath(parent_path.resolve(), target.parent.resolve())).as_posix()
        refined, report = filter_manifest(manifest, predictions, args.threshold, parent=parent)
        refined = rebase(refined, target.parent)
        write_manifest(refined, target)
        report_lines.extend(report.lines())
        manifest, parent_path = refined, target

    if args.report:
        path = Path(args.report)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                for line in report_lines:
                    f.write(line + "\n")
        except OSError as e:
            raise RasterIOError(f"cannot write report {path}: {e}") from e
    if args.pretty:
        rows = [row for row in map(json.loads, report_lines) if "id" in row]
        print(pd.DataFrame(rows).to_string(index=False))
    return 0


# ========================
# evaluate
# ========================

def _pair_ids(pred_dir: Path) -> List[str]:
    names = sorted(p.name for p in pred_dir.glob(f"*{CHANGE_SUFFIX}.png"))
    return [name[: -len(f"{CHANGE_SUFFIX}.png")] for name in names]


def _score_row(record_id: str, variant: str, counts: ConfusionCounts, objects) -> Dict:
    row = {"id": record_id, "variant": variant, "tp": counts.tp, "fp": counts.fp, "fn": counts.fn, "tn": counts.tn}
    row.update(scores(counts))
    row.update({"objects": objects[0], "mean_px": round(objects[1], 3), "mean_m2": round(objects[2], 3)})
    return row


def cmd_evaluate(args, threads: int) -> int:
    pred_dir, ref_dir = Path(args.pred), Path(args.ref)
    if not pred_dir.is_dir():
        raise RasterIOError(f"prediction directory not found: {pred_dir}")
    ids = _pair_ids(pred_dir)
    if not ids:
        raise ArgumentError(f"no *{CHANGE_SUFFIX}.png predictions in {pred_dir}")

    resolutions: Dict[str, float] = {}
    if args.manifest:
        resolutions = {r.id: r.resolution for r in parse_manifest(args.manifest).records}
    fallback = args.resolution if args.resolution is not None else get_default_resolution()
    variants = ["raw", "median"] if args.median_filter else ["raw"]

    def _one(record_id: str):
        ref_file = change_path(ref_dir, record_id)
        if not ref_file.exists():
            raise MaskNotFoundError(record_id, str(ref_file))
        pred = read_change(change_path(pred_dir, record_id))
        ref = read_change(ref_file)
        resolution = resolutions.get(record_id, fallback)
        out = {"ref_objects": object_report(ref, resolution)}
        for variant in variants:
            m = median_filter(pred, args.median_window) if variant == "median" else pred
            out[variant] = (confusion(m, ref), object_report(m, resolution))
        return record_id, out

    results = run_ordered(_one, ids, threads, label="evaluate")

    rows = []
    for variant in variants:
        total = ConfusionCounts()
        for record_id, out in results:
            counts, objects = out[variant]
            total = total + counts
            rows.append(_score_row(record_id, variant, counts, objects))
        pred_stats = aggregate_object_stats(out[variant][1] for _, out in results)
        row = _score_row("__all__", variant, total, pred_stats)
        ref_stats = aggregate_object_stats(out["ref_objects"] for _, out in results)
        row.update({"ref_objects": round(ref_stats[0], 3), "ref_mean_px": round(ref_stats[1], 3),
                    "ref_mean_m2": round(ref_stats[2], 3)})
        rows.append(row)
        logger.log_info(f"📊 {variant}: F1 {row['f1']} IoU {row['iou']} FPR {row['fpr']} over {len(results)} pairs")

    emit_rows(rows, args.out, args.pretty)
    return 0


# ========================
# tile / stitch
# ========================

def tile_name(prefix: str, k: int, suffix: str = "") -> str:
    return f"{prefix}_{k:05d}{suffix}.png"


def cmd_tile(args, threads: int) -> int:
    raster = read_image(args.input)
    height, width = raster.shape[:2]
    overlap = args.overlap
    if args.overlap_fraction is not None:
        overlap = overlap_from_fraction(args.size, args.overlap_fraction)
    grid = plan_grid(width, height, args.size, overlap)

    out_dir = Path(args.out)
    tiles = extract_tiles(raster, grid)
    run_ordered(lambda k: write_image(tiles[k], out_dir / tile_name(args.prefix, k)), range(len(tiles)), threads, label="tile")
    write_grid(grid, out_dir / GRID_NAME)
    logger.log_info(f"🧩 {len(grid)} tiles of {args.size}px (overlap {overlap}) -> {out_dir}")
    return 0


def cmd_stitch(args, threads: int) -> int:
    grid = read_grid(args.grid)
    tiles_dir = Path(args.tiles)
    tiles = run_ordered(
        lambda k: read_change(tiles_dir / tile_name(args.prefix, k, args.suffix)), range(len(grid)), threads, label="stitch"
    )
    write_change(stitch(tiles, grid), args.out)
    logger.log_info(f"🧩 Stitched {len(tiles)} tiles into {args.out}")
    return 0


# ========================
# merge-classes / resample
# ========================

def cmd_merge_classes(args, threads: int) -> int:
    foreground = parse_classes(args.foreground) if args.foreground else parse_classes(",".join(get_foreground_names()))
    mask = read_mask(args.input, class_count(args), get_background_class())
    write_mask(merge_classes(mask, foreground), args.out)
    logger.log_info(f"🔀 Merged classes {foreground} of {args.input} -> {args.out}")
    return 0


def cmd_resample(args, threads: int) -> int:
    mask = read_mask(args.input, class_count(args), get_background_class(), resolution=args.resolution)
    out = nn_resample(mask, args.factor)
    write_mask(out, args.out)
    if out.resolution is not None:
        logger.log_info(f"📐 {args.input}: {mask.width}x{mask.height} -> {out.width}x{out.height} at {out.resolution} m/px")
    return 0


# ========================
# synth / validate
# ========================

def cmd_synth(args, threads: int) -> int:
    spec = SynthSpec.from_config(
        args.seed,
        pair_count=args.pairs,
        size=args.size,
        change_rate=args.change_rate,
        jitter=args.jitter,
        val_fraction=args.val_fraction,
    )
    generate(spec, args.out, threads=threads)
    return 0


def _finding_rows(source: str, findings: Iterable) -> List[Dict]:
    return [{"source": source, "kind": f.kind, "message": f.message, "row": f.row, "col": f.col} for f in findings]


def cmd_validate(args, threads: int) -> int:
    k = class_count(args)
    background = get_background_class()
    rows: List[Dict] = []

    if args.input:
        rows.extend(_finding_rows(args.input, validate(read_mask(args.input, k, background))))
    else:
        manifest = parse_manifest(args.manifest)

        def _check(record) -> List[Dict]:
            found = []
            mask_t = read_mask(manifest.resolve(record.mask_t), k, background, record.resolution)
            found.extend(_finding_rows(record.mask_t, validate(mask_t)))
            if record.mask_t2 is not None:
                mask_t2 = read_mask(manifest.resolve(record.mask_t2), k, background, record.resolution)
                found.extend(_finding_rows(record.mask_t2, validate(mask_t2, expected_shape=mask_t.shape)))
            return found

        for found in run_ordered(_check, list(manifest.records), threads, label="validate"):
            rows.extend(found)

    if rows:
        emit_rows(rows, None, args.pretty)
        logger.log_error(f"❌ Validation failed with {len(rows)} finding(s)")
        return 1
    logger.log_info("✅ Validation passed")
    return 0
