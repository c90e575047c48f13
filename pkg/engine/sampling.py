# engine/sampling.py
"""
Balanced batch planning.

A batch of B single-date train records (no `mask_t2`) is split into N_real = floor(B * p_real) real pairs
(same location, two dates) and N_fake = B - N_real fake pairs, where the fake
subset is re-paired through a derangement so image t of record i meets image
t' of a different record j. Every plan is a pure function of
(manifest, B, p_real, seed, batch_index).
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Mapping, Optional, Tuple, Union

import numpy as np

from core.errors import ArgumentError, InfeasibleDerangementError, InsufficientDataError, MaskNotFoundError
from core.logger import global_logger as logger
from core.manifest import DatasetManifest
from core.raster import ChangeMask, SemanticMask
from engine.changemap import SIoUParams, changemap
from utils.rng import stream

TARGET_METHODS = ("siou", "xor", "or")
MAX_DERANGEMENT_TRIES = 10_000


@dataclass(frozen=True)
class RealSlot:
    record_id: str

    kind = "real"

    @property
    def ids(self) -> Tuple[str, ...]:
        return (self.record_id,)


@dataclass(frozen=True)
class FakeSlot:
    record_i: str  # contributes image t and its mask
    record_j: str  # contributes image t'; its date-t mask stands in for the missing t' mask

    kind = "fake"

    def __post_init__(self):
        if self.record_i == self.record_j:
            raise ArgumentError(f"fake slot pairs record {self.record_i!r} with itself")

    @property
    def ids(self) -> Tuple[str, ...]:
        return (self.record_i, self.record_j)


Slot = Union[RealSlot, FakeSlot]


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int
    p_real: float
    slots: Tuple[Slot, ...]
    seed: int
    batch_index: int

    @property
    def n_real(self) -> int:
        return sum(1 for s in self.slots if s.kind == "real")

    @property
    def n_fake(self) -> int:
        return sum(1 for s in self.slots if s.kind == "fake")

    def lines(self) -> List[str]:
        """`batch_index slot_index kind id_i [id_j]`, one line per slot."""
        return [f"{self.batch_index} {k} {slot.kind} {' '.join(slot.ids)}" for k, slot in enumerate(self.slots)]


def split_counts(batch_size: int, p_real: float) -> Tuple[int, int]:
    # floor of the exact product: 180 * 0.35 is 62.99999 in floating point
    n_real = math.floor(batch_size * Fraction(str(p_real)))
    return n_real, batch_size - n_real


def random_derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample permutations until one has no fixed point (about e tries on average)."""
    if n == 1:
        raise InfeasibleDerangementError("a single fake pair cannot be deranged")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    identity = np.arange(n)
    for _ in range(MAX_DERANGEMENT_TRIES):
        perm = rng.permutation(n)
        if not np.any(perm == identity):
            return perm
    raise InfeasibleDerangementError(f"no derangement of {n} found in {MAX_DERANGEMENT_TRIES} draws")


def plan_batch(manifest: DatasetManifest, batch_size: int, p_real: float, seed: int, batch_index: int) -> BatchPlan:
    if batch_size < 1:
        raise ArgumentError(f"batch size must be >= 1, got {batch_size}")
    if not 0.0 <= p_real <= 1.0:
        raise ArgumentError(f"p_real must lie in [0, 1], got {p_real}")
    if batch_index < 0:
        raise ArgumentError(f"batch index must be >= 0, got {batch_index}")

    n_real, n_fake = split_counts(batch_size, p_real)
    if n_fake == 1:
        raise InfeasibleDerangementError(
            f"B={batch_size}, p_real={p_real} leaves exactly one fake pair, which cannot be re-paired"
        )

    # records with mask_t2 are reserved for supervised evaluation
    train_ids = [r.id for r in manifest.train_records() if r.mask_t2 is None]
    if len(train_ids) < batch_size:
        raise InsufficientDataError(
            f"batch of {batch_size} needs that many single-date train records, manifest has {len(train_ids)}"
        )

    rng = stream(seed, batch_index)
    chosen = rng.choice(len(train_ids), size=batch_size, replace=False)
    real_ids = [train_ids[k] for k in chosen[:n_real]]
    fake_ids = [train_ids[k] for k in chosen[n_real:]]
    perm = random_derangement(n_fake, rng)

    slots: List[Slot] = [RealSlot(rid) for rid in real_ids]
    slots.extend(FakeSlot(fake_ids[k], fake_ids[int(perm[k])]) for k in range(n_fake))
    logger.log_debug(f"🎲 Batch {batch_index}: {n_real} real + {n_fake} fake (seed {seed})")
    return BatchPlan(batch_size=batch_size, p_real=p_real, slots=tuple(slots), seed=seed, batch_index=batch_index)


def _mask(masks: Mapping[str, SemanticMask], record_id: str) -> SemanticMask:
    try:
        return masks[record_id]
    except MaskNotFoundError:
        raise
    except KeyError as e:
        raise MaskNotFoundError(record_id) from e


def synthesize_targets(slot: Slot, masks: Mapping[str, SemanticMask], p: Optional[SIoUParams] = None,
                       method: str = "siou") -> Tuple[SemanticMask, SemanticMask, ChangeMask]:
    """
    Weak targets (S_t, S_t', M) for one slot.

    Real slot: (S_t, S_t, 0). Fake slot (i, j): (S_i, S_j, changemap(S_i, S_j)),
    with method "siou" (default), "xor" or "or".
    """
    if method not in TARGET_METHODS:
        raise ArgumentError(f"target method must be one of {TARGET_METHODS}, got {method!r}")
    if isinstance(slot, RealSlot):
        s_t = _mask(masks, slot.record_id)
        return s_t, s_t, ChangeMask.zeros(s_t.height, s_t.width)

    s_i = _mask(masks, slot.record_i)
    s_j = _mask(masks, slot.record_j)
    return s_i, s_j, changemap(s_i, s_j, mode=method, p=p)
