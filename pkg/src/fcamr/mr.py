"""Distributed concept enumeration on the map-reduce runtime.

Three jobs are registered: "mrganter" advances one closed set per round
exactly like the centralized lectic scan; "mrganter+" keeps every new
closure a round discovers, pruning duplicates through a global concept
index, so the lattice is covered in a handful of rounds; "mrcbo" runs
the canonical-generation tree level by level. All three map local
closures on partitions and merge them by intersection in the reduce,
which is lossless because partitions keep whole attribute columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .core import AttributeSet, Concept
from .kernels import local_augmented_closures, local_oplus_intents
from .partition import ContextPartition, PartitionSet, merged_closure, merged_extent
from .runtime import (
    BaseRuntime,
    DynamicPayload,
    JobSpec,
    register_map,
    register_reduce,
)


class IntegrityError(RuntimeError):
    """Map results arrived incomplete or inconsistent; the round is invalid."""


class ConceptIndex:
    """Membership index over intents, bucketed by head attribute then size.

    The first level keys on the smallest attribute of the intent (a
    sentinel stands in for the empty intent), the second level on the
    intent's cardinality. Buckets store the intents themselves, so a hit
    means set equality, never a hash collision.
    """

    EMPTY_HEAD = -1

    def __init__(self, attribute_count: int):
        self.attribute_count = attribute_count
        self._buckets: dict[tuple[int, int], set[int]] = {}
        self._size = 0

    @staticmethod
    def _route(mask: int) -> tuple[int, int]:
        if mask == 0:
            return ConceptIndex.EMPTY_HEAD, 0
        head = (mask & -mask).bit_length() - 1
        return head, mask.bit_count()

    def insert(self, mask: int) -> bool:
        """Add an intent; returns False when it was already present."""
        bucket = self._buckets.setdefault(self._route(mask), set())
        if mask in bucket:
            return False
        bucket.add(mask)
        self._size += 1
        return True

    def __contains__(self, mask: int) -> bool:
        bucket = self._buckets.get(self._route(mask))
        return bucket is not None and mask in bucket

    def bucket(self, head: int, length: int) -> frozenset[int]:
        return frozenset(self._buckets.get((head, length), ()))

    def __len__(self) -> int:
        return self._size

    def __iter__(self) -> Iterator[int]:
        for key in sorted(self._buckets):
            yield from sorted(self._buckets[key])


# --- map functions (run on workers) ------------------------------------------

def mrganter_map(part: ContextPartition, d_mask: int):
    """Local successor candidates for every absent attribute, high to low."""
    values = [
        (i, intent, part.partition_id)
        for i, intent in local_oplus_intents(part.local_ctx, d_mask)
    ]
    return d_mask, values


def mrcbo_map(part: ContextPartition, item: tuple[int, int]):
    """Local closures of B extended by each attribute above its bound."""
    b_mask, bound = item
    values = [
        (i, intent, part.partition_id)
        for i, intent in local_augmented_closures(part.local_ctx, b_mask, bound)
    ]
    return item, values


# --- reduce functions (run on the driver) -------------------------------------

def _fold_candidates(d_mask: int, values, env) -> dict[int, int]:
    """Intersect local closures per attribute, checking every partition reported.

    Returns attribute -> merged closure for each attribute outside d_mask.
    """
    n = env["partition_count"]
    folds: dict[int, int] = {}
    counts: dict[int, int] = {}
    for attr, intent, _pid in values:
        if attr in folds:
            folds[attr] &= intent
            counts[attr] += 1
        else:
            folds[attr] = intent
            counts[attr] = 1
    m = env["attribute_count"]
    for i in range(m):
        if d_mask >> i & 1:
            continue
        if counts.get(i, 0) != n:
            raise IntegrityError(
                f"attribute {i}: {counts.get(i, 0)} of {n} partitions contributed"
            )
    return folds


def mrganter_reduce(d_mask: int, values, env) -> list[int]:
    """First merged candidate, scanning attributes high to low, that wins
    the lectic test against d; empty once d is the last closed set."""
    folds = _fold_candidates(d_mask, values, env)
    m = env["attribute_count"]
    for i in range(m - 1, -1, -1):
        if d_mask >> i & 1:
            continue
        f = folds[i]
        below = (1 << i) - 1
        if f & below == d_mask & below:
            return [f]
    return []


def mrganter_plus_reduce(d_mask: int, values, env) -> list[int]:
    """Every merged candidate not yet in the shared concept index."""
    folds = _fold_candidates(d_mask, values, env)
    index: ConceptIndex = env["index"]
    m = env["attribute_count"]
    fresh = []
    for i in range(m - 1, -1, -1):
        if d_mask >> i & 1:
            continue
        f = folds[i]
        if index.insert(f):
            fresh.append(f)
    return fresh


def mrcbo_reduce(key: tuple[int, int], values, env) -> list[tuple[int, int]]:
    """Canonical children of (B, bound): merged closures that agree with B
    below the extending attribute."""
    b_mask, bound = key
    n = env["partition_count"]
    folds: dict[int, int] = {}
    counts: dict[int, int] = {}
    for attr, intent, _pid in values:
        if attr in folds:
            folds[attr] &= intent
            counts[attr] += 1
        else:
            folds[attr] = intent
            counts[attr] = 1
    m = env["attribute_count"]
    children = []
    for i in range(bound + 1, m):
        if b_mask >> i & 1:
            continue
        if counts.get(i, 0) != n:
            raise IntegrityError(
                f"attribute {i}: {counts.get(i, 0)} of {n} partitions contributed"
            )
        d = folds[i]
        below = (1 << i) - 1
        if d & below == b_mask & below:
            children.append((d, i))
    return children


register_map("mrganter", mrganter_map)
register_reduce("mrganter", mrganter_reduce)
register_map("mrganter+", mrganter_map)
register_reduce("mrganter+", mrganter_plus_reduce)
register_map("mrcbo", mrcbo_map)
register_reduce("mrcbo", mrcbo_reduce)


# --- drivers ------------------------------------------------------------------

@dataclass
class DriveResult:
    concepts: list[Concept]
    iterations: int
    productive_iterations: int
    batches: list[list[int]]  # intent masks per round; batch 0 is the seed


def _attach_extents(parts: PartitionSet, masks: list[int]) -> list[Concept]:
    m = parts.attribute_count
    return [
        Concept(
            merged_extent(parts, AttributeSet(m, mask)),
            AttributeSet(m, mask),
        )
        for mask in masks
    ]


def _seed_mask(parts: PartitionSet) -> int:
    return merged_closure(parts, AttributeSet.empty(parts.attribute_count)).mask


def _base_env(parts: PartitionSet) -> dict:
    return {
        "attribute_count": parts.attribute_count,
        "partition_count": len(parts),
    }


def mrganter_drive(
    parts: PartitionSet,
    handle: BaseRuntime,
    max_iterations: int | None = None,
) -> DriveResult:
    m = parts.attribute_count
    full = (1 << m) - 1
    seed = _seed_mask(parts)
    job = JobSpec(
        map_fn="mrganter",
        reduce_fn="mrganter",
        termination=lambda items: bool(items) and items[0] == full,
        env=_base_env(parts),
        partitions=parts,
    )
    kwargs = {} if max_iterations is None else {"max_iterations": max_iterations}
    outputs, executed = handle.run_until(job, DynamicPayload(0, [seed]), **kwargs)
    masks = [seed]
    for produced in outputs:
        masks.extend(produced)
    batches = [[seed]] + [list(produced) for produced in outputs if produced]
    return DriveResult(
        concepts=_attach_extents(parts, masks),
        iterations=executed,
        productive_iterations=len(batches) - 1,
        batches=batches,
    )


def mrganter_plus_drive(
    parts: PartitionSet,
    handle: BaseRuntime,
    max_iterations: int | None = None,
) -> DriveResult:
    m = parts.attribute_count
    seed = _seed_mask(parts)
    index = ConceptIndex(m)
    index.insert(seed)
    env = _base_env(parts)
    env["index"] = index
    job = JobSpec(
        map_fn="mrganter+",
        reduce_fn="mrganter+",
        env=env,
        partitions=parts,
    )
    kwargs = {} if max_iterations is None else {"max_iterations": max_iterations}
    outputs, executed = handle.run_until(job, DynamicPayload(0, [seed]), **kwargs)
    masks = [seed]
    for produced in outputs:
        masks.extend(produced)
    if len(masks) != len(index):
        raise IntegrityError(
            f"collected {len(masks)} intents but the index holds {len(index)}"
        )
    batches = [[seed]] + [list(produced) for produced in outputs if produced]
    return DriveResult(
        concepts=_attach_extents(parts, masks),
        iterations=executed,
        productive_iterations=len(batches) - 1,
        batches=batches,
    )


def mrcbo_drive(
    parts: PartitionSet,
    handle: BaseRuntime,
    max_iterations: int | None = None,
) -> DriveResult:
    seed = _seed_mask(parts)
    job = JobSpec(
        map_fn="mrcbo",
        reduce_fn="mrcbo",
        env=_base_env(parts),
        partitions=parts,
    )
    kwargs = {} if max_iterations is None else {"max_iterations": max_iterations}
    outputs, executed = handle.run_until(
        job, DynamicPayload(0, [(seed, -1)]), **kwargs
    )
    masks = [seed]
    seen = {seed}
    batches: list[list[int]] = [[seed]]
    for produced in outputs:
        round_masks = []
        for d_mask, _bound in produced:
            if d_mask in seen:
                raise IntegrityError(
                    "canonicity failed to keep generation unique"
                )
            seen.add(d_mask)
            masks.append(d_mask)
            round_masks.append(d_mask)
        if round_masks:
            batches.append(round_masks)
    return DriveResult(
        concepts=_attach_extents(parts, masks),
        iterations=executed,
        productive_iterations=len(batches) - 1,
        batches=batches,
    )


DRIVERS = {
    "mrganter": mrganter_drive,
    "mrganter+": mrganter_plus_drive,
    "mrcbo": mrcbo_drive,
}
