"""Horizontal partitioning of a context and lossless closure merging.

A partition keeps whole objects and every attribute column, so local
closures can be intersected across partitions to recover the global
closure, and local extents can be unioned to recover the global extent.
Those two identities are what let the distributed enumerators work on
fragments without ever exchanging raw rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .core import (
    AttributeSet,
    ContractViolation,
    FormalContext,
    ObjectSet,
    closure_mask,
    derive_objects_mask,
)

SplitStrategy = Literal["contiguous", "round_robin"]

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ContextPartition:
    """One horizontal fragment: full attribute columns, a slice of objects."""

    local_ctx: FormalContext
    global_object_ids: tuple[int, ...]
    partition_id: int

    def __post_init__(self):
        if len(self.global_object_ids) != self.local_ctx.object_count:
            raise ValueError(
                f"partition {self.partition_id}: {len(self.global_object_ids)} "
                f"global ids for {self.local_ctx.object_count} rows"
            )
        if self.local_ctx.object_count == 0:
            raise ValueError(f"partition {self.partition_id} is empty")


class PartitionSet:
    """A disjoint, exhaustive family of partitions over one context."""

    def __init__(self, partitions: Sequence[ContextPartition], total_objects: int):
        parts = tuple(partitions)
        if not parts:
            raise ValueError("a partition set needs at least one partition")
        attrs = parts[0].local_ctx.attribute_names
        seen: set[int] = set()
        for p in parts:
            if p.local_ctx.attribute_names != attrs:
                raise ValueError(
                    f"partition {p.partition_id} has different attribute names"
                )
            for g in p.global_object_ids:
                if g in seen:
                    raise ValueError(f"object {g} appears in two partitions")
                if not 0 <= g < total_objects:
                    raise ValueError(f"object id {g} outside [0, {total_objects})")
                seen.add(g)
        if len(seen) != total_objects:
            raise ValueError(
                f"partitions cover {len(seen)} of {total_objects} objects"
            )
        self.partitions = parts
        self.total_objects = total_objects
        self.attribute_names = attrs

    @property
    def attribute_count(self) -> int:
        return len(self.attribute_names)

    def __len__(self) -> int:
        return len(self.partitions)

    def __iter__(self):
        return iter(self.partitions)


def _build_partition(ctx: FormalContext, ids: Sequence[int], k: int) -> ContextPartition:
    local = FormalContext(
        [ctx.object_names[g] for g in ids],
        ctx.attribute_names,
        [ctx.rows[g] for g in ids],
    )
    return ContextPartition(local, tuple(ids), k)


def split(ctx: FormalContext, n: int, strategy: SplitStrategy = "contiguous") -> PartitionSet:
    """Split ctx into n non-empty partitions.

    contiguous hands out consecutive blocks (earlier blocks get the
    remainder); round_robin deals objects like cards. n must not exceed
    the object count or some partition would come out empty.
    """
    total = ctx.object_count
    if not 1 <= n <= total:
        raise ValueError(f"cannot split {total} objects into {n} partitions")
    groups: list[list[int]]
    if strategy == "contiguous":
        q, r = divmod(total, n)
        groups = []
        start = 0
        for k in range(n):
            size = q + (1 if k < r else 0)
            groups.append(list(range(start, start + size)))
            start += size
    elif strategy == "round_robin":
        groups = [list(range(k, total, n)) for k in range(n)]
    else:
        raise ValueError(f"unknown split strategy: {strategy!r}")
    parts = [_build_partition(ctx, ids, k) for k, ids in enumerate(groups)]
    return PartitionSet(parts, total)


def local_closure(part: ContextPartition, y: AttributeSet) -> AttributeSet:
    """Closure of y computed only against this partition's objects."""
    ctx = part.local_ctx
    if y.width != ctx.attribute_count:
        raise ContractViolation(
            f"attribute set width {y.width} does not match partition"
        )
    return AttributeSet(ctx.attribute_count, closure_mask(ctx, y.mask))


def merge_psi(l1: AttributeSet, l2: AttributeSet) -> AttributeSet:
    """Binary merge of two local closures: plain intersection."""
    return l1 & l2


def merged_closure(parts: PartitionSet | Iterable[ContextPartition], y: AttributeSet) -> AttributeSet:
    """Fold local closures across all partitions; equals the global closure."""
    result: AttributeSet | None = None
    for p in parts:
        l = local_closure(p, y)
        result = l if result is None else merge_psi(result, l)
    if result is None:
        raise ValueError("cannot merge over an empty partition family")
    return result


def merged_extent(parts: PartitionSet, y: AttributeSet) -> ObjectSet:
    """Union of per-partition local extents, mapped back to global ids."""
    mask = 0
    for p in parts:
        local = derive_objects_mask(p.local_ctx, y.mask)
        ids = p.global_object_ids
        while local:
            low = local & -local
            mask |= 1 << ids[low.bit_length() - 1]
            local ^= low
    return ObjectSet(parts.total_objects, mask)


def save_manifest(parts: PartitionSet, path: str | Path, strategy: str = "") -> None:
    """Write the partition layout as JSON so other processes can reload it."""
    doc = {
        "version": MANIFEST_VERSION,
        "n": len(parts),
        "strategy": strategy or "custom",
        "total_objects": parts.total_objects,
        "attribute_count": parts.attribute_count,
        "partitions": [
            {"id": p.partition_id, "object_ids": list(p.global_object_ids)}
            for p in parts
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_manifest(ctx: FormalContext, path: str | Path) -> PartitionSet:
    """Rebuild a PartitionSet for ctx from a manifest written by save_manifest."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version: {doc.get('version')!r}")
    if doc["total_objects"] != ctx.object_count:
        raise ValueError(
            f"manifest describes {doc['total_objects']} objects, "
            f"context has {ctx.object_count}"
        )
    if doc.get("attribute_count") != ctx.attribute_count:
        raise ValueError(
            f"manifest describes {doc.get('attribute_count')} attributes, "
            f"context has {ctx.attribute_count}"
        )
    parts = [
        _build_partition(ctx, entry["object_ids"], entry["id"])
        for entry in doc["partitions"]
    ]
    return PartitionSet(parts, ctx.object_count)
