"""Batched local-closure kernels for the distributed map steps.

The map side of every distributed round closes many candidate sets against
one partition. Doing that one candidate at a time in Python is fine for
small fragments, but on thousands of objects the second derivation (one
subset test per attribute) dominates. These helpers compute all candidates
of one round in a single pass, either with plain int masks or with the
columns packed into uint64 matrices so numpy does the word work.

Both paths produce identical masks; the auto threshold only picks the
faster one. Tests pin FORCE_MODE to cross-check the two implementations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FormalContext, derive_objects_mask, prefix_extent_at, prefix_extents

# "python", "numpy", or None for size-based choice.
FORCE_MODE: str | None = None

_NUMPY_OBJECT_THRESHOLD = 128


@dataclass
class PackedColumns:
    words: int
    cols: np.ndarray   # (attribute_count, words) uint64
    ncols: np.ndarray  # complements, masked to the real object range
    full: np.ndarray   # (words,) uint64


def _mask_to_words(mask: int, words: int) -> np.ndarray:
    return np.frombuffer(mask.to_bytes(words * 8, "little"), dtype="<u8").copy()


def packed_columns(ctx: FormalContext) -> PackedColumns:
    cached = getattr(ctx, "_packed_columns", None)
    if cached is not None:
        return cached
    n = ctx.object_count
    words = max(1, (n + 63) // 64)
    cols = np.empty((ctx.attribute_count, words), dtype=np.uint64)
    for j, col in enumerate(ctx._attr_extents):
        cols[j] = _mask_to_words(col, words)
    full = _mask_to_words((1 << n) - 1, words)
    packed = PackedColumns(words, cols, ~cols & full, full)
    ctx._packed_columns = packed
    return packed


def _use_numpy(ctx: FormalContext) -> bool:
    if FORCE_MODE == "python":
        return False
    if FORCE_MODE == "numpy":
        return True
    return ctx.object_count >= _NUMPY_OBJECT_THRESHOLD


def _intents_from_extents(ctx: FormalContext, extents: np.ndarray) -> list[int]:
    """Second derivation for a stack of extents, one intent mask per row.

    Empty extents close to the full attribute set without touching the
    column matrix, and duplicate extents are derived once; deep rounds on
    sparse data are full of both.
    """
    pc = packed_columns(ctx)
    full_intent = (1 << ctx.attribute_count) - 1
    out = [full_intent] * len(extents)
    live = np.flatnonzero(extents.any(axis=1))
    if len(live) == 0:
        return out
    uniq, inverse = np.unique(extents[live], axis=0, return_inverse=True)
    # candidate c misses attribute j iff its extent meets the complement of
    # column j anywhere
    missing = (uniq[:, None, :] & pc.ncols[None, :, :]).any(axis=2)
    rows = np.packbits(~missing, axis=1, bitorder="little")
    intents = [int.from_bytes(row.tobytes(), "little") for row in rows]
    for pos, k in zip(live, inverse):
        out[pos] = intents[k]
    return out


def _intent_for_extent(ctx: FormalContext, ext: int) -> int:
    intent = 0
    for j, nonext in enumerate(ctx._attr_non_extents):
        if ext & nonext == 0:
            intent |= 1 << j
    return intent


def local_oplus_intents(ctx: FormalContext, d_mask: int) -> list[tuple[int, int]]:
    """All successor candidates of d against one fragment, high to low.

    Returns (i, ((d below i) + i)'' in ctx) for every attribute i not in
    d, with i descending.
    """
    m = ctx.attribute_count
    absent = [i for i in range(m - 1, -1, -1) if not d_mask >> i & 1]
    if not absent:
        return []
    if _use_numpy(ctx):
        pc = packed_columns(ctx)
        members, _ = prefix_extents(ctx, d_mask)
        if members:
            acc = np.bitwise_and.accumulate(pc.cols[members], axis=0)
            stack = np.vstack([pc.full[None, :], acc])
        else:
            stack = pc.full[None, :]
        cand = np.array(absent, dtype=np.int64)
        idx = np.searchsorted(np.array(members, dtype=np.int64), cand)
        extents = stack[idx] & pc.cols[cand]
        intents = _intents_from_extents(ctx, extents)
        return list(zip(absent, intents))
    members, exts = prefix_extents(ctx, d_mask)
    cols = ctx._attr_extents
    out = []
    for i in absent:
        ext = prefix_extent_at(members, exts, i) & cols[i]
        out.append((i, _intent_for_extent(ctx, ext)))
    return out


def local_augmented_closures(
    ctx: FormalContext, b_mask: int, bound: int
) -> list[tuple[int, int]]:
    """(i, (B + i)'' in ctx) for every i above bound not in B, ascending."""
    m = ctx.attribute_count
    cand = [i for i in range(bound + 1, m) if not b_mask >> i & 1]
    if not cand:
        return []
    base = derive_objects_mask(ctx, b_mask)
    if _use_numpy(ctx):
        pc = packed_columns(ctx)
        base_words = _mask_to_words(base, pc.words)
        extents = base_words[None, :] & pc.cols[np.array(cand, dtype=np.int64)]
        intents = _intents_from_extents(ctx, extents)
        return list(zip(cand, intents))
    cols = ctx._attr_extents
    return [(i, _intent_for_extent(ctx, base & cols[i])) for i in cand]
