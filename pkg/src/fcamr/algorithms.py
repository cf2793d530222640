"""Centralized concept enumeration: lectic successor scan and Close-by-One."""

from __future__ import annotations

from typing import Iterator, NamedTuple

from .core import (
    AttributeSet,
    Concept,
    ContractViolation,
    FormalContext,
    ObjectSet,
    closure_mask,
    derive_attributes_mask,
    prefix_extent_at,
    prefix_extents,
)


def _next_closure_step(ctx: FormalContext, y_mask: int) -> tuple[int, int] | None:
    """Smallest closed set lectically above y_mask, or None at the top.

    Scans candidate attributes from high to low. For each candidate i the
    extent comes from one column intersection on the cached prefix extents,
    and canonicity is rejected as soon as any absent attribute below i
    shows up in the candidate closure, without finishing that closure.
    Returns (intent, extent); the extent is a byproduct of the scan.
    """
    m = ctx.attribute_count
    if y_mask == ctx._full_attribute_mask:
        return None
    cols = ctx._attr_extents
    nonexts = ctx._attr_non_extents
    members, exts = prefix_extents(ctx, y_mask)
    absent = [j for j in range(m) if not y_mask >> j & 1]
    for pos in range(len(absent) - 1, -1, -1):
        i = absent[pos]
        ext = prefix_extent_at(members, exts, i) & cols[i]
        canonical = True
        for t in range(pos):
            if ext & nonexts[absent[t]] == 0:
                canonical = False
                break
        if not canonical:
            continue
        bit = 1 << i
        intent = (y_mask & (bit - 1)) | bit
        for j in range(i + 1, m):
            if ext & nonexts[j] == 0:
                intent |= 1 << j
        return intent, ext
    return None


def next_closure(ctx: FormalContext, y: AttributeSet) -> AttributeSet | None:
    """Successor of a closed set in the lectic order; None past the last.

    The argument must itself be closed, otherwise the scan's invariants
    do not hold and the result would be meaningless.
    """
    if y.width != ctx.attribute_count:
        raise ContractViolation(
            f"attribute set width {y.width} does not match context"
        )
    if closure_mask(ctx, y.mask) != y.mask:
        raise ContractViolation(f"{y!r} is not closed in this context")
    step = _next_closure_step(ctx, y.mask)
    if step is None:
        return None
    return AttributeSet(ctx.attribute_count, step[0])


def iter_concepts(ctx: FormalContext) -> Iterator[Concept]:
    """Lazily yield every concept in lectic order of intents."""
    m = ctx.attribute_count
    n = ctx.object_count
    full_objects = ctx._full_object_mask
    intent = derive_attributes_mask(ctx, full_objects)
    # The seed's extent is always the whole object set: applying the object
    # derivation to (all objects)'' lands back on all objects.
    yield Concept(ObjectSet(n, full_objects), AttributeSet(m, intent))
    while True:
        step = _next_closure_step(ctx, intent)
        if step is None:
            return
        intent, extent = step
        yield Concept(ObjectSet(n, extent), AttributeSet(m, intent))


def all_closures(ctx: FormalContext) -> list[Concept]:
    """Every concept exactly once, intents strictly increasing lectically."""
    return list(iter_concepts(ctx))


class CboResult(NamedTuple):
    concepts: list[Concept]
    depth: int


def close_by_one(ctx: FormalContext) -> CboResult:
    """Depth-first canonical enumeration.

    Children of a concept extend it with attributes above the one that
    generated it, in ascending order; a child survives only when its
    closure agrees with the parent below the new attribute. Also reports
    the deepest recursion level reached (the root sits at level 0).
    """
    m = ctx.attribute_count
    n = ctx.object_count
    cols = ctx._attr_extents
    nonexts = ctx._attr_non_extents
    concepts: list[Concept] = []
    max_depth = 0

    def visit(intent: int, extent: int, bound: int, depth: int) -> None:
        nonlocal max_depth
        if depth > max_depth:
            max_depth = depth
        concepts.append(
            Concept(ObjectSet(n, extent), AttributeSet(m, intent))
        )
        for i in range(bound + 1, m):
            bit = 1 << i
            if intent & bit:
                continue
            child_ext = extent & cols[i]
            below = bit - 1
            parent_prefix = intent & below
            canonical = True
            child_intent = parent_prefix | bit
            for j in range(m):
                if child_ext & nonexts[j] == 0:
                    jbit = 1 << j
                    if j < i and not parent_prefix & jbit:
                        canonical = False
                        break
                    child_intent |= jbit
            if canonical:
                visit(child_intent, child_ext, i, depth + 1)

    seed_extent = ctx._full_object_mask
    visit(derive_attributes_mask(ctx, seed_extent), seed_extent, -1, 0)
    return CboResult(concepts, max_depth)
