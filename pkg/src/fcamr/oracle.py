"""Brute-force concept enumeration for cross-checking the real algorithms.

Walks every attribute subset with a plain binary counter, closes each one,
and keeps the distinct closures. Exponential on purpose: it is the ground
truth for small contexts, not a tool for real data.
"""

from __future__ import annotations

import random

from .core import (
    AttributeSet,
    Concept,
    FormalContext,
    ObjectSet,
    closure_mask,
    derive_objects_mask,
    lectic_key,
)

MAX_ATTRIBUTES = 20


def brute_force_concepts(ctx: FormalContext) -> list[Concept]:
    """All concepts of ctx, sorted lectically by intent.

    Refuses contexts with more than MAX_ATTRIBUTES attributes; the subset
    walk doubles per attribute and anything larger is a mistake.
    """
    m = ctx.attribute_count
    if m > MAX_ATTRIBUTES:
        raise ValueError(
            f"context has {m} attributes; oracle limit is {MAX_ATTRIBUTES}"
        )
    closed: set[int] = set()
    for y in range(1 << m):
        closed.add(closure_mask(ctx, y))
    n = ctx.object_count
    concepts = [
        Concept(
            ObjectSet(n, derive_objects_mask(ctx, intent)),
            AttributeSet(m, intent),
        )
        for intent in sorted(closed, key=lambda c: lectic_key(c, m))
    ]
    return concepts


def intent_masks(concepts) -> set[int]:
    """Helper for set comparisons in tests and verification runs."""
    return {c.intent.mask for c in concepts}


def random_context(
    rng: random.Random,
    max_objects: int = 12,
    max_attributes: int = 12,
    min_objects: int = 1,
    min_attributes: int = 1,
    density: float | None = None,
) -> FormalContext:
    """Uniform-ish random context for verification trials.

    Dimensions are drawn from the given ranges, then each cell is filled
    independently at a density drawn from 0.1..0.9 unless pinned.
    """
    n = rng.randint(min_objects, max_objects)
    m = rng.randint(min_attributes, max_attributes)
    d = rng.uniform(0.1, 0.9) if density is None else density
    masks = []
    for _ in range(n):
        mask = 0
        for j in range(m):
            if rng.random() < d:
                mask |= 1 << j
        masks.append(mask)
    names_o = [str(g + 1) for g in range(n)]
    names_a = [f"p{j + 1}" for j in range(m)]
    return FormalContext.from_row_masks(names_o, names_a, masks)
