"""Binary contexts, derivation operators, closure, and the lectic order.

Attribute sets and object sets are fixed-width bitsets backed by Python
integers, so intersection, union, and subset tests run word-parallel on
machine limbs regardless of how many attributes or objects a context has.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence


class ContractViolation(ValueError):
    """An operation was invoked outside its documented precondition."""


class BitSet:
    """Immutable set of indices in ``[0, width)`` stored as an int mask.

    Instances are value objects: operators return new sets and never
    change ``width``. Mixing widths is a contract violation, since a set
    only makes sense relative to the context that fixed its universe.
    """

    __slots__ = ("width", "mask")

    def __init__(self, width: int, mask: int = 0):
        if width < 0:
            raise ValueError("width must be non-negative")
        if mask < 0 or mask >> width:
            raise ValueError(f"mask 0x{mask:x} has bits outside width {width}")
        self.width = width
        self.mask = mask

    @classmethod
    def empty(cls, width: int):
        return cls(width, 0)

    @classmethod
    def full(cls, width: int):
        return cls(width, (1 << width) - 1)

    @classmethod
    def from_indices(cls, width: int, indices: Iterable[int]):
        mask = 0
        for i in indices:
            if not 0 <= i < width:
                raise ValueError(f"index {i} outside [0, {width})")
            mask |= 1 << i
        return cls(width, mask)

    def _coerce(self, other: "BitSet") -> int:
        if not isinstance(other, BitSet):
            raise TypeError(f"expected a BitSet, got {type(other).__name__}")
        if other.width != self.width:
            raise ContractViolation(
                f"width mismatch: {self.width} != {other.width}"
            )
        return other.mask

    def __and__(self, other):
        return type(self)(self.width, self.mask & self._coerce(other))

    def __or__(self, other):
        return type(self)(self.width, self.mask | self._coerce(other))

    def __xor__(self, other):
        return type(self)(self.width, self.mask ^ self._coerce(other))

    def __sub__(self, other):
        return type(self)(self.width, self.mask & ~self._coerce(other))

    def complement(self):
        return type(self)(self.width, ((1 << self.width) - 1) ^ self.mask)

    def issubset(self, other) -> bool:
        return self.mask & ~self._coerce(other) == 0

    def issuperset(self, other) -> bool:
        return self._coerce(other) & ~self.mask == 0

    def __contains__(self, index: int) -> bool:
        return 0 <= index < self.width and bool(self.mask >> index & 1)

    def __iter__(self) -> Iterator[int]:
        mask = self.mask
        while mask:
            low = mask & -mask
            yield low.bit_length() - 1
            mask ^= low

    def indices(self) -> tuple[int, ...]:
        return tuple(self)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __bool__(self) -> bool:
        return self.mask != 0

    def __eq__(self, other) -> bool:
        return (
            type(other) is type(self)
            and self.width == other.width
            and self.mask == other.mask
        )

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.width, self.mask))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(width={self.width}, {{{', '.join(map(str, self))}}})"


class AttributeSet(BitSet):
    """Set of attribute indices; width equals the context's attribute count."""


class ObjectSet(BitSet):
    """Set of object indices; width equals the owning table's object count."""


@dataclass(frozen=True)
class Concept:
    """A maximal extent/intent pair: extent' = intent and intent' = extent."""

    extent: ObjectSet
    intent: AttributeSet


class FormalContext:
    """Immutable incidence table between named objects and attributes.

    Rows are per-object attribute sets. Column extents (which objects
    carry a given attribute) are derived lazily and cached, since every
    closure computation leans on them.
    """

    def __init__(
        self,
        object_names: Sequence[str],
        attribute_names: Sequence[str],
        rows: Sequence[AttributeSet],
    ):
        if len(rows) != len(object_names):
            raise ValueError(
                f"{len(object_names)} object names but {len(rows)} rows"
            )
        m = len(attribute_names)
        for k, row in enumerate(rows):
            if row.width != m:
                raise ValueError(
                    f"row {k} has width {row.width}, expected {m}"
                )
        self.object_names = tuple(object_names)
        self.attribute_names = tuple(attribute_names)
        self.rows = tuple(rows)

    @classmethod
    def from_row_masks(
        cls,
        object_names: Sequence[str],
        attribute_names: Sequence[str],
        masks: Sequence[int],
    ) -> "FormalContext":
        m = len(attribute_names)
        return cls(
            object_names,
            attribute_names,
            [AttributeSet(m, mask) for mask in masks],
        )

    @property
    def object_count(self) -> int:
        return len(self.object_names)

    @property
    def attribute_count(self) -> int:
        return len(self.attribute_names)

    def attribute_set(self, indices: Iterable[int] = ()) -> AttributeSet:
        return AttributeSet.from_indices(self.attribute_count, indices)

    def object_set(self, indices: Iterable[int] = ()) -> ObjectSet:
        return ObjectSet.from_indices(self.object_count, indices)

    def attribute_extent(self, index: int) -> ObjectSet:
        return ObjectSet(self.object_count, self._attr_extents[index])

    @cached_property
    def _full_object_mask(self) -> int:
        return (1 << self.object_count) - 1

    @cached_property
    def _full_attribute_mask(self) -> int:
        return (1 << self.attribute_count) - 1

    @cached_property
    def _attr_extents(self) -> tuple[int, ...]:
        """Column masks: bit g of _attr_extents[j] says object g has attribute j."""
        cols = [0] * self.attribute_count
        for g, row in enumerate(self.rows):
            bit = 1 << g
            mask = row.mask
            while mask:
                low = mask & -mask
                cols[low.bit_length() - 1] |= bit
                mask ^= low
        return tuple(cols)

    @cached_property
    def _attr_non_extents(self) -> tuple[int, ...]:
        full = self._full_object_mask
        return tuple(full & ~col for col in self._attr_extents)

    def support_order(self) -> list[int]:
        """Attribute permutation sorted by ascending extent size, ties by index."""
        return sorted(
            range(self.attribute_count),
            key=lambda j: (self._attr_extents[j].bit_count(), j),
        )

    def with_attribute_order(self, order: Sequence[int]) -> "FormalContext":
        """Return a context with columns permuted so order[k] becomes column k."""
        if sorted(order) != list(range(self.attribute_count)):
            raise ValueError("order must be a permutation of all attribute indices")
        names = [self.attribute_names[j] for j in order]
        position = {j: k for k, j in enumerate(order)}
        masks = []
        for row in self.rows:
            mask = 0
            for j in row:
                mask |= 1 << position[j]
            masks.append(mask)
        return FormalContext.from_row_masks(self.object_names, names, masks)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FormalContext)
            and self.object_names == other.object_names
            and self.attribute_names == other.attribute_names
            and self.rows == other.rows
        )

    def __repr__(self) -> str:
        return (
            f"FormalContext({self.object_count} objects, "
            f"{self.attribute_count} attributes)"
        )


# --- mask-level kernels -----------------------------------------------------
#
# The public operations below validate types and widths, then delegate to
# these helpers which work on raw int masks. Enumeration loops call the
# helpers directly to avoid wrapper churn on hot paths.

def derive_objects_mask(ctx: FormalContext, y_mask: int) -> int:
    """Objects carrying every attribute in y_mask (full mask when y is empty)."""
    ext = ctx._full_object_mask
    cols = ctx._attr_extents
    while y_mask:
        low = y_mask & -y_mask
        ext &= cols[low.bit_length() - 1]
        if not ext:
            # No object carries the whole set; later columns cannot help.
            return 0
        y_mask ^= low
    return ext


def derive_attributes_mask(ctx: FormalContext, x_mask: int) -> int:
    """Attributes shared by every object in x_mask (full mask when x is empty)."""
    m = ctx.attribute_count
    if x_mask.bit_count() <= m:
        # Few objects: intersect their rows directly.
        intent = ctx._full_attribute_mask
        rows = ctx.rows
        while x_mask:
            low = x_mask & -x_mask
            intent &= rows[low.bit_length() - 1].mask
            if not intent:
                return 0
            x_mask ^= low
        return intent
    # Many objects: one subset test per attribute column.
    intent = 0
    for j, nonext in enumerate(ctx._attr_non_extents):
        if x_mask & nonext == 0:
            intent |= 1 << j
    return intent


def closure_mask(ctx: FormalContext, y_mask: int) -> int:
    return derive_attributes_mask(ctx, derive_objects_mask(ctx, y_mask))


def lectic_key(mask: int, width: int) -> int:
    """Monotone sort key for the lectic order (bit-reversed mask).

    Smaller attribute indices weigh heavier, so numeric order of the key
    equals the lectic order of the sets.
    """
    if width == 0:
        return 0
    return int(f"{mask:0{width}b}"[::-1], 2)


# --- public operations ------------------------------------------------------

def common_objects(ctx: FormalContext, attributes: AttributeSet) -> ObjectSet:
    """Derivation Y': all objects carrying every attribute in Y."""
    if attributes.width != ctx.attribute_count:
        raise ContractViolation(
            f"attribute set width {attributes.width} does not match "
            f"context attribute count {ctx.attribute_count}"
        )
    return ObjectSet(ctx.object_count, derive_objects_mask(ctx, attributes.mask))


def common_attributes(ctx: FormalContext, objects: ObjectSet) -> AttributeSet:
    """Derivation X': all attributes shared by every object in X."""
    if objects.width != ctx.object_count:
        raise ContractViolation(
            f"object set width {objects.width} does not match "
            f"context object count {ctx.object_count}"
        )
    return AttributeSet(ctx.attribute_count, derive_attributes_mask(ctx, objects.mask))


def closure(ctx: FormalContext, attributes: AttributeSet) -> AttributeSet:
    """Closure Y'': the intent generated by Y."""
    return common_attributes(ctx, common_objects(ctx, attributes))


def lectic_less(y1: AttributeSet, y2: AttributeSet) -> bool:
    """Strict lectic order: the smallest differing attribute lies in y2."""
    if y1.width != y2.width:
        raise ContractViolation(f"width mismatch: {y1.width} != {y2.width}")
    diff = y1.mask ^ y2.mask
    if diff == 0:
        return False
    return bool(y2.mask & (diff & -diff))


def lectic_less_at(y1: AttributeSet, y2: AttributeSet, i: int) -> bool:
    """y1 < y2 at attribute i: i separates them and they agree below i."""
    if y1.width != y2.width:
        raise ContractViolation(f"width mismatch: {y1.width} != {y2.width}")
    if not 0 <= i < y1.width:
        raise ContractViolation(f"attribute index {i} outside [0, {y1.width})")
    bit = 1 << i
    below = bit - 1
    return (
        bool(y2.mask & bit)
        and not y1.mask & bit
        and (y1.mask & below) == (y2.mask & below)
    )


def oplus_mask(ctx: FormalContext, y_mask: int, i: int) -> int:
    """Mask form of the successor candidate: ((Y below i) with i added)''."""
    return closure_mask(ctx, (y_mask & ((1 << i) - 1)) | (1 << i))


def oplus(ctx: FormalContext, attributes: AttributeSet, i: int) -> AttributeSet:
    """Candidate closure used by the lectic scan.

    Keeps only the part of Y strictly below attribute i, adds i, and
    closes the result. Requires i not already in Y.
    """
    if attributes.width != ctx.attribute_count:
        raise ContractViolation(
            f"attribute set width {attributes.width} does not match context"
        )
    if not 0 <= i < ctx.attribute_count:
        raise ContractViolation(
            f"attribute index {i} outside [0, {ctx.attribute_count})"
        )
    if i in attributes:
        raise ContractViolation(f"attribute {i} is already a member")
    return AttributeSet(ctx.attribute_count, oplus_mask(ctx, attributes.mask, i))


def prefix_extents(ctx: FormalContext, y_mask: int) -> tuple[list[int], list[int]]:
    """Ascending members of y and the running extents of its prefixes.

    Returns (members, exts) where exts[t] is the extent of the first t
    members; exts[0] is the full object set. Shared by the enumeration
    loops so each candidate costs one column intersection.
    """
    members: list[int] = []
    exts = [ctx._full_object_mask]
    cur = exts[0]
    cols = ctx._attr_extents
    while y_mask:
        low = y_mask & -y_mask
        j = low.bit_length() - 1
        members.append(j)
        cur &= cols[j]
        exts.append(cur)
        y_mask ^= low
    return members, exts


def prefix_extent_at(members: list[int], exts: list[int], i: int) -> int:
    """Extent of the members strictly below attribute i."""
    return exts[bisect_left(members, i)]
