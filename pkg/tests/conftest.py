"""Shared fixtures: the 6x7 worked example context and helpers."""

from __future__ import annotations

import pytest

from fcamr.core import AttributeSet, FormalContext
from fcamr.oracle import random_context  # noqa: F401  (fixture helper re-export)

# Attributes a..g map to indices 0..6; objects are named "1".."6".
TOY_OBJECTS = ["1", "2", "3", "4", "5", "6"]
TOY_ATTRIBUTES = ["a", "b", "c", "d", "e", "f", "g"]
TOY_ROWS = [
    "abdf",
    "aceg",
    "bcdfg",
    "bde",
    "adef",
    "bcfg",
]

# The complete concept lattice of the toy context, listed in lectic order
# of intents. Extents use object names, intents use attribute letters.
TOY_CONCEPTS = [
    ("123456", ""),
    ("1356", "f"),
    ("245", "e"),
    ("1345", "d"),
    ("135", "df"),
    ("45", "de"),
    ("236", "cg"),
    ("1346", "b"),
    ("136", "bf"),
    ("134", "bd"),
    ("13", "bdf"),
    ("4", "bde"),
    ("36", "bcfg"),
    ("3", "bcdfg"),
    ("125", "a"),
    ("25", "ae"),
    ("15", "adf"),
    ("5", "adef"),
    ("2", "aceg"),
    ("1", "abdf"),
    ("", "abcdefg"),
]


def attrs_from_letters(letters: str) -> AttributeSet:
    return AttributeSet.from_indices(7, (ord(ch) - ord("a") for ch in letters))


def letters_from_mask(mask: int) -> str:
    return "".join(TOY_ATTRIBUTES[j] for j in range(7) if mask >> j & 1)


def build_toy_context() -> FormalContext:
    masks = []
    for row in TOY_ROWS:
        mask = 0
        for ch in row:
            mask |= 1 << (ord(ch) - ord("a"))
        masks.append(mask)
    return FormalContext.from_row_masks(TOY_OBJECTS, TOY_ATTRIBUTES, masks)


@pytest.fixture(scope="session")
def toy() -> FormalContext:
    return build_toy_context()


@pytest.fixture(scope="session")
def toy_concept_pairs() -> set[tuple[frozenset, frozenset]]:
    return {
        (frozenset(ext), frozenset(intent))
        for ext, intent in TOY_CONCEPTS
    }


def concept_pairs(ctx: FormalContext, concepts) -> set[tuple[frozenset, frozenset]]:
    """Project concepts onto (object names, attribute names) for comparison."""
    return {
        (
            frozenset(ctx.object_names[g] for g in c.extent),
            frozenset(ctx.attribute_names[j] for j in c.intent),
        )
        for c in concepts
    }


def pytest_addoption(parser):
    parser.addoption(
        "--slow",
        action="store_true",
        default=False,
        help="run the extended dataset checks (anon-web, census-income)",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
