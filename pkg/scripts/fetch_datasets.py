#!/usr/bin/env python3
"""Download the three UCI benchmark datasets and binarize them.

Produces, inside datasets/:
  mushroom.cxt     8124 objects x 125 attributes (one column per nominal
                   value from the documentation, including values that
                   never occur; '?' marks a missing entry and sets no
                   column; the class label is dropped)
  anon-web.fimi    one line per user, the vroot ids they visited
  census.fimi      nominal columns of census-income, one column per value

The mushroom encoding reproduces the published 17.36% fill rate exactly
(176248 incidences / (8124 * 125)). The anon-web and census encodings are
reconstructions; treat their object/attribute counts as approximate and
rely on concept counts to judge a run. Network access and a few minutes
are required; nothing here is needed for the regular test suite.
"""

from __future__ import annotations

import gzip
import io
import sys
import urllib.request
from pathlib import Path

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"

DATASETS_DIR = Path(__file__).resolve().parent.parent / "datasets"

# Attribute value lists from agaricus-lepiota.names, in file order.
MUSHROOM_DOMAINS = [
    ("cap-shape", "bcxfks"),
    ("cap-surface", "fgys"),
    ("cap-color", "nbcgrpuewy"),
    ("bruises", "tf"),
    ("odor", "alcyfmnps"),
    ("gill-attachment", "adfn"),
    ("gill-spacing", "cwd"),
    ("gill-size", "bn"),
    ("gill-color", "knbhgropuewy"),
    ("stalk-shape", "et"),
    ("stalk-root", "bcuezr"),
    ("stalk-surface-above-ring", "fyks"),
    ("stalk-surface-below-ring", "fyks"),
    ("stalk-color-above-ring", "nbcgopewy"),
    ("stalk-color-below-ring", "nbcgopewy"),
    ("veil-type", "pu"),
    ("veil-color", "nowy"),
    ("ring-number", "not"),
    ("ring-type", "ceflnpsz"),
    ("spore-print-color", "knbhrouwy"),
    ("population", "acnsvy"),
    ("habitat", "glmpuwd"),
]


def download(url: str) -> bytes:
    print(f"fetching {url}")
    with urllib.request.urlopen(url, timeout=120) as response:
        return response.read()


def fetch_mushroom() -> None:
    raw = download(f"{UCI}/mushroom/agaricus-lepiota.data").decode("ascii")
    columns: list[str] = []
    index: dict[tuple[int, str], int] = {}
    for pos, (name, values) in enumerate(MUSHROOM_DOMAINS):
        for value in values:
            index[pos, value] = len(columns)
            columns.append(f"{name}={value}")
    assert len(columns) == 125, len(columns)
    rows = []
    for line in raw.splitlines():
        fields = line.split(",")
        mask = 0
        # fields[0] is the edible/poisonous class; skip it
        for pos, value in enumerate(fields[1:]):
            if value == "?":
                continue
            mask |= 1 << index[pos, value]
        rows.append(mask)
    assert len(rows) == 8124, len(rows)
    filled = sum(mask.bit_count() for mask in rows)
    out = DATASETS_DIR / "mushroom.cxt"
    with open(out, "w", encoding="ascii") as fh:
        fh.write(f"B\n\n{len(rows)}\n{len(columns)}\n\n")
        for k in range(len(rows)):
            fh.write(f"m{k + 1}\n")
        for name in columns:
            fh.write(name + "\n")
        for mask in rows:
            fh.write(
                "".join("X" if mask >> j & 1 else "." for j in range(125)) + "\n"
            )
    print(
        f"wrote {out}: {len(rows)} x {len(columns)}, "
        f"density {filled / (len(rows) * len(columns)):.4f}"
    )


def fetch_anon_web() -> None:
    raw = download(f"{UCI}/anonymous/anonymous-msweb.data").decode("ascii")
    attribute_ids = []
    cases: list[list[int]] = []
    for line in raw.splitlines():
        kind = line[:1]
        fields = line.split(",")
        if kind == "A":
            attribute_ids.append(int(fields[1]))
        elif kind == "C":
            cases.append([])
        elif kind == "V" and cases:
            cases[-1].append(int(fields[1]))
    position = {vid: j for j, vid in enumerate(sorted(attribute_ids))}
    out = DATASETS_DIR / "anon-web.fimi"
    with open(out, "w", encoding="ascii") as fh:
        for visited in cases:
            fh.write(" ".join(str(position[v]) for v in sorted(set(visited))) + "\n")
    print(f"wrote {out}: {len(cases)} objects, {len(position)} attributes")


def fetch_census() -> None:
    # census-income (KDD): 40 columns, mixed continuous and nominal.
    # Reconstruction: keep nominal columns only, one binary attribute per
    # value seen in the data; drop the trailing income class.
    raw = download(f"{UCI}/census-income-mld/census-income.data.gz")
    text = gzip.decompress(raw).decode("latin-1")
    table = [
        [field.strip() for field in line.split(",")]
        for line in text.splitlines()
        if line.strip()
    ]
    width = len(table[0])
    nominal = [
        j
        for j in range(width - 1)
        if not all(_is_number(row[j]) for row in table[:2000])
    ]
    index: dict[tuple[int, str], int] = {}
    for row in table:
        for j in nominal:
            key = (j, row[j])
            if key not in index and row[j] != "?":
                index[key] = len(index)
    out = DATASETS_DIR / "census.fimi"
    with open(out, "w", encoding="ascii") as fh:
        for row in table:
            items = sorted(
                index[j, row[j]] for j in nominal if (j, row[j]) in index
            )
            fh.write(" ".join(str(i) for i in items) + "\n")
    print(f"wrote {out}: {len(table)} objects, {len(index)} attributes")


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def main(argv: list[str]) -> int:
    DATASETS_DIR.mkdir(exist_ok=True)
    wanted = set(argv[1:]) or {"mushroom", "anon-web", "census"}
    jobs = {
        "mushroom": fetch_mushroom,
        "anon-web": fetch_anon_web,
        "census": fetch_census,
    }
    unknown = wanted - set(jobs)
    if unknown:
        print(f"unknown dataset(s): {', '.join(sorted(unknown))}", file=sys.stderr)
        return 2
    failures = 0
    for name in sorted(wanted):
        try:
            jobs[name]()
        except Exception as exc:  # network and server errors vary widely
            print(f"{name}: failed: {exc}", file=sys.stderr)
            failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
