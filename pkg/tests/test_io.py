"""Readers, writers, and dataset statistics."""

import gzip
import io
import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings

from fcamr.core import AttributeSet, FormalContext
from fcamr.io import (
    DatasetStats,
    ParseError,
    load_context,
    read_csv,
    read_cxt,
    read_fimi,
    stats,
    write_concepts,
    write_cxt,
)
from fcamr.oracle import brute_force_concepts

from conftest import attrs_from_letters, build_toy_context
from test_core import contexts

TOY_CXT = Path(__file__).resolve().parent.parent / "datasets" / "toy.cxt"


class TestReadCxt:
    def test_bundled_toy_file(self, toy):
        ctx = read_cxt(TOY_CXT)
        assert ctx == toy
        assert ctx.rows[1] == attrs_from_letters("aceg")

    def test_zero_objects_is_legal(self):
        ctx = read_cxt(io.StringIO("B\n\n0\n2\n\np\nq\n"))
        assert ctx.object_count == 0
        assert ctx.attribute_names == ("p", "q")
        assert ctx.rows == ()

    def test_missing_header(self):
        with pytest.raises(ParseError, match="line 1.*header"):
            read_cxt(io.StringIO("A\n\n1\n1\n\no\np\nX\n"))

    def test_bad_count(self):
        with pytest.raises(ParseError, match="line 3.*object count"):
            read_cxt(io.StringIO("B\n\nsix\n7\n"))

    def test_illegal_cell_character(self):
        text = "B\n\n2\n2\n\no1\no2\np\nq\nX.\nXY\n"
        with pytest.raises(ParseError, match="line 11.*'Y'"):
            read_cxt(io.StringIO(text))

    def test_row_width_mismatch(self):
        text = "B\n\n1\n3\n\no1\np\nq\nr\nX.\n"
        with pytest.raises(ParseError, match="2 cells, expected 3"):
            read_cxt(io.StringIO(text))

    def test_truncated_file(self):
        with pytest.raises(ParseError, match="file ended"):
            read_cxt(io.StringIO("B\n\n2\n2\n\no1\n"))

    def test_trailing_garbage(self):
        text = "B\n\n1\n1\n\no1\np\nX\nleftover\n"
        with pytest.raises(ParseError, match="after the last row"):
            read_cxt(io.StringIO(text))

    @given(ctx=contexts())
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, ctx):
        sink = io.StringIO()
        write_cxt(ctx, sink)
        assert read_cxt(io.StringIO(sink.getvalue())) == ctx

    def test_gzip_round_trip(self, toy, tmp_path):
        path = tmp_path / "toy.cxt.gz"
        write_cxt(toy, path)
        with gzip.open(path, "rt") as fh:
            assert fh.readline() == "B\n"
        assert read_cxt(path) == toy


class TestReadFimi:
    def test_two_transactions(self):
        ctx = read_fimi(io.StringIO("0 2 4\n1 3\n"))
        assert ctx.object_count == 2
        assert ctx.attribute_count == 5
        assert stats(ctx).density == 0.5
        assert ctx.rows[0].mask == 0b10101

    def test_empty_line_is_an_empty_object(self):
        ctx = read_fimi(io.StringIO("0\n\n1\n"))
        assert ctx.object_count == 3
        assert ctx.rows[1].mask == 0

    def test_bad_token(self):
        with pytest.raises(ParseError, match="line 2.*'x'"):
            read_fimi(io.StringIO("0 1\n0 x\n"))

    def test_negative_index(self):
        with pytest.raises(ParseError, match="negative"):
            read_fimi(io.StringIO("-1\n"))

    def test_explicit_width(self):
        ctx = read_fimi(io.StringIO("0\n"), attribute_count=4)
        assert ctx.attribute_count == 4

    def test_index_outside_explicit_width(self):
        with pytest.raises(ParseError, match="outside 0..3"):
            read_fimi(io.StringIO("0 4\n"), attribute_count=4)

    def test_cross_read_agrees_with_cxt(self, toy):
        lines = [
            " ".join(str(j) for j in row) for row in toy.rows
        ]
        ctx = read_fimi(io.StringIO("\n".join(lines) + "\n"), attribute_count=7)
        assert [r.mask for r in ctx.rows] == [r.mask for r in toy.rows]
        assert len(brute_force_concepts(ctx)) == len(brute_force_concepts(toy))


class TestReadCsv:
    def test_basic(self):
        text = ",p,q,r\nrow one,1,0,1\nrow two,0,0,0\n"
        ctx = read_csv(io.StringIO(text))
        assert ctx.attribute_names == ("p", "q", "r")
        assert ctx.object_names == ("row one", "row two")
        assert ctx.rows[0].mask == 0b101

    def test_round_trip_through_csv(self, toy):
        lines = ["," + ",".join(toy.attribute_names)]
        for name, row in zip(toy.object_names, toy.rows):
            cells = (
                "1" if row.mask >> j & 1 else "0"
                for j in range(toy.attribute_count)
            )
            lines.append(name + "," + ",".join(cells))
        ctx = read_csv(io.StringIO("\n".join(lines) + "\n"))
        assert ctx == toy

    def test_bad_cell(self):
        with pytest.raises(ParseError, match="line 2.*'maybe'"):
            read_csv(io.StringIO(",p\no1,maybe\n"))

    def test_width_mismatch(self):
        with pytest.raises(ParseError, match="1 cells, expected 2"):
            read_csv(io.StringIO(",p,q\no1,1\n"))

    def test_empty_input(self):
        with pytest.raises(ParseError, match="header"):
            read_csv(io.StringIO(""))


class TestLoadContext:
    def test_suffix_inference(self, toy, tmp_path):
        assert load_context(TOY_CXT) == toy
        gz = tmp_path / "toy.cxt.gz"
        write_cxt(toy, gz)
        assert load_context(gz) == toy

    def test_dat_means_fimi(self, tmp_path):
        path = tmp_path / "tiny.dat"
        path.write_text("0 1\n2\n")
        ctx = load_context(path)
        assert ctx.object_count == 2
        assert ctx.attribute_count == 3

    def test_explicit_format_wins(self, tmp_path):
        path = tmp_path / "mislabeled.cxt"
        path.write_text("0 1\n")
        assert load_context(path, fmt="fimi").attribute_count == 2

    def test_unknown_suffix(self, tmp_path):
        with pytest.raises(ValueError, match="cannot infer"):
            load_context(tmp_path / "data.bin")

    def test_unknown_format_name(self):
        with pytest.raises(ValueError, match="unknown context format"):
            load_context(TOY_CXT, fmt="arff")


class TestStats:
    def test_toy_density(self, toy):
        result = stats(toy)
        assert result == DatasetStats(6, 7, 24, 24 / 42)

    def test_full_incidence(self):
        ctx = FormalContext(
            ["x", "y"], ["p", "q"], [AttributeSet(2, 3), AttributeSet(2, 3)]
        )
        assert stats(ctx).density == 1.0

    def test_degenerate(self):
        ctx = FormalContext([], ["p"], [])
        assert stats(ctx).density == 0.0


class TestWriteConcepts:
    def test_json_lines_records(self, toy):
        sink = io.StringIO()
        count = write_concepts(toy, brute_force_concepts(toy), "json_lines", sink)
        lines = sink.getvalue().splitlines()
        assert count == 21
        assert len(lines) == 21
        assert json.loads(lines[0]) == {
            "extent": ["1", "2", "3", "4", "5", "6"],
            "intent": [],
        }
        assert {"extent": ["1", "5"], "intent": ["a", "d", "f"]} in [
            json.loads(line) for line in lines
        ]

    def test_order_is_canonical_regardless_of_input(self, toy):
        concepts = brute_force_concepts(toy)
        shuffled = random.Random(7).sample(concepts, len(concepts))
        a, b = io.StringIO(), io.StringIO()
        write_concepts(toy, concepts, "json_lines", a)
        write_concepts(toy, shuffled, "json_lines", b)
        assert a.getvalue() == b.getvalue()

    def test_csv_format(self, toy):
        sink = io.StringIO()
        write_concepts(toy, brute_force_concepts(toy), "csv", sink)
        lines = sink.getvalue().splitlines()
        assert lines[0] == "extent,intent"
        assert len(lines) == 22
        assert "1 5,a d f" in lines

    def test_count_only(self, toy):
        sink = io.StringIO()
        assert write_concepts(toy, brute_force_concepts(toy), "count_only", sink) == 21
        assert sink.getvalue() == "21\n"

    def test_empty_list(self, toy):
        sink = io.StringIO()
        assert write_concepts(toy, [], "json_lines", sink) == 0
        assert sink.getvalue() == ""

    def test_unknown_format(self, toy):
        with pytest.raises(ValueError, match="unknown concept format"):
            write_concepts(toy, [], "yaml", io.StringIO())

    def test_file_sink_with_gzip(self, toy, tmp_path):
        path = tmp_path / "concepts.jsonl.gz"
        write_concepts(toy, brute_force_concepts(toy), "json_lines", path)
        with gzip.open(path, "rt") as fh:
            assert len(fh.read().splitlines()) == 21
