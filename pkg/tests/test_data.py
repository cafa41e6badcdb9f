import math

import numpy as np
import pytest

from consynth.data import (
    Dataset,
    RandomSource,
    Schema,
    categorical,
    load_dataset,
    load_schema,
    numerical,
    quantize,
    save_dataset,
    save_schema,
    schema_from_dict,
    schema_to_dict,
    unquantize,
)
from consynth.errors import (
    DomainViolation,
    MissingColumn,
    NotNumerical,
    OutOfRange,
    ParseError,
    SchemaError,
)

EDU = ["hs", "bs", "ms"]


@pytest.fixture
def small_schema():
    return Schema((categorical("edu", EDU), numerical("edu_num", 0.0, 16.0, 4)))


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadDataset:
    def test_three_row_csv(self, tmp_path, small_schema):
        p = write(tmp_path, "edu,edu_num\nhs,9\nbs,13\nms,14\n")
        data = load_dataset(p, small_schema)
        assert data.n == 3
        assert len(data.schema) == 2
        assert data.cell(1, "edu") == "hs"
        assert data.cell(3, "edu_num") == 14.0

    def test_column_order_free(self, tmp_path, small_schema):
        p = write(tmp_path, "edu_num,edu\n9,hs\n")
        data = load_dataset(p, small_schema)
        assert data.cell(1, "edu") == "hs"

    def test_value_outside_domain_list(self, tmp_path, small_schema):
        p = write(tmp_path, "edu,edu_num\nPhD++,9\n")
        with pytest.raises(DomainViolation):
            load_dataset(p, small_schema)

    def test_numerical_out_of_range(self, tmp_path):
        schema = Schema((categorical("a", ["x"]), numerical("gain", 0.0, 1e6, 4)))
        p = write(tmp_path, "a,gain\nx,1.2e6\n")
        with pytest.raises(DomainViolation):
            load_dataset(p, schema)

    def test_missing_column(self, tmp_path, small_schema):
        p = write(tmp_path, "edu\nhs\n")
        with pytest.raises(MissingColumn):
            load_dataset(p, small_schema)

    def test_missing_value_rejected(self, tmp_path, small_schema):
        p = write(tmp_path, "edu,edu_num\nhs,\n")
        with pytest.raises(ParseError):
            load_dataset(p, small_schema)

    def test_unparseable_number(self, tmp_path, small_schema):
        p = write(tmp_path, "edu,edu_num\nhs,nine\n")
        with pytest.raises(ParseError):
            load_dataset(p, small_schema)


class TestRoundTrip:
    def test_serialization_byte_stable(self, tmp_path, small_schema):
        p = write(tmp_path, "edu,edu_num\nhs,9.25\nbs,0.1\nms,15.999999999\n")
        data = load_dataset(p, small_schema)
        out1 = tmp_path / "o1.csv"
        save_dataset(data, out1)
        data2 = load_dataset(out1, small_schema)
        out2 = tmp_path / "o2.csv"
        save_dataset(data2, out2)
        assert out1.read_bytes() == out2.read_bytes()

    def test_numeric_roundtrip_15_digits(self, tmp_path, small_schema):
        vals = [0.1, 9.123456789012345, 15.99999999999999]
        data = Dataset(
            small_schema, {"edu": np.zeros(3, dtype=int), "edu_num": np.asarray(vals)}
        )
        out = tmp_path / "o.csv"
        save_dataset(data, out)
        again = load_dataset(out, small_schema)
        for i, v in enumerate(vals, start=1):
            got = again.cell(i, "edu_num")
            assert got == pytest.approx(v, rel=1e-15)


class TestQuantize:
    def test_left_edge(self):
        spec = numerical("x", 0, 10, 10)
        assert quantize(0.0, spec) == 1

    def test_right_edge_closed(self):
        spec = numerical("x", 0, 10, 10)
        assert quantize(10.0, spec) == 10

    def test_interior_matches_floor_oracle(self):
        spec = numerical("x", 0, 10, 10)
        # oracle: floor(value / width) + 1
        assert quantize(4.999, spec) == math.floor(4.999 / 1.0) + 1 == 5

    def test_random_values_match_floor_oracle(self):
        gen = np.random.default_rng(7)
        spec = numerical("x", -3.0, 11.0, 7)
        width = (spec.hi - spec.lo) / spec.bins
        for v in gen.uniform(-3.0, 11.0, 200):
            expect = min(int(math.floor((v - spec.lo) / width)) + 1, spec.bins)
            assert quantize(float(v), spec) == expect

    def test_errors(self):
        with pytest.raises(NotNumerical):
            quantize(1.0, categorical("c", ["a", "b"]))
        with pytest.raises(OutOfRange):
            quantize(11.0, numerical("x", 0, 10, 10))


class TestUnquantize:
    def test_bin_one_range(self):
        spec = numerical("x", 0, 10, 10)
        rng = RandomSource(0, "u")
        for _ in range(50):
            assert 0.0 <= unquantize(1, spec, rng) < 1.0

    def test_single_bin_degenerate(self):
        spec = numerical("x", 2.0, 5.0, 1)
        rng = RandomSource(1, "u")
        for _ in range(50):
            assert 2.0 <= unquantize(1, spec, rng) < 5.0

    def test_deterministic_for_seed(self):
        spec = numerical("x", 0, 10, 4)
        a = [unquantize(2, spec, RandomSource(9, "s"))]
        b = [unquantize(2, spec, RandomSource(9, "s"))]
        assert a == b

    def test_out_of_range_bin(self):
        with pytest.raises(OutOfRange):
            unquantize(0, numerical("x", 0, 10, 4), RandomSource(0))

    def test_roundtrip_same_bin(self):
        spec = numerical("x", -2.0, 7.0, 9)
        gen = np.random.default_rng(3)
        rng = RandomSource(4, "rt")
        for v in gen.uniform(-2.0, 7.0, 200):
            b = quantize(float(v), spec)
            assert quantize(unquantize(b, spec, rng), spec) == b


class TestRandomSource:
    def test_same_seed_label_same_stream(self):
        a = RandomSource(42, "x").generator.random(10)
        b = RandomSource(42, "x").generator.random(10)
        assert np.array_equal(a, b)

    def test_labels_independent(self):
        a = RandomSource(42, "x").generator.random(10)
        b = RandomSource(42, "y").generator.random(10)
        assert not np.array_equal(a, b)

    def test_child_streams(self):
        root = RandomSource(5)
        a = root.child("alpha").generator.random(4)
        b = root.child("beta").generator.random(4)
        c = RandomSource(5).child("alpha").generator.random(4)
        assert np.array_equal(a, c)
        assert not np.array_equal(a, b)


class TestSchema:
    def test_json_round_trip(self, tmp_path):
        schema = Schema(
            (
                categorical("c", ["a", "b"], ordered=True),
                numerical("x", 0.0, 5.0, 3),
            )
        )
        p = tmp_path / "s.json"
        save_schema(schema, p)
        again = load_schema(p)
        assert again == schema
        assert schema_from_dict(schema_to_dict(schema)) == schema

    def test_invariants(self):
        with pytest.raises(SchemaError):
            categorical("c", [])
        with pytest.raises(SchemaError):
            categorical("c", ["a", "a"])
        with pytest.raises(SchemaError):
            numerical("x", 5.0, 5.0, 3)
        with pytest.raises(SchemaError):
            numerical("x", 0.0, 5.0, 0)
        with pytest.raises(SchemaError):
            Schema((categorical("c", ["a"]),))
        with pytest.raises(SchemaError):
            Schema((categorical("c", ["a"]), categorical("c", ["b"])))

    def test_dataset_validates_cells(self, small_schema):
        with pytest.raises(DomainViolation):
            Dataset(small_schema, {"edu": np.asarray([5]), "edu_num": np.asarray([1.0])})
        with pytest.raises(DomainViolation):
            Dataset(small_schema, {"edu": np.asarray([0]), "edu_num": np.asarray([99.0])})
