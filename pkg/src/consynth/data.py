"""Schema, dataset and randomness primitives.

A :class:`Schema` is an ordered list of typed attributes. Categorical
attributes carry an explicit value list (optionally totally ordered, which
is what allows order comparisons in constraints); numerical attributes
carry a closed interval ``[lo, hi]`` plus a bin count ``q`` used whenever a
histogram over the attribute is needed. Domains always come from the
schema, never from data: deriving them from a private table would leak.

Datasets are stored column-major. Categorical cells are kept as integer
codes into the attribute's domain list, numerical cells as float64. All
stochastic operations in the package draw from a :class:`RandomSource`,
a seeded, labelled stream; no global RNG is ever touched.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DomainViolation,
    MissingColumn,
    NotNumerical,
    OutOfRange,
    ParseError,
    SchemaError,
)

CATEGORICAL = "categorical"
NUMERICAL = "numerical"


@dataclass(frozen=True)
class AttributeSpec:
    """One typed column of the schema.

    For categorical attributes ``domain`` is the list of admissible
    tokens; ``ordered`` declares the list order to be a total order so
    that ``<``/``>`` predicates over the attribute are meaningful.
    For numerical attributes ``lo < hi`` bound the closed domain and
    ``bins`` (q >= 1) fixes the equal-width quantization grid.
    """

    name: str
    kind: str
    domain: tuple[str, ...] = ()
    lo: float = 0.0
    hi: float = 1.0
    bins: int = 1
    ordered: bool = False

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERICAL):
            raise SchemaError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.domain:
                raise SchemaError(f"attribute {self.name!r}: empty categorical domain")
            if len(set(self.domain)) != len(self.domain):
                raise SchemaError(f"attribute {self.name!r}: duplicate domain values")
        else:
            if not (self.lo < self.hi):
                raise SchemaError(f"attribute {self.name!r}: requires lo < hi")
            if self.bins < 1:
                raise SchemaError(f"attribute {self.name!r}: bins must be >= 1")

    @property
    def is_numerical(self) -> bool:
        return self.kind == NUMERICAL

    @property
    def size(self) -> int:
        """Effective domain size: value count, or the bin count for numericals."""
        return self.bins if self.is_numerical else len(self.domain)

    def code_of(self, token: str) -> int:
        try:
            return self.domain.index(token)
        except ValueError:
            raise DomainViolation(-1, self.name, token) from None


def categorical(name: str, domain, ordered: bool = False) -> AttributeSpec:
    return AttributeSpec(name=name, kind=CATEGORICAL, domain=tuple(str(v) for v in domain), ordered=ordered)


def numerical(name: str, lo: float, hi: float, bins: int) -> AttributeSpec:
    return AttributeSpec(name=name, kind=NUMERICAL, lo=float(lo), hi=float(hi), bins=int(bins))


@dataclass(frozen=True)
class Schema:
    attributes: tuple[AttributeSpec, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate attribute names")
        if len(names) < 2:
            raise SchemaError("a schema needs at least two attributes")

    def __iter__(self):
        return iter(self.attributes)

    def __len__(self) -> int:
        return len(self.attributes)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def __getitem__(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(a.name == name for a in self.attributes)

    def index_of(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise KeyError(name)


def schema_from_dict(obj: dict) -> Schema:
    """Build a schema from the JSON object layout used on disk."""
    attrs = []
    for entry in obj["attributes"]:
        name, kind = entry["name"], entry["kind"]
        if kind == CATEGORICAL:
            attrs.append(
                AttributeSpec(
                    name=name,
                    kind=CATEGORICAL,
                    domain=tuple(str(v) for v in entry["domain"]),
                    ordered=bool(entry.get("ordered", False)),
                )
            )
        elif kind == NUMERICAL:
            dom = entry["domain"]
            attrs.append(
                AttributeSpec(
                    name=name,
                    kind=NUMERICAL,
                    lo=float(dom["lo"]),
                    hi=float(dom["hi"]),
                    bins=int(dom["q"]),
                )
            )
        else:
            raise SchemaError(f"attribute {name!r}: unknown kind {kind!r}")
    return Schema(tuple(attrs))


def schema_to_dict(schema: Schema) -> dict:
    out = []
    for a in schema:
        if a.is_numerical:
            out.append({"name": a.name, "kind": a.kind, "domain": {"lo": a.lo, "hi": a.hi, "q": a.bins}})
        else:
            entry = {"name": a.name, "kind": a.kind, "domain": list(a.domain)}
            if a.ordered:
                entry["ordered"] = True
            out.append(entry)
    return {"attributes": out}


def load_schema(path) -> Schema:
    with open(path, "r", encoding="utf-8") as fh:
        return schema_from_dict(json.load(fh))


def save_schema(schema: Schema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_dict(schema), fh, indent=2)
        fh.write("\n")


class Dataset:
    """Immutable column-major table validated against a schema.

    Tuple identifiers are 1-based row indices. Columns are numpy arrays:
    int64 codes for categorical attributes, float64 for numerical ones.
    """

    def __init__(self, schema: Schema, columns: dict[str, np.ndarray]):
        self.schema = schema
        lengths = {len(col) for col in columns.values()}
        if len(lengths) > 1:
            raise SchemaError("ragged columns")
        self.n = lengths.pop() if lengths else 0
        self._columns = {}
        for a in schema:
            if a.name not in columns:
                raise MissingColumn(a.name)
            col = columns[a.name]
            if a.is_numerical:
                col = np.asarray(col, dtype=np.float64)
                bad = np.where((col < a.lo) | (col > a.hi) | ~np.isfinite(col))[0]
                if bad.size:
                    raise DomainViolation(int(bad[0]) + 1, a.name, float(col[bad[0]]))
            else:
                col = np.asarray(col, dtype=np.int64)
                bad = np.where((col < 0) | (col >= len(a.domain)))[0]
                if bad.size:
                    raise DomainViolation(int(bad[0]) + 1, a.name, int(col[bad[0]]))
            col.setflags(write=False)
            self._columns[a.name] = col

    def column(self, name: str) -> np.ndarray:
        """Raw column: integer codes (categorical) or floats (numerical)."""
        return self._columns[name]

    def cell(self, row: int, name: str):
        """Decoded cell value for the 1-based row index."""
        a = self.schema[name]
        v = self._columns[name][row - 1]
        return float(v) if a.is_numerical else a.domain[int(v)]

    def row_values(self, row: int) -> dict[str, object]:
        return {a.name: self.cell(row, a.name) for a in self.schema}

    def head(self, n: int) -> "Dataset":
        return Dataset(self.schema, {k: v[:n] for k, v in self._columns.items()})

    def take(self, rows: np.ndarray) -> "Dataset":
        """Subset by 0-based positional indices, preserving order."""
        return Dataset(self.schema, {k: v[rows] for k, v in self._columns.items()})

    def __len__(self) -> int:
        return self.n


def from_tokens(schema: Schema, rows: list[dict[str, object]]) -> Dataset:
    """Build a dataset from decoded per-row value dicts."""
    cols: dict[str, list] = {a.name: [] for a in schema}
    for i, row in enumerate(rows, start=1):
        for a in schema:
            v = row[a.name]
            if a.is_numerical:
                cols[a.name].append(float(v))
            else:
                tok = str(v)
                if tok not in a.domain:
                    raise DomainViolation(i, a.name, tok)
                cols[a.name].append(a.domain.index(tok))
    return Dataset(schema, {k: np.asarray(v) for k, v in cols.items()})


def load_dataset(csv_path, schema: Schema) -> Dataset:
    """Read a UTF-8, comma-separated file with a header row.

    Column order in the file is free; every schema attribute must be
    present. Cells are validated against the attribute domains and
    missing/empty values are rejected.
    """
    path = Path(csv_path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn("empty file") from None
        header = [h.strip() for h in header]
        for a in schema:
            if a.name not in header:
                raise MissingColumn(a.name)
        pos = {a.name: header.index(a.name) for a in schema}
        cols: dict[str, list] = {a.name: [] for a in schema}
        for i, rec in enumerate(reader, start=1):
            for a in schema:
                raw = rec[pos[a.name]].strip() if pos[a.name] < len(rec) else ""
                if raw == "":
                    raise ParseError(i, a.name, raw)
                if a.is_numerical:
                    try:
                        val = float(raw)
                    except ValueError:
                        raise ParseError(i, a.name, raw) from None
                    if not (a.lo <= val <= a.hi) or not np.isfinite(val):
                        raise DomainViolation(i, a.name, val)
                    cols[a.name].append(val)
                else:
                    if raw not in a.domain:
                        raise DomainViolation(i, a.name, raw)
                    cols[a.name].append(a.domain.index(raw))
    return Dataset(schema, {k: np.asarray(v) for k, v in cols.items()})


def save_dataset(data: Dataset, csv_path) -> None:
    """Write CSV in schema column order; numerics use shortest round-trip repr."""
    with Path(csv_path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(data.schema.names)
        decoded = []
        for a in data.schema:
            col = data.column(a.name)
            if a.is_numerical:
                decoded.append([repr(float(v)) for v in col])
            else:
                decoded.append([a.domain[int(v)] for v in col])
        for i in range(data.n):
            writer.writerow([decoded[j][i] for j in range(len(decoded))])


def quantize(value: float, spec: AttributeSpec) -> int:
    """Equal-width bin index in ``[1, q]``; the right edge maps to bin q."""
    if not spec.is_numerical:
        raise NotNumerical(spec.name)
    if not (spec.lo <= value <= spec.hi):
        raise OutOfRange(f"{value} outside [{spec.lo}, {spec.hi}]")
    width = (spec.hi - spec.lo) / spec.bins
    idx = int(np.floor((value - spec.lo) / width)) + 1
    return min(idx, spec.bins)


def unquantize(bin_index: int, spec: AttributeSpec, rng: "RandomSource") -> float:
    """Uniform draw from the subinterval represented by the bin."""
    if not spec.is_numerical:
        raise NotNumerical(spec.name)
    if not (1 <= bin_index <= spec.bins):
        raise OutOfRange(f"bin {bin_index} outside [1, {spec.bins}]")
    width = (spec.hi - spec.lo) / spec.bins
    left = spec.lo + (bin_index - 1) * width
    return left + rng.generator.random() * width


def quantize_column(col: np.ndarray, spec: AttributeSpec) -> np.ndarray:
    """Vectorized ``quantize`` returning 0-based bin codes."""
    width = (spec.hi - spec.lo) / spec.bins
    idx = np.floor((col - spec.lo) / width).astype(np.int64)
    return np.minimum(idx, spec.bins - 1)


def _stream_key(seed: int, label: str) -> np.random.SeedSequence:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in (0, 4, 8, 12)]
    return np.random.SeedSequence(entropy=seed & ((1 << 64) - 1), spawn_key=tuple(words))


@dataclass
class RandomSource:
    """Seeded random stream addressed by a label.

    Identical ``(seed, label)`` pairs replay the same draw sequence.
    Derive independent child streams with :meth:`child`; never share one
    instance across concurrent consumers.
    """

    seed: int
    label: str = "root"
    _gen: np.random.Generator | None = field(default=None, repr=False)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.Generator(np.random.PCG64(_stream_key(self.seed, self.label)))
        return self._gen

    def child(self, label: str) -> "RandomSource":
        return RandomSource(self.seed, f"{self.label}/{label}")
