"""Quality metrics: constraint violations and marginal distances.

Violations are reported as the percentage of violating units: unordered
tuple pairs out of C(n, 2) for binary constraints, single tuples out of n
for unary ones. Marginals compare normalized 1-way or 2-way contingency
tables (numerical attributes quantized to their schema bins) under either
the maximum cell gap or half the L1 distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .constraints import DenialConstraint, count_violations
from .data import Dataset, quantize_column
from .errors import SchemaMismatch


def violation_percentage(dc: DenialConstraint, data: Dataset) -> float:
    """100 * |violations| / C(n, 2) for binary, / n for unary constraints."""
    n = data.n
    if n == 0:
        return 0.0
    hits = len(count_violations(dc, data))
    if dc.arity == 1:
        return 100.0 * hits / n
    pairs = n * (n - 1) / 2
    return 100.0 * hits / pairs if pairs else 0.0


def _cell_codes(data: Dataset, attrs: tuple[str, ...]) -> tuple[np.ndarray, int]:
    codes = np.zeros(data.n, dtype=np.int64)
    size = 1
    for name in attrs:
        spec = data.schema[name]
        col = quantize_column(data.column(name), spec) if spec.is_numerical else data.column(name)
        codes = codes * spec.size + col
        size *= spec.size
    return codes, size


def marginal_distance(
    truth: Dataset,
    synthetic: Dataset,
    attrs,
    metric: str = "max",
) -> float:
    """Distance between normalized marginals over an attribute set.

    ``max`` is the largest absolute cell gap; ``half_l1`` is half the L1
    distance. Both lie in [0, 1] and are symmetric in the two datasets.
    """
    attrs = tuple(attrs)
    codes_t, size = _cell_codes(truth, attrs)
    codes_s, _ = _cell_codes(synthetic, attrs)
    h_t = np.bincount(codes_t, minlength=size).astype(np.float64)
    h_s = np.bincount(codes_s, minlength=size).astype(np.float64)
    if h_t.sum() > 0:
        h_t /= h_t.sum()
    if h_s.sum() > 0:
        h_s /= h_s.sum()
    gaps = np.abs(h_t - h_s)
    if metric == "max":
        return float(gaps.max())
    if metric == "half_l1":
        return float(0.5 * gaps.sum())
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class ViolationReport:
    """Per constraint: violating percentage on truth vs synthetic."""

    entries: list[dict]

    def to_dict(self) -> dict:
        return {"violations": self.entries}

    def table(self) -> str:
        lines = [f"{'constraint':<12} {'truth%':>10} {'synthetic%':>12} {'gap':>10}"]
        for e in self.entries:
            lines.append(
                f"{e['dc_id']:<12} {e['truth_pct']:>10.4f} {e['synthetic_pct']:>12.4f} {e['gap']:>10.4f}"
            )
        return "\n".join(lines)


@dataclass
class MarginalReport:
    """Per attribute set: marginal distance between truth and synthetic."""

    entries: list[dict]

    def to_dict(self) -> dict:
        return {"marginals": self.entries}

    def table(self) -> str:
        lines = [f"{'attributes':<32} {'way':>4} {'max':>10} {'half_l1':>10}"]
        for e in self.entries:
            name = ",".join(e["attributes"])
            lines.append(f"{name:<32} {e['way']:>4} {e['max']:>10.4f} {e['half_l1']:>10.4f}")
        return "\n".join(lines)


def evaluate(
    truth: Dataset,
    synthetic: Dataset,
    dcs: list[DenialConstraint],
    ways=(1, 2),
) -> tuple[ViolationReport, MarginalReport]:
    """Aggregate both metrics over all constraints and attribute sets."""
    if truth.schema != synthetic.schema:
        raise SchemaMismatch("truth and synthetic datasets use different schemas")
    vio_entries = []
    for dc in dcs:
        t = violation_percentage(dc, truth)
        s = violation_percentage(dc, synthetic)
        vio_entries.append(
            {"dc_id": dc.id, "truth_pct": t, "synthetic_pct": s, "gap": abs(t - s)}
        )
    marg_entries = []
    names = truth.schema.names
    for way in ways:
        for attrs in combinations(names, way):
            marg_entries.append(
                {
                    "attributes": list(attrs),
                    "way": way,
                    "max": marginal_distance(truth, synthetic, attrs, "max"),
                    "half_l1": marginal_distance(truth, synthetic, attrs, "half_l1"),
                }
            )
    return ViolationReport(vio_entries), MarginalReport(marg_entries)
