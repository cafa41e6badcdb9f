"""Constraint-aware attribute ordering.

The order is derived from the schema and constraints alone, never from
data, so it costs no privacy. Functional dependencies extracted from the
constraints are honoured first (determinants before dependents, smallest
domains first); the remaining attributes follow by ascending domain size,
with declaration order breaking ties.

Two adjustments handle extreme domain sizes: runs of small, constraint-free
categorical attributes can be merged into one hyper attribute so a single
model covers them, and very large domains are flagged for independent
histogram sampling instead of serving as model targets.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constraints import extract_fds
from .data import Schema
from .errors import SchemaError

GROUP_MAX_BITS = 8
FALLBACK_MIN_SIZE = 5000


@dataclass(frozen=True)
class SchemaSequence:
    """Attribute permutation plus grouping and fallback annotations.

    ``groups`` partitions *consecutive* attributes of ``order`` into hyper
    attributes (each a tuple of names); ungrouped attributes stand alone.
    ``fallback`` names attributes sampled from their own noisy histogram
    rather than predicted from context.
    """

    order: tuple[str, ...]
    groups: tuple[tuple[str, ...], ...] = ()
    fallback: frozenset[str] = frozenset()

    def positions(self) -> list[tuple[str, ...]]:
        """The modelled positions: hyper groups and singleton attributes."""
        grouped = {a: g for g in self.groups for a in g}
        out: list[tuple[str, ...]] = []
        i = 0
        while i < len(self.order):
            name = self.order[i]
            g = grouped.get(name)
            if g and self.order[i : i + len(g)] == g:
                out.append(g)
                i += len(g)
            else:
                out.append((name,))
                i += 1
        return out

    def histogram_count(self, schema: Schema) -> int:
        """Gaussian histogram releases: position one plus fallbacks."""
        positions = self.positions()
        count = 1
        for pos in positions[1:]:
            if any(a in self.fallback for a in pos):
                count += 1
        return count

    def submodel_count(self, schema: Schema) -> int:
        positions = self.positions()
        return sum(
            1 for pos in positions[1:] if not any(a in self.fallback for a in pos)
        )

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "groups": [list(g) for g in self.groups],
            "fallback": sorted(self.fallback),
        }

    @staticmethod
    def from_dict(obj: dict) -> "SchemaSequence":
        return SchemaSequence(
            order=tuple(obj["order"]),
            groups=tuple(tuple(g) for g in obj.get("groups", [])),
            fallback=frozenset(obj.get("fallback", [])),
        )


def sequence(schema: Schema, dcs) -> SchemaSequence:
    """Order attributes for chain modelling.

    Extracted FDs are sorted by the smallest domain size on their left
    side; each contributes its left side (ascending domain size) then its
    right side, skipping attributes already placed. Leftover attributes
    are appended by ascending domain size. Deterministic: ties fall back
    to schema declaration order.
    """
    decl = {a.name: i for i, a in enumerate(schema)}
    size = {a.name: a.size for a in schema}

    def attr_key(name: str):
        return (size[name], decl[name])

    fds = extract_fds(dcs)
    fds_sorted = sorted(fds, key=lambda fd: min(size[a] for a in fd[0]))
    order: list[str] = []
    seen: set[str] = set()
    for lhs, rhs in fds_sorted:
        for name in sorted(lhs, key=attr_key) + [rhs]:
            if name not in seen:
                order.append(name)
                seen.add(name)
    for name in sorted((a.name for a in schema if a.name not in seen), key=attr_key):
        order.append(name)
    return SchemaSequence(order=tuple(order))


def apply_domain_optimizations(
    seq: SchemaSequence,
    schema: Schema,
    dcs=(),
    group_max_bits: int = GROUP_MAX_BITS,
    fallback_min_size: int = FALLBACK_MIN_SIZE,
) -> SchemaSequence:
    """Merge small constraint-free categorical runs; flag huge domains.

    Maximal runs of consecutive categorical attributes that appear in no
    constraint and whose cumulative domain product stays within
    ``2**group_max_bits`` become hyper attributes. Attributes with domain
    size at least ``fallback_min_size`` are flagged for independent
    histogram sampling.
    """
    in_dc: set[str] = set()
    for dc in dcs:
        in_dc |= dc.attributes
    limit = 2 ** group_max_bits

    groups: list[tuple[str, ...]] = []
    run: list[str] = []
    run_product = 1

    def close_run():
        nonlocal run, run_product
        if len(run) >= 2:
            groups.append(tuple(run))
        run, run_product = [], 1

    for name in seq.order:
        spec = schema[name]
        eligible = (not spec.is_numerical) and name not in in_dc and spec.size < fallback_min_size
        if eligible and run_product * spec.size <= limit:
            run.append(name)
            run_product *= spec.size
        else:
            close_run()
            if eligible and spec.size <= limit:
                run, run_product = [name], spec.size
    close_run()

    fallback = frozenset(a.name for a in schema if a.size >= fallback_min_size)
    return SchemaSequence(order=seq.order, groups=tuple(groups), fallback=fallback)


def validate_sequence(seq: SchemaSequence, schema: Schema) -> None:
    if sorted(seq.order) != sorted(schema.names):
        raise SchemaError("sequence is not a permutation of the schema attributes")
    for g in seq.groups:
        for name in g:
            if schema[name].is_numerical:
                raise SchemaError(f"grouped attribute {name!r} must be categorical")
