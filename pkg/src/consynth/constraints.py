"""Denial constraints: grammar, parsing and violation counting.

A constraint is the negation of a predicate conjunction over one tuple
(arity 1) or two tuples (arity 2). Text form, one constraint per line::

    hard !(t1.edu==t2.edu & t1.edu_num!=t2.edu_num)
    soft !(t1.a3>t2.a3 & t1.a4<t2.a4)
    soft(1.5) !(t1.age<10 & t1.cap_gain>1000000)
    !(t1.age<10 & t1.cap_gain>1000000)          # soft, weight learned later

The optional ``soft(w)`` form pins a known weight; a bare ``soft`` (or no
marker) leaves the weight to be learned. Order comparisons are allowed on
numerical attributes and on categorical attributes whose schema entry
declares ``ordered``; the domain list order is the total order.

A violation of an arity-2 constraint is an unordered row pair {i, j} such
that binding (t1, t2) to (i, j) or to (j, i) satisfies every predicate.
Pairs are counted once even if both orientations match.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .data import AttributeSpec, Dataset, Schema
from .errors import (
    DCSyntaxError,
    InsufficientAttributes,
    TypeMismatch,
    UnknownAttribute,
)

OPS = ("==", "!=", ">=", "<=", ">", "<")

_OP_FUNC = {
    "==": np.equal,
    "!=": np.not_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "<": np.less,
    "<=": np.less_equal,
}

_ORDER_OPS = {">", ">=", "<", "<="}


@dataclass(frozen=True)
class Predicate:
    """``slot.attr OP (slot.attr | constant)`` with slots in {t1, t2}."""

    lhs_slot: str
    lhs_attr: str
    op: str
    rhs_slot: str | None  # None when rhs is a constant
    rhs_attr: str | None
    const: object | None = None

    @property
    def attributes(self) -> set[str]:
        out = {self.lhs_attr}
        if self.rhs_attr is not None:
            out.add(self.rhs_attr)
        return out

    @property
    def slots(self) -> set[str]:
        out = {self.lhs_slot}
        if self.rhs_slot is not None:
            out.add(self.rhs_slot)
        return out

    def text(self) -> str:
        lhs = f"{self.lhs_slot}.{self.lhs_attr}"
        if self.rhs_slot is not None:
            rhs = f"{self.rhs_slot}.{self.rhs_attr}"
        elif isinstance(self.const, str):
            rhs = f'"{self.const}"'
        else:
            rhs = repr(self.const)
        return f"{lhs}{self.op}{rhs}"


@dataclass(frozen=True)
class DenialConstraint:
    """Negated conjunction with hardness flag and optional weight."""

    id: str
    predicates: tuple[Predicate, ...]
    hard: bool
    weight: float | None = None  # None: soft, to be learned; inf for hard

    def __post_init__(self):
        if not self.predicates:
            raise DCSyntaxError("a constraint needs at least one predicate")
        if self.hard and self.weight != math.inf:
            object.__setattr__(self, "weight", math.inf)
        if self.arity == 1 and any("t2" in p.slots for p in self.predicates):
            raise DCSyntaxError("arity mix-up")

    @property
    def arity(self) -> int:
        return 2 if any("t2" in p.slots for p in self.predicates) else 1

    @property
    def attributes(self) -> set[str]:
        out: set[str] = set()
        for p in self.predicates:
            out |= p.attributes
        return out

    def text(self) -> str:
        if self.hard:
            prefix = "hard "
        elif self.weight is not None:
            prefix = f"soft({self.weight:g}) "
        else:
            prefix = "soft "
        return prefix + "!(" + " & ".join(p.text() for p in self.predicates) + ")"


@dataclass
class ViolationSet:
    """Violating tuple ids (arity 1) or unordered id pairs (arity 2), 1-based."""

    dc_id: str
    arity: int
    members: set[tuple[int, ...]] = field(default_factory=set)

    def __len__(self) -> int:
        return len(self.members)


_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<ref>t[12]\s*\.\s*[A-Za-z_][A-Za-z0-9_]*)
      | (?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
      | (?P<qstr>'[^']*'|"[^"]*")
      | (?P<op>==|!=|>=|<=|>|<)
      | (?P<punct>[&()!])
      | (?P<word>[A-Za-z_][A-Za-z0-9_-]*)
    )""",
    re.X,
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise DCSyntaxError(f"cannot tokenize near {text[pos:pos + 12]!r}")
        pos = m.end()
        for kind in ("ref", "num", "qstr", "op", "punct", "word"):
            val = m.group(kind)
            if val is not None:
                tokens.append((kind, val))
                break
    return tokens


def _validate_predicate(pred: Predicate, schema: Schema) -> Predicate:
    for attr in pred.attributes:
        if attr not in schema:
            raise UnknownAttribute(attr)
    a1 = schema[pred.lhs_attr]
    if pred.rhs_attr is not None:
        a2 = schema[pred.rhs_attr]
        if a1.is_numerical != a2.is_numerical:
            raise TypeMismatch(f"{pred.lhs_attr} vs {pred.rhs_attr}: kind mismatch")
        if not a1.is_numerical:
            if pred.op in _ORDER_OPS:
                if not (a1.ordered and a2.ordered):
                    raise TypeMismatch(f"order comparison on unordered categorical in {pred.text()}")
                if a1.domain != a2.domain:
                    raise TypeMismatch(f"order comparison across distinct domains in {pred.text()}")
    else:
        if a1.is_numerical:
            if not isinstance(pred.const, (int, float)):
                raise TypeMismatch(f"numerical attribute {pred.lhs_attr} compared to {pred.const!r}")
        else:
            if not isinstance(pred.const, str):
                raise TypeMismatch(f"categorical attribute {pred.lhs_attr} compared to {pred.const!r}")
            if pred.const not in a1.domain:
                raise TypeMismatch(f"constant {pred.const!r} not in domain of {pred.lhs_attr}")
            if pred.op in _ORDER_OPS and not a1.ordered:
                raise TypeMismatch(f"order comparison on unordered categorical {pred.lhs_attr}")
    return pred


def parse_dc(text: str, schema: Schema, dc_id: str | None = None) -> DenialConstraint:
    """Parse one constraint line and validate it against the schema."""
    raw = text.split("#", 1)[0].strip()
    if not raw:
        raise DCSyntaxError("empty constraint text")
    tokens = _tokenize(raw)
    i = 0
    hard, weight = False, None
    if i < len(tokens) and tokens[i][0] == "word":
        marker = tokens[i][1].lower()
        if marker == "hard":
            hard, weight = True, math.inf
            i += 1
        elif marker == "soft":
            i += 1
            if i + 2 < len(tokens) and tokens[i] == ("punct", "(") and tokens[i + 1][0] == "num":
                weight = float(tokens[i + 1][1])
                if weight < 0:
                    raise DCSyntaxError("negative weight")
                if tokens[i + 2] != ("punct", ")"):
                    raise DCSyntaxError("expected ')' after weight")
                i += 3
        else:
            raise DCSyntaxError(f"unknown marker {marker!r}")

    def expect(tok):
        nonlocal i
        if i >= len(tokens) or tokens[i] != ("punct", tok):
            raise DCSyntaxError(f"expected {tok!r}")
        i += 1

    expect("!")
    expect("(")
    predicates: list[Predicate] = []
    while True:
        if i >= len(tokens) or tokens[i][0] != "ref":
            raise DCSyntaxError("expected slot.attribute reference")
        slot, attr = (s.strip() for s in tokens[i][1].split("."))
        i += 1
        if i >= len(tokens) or tokens[i][0] != "op":
            raise DCSyntaxError("expected comparison operator")
        op = tokens[i][1]
        i += 1
        if i >= len(tokens):
            raise DCSyntaxError("truncated predicate")
        kind, val = tokens[i]
        if kind == "ref":
            rslot, rattr = (s.strip() for s in val.split("."))
            pred = Predicate(slot, attr, op, rslot, rattr)
        elif kind == "num":
            pred = Predicate(slot, attr, op, None, None, const=float(val))
        elif kind == "qstr":
            pred = Predicate(slot, attr, op, None, None, const=val[1:-1])
        elif kind == "word":
            pred = Predicate(slot, attr, op, None, None, const=val)
        else:
            raise DCSyntaxError(f"unexpected token {val!r}")
        i += 1
        predicates.append(_validate_predicate(pred, schema))
        if i < len(tokens) and tokens[i] == ("punct", "&"):
            i += 1
            continue
        break
    expect(")")
    if i != len(tokens):
        raise DCSyntaxError("trailing tokens")
    return DenialConstraint(
        id=dc_id or "dc", predicates=tuple(predicates), hard=hard, weight=weight
    )


def load_dcs(path, schema: Schema) -> list[DenialConstraint]:
    """Read a constraint file: one per line, '#' comments, blanks ignored."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            out.append(parse_dc(stripped, schema, dc_id=f"dc{len(out) + 1}"))
    return out


def save_dcs(dcs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for dc in dcs:
            fh.write(dc.text() + "\n")


# ---------------------------------------------------------------------------
# Compiled evaluation
# ---------------------------------------------------------------------------


class _CompiledPredicate:
    """Predicate specialised to a schema for vectorized evaluation.

    ``evaluate(acc1, acc2)`` receives accessors mapping attribute name to
    a scalar or broadcastable array for the tuples bound to t1 and t2.
    Cross-attribute categorical comparison translates the rhs codes into
    the lhs domain so integer comparison remains valid.
    """

    def __init__(self, pred: Predicate, schema: Schema):
        self.pred = pred
        self.func = _OP_FUNC[pred.op]
        self.translate: np.ndarray | None = None
        spec1 = schema[pred.lhs_attr]
        if pred.rhs_attr is not None:
            spec2 = schema[pred.rhs_attr]
            if not spec1.is_numerical and spec1.domain != spec2.domain:
                table = np.full(len(spec2.domain), -1, dtype=np.int64)
                for j, tok in enumerate(spec2.domain):
                    if tok in spec1.domain:
                        table[j] = spec1.domain.index(tok)
                self.translate = table
            self.const_val = None
        elif spec1.is_numerical:
            self.const_val = float(pred.const)
        else:
            self.const_val = spec1.domain.index(pred.const)

    def evaluate(self, acc1, acc2):
        p = self.pred
        lhs = (acc1 if p.lhs_slot == "t1" else acc2)(p.lhs_attr)
        if p.rhs_slot is None:
            rhs = self.const_val
        else:
            rhs = (acc1 if p.rhs_slot == "t1" else acc2)(p.rhs_attr)
            if self.translate is not None:
                rhs = self.translate[rhs]
        return self.func(lhs, rhs)


class CompiledDC:
    """Schema-bound constraint ready for repeated evaluation."""

    def __init__(self, dc: DenialConstraint, schema: Schema):
        self.dc = dc
        self.schema = schema
        self.preds = [_CompiledPredicate(p, schema) for p in dc.predicates]

    def satisfied(self, acc1, acc2=None):
        """Conjunction value under accessors for the t1/t2 bindings."""
        result = None
        for cp in self.preds:
            val = cp.evaluate(acc1, acc2)
            result = val if result is None else result & val
        return result


def _dataset_accessor(data: Dataset, reshape=None):
    def acc(attr: str):
        col = data.column(attr)
        return col.reshape(reshape) if reshape else col

    return acc


def _dict_accessor(values: dict, reshape=None):
    def acc(attr: str):
        v = values[attr]
        if isinstance(v, np.ndarray) and reshape:
            return v.reshape(reshape)
        return v

    return acc


def encode_value(spec: AttributeSpec, value) -> float | int:
    if spec.is_numerical:
        return float(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return spec.domain.index(str(value))


def _encode_row(schema: Schema, row: dict) -> dict:
    return {k: encode_value(schema[k], v) for k, v in row.items()}


def count_violations(dc: DenialConstraint, data: Dataset) -> ViolationSet:
    """Exact violation set; arity-2 pairs are unordered and 1-based."""
    comp = CompiledDC(dc, data.schema)
    vs = ViolationSet(dc_id=dc.id, arity=dc.arity)
    n = data.n
    if n == 0:
        return vs
    if dc.arity == 1:
        mask = np.asarray(comp.satisfied(_dataset_accessor(data)), dtype=bool)
        mask = np.broadcast_to(mask, (n,))
        vs.members = {(int(i) + 1,) for i in np.nonzero(mask)[0]}
        return vs
    acc_rows = _dataset_accessor(data, reshape=(n, 1))
    acc_cols = _dataset_accessor(data, reshape=(1, n))
    m12 = np.broadcast_to(np.asarray(comp.satisfied(acc_rows, acc_cols)), (n, n))
    either = m12 | m12.T
    iu = np.triu_indices(n, k=1)
    hits = either[iu]
    vs.members = {
        (int(i) + 1, int(j) + 1)
        for i, j in zip(iu[0][hits], iu[1][hits])
    }
    return vs


def incremental_violations(dc: DenialConstraint, new_tuple: dict, prefix: Dataset) -> int:
    """Violating groups in which the new tuple is the highest-id member."""
    comp = CompiledDC(dc, prefix.schema)
    row = _encode_row(prefix.schema, new_tuple)
    if dc.arity == 1:
        return int(bool(comp.satisfied(_dict_accessor(row))))
    if prefix.n == 0:
        return 0
    acc_new = _dict_accessor(row)
    acc_prefix = _dataset_accessor(prefix)
    m1 = np.broadcast_to(np.asarray(comp.satisfied(acc_new, acc_prefix)), (prefix.n,))
    m2 = np.broadcast_to(np.asarray(comp.satisfied(acc_prefix, acc_new)), (prefix.n,))
    return int(np.count_nonzero(m1 | m2))


def partial_violations(
    dc: DenialConstraint,
    new_tuple: dict,
    prefix_columns: dict[str, np.ndarray],
    schema: Schema,
) -> int:
    """Incremental count evaluated on a projection of the attributes.

    ``new_tuple`` maps the assigned attributes to decoded values and
    ``prefix_columns`` maps them to decoded value arrays for the earlier
    tuples. Every attribute of the constraint must be assigned.
    """
    missing = dc.attributes - set(new_tuple) | (dc.attributes - set(prefix_columns))
    if missing:
        raise InsufficientAttributes(", ".join(sorted(missing)))
    comp = CompiledDC(dc, schema)
    row = _encode_row(schema, {k: new_tuple[k] for k in dc.attributes})
    if dc.arity == 1:
        return int(bool(comp.satisfied(_dict_accessor(row))))
    enc_prefix = {}
    sizes = set()
    for attr in dc.attributes:
        spec = schema[attr]
        col = prefix_columns[attr]
        if spec.is_numerical:
            enc = np.asarray(col, dtype=np.float64)
        else:
            enc = np.asarray([encode_value(spec, v) for v in col], dtype=np.int64)
        enc_prefix[attr] = enc
        sizes.add(len(enc))
    if sizes and sizes != {0}:
        (size,) = sizes
        if size == 0:
            return 0
    else:
        return 0
    acc_new = _dict_accessor(row)
    acc_prefix = _dict_accessor(enc_prefix)
    m1 = np.broadcast_to(np.asarray(comp.satisfied(acc_new, acc_prefix)), (size,))
    m2 = np.broadcast_to(np.asarray(comp.satisfied(acc_prefix, acc_new)), (size,))
    return int(np.count_nonzero(m1 | m2))


def violation_counts_per_row(dc: DenialConstraint, data: Dataset) -> np.ndarray:
    """Per-tuple counts against the rest of the instance.

    Entry i is the number of violations the (i+1)-th tuple participates in:
    its indicator for arity 1, or the number of partners j != i forming a
    violating unordered pair for arity 2.
    """
    comp = CompiledDC(dc, data.schema)
    n = data.n
    if dc.arity == 1:
        mask = np.broadcast_to(np.asarray(comp.satisfied(_dataset_accessor(data))), (n,))
        return mask.astype(np.int64)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    acc_rows = _dataset_accessor(data, reshape=(n, 1))
    acc_cols = _dataset_accessor(data, reshape=(1, n))
    m12 = np.broadcast_to(np.asarray(comp.satisfied(acc_rows, acc_cols)), (n, n))
    either = (m12 | m12.T) & ~np.eye(n, dtype=bool)
    return either.sum(axis=1).astype(np.int64)


def partition_by_sequence(dcs, order: list[str]) -> dict[str, list[str]]:
    """Assign each constraint to the last of its attributes in the order."""
    pos = {a: i for i, a in enumerate(order)}
    out: dict[str, list[str]] = {a: [] for a in order}
    for dc in dcs:
        for attr in dc.attributes:
            if attr not in pos:
                raise UnknownAttribute(attr)
        last = max(dc.attributes, key=lambda a: pos[a])
        out[last].append(dc.id)
    return out


def extract_fds(dcs) -> list[tuple[frozenset[str], str]]:
    """Functional dependencies X -> Y read off equality/inequality shapes.

    Matches arity-2 constraints that conjoin same-attribute equalities with
    exactly one same-attribute inequality and nothing else.
    """
    out = []
    for dc in dcs:
        if dc.arity != 2:
            continue
        lhs: set[str] = set()
        rhs: list[str] = []
        ok = True
        for p in dc.predicates:
            same_attr = (
                p.rhs_slot is not None
                and p.rhs_attr == p.lhs_attr
                and p.rhs_slot != p.lhs_slot
            )
            if not same_attr:
                ok = False
                break
            if p.op == "==":
                lhs.add(p.lhs_attr)
            elif p.op == "!=":
                rhs.append(p.lhs_attr)
            else:
                ok = False
                break
        if ok and lhs and len(rhs) == 1 and rhs[0] not in lhs:
            out.append((frozenset(lhs), rhs[0]))
    return out
