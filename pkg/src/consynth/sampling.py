"""Constraint-aware instance synthesis.

Columns are filled in sequence order; within a column, rows are filled in
id order. Each cell draws from the model's conditional distribution
reweighted by ``exp(-sum_phi w_phi * vio_phi)``, where ``vio_phi`` counts
the new violations the candidate value would create against the rows
already filled. Hard constraints (infinite weight) zero out any violating
candidate; when that eliminates every candidate, the cell falls back to a
violation-minimizing choice.

Categorical targets enumerate their domain. Numerical targets score a
set of candidates drawn from the regression head's Gaussian, weighted by
its density; other reals get probability zero. Violation counting is
incremental against the filled prefix (never a full recount), and hard
functional dependencies use a value-map shortcut that pins the dependent
cell once its determinant combination has been seen.

Optional extras: a per-column MCMC pass that re-draws ``m`` random cells
conditioned on all other filled cells, and an accept-reject variant that
draws single values and accepts them with probability ``exp(-sum w*vio)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import CompiledDC, DenialConstraint, partition_by_sequence
from .data import Dataset, RandomSource, Schema
from .errors import InsufficientAttributes
from .model import (
    NoisyHistogram,
    ProbModel,
    SubModel,
    is_numeric_unit,
    split_unit_codes,
    unit_key,
)

_LOG_FLOOR = -1e30


@dataclass
class CellDistribution:
    """Scored candidates for one cell.

    ``values``: candidate codes (categorical) or reals (numerical);
    ``base_probs``: model probabilities before the constraint penalty;
    ``violations``: per active constraint, per candidate violation counts;
    ``probs``: the normalized penalized distribution actually sampled,
    all-zero when every candidate is excluded (``fallback`` then names the
    index the sampler will take).
    """

    attr: str
    values: np.ndarray
    base_probs: np.ndarray
    violations: dict[str, np.ndarray]
    probs: np.ndarray
    fallback: int | None = None

    def sample_index(self, u: float) -> int:
        if self.fallback is not None:
            return self.fallback
        cum = np.cumsum(self.probs)
        return int(np.searchsorted(cum, u * cum[-1], side="right").clip(0, len(self.probs) - 1))


def _finalize(attr, values, base_probs, violations, weights) -> CellDistribution:
    with np.errstate(divide="ignore"):
        logits = np.log(np.maximum(base_probs, 0.0))
    total_vio = np.zeros(len(values))
    for dc_id, vio in violations.items():
        w = weights[dc_id]
        total_vio += vio
        pen = np.zeros(len(values))
        nz = vio > 0
        if math.isinf(w):
            pen[nz] = -math.inf
        else:
            pen[nz] = -w * vio[nz]
        logits = logits + pen
    finite = np.isfinite(logits)
    if not finite.any():
        order = np.lexsort((-base_probs, total_vio))
        return CellDistribution(attr, values, base_probs, violations, np.zeros(len(values)), int(order[0]))
    shifted = logits - logits[finite].max()
    probs = np.where(finite, np.exp(np.maximum(shifted, _LOG_FLOOR)), 0.0)
    s = probs.sum()
    if s <= 0.0:
        order = np.lexsort((-base_probs, total_vio))
        return CellDistribution(attr, values, base_probs, violations, np.zeros(len(values)), int(order[0]))
    return CellDistribution(attr, values, base_probs, violations, probs / s, None)


def score_candidates(
    attr: str,
    values: np.ndarray,
    base_probs: np.ndarray,
    violations: dict[str, np.ndarray],
    weights: dict[str, float],
) -> CellDistribution:
    """Combine base probabilities with violation penalties for one cell."""
    return _finalize(attr, np.asarray(values), np.asarray(base_probs, dtype=np.float64),
                     {k: np.asarray(v) for k, v in violations.items()}, weights)


@dataclass
class PartialInstance:
    """Mutable fill state: one value array per attribute, plus bookkeeping."""

    schema: Schema
    n: int
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    filled: list[str] = field(default_factory=list)

    def start_column(self, attr: str) -> None:
        spec = self.schema[attr]
        dtype = np.float64 if spec.is_numerical else np.int64
        self.columns[attr] = np.zeros(self.n, dtype=dtype)
        self.filled.append(attr)

    def to_dataset(self) -> Dataset:
        return Dataset(self.schema, dict(self.columns))


class _DCScorer:
    """Candidate violation counts for one constraint at one column."""

    def __init__(self, dc: DenialConstraint, schema: Schema, target_attr: str):
        self.dc = dc
        self.comp = CompiledDC(dc, schema)
        self.target = target_attr

    def counts(self, cand: np.ndarray, row_ctx: dict, columns: dict, sel) -> np.ndarray:
        """Violations per candidate against the selected earlier rows.

        ``row_ctx`` holds the filled values of the row being sampled,
        ``columns`` the filled columns, and ``sel`` a slice or index array
        choosing which rows count as the prefix.
        """
        c = len(cand)
        if self.dc.arity == 1:

            def acc_row(attr):
                if attr == self.target:
                    return cand
                if attr not in row_ctx:
                    raise InsufficientAttributes(attr)
                return row_ctx[attr]

            sat = np.broadcast_to(np.asarray(self.comp.satisfied(acc_row)), (c,))
            return sat.astype(np.int64)

        def acc_cand(attr):
            if attr == self.target:
                return cand.reshape(c, 1)
            if attr not in row_ctx:
                raise InsufficientAttributes(attr)
            return row_ctx[attr]

        def acc_prefix(attr):
            if attr not in columns:
                raise InsufficientAttributes(attr)
            return columns[attr][sel].reshape(1, -1)

        p = columns[next(iter(columns))][sel].shape[0] if columns else 0
        if p == 0:
            return np.zeros(c, dtype=np.int64)
        m1 = np.broadcast_to(np.asarray(self.comp.satisfied(acc_cand, acc_prefix)), (c, p))
        m2 = np.broadcast_to(np.asarray(self.comp.satisfied(acc_prefix, acc_cand)), (c, p))
        return (m1 | m2).sum(axis=1).astype(np.int64)


class _FDShortcut:
    """Determinant-combination -> pinned dependent code map for a hard FD."""

    def __init__(self, dc: DenialConstraint, lhs: tuple[str, ...], rhs: str):
        self.dc = dc
        self.lhs = lhs
        self.rhs = rhs
        self.map: dict[tuple, int] = {}

    def rebuild(self, columns: dict, n_filled: int, skip: int | None = None) -> None:
        self.map.clear()
        cols = [columns[a] for a in self.lhs]
        rhs_col = columns[self.rhs]
        for i in range(n_filled):
            if skip is not None and i == skip:
                continue
            key = tuple(int(c[i]) for c in cols)
            self.map.setdefault(key, int(rhs_col[i]))

    def record(self, columns: dict, i: int) -> None:
        key = tuple(int(columns[a][i]) for a in self.lhs)
        self.map.setdefault(key, int(columns[self.rhs][i]))

    def pinned(self, row_ctx: dict) -> int | None:
        key = tuple(int(row_ctx[a]) for a in self.lhs)
        return self.map.get(key)


def _hard_fd_shortcuts(dcs, target_attr: str, use_fast_path: bool) -> list[_FDShortcut]:
    if not use_fast_path:
        return []
    from .constraints import extract_fds

    out = []
    for dc in dcs:
        if not dc.hard:
            continue
        fds = extract_fds([dc])
        if len(fds) != 1:
            continue
        lhs, rhs = fds[0]
        if rhs == target_attr:
            out.append(_FDShortcut(dc, tuple(sorted(lhs)), rhs))
    return out


class _ColumnSampler:
    """Everything needed to fill or re-fill cells of one position."""

    def __init__(
        self,
        model: ProbModel,
        j: int,
        dcs_by_id: dict,
        weights: dict,
        use_fast_path: bool,
        n_candidates: int = 32,
    ):
        self.model = model
        self.schema = model.schema
        self.j = j
        self.unit = model.seq.positions()[j]
        self.column = model.columns[j]
        self.weights = weights
        self.n_candidates = n_candidates
        active_ids: list[str] = []
        partition = partition_by_sequence(dcs_by_id.values(), list(model.seq.order))
        for attr in self.unit:
            active_ids.extend(partition.get(attr, []))
        self.active = [dcs_by_id[i] for i in active_ids]
        self.target_attr = self.unit[0] if len(self.unit) == 1 else None
        if self.target_attr is None and self.active:
            raise ValueError(f"hyper position {self.unit} may not carry constraints")
        self.scorers = (
            [_DCScorer(dc, self.schema, self.target_attr) for dc in self.active]
            if self.target_attr
            else []
        )
        self.shortcuts = (
            _hard_fd_shortcuts(self.active, self.target_attr, use_fast_path)
            if self.target_attr
            else []
        )
        self.is_numeric = is_numeric_unit(self.schema, self.unit)
        self.spec = self.schema[self.unit[0]] if len(self.unit) == 1 else None

    # -- base distributions -------------------------------------------------

    def base_all_rows(self, partial: PartialInstance, n: int):
        """Model conditionals for every row: probs matrix, or (mu, sigma)."""
        if isinstance(self.column, NoisyHistogram):
            if self.is_numeric:
                return None  # handled with bin probabilities
            return np.broadcast_to(self.column.probs, (n, len(self.column.probs)))
        sub: SubModel = self.column
        raw = {}
        for unit in sub.context:
            for name in unit:
                raw[name] = partial.columns[name]
        return sub.predict_arrays(raw, n)

    def hist_bin_probs(self) -> np.ndarray:
        return self.column.probs

    # -- candidate construction ----------------------------------------------

    def candidates_for_row(self, base_row, gen, n_candidates: int):
        """Candidate values plus their base probabilities for one cell."""
        if isinstance(self.column, NoisyHistogram):
            if self.is_numeric:
                spec = self.spec
                width = (spec.hi - spec.lo) / spec.bins
                offsets = gen.random(spec.bins)
                values = spec.lo + (np.arange(spec.bins) + offsets) * width
                return values, self.column.probs
            return np.arange(len(self.column.probs)), self.column.probs
        if self.is_numeric:
            mu, sigma = base_row
            sigma = max(float(sigma), 1e-9)
            draws = mu + sigma * gen.standard_normal(n_candidates)
            values = np.clip(draws, self.spec.lo, self.spec.hi)
            logw = -((values - mu) ** 2) / (2.0 * sigma * sigma)
            w = np.exp(logw - logw.max())
            return values, w / w.sum()
        return np.arange(len(base_row)), base_row

    # -- scoring --------------------------------------------------------------

    def distribution(self, cand, base_probs, row_ctx, columns, sel) -> CellDistribution:
        violations: dict[str, np.ndarray] = {}
        pinned_masks = []
        shortcut_ids = set()
        for sc in self.shortcuts:
            pin = sc.pinned(row_ctx)
            if pin is not None:
                mask = cand != pin
                vio = np.zeros(len(cand), dtype=np.int64)
                vio[mask] = 1
                violations[sc.dc.id] = vio
                shortcut_ids.add(sc.dc.id)
                pinned_masks.append(mask)
        for scorer in self.scorers:
            if scorer.dc.id in shortcut_ids:
                continue
            violations[scorer.dc.id] = scorer.counts(cand, row_ctx, columns, sel)
        return _finalize(self.target_attr or unit_key(self.unit), cand, base_probs, violations, self.weights)


def _row_context(partial: PartialInstance, i: int) -> dict:
    return {a: partial.columns[a][i] for a in partial.filled}


def _fill_plain(colsampler: _ColumnSampler, partial: PartialInstance, n: int, rng: RandomSource):
    """Vectorized fill for positions with no active constraints."""
    gen = rng.generator
    unit = colsampler.unit
    col = colsampler.column
    if isinstance(col, NoisyHistogram):
        cum = np.cumsum(col.probs)
        codes = np.searchsorted(cum, gen.random(n) * cum[-1], side="right").clip(0, len(col.probs) - 1)
        _write_codes(colsampler, partial, np.arange(n), codes, gen)
        return
    sub: SubModel = col
    base = colsampler.base_all_rows(partial, n)
    if colsampler.is_numeric:
        mu, sigma = base
        sigma = np.maximum(sigma, 1e-9)
        d = max(1, colsampler.n_candidates)
        draws = mu[:, None] + sigma[:, None] * gen.standard_normal((n, d))
        values = np.clip(draws, colsampler.spec.lo, colsampler.spec.hi)
        logw = -((values - mu[:, None]) ** 2) / (2.0 * sigma[:, None] ** 2)
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        cum = np.cumsum(w, axis=1)
        u = gen.random(n) * cum[:, -1]
        pick = (u[:, None] > cum).sum(axis=1).clip(0, d - 1)
        partial.columns[unit[0]][:] = values[np.arange(n), pick]
        return
    cum = np.cumsum(base, axis=1)
    u = gen.random(n) * cum[:, -1]
    codes = (u[:, None] > cum).sum(axis=1).clip(0, base.shape[1] - 1)
    _write_codes(colsampler, partial, np.arange(n), codes, gen)


def _write_codes(colsampler: _ColumnSampler, partial: PartialInstance, rows, codes, gen) -> None:
    """Store sampled codes, expanding hyper units and unquantizing bins."""
    unit = colsampler.unit
    schema = colsampler.schema
    if len(unit) == 1:
        spec = schema[unit[0]]
        if spec.is_numerical:
            width = (spec.hi - spec.lo) / spec.bins
            offs = gen.random(len(np.atleast_1d(rows)))
            partial.columns[unit[0]][rows] = spec.lo + (codes + offs) * width
        else:
            partial.columns[unit[0]][rows] = codes
        return
    parts = split_unit_codes(schema, unit, np.atleast_1d(codes))
    for name in unit:
        partial.columns[name][rows] = parts[name]


def synthesize(
    model: ProbModel,
    dcs: list[DenialConstraint],
    weights: dict[str, float],
    n: int,
    m: int,
    rng: RandomSource,
    n_candidates: int = 32,
    use_fd_fast_path: bool = True,
) -> Dataset:
    """Sample a full instance of ``n`` rows from the chain model.

    ``m`` > 0 re-draws that many random cells of each column after it is
    filled, conditioning on all other filled cells. ``use_fd_fast_path``
    toggles the hard-FD shortcut; it changes nothing but speed.
    """
    dcs_by_id = {dc.id: dc for dc in dcs}
    partial = PartialInstance(schema=model.schema, n=n)
    positions = model.seq.positions()
    for j, unit in enumerate(positions):
        colsampler = _ColumnSampler(model, j, dcs_by_id, weights, use_fd_fast_path, n_candidates)
        for attr in unit:
            partial.start_column(attr)
        col_rng = rng.child(f"col-{j}")
        if not colsampler.active:
            _fill_plain(colsampler, partial, n, col_rng)
        else:
            _fill_constrained(colsampler, partial, n, col_rng)
        if m > 0:
            _mcmc_pass(colsampler, partial, n, m, rng.child(f"mcmc-{j}"))
    return partial.to_dataset()


def _fill_constrained(colsampler: _ColumnSampler, partial: PartialInstance, n: int, rng: RandomSource):
    gen = rng.generator
    attr = colsampler.target_attr
    base_all = colsampler.base_all_rows(partial, n)
    for sc in colsampler.shortcuts:
        sc.map.clear()
    for i in range(n):
        if isinstance(colsampler.column, NoisyHistogram):
            base_row = None
        elif colsampler.is_numeric:
            base_row = (base_all[0][i], base_all[1][i])
        else:
            base_row = base_all[i]
        cand, base_probs = colsampler.candidates_for_row(base_row, gen, colsampler.n_candidates)
        row_ctx = _row_context(partial, i)
        dist = colsampler.distribution(cand, base_probs, row_ctx, partial.columns, slice(0, i))
        pick = dist.sample_index(gen.random())
        value = dist.values[pick]
        if colsampler.is_numeric:
            partial.columns[attr][i] = float(value)
        else:
            partial.columns[attr][i] = int(value)
        for sc in colsampler.shortcuts:
            sc.record(partial.columns, i)


def _mcmc_pass(colsampler: _ColumnSampler, partial: PartialInstance, n: int, m: int, rng: RandomSource):
    """Re-draw m random cells of the current column given all other cells."""
    gen = rng.generator
    attr_list = colsampler.unit
    base_all = colsampler.base_all_rows(partial, n)
    for _ in range(m):
        r = int(gen.integers(0, n))
        others = np.concatenate([np.arange(0, r), np.arange(r + 1, n)])
        if colsampler.target_attr is None or not colsampler.active:
            # unconstrained position: plain conditional re-draw
            if isinstance(colsampler.column, NoisyHistogram) and not colsampler.is_numeric:
                probs = colsampler.column.probs
                cum = np.cumsum(probs)
                code = int(np.searchsorted(cum, gen.random() * cum[-1], side="right").clip(0, len(probs) - 1))
                _write_codes(colsampler, partial, np.asarray([r]), np.asarray([code]), gen)
                continue
            if isinstance(colsampler.column, NoisyHistogram):
                base_row = None
            elif colsampler.is_numeric:
                base_row = (base_all[0][r], base_all[1][r])
            else:
                base_row = base_all[r]
            cand, base_probs = colsampler.candidates_for_row(base_row, gen, colsampler.n_candidates)
            dist = _finalize(unit_key(colsampler.unit), cand, base_probs, {}, colsampler.weights)
            pick = dist.sample_index(gen.random())
            if len(colsampler.unit) == 1 and colsampler.is_numeric:
                partial.columns[colsampler.unit[0]][r] = float(dist.values[pick])
            else:
                _write_codes(colsampler, partial, np.asarray([r]), np.asarray([int(dist.values[pick])]), gen)
            continue
        attr = colsampler.target_attr
        if isinstance(colsampler.column, NoisyHistogram):
            base_row = None
        elif colsampler.is_numeric:
            base_row = (base_all[0][r], base_all[1][r])
        else:
            base_row = base_all[r]
        cand, base_probs = colsampler.candidates_for_row(base_row, gen, colsampler.n_candidates)
        row_ctx = {a: partial.columns[a][r] for a in partial.filled if a != attr}
        for sc in colsampler.shortcuts:
            sc.rebuild(partial.columns, n, skip=r)
        dist = colsampler.distribution(cand, base_probs, row_ctx, partial.columns, others)
        pick = dist.sample_index(gen.random())
        value = dist.values[pick]
        partial.columns[attr][r] = float(value) if colsampler.is_numeric else int(value)
    for sc in colsampler.shortcuts:
        sc.rebuild(partial.columns, n)


def cell_distribution(
    model: ProbModel,
    partial: PartialInstance,
    i: int,
    j: int,
    dcs: list[DenialConstraint],
    weights: dict[str, float],
    rng: RandomSource,
    n_candidates: int = 32,
    prefix_rows=None,
) -> CellDistribution:
    """Scored candidate distribution for cell (row ``i``, position ``j``),
    both 1-based. ``prefix_rows`` defaults to the rows before ``i``; pass
    an index array to condition on a different set (the MCMC case)."""
    dcs_by_id = {dc.id: dc for dc in dcs}
    colsampler = _ColumnSampler(model, j - 1, dcs_by_id, weights, False, n_candidates)
    gen = rng.generator
    n = partial.n
    if isinstance(colsampler.column, NoisyHistogram):
        base_row = None
    else:
        sub: SubModel = colsampler.column
        raw = {}
        for unit in sub.context:
            for name in unit:
                raw[name] = np.asarray([partial.columns[name][i - 1]])
        out = sub.predict_arrays(raw, 1)
        base_row = (float(out[0][0]), float(out[1][0])) if colsampler.is_numeric else out[0]
    cand, base_probs = colsampler.candidates_for_row(base_row, gen, n_candidates)
    row_ctx = {a: partial.columns[a][i - 1] for a in partial.filled if a != colsampler.target_attr}
    sel = slice(0, i - 1) if prefix_rows is None else prefix_rows
    return colsampler.distribution(cand, base_probs, row_ctx, partial.columns, sel)


def sample_cell(dist: CellDistribution, rng: RandomSource):
    return dist.values[dist.sample_index(rng.generator.random())]


def synthesize_accept_reject(
    model: ProbModel,
    dcs: list[DenialConstraint],
    weights: dict[str, float],
    n: int,
    rng: RandomSource,
    max_tries: int = 300,
) -> Dataset:
    """Accept-reject variant: draw one value at a time and accept it with
    probability ``exp(-sum w*vio)``; after ``max_tries`` rejected draws the
    last one is kept, so hard constraints can end up violated."""
    dcs_by_id = {dc.id: dc for dc in dcs}
    partial = PartialInstance(schema=model.schema, n=n)
    positions = model.seq.positions()
    for j, unit in enumerate(positions):
        colsampler = _ColumnSampler(model, j, dcs_by_id, weights, use_fast_path=False)
        for attr in unit:
            partial.start_column(attr)
        col_rng = rng.child(f"col-{j}-ar")
        if not colsampler.active:
            _fill_plain(colsampler, partial, n, col_rng)
            continue
        gen = col_rng.generator
        attr = colsampler.target_attr
        base_all = colsampler.base_all_rows(partial, n)
        spec = colsampler.spec
        for i in range(n):
            row_ctx = _row_context(partial, i)
            accepted_value = None
            last_value = None
            for _ in range(max_tries):
                if isinstance(colsampler.column, NoisyHistogram):
                    probs = colsampler.column.probs
                    cum = np.cumsum(probs)
                    code = int(np.searchsorted(cum, gen.random() * cum[-1], side="right").clip(0, len(probs) - 1))
                    if spec.is_numerical:
                        width = (spec.hi - spec.lo) / spec.bins
                        value = spec.lo + (code + gen.random()) * width
                    else:
                        value = code
                elif colsampler.is_numeric:
                    mu, sigma = base_all[0][i], max(float(base_all[1][i]), 1e-9)
                    value = float(np.clip(mu + sigma * gen.standard_normal(), spec.lo, spec.hi))
                else:
                    probs = base_all[i]
                    cum = np.cumsum(probs)
                    value = int(np.searchsorted(cum, gen.random() * cum[-1], side="right").clip(0, len(probs) - 1))
                last_value = value
                numeric_cell = colsampler.is_numeric or (
                    isinstance(colsampler.column, NoisyHistogram) and spec.is_numerical
                )
                cand = np.asarray([value], dtype=np.float64 if numeric_cell else np.int64)
                pen = 0.0
                for scorer in colsampler.scorers:
                    vio = scorer.counts(cand, row_ctx, partial.columns, slice(0, i))
                    if vio[0] > 0:
                        w = weights[scorer.dc.id]
                        pen += -math.inf if math.isinf(w) else -w * float(vio[0])
                p_accept = math.exp(pen) if pen > -700.0 else 0.0
                if pen == 0.0 or gen.random() < p_accept:
                    accepted_value = value
                    break
            value = accepted_value if accepted_value is not None else last_value
            partial.columns[attr][i] = value
    return partial.to_dataset()
