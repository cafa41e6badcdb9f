"""Private estimation of soft-constraint weights.

A small Bernoulli sample of rows is turned into a violation matrix (per
sampled row, per soft constraint: how many violations the row forms with
the rest of the sample). The matrix is released once under Gaussian noise
scaled by its L2 sensitivity and floored at zero; everything after that is
post-processing and never touches the private data again.

Weights start at ``w_max`` ("hard until proven soft") and are pulled down
by gradient ascent on ``exp(-sum_l W[l] V[i][l])``, whose gradient in every
weight is non-positive. Rows with no recorded violations therefore leave
the weights untouched, and heavily violated constraints end up with the
smallest weights. Hard constraints never enter this module; their weight
stays infinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constraints import DenialConstraint, violation_counts_per_row
from .data import Dataset, RandomSource
from .errors import UnsupportedArity


@dataclass
class ViolationMatrix:
    """Noisy per-row, per-constraint violation counts over a row sample."""

    dc_ids: list[str]
    values: np.ndarray  # (rows, len(dc_ids)), floored at 0
    sample_size: int


def sensitivity(dcs, sample_size: int) -> float:
    """L2 sensitivity of the violation matrix for unary/binary constraints.

    Changing one sampled row moves its own row of the matrix by up to
    ``L - 1`` per binary constraint and every other row by up to 1, and by
    1 per unary constraint, giving
    ``n_unary + n_binary * sqrt(L^2 - L)``.
    """
    n_unary = n_binary = 0
    for dc in dcs:
        if dc.arity == 1:
            n_unary += 1
        elif dc.arity == 2:
            n_binary += 1
        else:
            raise UnsupportedArity(dc.id)
    L = sample_size
    return n_unary + n_binary * math.sqrt(max(L * L - L, 0))


def build_noisy_matrix(
    data: Dataset,
    dcs: list[DenialConstraint],
    sample_size: int,
    sigma_w: float,
    sens_w: float,
    rng: RandomSource,
) -> ViolationMatrix:
    """Sample rows at rate ``sample_size / n``, count exact violations
    within the sample, add ``N(0, sens_w^2 sigma_w^2)`` per entry, floor
    at zero."""
    gen = rng.generator
    n = data.n
    rate = min(1.0, sample_size / n)
    mask = gen.random(n) < rate
    idx = np.nonzero(mask)[0]
    if idx.size > sample_size:
        keep = gen.choice(idx.size, size=sample_size, replace=False)
        idx = idx[np.sort(keep)]
    sample = data.take(idx)
    cols = []
    for dc in dcs:
        cols.append(violation_counts_per_row(dc, sample).astype(np.float64))
    values = np.stack(cols, axis=1) if cols else np.zeros((sample.n, 0))
    if sigma_w > 0 and values.size:
        values = values + gen.normal(0.0, sens_w * sigma_w, values.shape)
    values = np.maximum(values, 0.0)
    return ViolationMatrix(dc_ids=[dc.id for dc in dcs], values=values, sample_size=sample.n)


def learn_weights(
    matrix: ViolationMatrix,
    dcs: list[DenialConstraint],
    order: list[str],
    iters_w: int,
    batch_w: int,
    lr_w: float,
    rng: RandomSource,
    w_max: float = 10.0,
) -> dict[str, float]:
    """Post-process the noisy matrix into per-constraint weights.

    Iterates the schema order; at each attribute only the constraints
    whose coverage completes there are updated, using rows sampled at rate
    ``batch_w / L`` per iteration. Weights are clamped to ``[0, w_max]``.
    """
    from .constraints import partition_by_sequence

    gen = rng.generator
    col_of = {dc_id: j for j, dc_id in enumerate(matrix.dc_ids)}
    weights = np.full(len(matrix.dc_ids), w_max, dtype=np.float64)
    L = matrix.values.shape[0]
    partition = partition_by_sequence(dcs, order)
    for attr in order:
        active = [col_of[dc_id] for dc_id in partition.get(attr, []) if dc_id in col_of]
        if not active:
            continue
        cols = np.asarray(active)
        for _ in range(iters_w):
            if L == 0:
                break
            mask = gen.random(L) < min(1.0, batch_w / L)
            for i in np.nonzero(mask)[0]:
                v = matrix.values[i, cols]
                objective = math.exp(-float(weights[cols] @ v))
                weights[cols] += lr_w * (-v * objective)
                np.clip(weights, 0.0, w_max, out=weights)
    return {dc_id: float(weights[j]) for dc_id, j in col_of.items()}


def resolve_weights(dcs, learned: dict[str, float] | None = None) -> dict[str, float]:
    """Final weight per constraint: hard -> inf, pinned soft -> its value,
    otherwise the learned value (required)."""
    out: dict[str, float] = {}
    for dc in dcs:
        if dc.hard:
            out[dc.id] = math.inf
        elif dc.weight is not None:
            out[dc.id] = float(dc.weight)
        else:
            if learned is None or dc.id not in learned:
                raise KeyError(f"no weight for soft constraint {dc.id!r}")
            out[dc.id] = learned[dc.id]
    return out
