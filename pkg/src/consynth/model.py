"""Private chain model: noisy histogram plus discriminative sub-models.

The joint tuple distribution is factorized along the schema sequence. The
first position gets a Gaussian-noised histogram; every later position gets
a discriminative sub-model predicting it from all earlier positions, and
positions flagged as fallback get histograms of their own.

A sub-model embeds each context position into ``embed_dim`` reals
(lookup table for categorical and hyper positions, a small learned
scalar->vector transform for numerical ones), mixes the embeddings into a
context vector with single-head dot-product attention, and decodes with a
softmax head (categorical target, logits tied to the target's embedding
table) or a Gaussian head emitting (mu, log sigma).

Training is differentially private gradient descent: per iteration, rows
enter the batch independently with probability ``batch/n``; per-example
gradients are clipped to L2 norm ``clip``; the clipped sum gets
``N(0, sigma_d^2 clip^2)`` per coordinate and is divided by ``batch``
before the plain SGD step. Per-example gradients are never materialized
as dense tables; their norms are assembled from the factored forms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .accounting import PrivacyConfig
from .data import Dataset, RandomSource, Schema, quantize_column
from .errors import EmptyContext, UnknownContextValue
from .sequencing import SchemaSequence

Unit = tuple[str, ...]


def unit_key(unit: Unit) -> str:
    return "|".join(unit)


def unit_size(schema: Schema, unit: Unit) -> int:
    size = 1
    for name in unit:
        size *= schema[name].size
    return size


def is_numeric_unit(schema: Schema, unit: Unit) -> bool:
    return len(unit) == 1 and schema[unit[0]].is_numerical


def encode_unit_column(schema: Schema, unit: Unit, data: Dataset) -> np.ndarray:
    """Codes for categorical/hyper units, raw floats for numerical ones."""
    if is_numeric_unit(schema, unit):
        return data.column(unit[0]).astype(np.float64)
    codes = np.zeros(data.n, dtype=np.int64)
    for name in unit:
        spec = schema[name]
        col = quantize_column(data.column(name), spec) if spec.is_numerical else data.column(name)
        codes = codes * spec.size + col
    return codes


def split_unit_codes(schema: Schema, unit: Unit, codes: np.ndarray) -> dict[str, np.ndarray]:
    """Invert :func:`encode_unit_column` for categorical/hyper units."""
    out: dict[str, np.ndarray] = {}
    rest = codes.copy()
    for name in reversed(unit):
        size = schema[name].size
        out[name] = rest % size
        rest = rest // size
    return out


def standardize(spec, values: np.ndarray) -> np.ndarray:
    mid = 0.5 * (spec.lo + spec.hi)
    half = 0.5 * (spec.hi - spec.lo)
    return (np.asarray(values, dtype=np.float64) - mid) / half


def unstandardize_gaussian(spec, mu: np.ndarray, sigma: np.ndarray):
    half = 0.5 * (spec.hi - spec.lo)
    mid = 0.5 * (spec.lo + spec.hi)
    return mid + half * mu, half * sigma


# ---------------------------------------------------------------------------
# Histograms
# ---------------------------------------------------------------------------


@dataclass
class NoisyHistogram:
    """Noised counts over a unit's (product) domain, floored and normalized."""

    unit: Unit
    counts: np.ndarray
    probs: np.ndarray

    def to_dict(self) -> dict:
        return {"unit": list(self.unit), "counts": self.counts.tolist(), "probs": self.probs.tolist()}

    @staticmethod
    def from_dict(obj: dict) -> "NoisyHistogram":
        return NoisyHistogram(
            unit=tuple(obj["unit"]),
            counts=np.asarray(obj["counts"], dtype=np.float64),
            probs=np.asarray(obj["probs"], dtype=np.float64),
        )


def fit_histogram(data: Dataset, unit: Unit, sigma_g: float, rng: RandomSource) -> NoisyHistogram:
    size = unit_size(data.schema, unit)
    if is_numeric_unit(data.schema, unit):
        codes = quantize_column(data.column(unit[0]), data.schema[unit[0]])
    else:
        codes = encode_unit_column(data.schema, unit, data)
    counts = np.bincount(codes, minlength=size).astype(np.float64)
    if sigma_g > 0:
        counts = counts + rng.generator.normal(0.0, math.sqrt(2.0) * sigma_g, size)
    counts = np.maximum(counts, 0.0)
    total = counts.sum()
    probs = counts / total if total > 0 else np.full(size, 1.0 / size)
    return NoisyHistogram(unit=unit, counts=counts, probs=probs)


def fit_first_attribute(
    data: Dataset, seq: SchemaSequence, sigma_g: float, rng: RandomSource
) -> NoisyHistogram:
    """Noisy histogram for the first position of the sequence."""
    return fit_histogram(data, seq.positions()[0], sigma_g, rng)


# ---------------------------------------------------------------------------
# Parameter store
# ---------------------------------------------------------------------------


class ParamStore:
    """Mutable bag of named parameter blocks shared across sub-models."""

    def __init__(self):
        self.blocks: dict[str, np.ndarray] = {}

    def init_unit(self, schema: Schema, unit: Unit, dim: int, rng: RandomSource) -> None:
        key = unit_key(unit)
        gen = rng.generator
        if is_numeric_unit(schema, unit):
            if f"num_A::{key}" in self.blocks:
                return
            self.blocks[f"num_A::{key}"] = gen.normal(0.0, 1.0, dim)
            self.blocks[f"num_c::{key}"] = gen.normal(0.0, 0.5, dim)
            self.blocks[f"num_B::{key}"] = gen.normal(0.0, math.sqrt(2.0) / dim, (dim, dim))
            self.blocks[f"num_d::{key}"] = gen.normal(0.0, 1.0 / math.sqrt(dim), dim)
        else:
            if f"emb::{key}" in self.blocks:
                return
            size = unit_size(schema, unit)
            self.blocks[f"emb::{key}"] = gen.normal(0.0, 1.0 / math.sqrt(dim), (size, dim))

    def snapshot(self, keys) -> dict[str, np.ndarray]:
        return {k: self.blocks[k].copy() for k in keys}


def _unit_block_keys(schema: Schema, unit: Unit) -> list[str]:
    key = unit_key(unit)
    if is_numeric_unit(schema, unit):
        return [f"num_A::{key}", f"num_c::{key}", f"num_B::{key}", f"num_d::{key}"]
    return [f"emb::{key}"]


# ---------------------------------------------------------------------------
# Sub-model
# ---------------------------------------------------------------------------


@dataclass
class TrainingDiagnostics:
    noise_draws: int = 0
    rows_touched: int = 0
    max_postclip_norm: float = 0.0
    iterations: int = 0


@dataclass
class SubModel:
    """Discriminative model for one target position given earlier positions."""

    schema: Schema
    context: tuple[Unit, ...]
    target: Unit
    dim: int
    params: dict[str, np.ndarray]
    head: str  # "softmax" or "gaussian"
    diagnostics: TrainingDiagnostics = field(default_factory=TrainingDiagnostics)

    @property
    def query_key(self) -> str:
        return f"query::{unit_key(self.target)}"

    def context_arrays(self, raw: dict[str, np.ndarray], m: int) -> list[np.ndarray]:
        """Per-unit encoded arrays from per-attribute raw columns."""
        out = []
        for unit in self.context:
            if is_numeric_unit(self.schema, unit):
                spec = self.schema[unit[0]]
                out.append(standardize(spec, np.broadcast_to(raw[unit[0]], (m,))))
            else:
                codes = np.zeros(m, dtype=np.int64)
                for name in unit:
                    spec = self.schema[name]
                    col = np.broadcast_to(np.asarray(raw[name]), (m,))
                    if spec.is_numerical:
                        col = quantize_column(col.astype(np.float64), spec)
                    else:
                        col = col.astype(np.int64)
                        if np.any((col < 0) | (col >= spec.size)):
                            raise UnknownContextValue(name)
                    codes = codes * spec.size + col
                out.append(codes)
        return out

    # -- forward ---------------------------------------------------------

    def _embed(self, params, ctx_arrays):
        m = len(ctx_arrays[0])
        p = len(self.context)
        Z = np.empty((m, p, self.dim))
        caches = []
        for l, unit in enumerate(self.context):
            key = unit_key(unit)
            if is_numeric_unit(self.schema, unit):
                x = ctx_arrays[l]
                pre = np.outer(x, params[f"num_A::{key}"]) + params[f"num_c::{key}"]
                hid = np.maximum(pre, 0.0)
                Z[:, l, :] = hid @ params[f"num_B::{key}"].T + params[f"num_d::{key}"]
                caches.append(("num", x, pre, hid))
            else:
                idx = ctx_arrays[l]
                Z[:, l, :] = params[f"emb::{key}"][idx]
                caches.append(("cat", idx))
        return Z, caches

    def _attend(self, params, Z):
        u = params[self.query_key]
        scores = Z @ u / math.sqrt(self.dim)
        scores = scores - scores.max(axis=1, keepdims=True)
        att = np.exp(scores)
        att /= att.sum(axis=1, keepdims=True)
        ctx = np.einsum("mp,mpd->md", att, Z)
        return ctx, att

    def forward(self, params, ctx_arrays):
        Z, caches = self._embed(params, ctx_arrays)
        ctx, att = self._attend(params, Z)
        return ctx, (Z, caches, att)

    def predict_arrays(self, raw: dict[str, np.ndarray], m: int):
        """Batch prediction: softmax probabilities or (mu, sigma) arrays."""
        ctx_arrays = self.context_arrays(raw, m)
        ctx, _ = self.forward(self.params, ctx_arrays)
        if self.head == "softmax":
            logits = ctx @ self.params[f"emb::{unit_key(self.target)}"].T + self.params["bias"]
            logits -= logits.max(axis=1, keepdims=True)
            probs = np.exp(logits)
            probs /= probs.sum(axis=1, keepdims=True)
            return probs
        mu = ctx @ self.params["w_mu"] + self.params["b_mu"]
        # clamp keeps a degenerate head from overflowing the exponential
        sigma = np.exp(np.clip(ctx @ self.params["w_ls"] + self.params["b_ls"], -30.0, 30.0))
        spec = self.schema[self.target[0]]
        return unstandardize_gaussian(spec, mu, sigma)

    # -- loss and per-example gradients -----------------------------------

    def loss_and_grads(self, params, ctx_arrays, target):
        """Per-example losses plus gradients in factored per-example form.

        Returns ``(losses, grads, sq_norms)`` where ``grads`` maps block
        name to a factored representation (see ``accumulate``) and
        ``sq_norms`` is the per-example squared L2 norm of the full
        gradient across all blocks.
        """
        m = len(target)
        Z, caches, ctx, att = None, None, None, None
        Z, caches = self._embed(params, ctx_arrays)
        ctx, att = self._attend(params, Z)

        grads: dict[str, tuple] = {}
        sq = np.zeros(m)

        if self.head == "softmax":
            table = params[f"emb::{unit_key(self.target)}"]
            logits = ctx @ table.T + params["bias"]
            logits -= logits.max(axis=1, keepdims=True)
            probs = np.exp(logits)
            probs /= probs.sum(axis=1, keepdims=True)
            losses = -np.log(np.maximum(probs[np.arange(m), target], 1e-300))
            dlogits = probs.copy()
            dlogits[np.arange(m), target] -= 1.0
            grads["bias"] = ("dense", dlogits)
            sq += np.einsum("mv,mv->m", dlogits, dlogits)
            grads[f"emb::{unit_key(self.target)}"] = ("outer", dlogits, ctx)
            sq += np.einsum("mv,mv->m", dlogits, dlogits) * np.einsum("md,md->m", ctx, ctx)
            dctx = dlogits @ table
        else:
            t = target.astype(np.float64)
            mu = ctx @ params["w_mu"] + params["b_mu"]
            ls = ctx @ params["w_ls"] + params["b_ls"]
            z = (t - mu) * np.exp(-ls)
            losses = 0.5 * math.log(2.0 * math.pi) + ls + 0.5 * z * z
            dmu = -z * np.exp(-ls)
            dls = 1.0 - z * z
            grads["w_mu"] = ("scaled_ctx", dmu, ctx)
            grads["b_mu"] = ("dense", dmu[:, None])
            grads["w_ls"] = ("scaled_ctx", dls, ctx)
            grads["b_ls"] = ("dense", dls[:, None])
            ctx_sq = np.einsum("md,md->m", ctx, ctx)
            sq += dmu * dmu * (ctx_sq + 1.0) + dls * dls * (ctx_sq + 1.0)
            dctx = dmu[:, None] * params["w_mu"] + dls[:, None] * params["w_ls"]

        # attention backward
        da = np.einsum("md,mpd->mp", dctx, Z)
        inner = np.einsum("mp,mp->m", att, da)
        ds = att * (da - inner[:, None])
        u = params[self.query_key]
        du = np.einsum("mp,mpd->md", ds, Z) / math.sqrt(self.dim)
        grads[self.query_key] = ("dense", du)
        sq += np.einsum("md,md->m", du, du)
        dZ = att[:, :, None] * dctx[:, None, :] + ds[:, :, None] * u[None, None, :] / math.sqrt(self.dim)

        for l, unit in enumerate(self.context):
            key = unit_key(unit)
            dz = dZ[:, l, :]
            if caches[l][0] == "cat":
                idx = caches[l][1]
                grads[f"emb::{key}"] = ("scatter", idx, dz)
                sq += np.einsum("md,md->m", dz, dz)
            else:
                _, x, pre, hid = caches[l]
                dB = ("outer", dz, hid)
                grads[f"num_B::{key}"] = dB
                sq += np.einsum("md,md->m", dz, dz) * np.einsum("mh,mh->m", hid, hid)
                grads[f"num_d::{key}"] = ("dense", dz)
                sq += np.einsum("md,md->m", dz, dz)
                dpre = (dz @ params[f"num_B::{key}"]) * (pre > 0)
                grads[f"num_A::{key}"] = ("scaled_ctx", x, dpre)
                sq += x * x * np.einsum("mh,mh->m", dpre, dpre)
                grads[f"num_c::{key}"] = ("dense", dpre)
                sq += np.einsum("mh,mh->m", dpre, dpre)
        return losses, grads, sq

    def accumulate(self, shape_like: dict[str, np.ndarray], grads, weights) -> dict[str, np.ndarray]:
        """Weighted sums of factored per-example gradients into dense blocks."""
        out = {}
        for key, g in grads.items():
            kind = g[0]
            if kind == "dense":
                arr = g[1]
                total = np.einsum("m,m...->...", weights, arr)
                if shape_like[key].shape == ():
                    total = np.asarray(total).reshape(())
                elif shape_like[key].ndim == 1 and total.ndim == 2 and total.shape[0] == 1:
                    total = total[0]
                out[key] = np.asarray(total, dtype=np.float64).reshape(shape_like[key].shape)
            elif kind == "outer":
                _, left, right = g
                out[key] = np.einsum("m,mv,md->vd", weights, left, right)
            elif kind == "scaled_ctx":
                _, scale, ctx = g
                out[key] = np.einsum("m,m,md->d", weights, scale, ctx)
            elif kind == "scatter":
                _, idx, dz = g
                block = np.zeros_like(shape_like[key])
                np.add.at(block, idx, weights[:, None] * dz)
                out[key] = block
            else:
                raise ValueError(kind)
        return out

    def mean_loss(self, ctx_arrays, target) -> float:
        losses, _, _ = self.loss_and_grads(self.params, ctx_arrays, target)
        return float(losses.mean())

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "context": [list(u) for u in self.context],
            "target": list(self.target),
            "dim": self.dim,
            "head": self.head,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @staticmethod
    def from_dict(obj: dict, schema: Schema) -> "SubModel":
        return SubModel(
            schema=schema,
            context=tuple(tuple(u) for u in obj["context"]),
            target=tuple(obj["target"]),
            dim=int(obj["dim"]),
            head=obj["head"],
            params={k: np.asarray(v, dtype=np.float64) for k, v in obj["params"].items()},
        )


def _init_head(store: ParamStore, schema: Schema, target: Unit, dim: int, rng: RandomSource) -> str:
    gen = rng.generator
    key = unit_key(target)
    store.blocks.setdefault(f"query::{key}", gen.normal(0.0, 1.0, dim))
    if is_numeric_unit(schema, target):
        store.blocks.setdefault(f"w_mu::{key}", gen.normal(0.0, 1.0 / math.sqrt(dim), dim))
        store.blocks.setdefault(f"b_mu::{key}", np.zeros(()))
        store.blocks.setdefault(f"w_ls::{key}", gen.normal(0.0, 1.0 / math.sqrt(dim), dim))
        store.blocks.setdefault(f"b_ls::{key}", np.zeros(()))
        return "gaussian"
    store.init_unit(schema, target, dim, rng)
    store.blocks.setdefault(f"bias::{key}", np.zeros(unit_size(schema, target)))
    return "softmax"


def train_submodel(
    data: Dataset,
    context: list[Unit],
    target: Unit,
    psi: PrivacyConfig,
    rng: RandomSource,
    store: ParamStore | None = None,
    hooks=None,
) -> SubModel:
    """Fit one discriminative sub-model with DP gradient descent.

    ``store`` carries warm-start parameters; missing blocks are
    initialized from ``rng``. The store is updated in place so later
    sub-models can reuse the trained embeddings.
    """
    if not context:
        raise EmptyContext("use a histogram for the first position")
    schema = data.schema
    store = store if store is not None else ParamStore()
    init_rng = rng.child("init")
    for unit in context:
        store.init_unit(schema, unit, psi.embed_dim, init_rng)
    head = _init_head(store, schema, target, psi.embed_dim, init_rng)

    tkey = unit_key(target)
    block_keys = []
    for unit in context:
        block_keys.extend(_unit_block_keys(schema, unit))
    block_keys.append(f"query::{tkey}")
    if head == "softmax":
        block_keys.extend([f"emb::{tkey}", f"bias::{tkey}"])
    else:
        block_keys.extend([f"w_mu::{tkey}", f"b_mu::{tkey}", f"w_ls::{tkey}", f"b_ls::{tkey}"])

    local = {}
    alias = {}
    for k in block_keys:
        short = k
        if k.startswith("bias::"):
            short = "bias"
        elif k.startswith(("w_mu::", "b_mu::", "w_ls::", "b_ls::")):
            short = k.split("::")[0]
        local[short] = store.blocks[k]
        alias[short] = k

    model = SubModel(
        schema=schema,
        context=tuple(context),
        target=target,
        dim=psi.embed_dim,
        params=local,
        head=head,
    )

    ctx_cols = [encode_unit_column(schema, u, data) for u in context]
    ctx_arrays_full = []
    for l, unit in enumerate(context):
        if is_numeric_unit(schema, unit):
            ctx_arrays_full.append(standardize(schema[unit[0]], ctx_cols[l]))
        else:
            ctx_arrays_full.append(ctx_cols[l])
    if head == "softmax":
        target_full = encode_unit_column(schema, target, data)
    else:
        target_full = standardize(schema[target[0]], data.column(target[0]))

    n = data.n
    rate = min(1.0, psi.batch / n)
    batch_rng = rng.child("batch").generator
    noise_rng = rng.child("noise").generator
    diag = model.diagnostics

    for it in range(psi.iters):
        mask = batch_rng.random(n) < rate
        idx = np.nonzero(mask)[0]
        diag.rows_touched += int(idx.size)
        sums = {k: np.zeros_like(v) for k, v in local.items()}
        if idx.size > 0:
            ctx_batch = [arr[idx] for arr in ctx_arrays_full]
            tgt_batch = target_full[idx]
            _, grads, sq = model.loss_and_grads(local, ctx_batch, tgt_batch)
            norms = np.sqrt(np.maximum(sq, 0.0))
            if math.isfinite(psi.clip):
                weights = 1.0 / np.maximum(1.0, norms / psi.clip)
            else:
                weights = np.ones_like(norms)
            post = norms * weights
            if post.size:
                diag.max_postclip_norm = max(diag.max_postclip_norm, float(post.max()))
            if math.isfinite(psi.clip):
                assert np.all(post <= psi.clip * (1.0 + 1e-9))
            sums = model.accumulate(local, grads, weights)
            for k in local:
                sums.setdefault(k, np.zeros_like(local[k]))
        if psi.sigma_d > 0.0:
            scale = psi.sigma_d * psi.clip
            for k in local:
                sums[k] = sums[k] + noise_rng.normal(0.0, scale, local[k].shape)
            diag.noise_draws += 1
        for k in local:
            local[k] -= psi.lr * (sums[k] / psi.batch)
        diag.iterations += 1
        if hooks is not None:
            hooks(it, model)

    # publish trained blocks back under their store names
    for short, full in alias.items():
        store.blocks[full] = local[short]
    model.params = {k: v.copy() for k, v in local.items()}
    return model


# ---------------------------------------------------------------------------
# Whole chain model
# ---------------------------------------------------------------------------


@dataclass
class ProbModel:
    """Sequence-aligned chain: histograms and sub-models per position."""

    schema: Schema
    seq: SchemaSequence
    columns: list  # NoisyHistogram | SubModel per position
    diagnostics: dict = field(default_factory=dict)

    def position_units(self) -> list[Unit]:
        return self.seq.positions()

    def to_json(self) -> str:
        cols = []
        for col in self.columns:
            if isinstance(col, NoisyHistogram):
                cols.append({"type": "histogram", **col.to_dict()})
            else:
                cols.append({"type": "submodel", **col.to_dict()})
        return json.dumps(
            {
                "sequence": self.seq.to_dict(),
                "columns": cols,
                "diagnostics": self.diagnostics,
            }
        )

    @staticmethod
    def from_json(text: str, schema: Schema) -> "ProbModel":
        obj = json.loads(text)
        seq = SchemaSequence.from_dict(obj["sequence"])
        cols = []
        for entry in obj["columns"]:
            if entry["type"] == "histogram":
                cols.append(NoisyHistogram.from_dict(entry))
            else:
                cols.append(SubModel.from_dict(entry, schema))
        return ProbModel(schema=schema, seq=seq, columns=cols, diagnostics=obj.get("diagnostics", {}))


def predict(model: SubModel, context_values: dict):
    """Distribution for one context: probability vector or (mu, sigma)."""
    raw = {}
    for unit in model.context:
        for name in unit:
            spec = model.schema[name]
            v = context_values[name]
            if spec.is_numerical:
                raw[name] = np.asarray([float(v)])
            else:
                if str(v) not in spec.domain:
                    raise UnknownContextValue(f"{name}={v!r}")
                raw[name] = np.asarray([spec.domain.index(str(v))])
    out = model.predict_arrays(raw, 1)
    if model.head == "softmax":
        return out[0]
    return float(out[0][0]), float(out[1][0])


def fit_model(
    data: Dataset,
    seq: SchemaSequence,
    psi: PrivacyConfig,
    rng: RandomSource,
    parallel: bool = False,
) -> ProbModel:
    """Train the full chain along the sequence.

    Sequential mode reuses embeddings trained for earlier positions as
    warm starts; parallel mode initializes every sub-model independently
    (so they could be trained on separate workers) at a small accuracy
    cost. Positions flagged fallback get histograms instead of sub-models.
    """
    schema = data.schema
    positions = seq.positions()
    columns: list = []
    rows_touched = 0

    hist0 = fit_histogram(data, positions[0], psi.sigma_g, rng.child("hist-0"))
    columns.append(hist0)
    rows_touched += data.n

    store = ParamStore()
    if not parallel:
        store.init_unit(schema, positions[0], psi.embed_dim, rng.child("init-0"))

    def fit_position(j: int) -> tuple[int, object]:
        unit = positions[j]
        if any(a in seq.fallback for a in unit):
            return j, fit_histogram(data, unit, psi.sigma_g, rng.child(f"hist-{j}"))
        sub_rng = rng.child(f"submodel-{j}")
        if parallel:
            sub = train_submodel(data, list(positions[:j]), unit, psi, sub_rng, store=ParamStore())
        else:
            sub = train_submodel(data, list(positions[:j]), unit, psi, sub_rng, store=store)
        return j, sub

    if parallel and len(positions) > 2:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(4, len(positions) - 1)) as pool:
            results = list(pool.map(fit_position, range(1, len(positions))))
    else:
        results = [fit_position(j) for j in range(1, len(positions))]

    for j, col in sorted(results):
        columns.append(col)
        if isinstance(col, NoisyHistogram):
            rows_touched += data.n
        else:
            rows_touched += col.diagnostics.rows_touched

    noise_draws = sum(
        c.diagnostics.noise_draws for c in columns if isinstance(c, SubModel)
    )
    return ProbModel(
        schema=schema,
        seq=seq,
        columns=columns,
        diagnostics={
            "rows_touched": int(rows_touched),
            "noise_draws": int(noise_draws),
            "parallel": bool(parallel),
        },
    )
