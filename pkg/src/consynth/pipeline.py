"""End-to-end orchestration: sequence, budget, train, weigh, sample.

The stage order is fixed: attribute sequencing (no privacy cost), privacy
parameter search, model training, soft-constraint weight learning (only
when some soft constraint lacks a weight), and constraint-aware sampling.
Every run emits the synthetic CSV, the serialized model, a budget report,
a violation report, and a manifest holding the seed, the resolved
parameters and per-stage wall-clock times.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .accounting import (
    DEFAULT_ALPHA_MAX,
    BudgetReport,
    PrivacyConfig,
    SearchRanges,
    build_report,
    search_parameters,
)
from .constraints import DenialConstraint, load_dcs
from .data import Dataset, RandomSource, Schema, load_dataset, load_schema, save_dataset
from .metrics import evaluate
from .model import ProbModel, fit_model
from .sampling import synthesize, synthesize_accept_reject
from .sequencing import SchemaSequence, apply_domain_optimizations, sequence, validate_sequence
from .weights import build_noisy_matrix, learn_weights, resolve_weights, sensitivity

GROUP_MAX_BITS_DEFAULT = 8
FALLBACK_MIN_SIZE_DEFAULT = 5000


@dataclass
class RunConfig:
    """Inputs and knobs for one synthesis run."""

    data_csv: str
    schema_json: str
    dc_file: str | None
    out_dir: str
    eps: float = 1.0
    delta: float = 1e-6
    seed: int = 0
    parallel: bool = False
    accept_reject: bool = False
    m: int = 0
    max_tries: int = 300
    n_out: int | None = None
    overrides: dict = field(default_factory=dict)
    ranges: SearchRanges | None = None
    alpha_max: int = DEFAULT_ALPHA_MAX
    group_max_bits: int = GROUP_MAX_BITS_DEFAULT
    fallback_min_size: int = FALLBACK_MIN_SIZE_DEFAULT

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")


@dataclass
class PipelineResult:
    schema: Schema
    seq: SchemaSequence
    psi: PrivacyConfig
    model: ProbModel
    weights: dict[str, float]
    learned_weights: dict[str, float] | None
    report: BudgetReport
    synthetic: Dataset
    timings: dict[str, float]
    dcs: list[DenialConstraint]


def run_pipeline(
    data: Dataset,
    dcs: list[DenialConstraint],
    eps: float,
    delta: float,
    seed: int,
    *,
    parallel: bool = False,
    accept_reject: bool = False,
    m: int = 0,
    max_tries: int = 300,
    n_out: int | None = None,
    overrides: dict | None = None,
    ranges: SearchRanges | None = None,
    alpha_max: int = DEFAULT_ALPHA_MAX,
    group_max_bits: int = GROUP_MAX_BITS_DEFAULT,
    fallback_min_size: int = FALLBACK_MIN_SIZE_DEFAULT,
) -> PipelineResult:
    """Run the full synthesis pipeline in memory."""
    schema = data.schema
    rng = RandomSource(seed)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    seq = sequence(schema, dcs)
    seq = apply_domain_optimizations(
        seq, schema, dcs, group_max_bits=group_max_bits, fallback_min_size=fallback_min_size
    )
    validate_sequence(seq, schema)
    timings["sequencing"] = time.perf_counter() - t0

    soft = [dc for dc in dcs if not dc.hard]
    unknown = [dc for dc in dcs if not dc.hard and dc.weight is None]
    weights_unknown = bool(unknown)

    t0 = time.perf_counter()
    psi = search_parameters(
        eps,
        delta,
        schema,
        data.n,
        seq,
        weights_unknown,
        ranges=ranges,
        pinned=overrides,
        alpha_max=alpha_max,
    )
    psi.resample = m
    if weights_unknown:
        psi.sens_w = sensitivity(soft, psi.sample_w)
    timings["parameter_search"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    model = fit_model(data, seq, psi, rng.child("train"), parallel=parallel)
    timings["training"] = time.perf_counter() - t0

    learned = None
    t0 = time.perf_counter()
    if weights_unknown:
        matrix = build_noisy_matrix(
            data, soft, psi.sample_w, psi.sigma_w, psi.sens_w, rng.child("weights")
        )
        learned = learn_weights(
            matrix,
            soft,
            list(seq.order),
            psi.iters_w,
            psi.batch_w,
            psi.lr_w,
            rng.child("weight-sgd"),
            w_max=psi.w_max,
        )
    weights = resolve_weights(dcs, learned)
    timings["weight_learning"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    out_n = n_out if n_out is not None else data.n
    if accept_reject:
        synthetic = synthesize_accept_reject(
            model, dcs, weights, out_n, rng.child("sample"), max_tries=max_tries
        )
    else:
        synthetic = synthesize(
            model,
            dcs,
            weights,
            out_n,
            psi.resample,
            rng.child("sample"),
            n_candidates=psi.n_candidates,
        )
    timings["sampling"] = time.perf_counter() - t0

    report = build_report(
        psi,
        data.n,
        delta,
        n_histograms=seq.histogram_count(schema),
        n_submodels=seq.submodel_count(schema),
        alpha_max=alpha_max,
    )
    report.dc_weights = {k: (v if v != float("inf") else -1.0) for k, v in weights.items()}
    return PipelineResult(
        schema=schema,
        seq=seq,
        psi=psi,
        model=model,
        weights=weights,
        learned_weights=learned,
        report=report,
        synthetic=synthetic,
        timings=timings,
        dcs=dcs,
    )


def run_synthesize(config: RunConfig) -> PipelineResult:
    """Disk-to-disk run: read inputs, run the pipeline, write artifacts."""
    schema = load_schema(config.schema_json)
    data = load_dataset(config.data_csv, schema)
    dcs = load_dcs(config.dc_file, schema) if config.dc_file else []

    result = run_pipeline(
        data,
        dcs,
        config.eps,
        config.delta,
        config.seed,
        parallel=config.parallel,
        accept_reject=config.accept_reject,
        m=config.m,
        max_tries=config.max_tries,
        n_out=config.n_out,
        overrides=config.overrides,
        ranges=config.ranges,
        alpha_max=config.alpha_max,
        group_max_bits=config.group_max_bits,
        fallback_min_size=config.fallback_min_size,
    )

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(result.synthetic, out / "synthetic.csv")
    (out / "model.json").write_text(result.model.to_json(), encoding="utf-8")
    (out / "budget_report.json").write_text(
        json.dumps(result.report.to_dict(), indent=2), encoding="utf-8"
    )

    vio_report, _ = evaluate(data, result.synthetic, dcs, ways=())
    (out / "violation_report.json").write_text(
        json.dumps(vio_report.to_dict(), indent=2), encoding="utf-8"
    )

    manifest = {
        "seed": config.seed,
        "eps": config.eps,
        "delta": config.delta,
        "n": data.n,
        "n_out": result.synthetic.n,
        "k": len(schema),
        "psi": result.psi.to_dict(),
        "epsilon_reported": result.report.epsilon,
        "alpha_star": result.report.alpha_star,
        "alpha_max": config.alpha_max,
        "n_histograms": result.seq.histogram_count(schema),
        "n_submodels": result.seq.submodel_count(schema),
        "sequence": result.seq.to_dict(),
        "accept_reject": config.accept_reject,
        "parallel": config.parallel,
        "m": config.m,
        "timings": result.timings,
        "weights": {k: ("inf" if v == float("inf") else v) for k, v in result.weights.items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return result


def replay_manifest_epsilon(manifest_path) -> float:
    """Recompute the reported epsilon from a manifest's resolved parameters."""
    obj = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    psi = PrivacyConfig.from_dict(obj["psi"])
    report = build_report(
        psi,
        obj["n"],
        obj["delta"],
        n_histograms=obj["n_histograms"],
        n_submodels=obj["n_submodels"],
        alpha_max=obj["alpha_max"],
    )
    return report.epsilon
