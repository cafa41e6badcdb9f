"""Command line interface.

Subcommands: ``synth`` (end-to-end synthesis), ``sequence`` (attribute
order and constraint partition), ``account`` (budget report for a
parameter set), ``evaluate`` (violation and marginal reports). Every
option can also be set through environment variables prefixed
``CONSYNTH_`` (for example ``CONSYNTH_SYNTH_EPS=0.5``).

Exit codes: 0 success, 2 infeasible privacy budget, 3 invalid input,
4 internal error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .accounting import PrivacyConfig, SearchRanges, build_report
from .constraints import load_dcs, partition_by_sequence
from .data import load_dataset, load_schema
from .errors import BudgetInfeasible, ConsynthError
from .metrics import evaluate as evaluate_datasets
from .pipeline import RunConfig, run_synthesize
from .sequencing import apply_domain_optimizations, sequence

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_INTERNAL = 4


def _run(func):
    try:
        func()
        return EXIT_OK
    except BudgetInfeasible as exc:
        click.echo(f"error: privacy budget infeasible: {exc}", err=True)
        return EXIT_INFEASIBLE
    except (ConsynthError, FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        click.echo(f"error: invalid input: {exc}", err=True)
        return EXIT_INVALID
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"error: internal: {exc}", err=True)
        return EXIT_INTERNAL


@click.group(context_settings={"auto_envvar_prefix": "CONSYNTH"})
def main():
    """Constraint-aware differentially private data synthesis."""


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs:
        key, _, value = pair.partition("=")
        if not _:
            raise ValueError(f"override {pair!r} is not KEY=VALUE")
        out[key.strip()] = float(value) if "." in value or "e" in value.lower() else int(value)
    return out


@main.command("synth")
@click.option("--data", "data_csv", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_json", required=True, type=click.Path(exists=True))
@click.option("--dcs", "dc_file", type=click.Path(exists=True), default=None)
@click.option("--eps", type=float, default=1.0, show_default=True)
@click.option("--delta", type=float, default=1e-6, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--parallel", is_flag=True, help="Train sub-models with independent inits.")
@click.option("--ar", "accept_reject", is_flag=True, help="Accept-reject sampling variant.")
@click.option("--m", type=int, default=0, show_default=True, help="MCMC cells re-drawn per column.")
@click.option("--n-out", type=int, default=None, help="Rows to synthesize (default: input size).")
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="KEY=VALUE",
    help="Pin a privacy parameter instead of searching it (e.g. sigma_d=2.0).",
)
@click.option("--alpha-max", type=int, default=64, show_default=True)
@click.option("--sigma-d-max", type=float, default=1.5, show_default=True)
@click.option("--sigma-w-max", type=float, default=64.0, show_default=True)
@click.option("--group-bits", type=int, default=8, show_default=True)
@click.option("--fallback-min", type=int, default=5000, show_default=True)
def synth_cmd(
    data_csv,
    schema_json,
    dc_file,
    eps,
    delta,
    seed,
    out_dir,
    parallel,
    accept_reject,
    m,
    n_out,
    overrides,
    alpha_max,
    sigma_d_max,
    sigma_w_max,
    group_bits,
    fallback_min,
):
    """Synthesize a private dataset and write all run artifacts."""

    def body():
        config = RunConfig(
            data_csv=data_csv,
            schema_json=schema_json,
            dc_file=dc_file,
            out_dir=out_dir,
            eps=eps,
            delta=delta,
            seed=seed,
            parallel=parallel,
            accept_reject=accept_reject,
            m=m,
            n_out=n_out,
            overrides=_parse_overrides(overrides),
            ranges=SearchRanges(sigma_d_max=sigma_d_max, sigma_w_max=sigma_w_max),
            alpha_max=alpha_max,
            group_max_bits=group_bits,
            fallback_min_size=fallback_min,
        )
        result = run_synthesize(config)
        click.echo(
            json.dumps(
                {
                    "out": str(Path(out_dir)),
                    "epsilon": result.report.epsilon,
                    "alpha_star": result.report.alpha_star,
                    "rows": result.synthetic.n,
                    "timings": result.timings,
                }
            )
        )

    sys.exit(_run(body))


@main.command("sequence")
@click.option("--schema", "schema_json", required=True, type=click.Path(exists=True))
@click.option("--dcs", "dc_file", type=click.Path(exists=True), default=None)
@click.option("--group-bits", type=int, default=8, show_default=True)
@click.option("--fallback-min", type=int, default=5000, show_default=True)
def sequence_cmd(schema_json, dc_file, group_bits, fallback_min):
    """Print the chosen attribute order and constraint partition as JSON."""

    def body():
        schema = load_schema(schema_json)
        dcs = load_dcs(dc_file, schema) if dc_file else []
        seq = sequence(schema, dcs)
        seq = apply_domain_optimizations(
            seq, schema, dcs, group_max_bits=group_bits, fallback_min_size=fallback_min
        )
        partition = partition_by_sequence(dcs, list(seq.order))
        click.echo(
            json.dumps(
                {**seq.to_dict(), "partition": {a: ids for a, ids in partition.items() if ids}},
                indent=2,
            )
        )

    sys.exit(_run(body))


@main.command("account")
@click.option("--psi", "psi_json", required=True, type=click.Path(exists=True))
@click.option("--n", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--delta", type=float, default=1e-6, show_default=True)
@click.option("--alpha-max", type=int, default=64, show_default=True)
def account_cmd(psi_json, n, k, delta, alpha_max):
    """Budget report for a parameter configuration (JSON to stdout)."""

    def body():
        psi = PrivacyConfig.from_dict(json.loads(Path(psi_json).read_text(encoding="utf-8")))
        report = build_report(psi, n, delta, k=k, alpha_max=alpha_max)
        click.echo(json.dumps(report.to_dict(), indent=2))

    sys.exit(_run(body))


@main.command("evaluate")
@click.option("--truth", "truth_csv", required=True, type=click.Path(exists=True))
@click.option("--synthetic", "synthetic_csv", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_json", required=True, type=click.Path(exists=True))
@click.option("--dcs", "dc_file", type=click.Path(exists=True), default=None)
@click.option("--ways", type=str, default="1,2", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of text tables.")
def evaluate_cmd(truth_csv, synthetic_csv, schema_json, dc_file, ways, as_json):
    """Compare a synthetic dataset against the truth."""

    def body():
        schema = load_schema(schema_json)
        truth = load_dataset(truth_csv, schema)
        synthetic = load_dataset(synthetic_csv, schema)
        dcs = load_dcs(dc_file, schema) if dc_file else []
        way_list = tuple(int(w) for w in ways.split(",") if w.strip())
        vio, marg = evaluate_datasets(truth, synthetic, dcs, ways=way_list)
        if as_json:
            click.echo(json.dumps({**vio.to_dict(), **marg.to_dict()}, indent=2))
        else:
            if vio.entries:
                click.echo(vio.table())
                click.echo("")
            click.echo(marg.table())

    sys.exit(_run(body))


if __name__ == "__main__":
    main()
