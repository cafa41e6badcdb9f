"""Scikit-learn style front end.

``ConstraintAwareSynthesizer`` wraps the pipeline behind the familiar
``fit`` / ``sample`` estimator surface so it slots into existing tooling:
constructor arguments are plain hyperparameters (``get_params`` /
``set_params`` work as usual), ``fit`` takes a pandas DataFrame, and
``sample`` returns one.

The schema cannot be inferred from the data without leaking private
values, so it is a required hyperparameter. Constraints may be given as
text lines or prebuilt :class:`DenialConstraint` objects.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .accounting import DEFAULT_ALPHA_MAX
from .constraints import DenialConstraint, parse_dc
from .data import Dataset, RandomSource, Schema, schema_from_dict
from .pipeline import run_pipeline
from .sampling import synthesize, synthesize_accept_reject


def dataset_to_frame(data: Dataset) -> pd.DataFrame:
    cols = {}
    for spec in data.schema:
        col = data.column(spec.name)
        if spec.is_numerical:
            cols[spec.name] = col.astype(float)
        else:
            cols[spec.name] = np.asarray([spec.domain[c] for c in col], dtype=object)
    return pd.DataFrame(cols)


def frame_to_dataset(frame: pd.DataFrame, schema: Schema) -> Dataset:
    cols = {}
    for spec in schema:
        if spec.name not in frame.columns:
            raise KeyError(f"missing column {spec.name!r}")
        col = frame[spec.name]
        if spec.is_numerical:
            cols[spec.name] = col.to_numpy(dtype=float)
        else:
            codes = np.asarray([spec.code_of(str(v)) for v in col])
            cols[spec.name] = codes
    return Dataset(schema, cols)


class ConstraintAwareSynthesizer(BaseEstimator):
    """Differentially private synthesizer that preserves denial constraints.

    Parameters
    ----------
    schema : Schema or dict
        Typed attribute catalog (categorical value lists, numerical ranges
        plus bin counts). Required; domains are never read from the data.
    constraints : sequence of str or DenialConstraint
        Denial constraints; text entries are parsed against the schema.
    eps, delta : float
        Total differential privacy budget for ``fit``.
    seed : int
        Root seed; identical seeds give identical models and samples.
    parallel : bool
        Train sub-models with independent initializations (parallelizable)
        instead of warm-starting from earlier ones.
    accept_reject : bool
        Use accept-reject sampling instead of constraint-aware chain
        sampling. Not recommended with hard constraints.
    m : int
        Cells to re-draw per column in the MCMC pass (0 disables it).
    overrides : dict
        Privacy parameters to pin instead of search (for example
        ``{"sigma_d": 2.0, "batch": 16}``).
    ranges, alpha_max, group_max_bits, fallback_min_size
        Search ranges, largest RDP order, and domain-size thresholds.

    Examples
    --------
    >>> synth = ConstraintAwareSynthesizer(schema=schema, constraints=[
    ...     "hard !(t1.edu==t2.edu & t1.edu_num!=t2.edu_num)"], eps=1.0)
    >>> synth.fit(df)
    >>> fake = synth.sample(1000)
    """

    def __init__(
        self,
        schema=None,
        constraints=(),
        eps: float = 1.0,
        delta: float = 1e-6,
        seed: int = 0,
        parallel: bool = False,
        accept_reject: bool = False,
        m: int = 0,
        max_tries: int = 300,
        overrides: dict | None = None,
        ranges=None,
        alpha_max: int = DEFAULT_ALPHA_MAX,
        group_max_bits: int = 8,
        fallback_min_size: int = 5000,
    ):
        self.schema = schema
        self.constraints = constraints
        self.eps = eps
        self.delta = delta
        self.seed = seed
        self.parallel = parallel
        self.accept_reject = accept_reject
        self.m = m
        self.max_tries = max_tries
        self.overrides = overrides
        self.ranges = ranges
        self.alpha_max = alpha_max
        self.group_max_bits = group_max_bits
        self.fallback_min_size = fallback_min_size

    def _resolved_schema(self) -> Schema:
        if isinstance(self.schema, Schema):
            return self.schema
        if isinstance(self.schema, dict):
            return schema_from_dict(self.schema)
        raise ValueError("schema must be a Schema or a schema dict")

    def _resolved_dcs(self, schema: Schema) -> list[DenialConstraint]:
        out = []
        for i, dc in enumerate(self.constraints, start=1):
            if isinstance(dc, DenialConstraint):
                out.append(dc)
            else:
                out.append(parse_dc(str(dc), schema, dc_id=f"dc{i}"))
        return out

    def fit(self, X, y=None):
        """Fit the private chain model and constraint weights on X.

        X may be a pandas DataFrame or a :class:`Dataset`; returns self.
        """
        schema = self._resolved_schema()
        if isinstance(X, Dataset):
            data = X
        else:
            data = frame_to_dataset(pd.DataFrame(X), schema)
        dcs = self._resolved_dcs(schema)
        result = run_pipeline(
            data,
            dcs,
            self.eps,
            self.delta,
            self.seed,
            parallel=self.parallel,
            accept_reject=self.accept_reject,
            m=self.m,
            max_tries=self.max_tries,
            n_out=0,  # no sampling during fit
            overrides=self.overrides,
            ranges=self.ranges,
            alpha_max=self.alpha_max,
            group_max_bits=self.group_max_bits,
            fallback_min_size=self.fallback_min_size,
        )
        self.schema_ = schema
        self.dcs_ = dcs
        self.model_ = result.model
        self.sequence_ = result.seq
        self.psi_ = result.psi
        self.weights_ = result.weights
        self.budget_report_ = result.report
        self.n_fit_ = data.n
        return self

    def sample(self, n: int | None = None, seed: int | None = None) -> pd.DataFrame:
        """Draw a synthetic DataFrame of ``n`` rows (default: fitted size).

        Sampling is post-processing: it consumes no extra privacy budget.
        The draw is deterministic in (fit seed, ``seed``).
        """
        check_is_fitted(self, "model_")
        n = n if n is not None else self.n_fit_
        rng = RandomSource(self.seed if seed is None else seed).child("sample")
        if self.accept_reject:
            data = synthesize_accept_reject(
                self.model_, self.dcs_, self.weights_, n, rng, max_tries=self.max_tries
            )
        else:
            data = synthesize(
                self.model_,
                self.dcs_,
                self.weights_,
                n,
                self.psi_.resample,
                rng,
                n_candidates=self.psi_.n_candidates,
            )
        return dataset_to_frame(data)

    def privacy_spent(self) -> tuple[float, float]:
        """(epsilon, delta) actually consumed by fit."""
        check_is_fitted(self, "budget_report_")
        return self.budget_report_.epsilon, self.budget_report_.delta
