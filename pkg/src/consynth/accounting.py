"""Rényi-DP accounting and the privacy parameter search.

Stage costs are tracked as curves over integer orders alpha in
``[2, alpha_max]``. The Gaussian mechanism at noise multiplier sigma costs
``alpha / (2 sigma^2)``; the Poisson-subsampled Gaussian mechanism at rate
r in (0, 1) costs::

    (1 / (alpha - 1)) * log( sum_{k=0..alpha} C(alpha, k)
                             (1-r)^(alpha-k) r^k exp(k(k-1) / (2 sigma^2)) )

evaluated in log space so large alpha and small sigma stay finite. The
subsampled curve tends to the full-batch one as r -> 1. Conversion to
(epsilon, delta) minimizes ``R(alpha) + log(1/delta) / (alpha - 1)`` over
the integer orders.

``search_parameters`` starts from the accuracy-greedy end of the allowed
ranges and walks a fixed priority list (fewer iterations, more gradient
noise, more histogram noise, smaller batches, more weight-learning noise)
until the composed cost fits the budget. Ranges are configurable; the
defaults are deliberately narrow and small budgets on small datasets may
need wider ones (see :class:`SearchRanges`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetInfeasible, EmptyCurve, InvalidOrder, InvalidRate

DEFAULT_ALPHA_MAX = 64


def gaussian_rdp(sigma: float, alpha: int) -> float:
    """Gaussian mechanism cost at integer order alpha: alpha / (2 sigma^2)."""
    _check_order(alpha)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return alpha / (2.0 * sigma * sigma)


def sgm_rdp(sigma: float, rate: float, alpha: int) -> float:
    """Poisson-subsampled Gaussian mechanism cost at integer order alpha."""
    _check_order(alpha)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not (0.0 < rate < 1.0):
        raise InvalidRate(f"rate {rate} outside (0, 1)")
    ks = np.arange(alpha + 1, dtype=np.float64)
    log_binom = (
        math.lgamma(alpha + 1)
        - np.array([math.lgamma(k + 1) + math.lgamma(alpha - k + 1) for k in range(alpha + 1)])
    )
    terms = (
        log_binom
        + ks * math.log(rate)
        + (alpha - ks) * math.log1p(-rate)
        + ks * (ks - 1.0) / (2.0 * sigma * sigma)
    )
    return float(logsumexp(terms)) / (alpha - 1)


def subsampled_or_full_rdp(sigma: float, rate: float, alpha: int) -> float:
    """Dispatch on the sampling rate; r == 1 is the plain Gaussian case."""
    if rate >= 1.0:
        return gaussian_rdp(sigma, alpha)
    return sgm_rdp(sigma, rate, alpha)


def _check_order(alpha: int) -> None:
    if not float(alpha).is_integer() or alpha < 2:
        raise InvalidOrder(f"order must be an integer >= 2, got {alpha}")


@dataclass(frozen=True)
class RdpCurve:
    """Cost per integer order alpha = 2 .. alpha_max."""

    values: tuple[float, ...]
    alpha_min: int = 2

    @property
    def alpha_max(self) -> int:
        return self.alpha_min + len(self.values) - 1

    def at(self, alpha: int) -> float:
        return self.values[alpha - self.alpha_min]

    def __add__(self, other: "RdpCurve") -> "RdpCurve":
        if self.alpha_min != other.alpha_min or len(self.values) != len(other.values):
            raise ValueError("curves evaluated on different order grids")
        return RdpCurve(tuple(a + b for a, b in zip(self.values, other.values)), self.alpha_min)

    def scaled(self, factor: float) -> "RdpCurve":
        return RdpCurve(tuple(v * factor for v in self.values), self.alpha_min)

    @staticmethod
    def zeros(alpha_max: int = DEFAULT_ALPHA_MAX) -> "RdpCurve":
        return RdpCurve((0.0,) * (alpha_max - 1))

    @staticmethod
    def gaussian(sigma: float, alpha_max: int = DEFAULT_ALPHA_MAX) -> "RdpCurve":
        return RdpCurve(tuple(gaussian_rdp(sigma, a) for a in range(2, alpha_max + 1)))

    @staticmethod
    def subsampled(sigma: float, rate: float, alpha_max: int = DEFAULT_ALPHA_MAX) -> "RdpCurve":
        return RdpCurve(
            tuple(subsampled_or_full_rdp(sigma, rate, a) for a in range(2, alpha_max + 1))
        )


def to_eps_delta(curve: RdpCurve, delta: float) -> tuple[float, int]:
    """Tightest epsilon at the given delta and the minimizing order."""
    if not curve.values:
        raise EmptyCurve("no orders evaluated")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    tail = math.log(1.0 / delta)
    best_eps, best_alpha = math.inf, curve.alpha_min
    for alpha in range(curve.alpha_min, curve.alpha_max + 1):
        eps = curve.at(alpha) + tail / (alpha - 1)
        if eps < best_eps:
            best_eps, best_alpha = eps, alpha
    return best_eps, best_alpha


@dataclass
class PrivacyConfig:
    """All noise and learning knobs resolved for one synthesis run."""

    sigma_g: float = 1.0
    sigma_d: float = 1.1
    sigma_w: float = 1.0
    clip: float = 1.0
    batch: int = 32
    iters: int = 100
    lr: float = 1e-4
    bins: int = 16
    sample_w: int = 100  # expected violation-matrix sample size
    batch_w: int = 1
    iters_w: int = 100
    sens_w: float = 0.0  # violation-matrix L2 sensitivity, set by the pipeline
    embed_dim: int = 16
    n_candidates: int = 32
    resample: int = 0
    learn_weights: bool = False  # the i_w composition indicator
    w_max: float = 10.0
    lr_w: float = 0.1

    def to_dict(self) -> dict:
        return {
            "sigma_g": self.sigma_g,
            "sigma_d": self.sigma_d,
            "sigma_w": self.sigma_w,
            "clip": self.clip,
            "batch": self.batch,
            "iters": self.iters,
            "lr": self.lr,
            "bins": self.bins,
            "sample_w": self.sample_w,
            "batch_w": self.batch_w,
            "iters_w": self.iters_w,
            "sens_w": self.sens_w,
            "embed_dim": self.embed_dim,
            "n_candidates": self.n_candidates,
            "resample": self.resample,
            "learn_weights": self.learn_weights,
            "w_max": self.w_max,
            "lr_w": self.lr_w,
        }

    @staticmethod
    def from_dict(obj: dict) -> "PrivacyConfig":
        cfg = PrivacyConfig()
        for key, value in obj.items():
            if not hasattr(cfg, key):
                raise KeyError(f"unknown privacy parameter {key!r}")
            setattr(cfg, key, type(getattr(cfg, key))(value))
        return cfg


def total_rdp(psi: PrivacyConfig, n: int, k: int, alpha: int) -> float:
    """Composed cost: one histogram release, T(k-1) subsampled gradient
    steps, and optionally one subsampled weight-learning release."""
    cost = gaussian_rdp(psi.sigma_g, alpha)
    if psi.iters > 0 and k > 1:
        cost += psi.iters * (k - 1) * subsampled_or_full_rdp(psi.sigma_d, psi.batch / n, alpha)
    if psi.learn_weights:
        cost += subsampled_or_full_rdp(psi.sigma_w, psi.sample_w / n, alpha)
    return cost


@dataclass
class BudgetReport:
    """Per-stage curves, their pointwise-sum total, and the conversion."""

    stages: dict[str, RdpCurve]
    total: RdpCurve
    delta: float
    epsilon: float
    alpha_star: int
    learn_weights: bool
    notes: list[str] = field(default_factory=list)
    dc_weights: dict[str, float] | None = None

    def to_dict(self) -> dict:
        out = {
            "delta": self.delta,
            "epsilon": self.epsilon,
            "alpha_star": self.alpha_star,
            "alpha_max": self.total.alpha_max,
            "learn_weights": self.learn_weights,
            "stages": {name: list(curve.values) for name, curve in self.stages.items()},
            "total": list(self.total.values),
            "notes": self.notes,
        }
        if self.dc_weights is not None:
            out["dc_weights"] = self.dc_weights
        return out


_SGM_NOTE = (
    "subsampled Gaussian costs use the log-space bound with exp(k(k-1)/(2 sigma^2)) "
    "inside the binomial sum; the r=1 limit matches the plain Gaussian curve"
)


def build_report(
    psi: PrivacyConfig,
    n: int,
    delta: float,
    *,
    n_histograms: int = 1,
    n_submodels: int | None = None,
    k: int | None = None,
    alpha_max: int = DEFAULT_ALPHA_MAX,
) -> BudgetReport:
    """Stage-wise report. ``n_histograms`` counts every Gaussian histogram
    release (the first attribute plus any large-domain fallbacks) and
    ``n_submodels`` the discriminative models actually trained; pass ``k``
    instead to assume the plain 1 + (k-1) layout."""
    if n_submodels is None:
        if k is None:
            raise ValueError("need n_submodels or k")
        n_submodels = k - 1
    stages = {
        "histogram": RdpCurve.gaussian(psi.sigma_g, alpha_max).scaled(n_histograms),
    }
    if n_submodels > 0 and psi.iters > 0:
        steps = psi.iters * n_submodels
        stages["dpsgd"] = RdpCurve.subsampled(psi.sigma_d, psi.batch / n, alpha_max).scaled(steps)
    else:
        stages["dpsgd"] = RdpCurve.zeros(alpha_max)
    if psi.learn_weights:
        stages["weights"] = RdpCurve.subsampled(psi.sigma_w, psi.sample_w / n, alpha_max)
    total = RdpCurve.zeros(alpha_max)
    for curve in stages.values():
        total = total + curve
    eps, alpha_star = to_eps_delta(total, delta)
    return BudgetReport(
        stages=stages,
        total=total,
        delta=delta,
        epsilon=eps,
        alpha_star=alpha_star,
        learn_weights=psi.learn_weights,
        notes=[_SGM_NOTE],
    )


@dataclass(frozen=True)
class SearchRanges:
    """Tuning ranges for :func:`search_parameters`.

    ``sigma_g`` spans a near-zero floor scaled by the first attribute's
    domain size up to ``4 sqrt(log(1.25/delta)) / eps``; those two depend
    on the inputs and are computed per search. Iterations span one to
    five passes over the data at the smallest batch. The defaults suit
    datasets of tens of thousands of rows at eps around 1; tighter budgets
    or much smaller datasets need a larger ``sigma_d_max`` (and an
    ``alpha_max`` above 64, whose conversion tail alone is
    ``log(1/delta)/(alpha_max - 1)``).
    """

    sigma_d_min: float = 1.0
    sigma_d_max: float = 1.5
    sigma_d_step: float = 0.1
    batch_min: int = 16
    batch_max: int = 32
    batch_step: int = 4
    iters_steps: int = 20
    sigma_g_factor: float = 1.3
    sigma_w_max: float = 64.0
    sigma_w_factor: float = 1.5


def search_parameters(
    eps: float,
    delta: float,
    schema,
    n: int,
    sequence,
    weights_unknown: bool,
    *,
    ranges: SearchRanges | None = None,
    pinned: dict | None = None,
    alpha_max: int = DEFAULT_ALPHA_MAX,
    n_histograms: int | None = None,
    n_submodels: int | None = None,
) -> PrivacyConfig:
    """Pick a parameter set whose composed cost fits the (eps, delta) budget.

    Starts accuracy-greedy (minimum noise, maximum iterations and batch)
    and repeatedly applies the first available move in the priority order:
    fewer iterations, larger sigma_d, larger sigma_g, smaller batch, and,
    when weight learning is active, larger sigma_w. ``pinned`` entries are
    fixed and excluded from tuning. Raises :class:`BudgetInfeasible` when
    every knob is exhausted.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    rng_cfg = ranges or SearchRanges()
    pinned = dict(pinned or {})

    order = list(sequence.order) if hasattr(sequence, "order") else list(sequence)
    first_size = schema[order[0]].size
    if hasattr(sequence, "positions") and n_histograms is None:
        n_histograms = sequence.histogram_count(schema)
    if n_histograms is None:
        n_histograms = 1
    if n_submodels is None:
        if hasattr(sequence, "positions"):
            n_submodels = sequence.submodel_count(schema)
        else:
            n_submodels = len(order) - 1

    sigma_g_min = 0.1 / max(first_size, 1)
    sigma_g_max = 4.0 * math.sqrt(math.log(1.25 / delta)) / eps
    iters_max = int(math.ceil(5 * n / rng_cfg.batch_min))
    iters_min = max(1, int(math.floor(n / rng_cfg.batch_min)))
    iters_step = max(1, round((iters_max - iters_min) / rng_cfg.iters_steps))

    psi = PrivacyConfig(
        sigma_g=sigma_g_min,
        sigma_d=1.1,
        clip=1.0,
        lr=1e-4,
        batch=min(rng_cfg.batch_max, n),
        iters=iters_max,
        learn_weights=weights_unknown,
    )
    if weights_unknown:
        eps_w = 100.0
        psi.sample_w = min(100, n)
        psi.sigma_w = math.sqrt(2.0 * math.log(1.25 / delta)) / eps_w
        psi.batch_w = 1
        psi.iters_w = psi.sample_w // psi.batch_w
    for key, value in pinned.items():
        if not hasattr(psi, key):
            raise KeyError(f"unknown privacy parameter {key!r}")
        setattr(psi, key, type(getattr(psi, key))(value))

    def cost(cfg: PrivacyConfig) -> float:
        report = build_report(
            cfg,
            n,
            delta,
            n_histograms=n_histograms,
            n_submodels=n_submodels,
            alpha_max=alpha_max,
        )
        return report.epsilon

    def movable(name: str) -> bool:
        return name not in pinned

    while cost(psi) > eps:
        if movable("iters") and psi.iters - iters_step >= iters_min:
            psi.iters = max(iters_min, psi.iters - iters_step)
        elif movable("sigma_d") and psi.sigma_d + rng_cfg.sigma_d_step <= rng_cfg.sigma_d_max + 1e-12:
            psi.sigma_d = round(psi.sigma_d + rng_cfg.sigma_d_step, 10)
        elif movable("sigma_g") and psi.sigma_g < sigma_g_max:
            psi.sigma_g = min(sigma_g_max, psi.sigma_g * rng_cfg.sigma_g_factor)
        elif movable("batch") and psi.batch - rng_cfg.batch_step >= rng_cfg.batch_min:
            psi.batch = psi.batch - rng_cfg.batch_step
        elif (
            psi.learn_weights
            and movable("sigma_w")
            and psi.sigma_w < rng_cfg.sigma_w_max
        ):
            psi.sigma_w = min(rng_cfg.sigma_w_max, psi.sigma_w * rng_cfg.sigma_w_factor)
        else:
            raise BudgetInfeasible(
                f"ranges exhausted at eps_psi={cost(psi):.4g} > eps={eps:.4g}"
            )
    return psi
