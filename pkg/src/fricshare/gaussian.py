"""Closed-form expected-shortfall pool analytics under joint normality.

With endowments drawn from N(mu, V) and no extra information, worst-casing
conditional means over density-capped measure sets has a closed form: each
agent receives an affine function of the pooled total minus a deterministic
penalty proportional to their idiosyncratic volatility. The proportionality
constant is ``es_factor(level) = pdf(ppf(level)) / level``, the same factor
that prices the left tail of a normal at confidence ``level``.

Conventions
-----------
* ``sigma_total`` is the standard deviation of the pooled total.
* ``rho_bar[i]`` is the correlation of agent i's endowment with the pooled
  total; its numerator includes the own-variance term (the i = j summand),
  which is easy to drop by mistake.
* Agents with zero marginal variance get ``rho_bar = 0`` and ride through
  every formula with zero penalty: a constant endowment is passed back
  unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePoolError, InputError, NotPositiveSemidefiniteError

__all__ = [
    "norm_pdf",
    "norm_cdf",
    "norm_ppf",
    "es_factor",
    "GaussianPool",
    "PoolStats",
    "EsClosedForm",
    "TradeoffReport",
    "SweepRow",
    "pool_stats",
    "es_closed_form",
    "gaussian_costs",
    "tradeoff",
    "participation_threshold",
    "correlation_sweep",
    "participants_sweep",
    "constant_correlation",
    "power_decay_correlation",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


# Rational minimax approximation on three regimes (central, near tail, far
# tail), absolute error ~1e-16 before refinement; one Halley step afterwards
# pins the result against norm_cdf.
_PPF_A = (
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
)
_PPF_B = (
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_PPF_C = (
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
)
_PPF_D = (
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_PPF_E = (
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
)
_PPF_F = (
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly(coeffs, r: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * r + c
    return acc


def norm_ppf(p: float) -> float:
    """Inverse standard normal CDF, absolute error well below 1e-9."""
    if not 0.0 < p < 1.0:
        raise InputError(f"norm_ppf needs p in (0, 1); got {p!r}")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        x = q * _poly(_PPF_A, r) / _poly(_PPF_B, r)
    else:
        r = p if q < 0 else 1.0 - p
        r = math.sqrt(-math.log(r))
        if r <= 5.0:
            r -= 1.6
            x = _poly(_PPF_C, r) / _poly(_PPF_D, r)
        else:
            r -= 5.0
            x = _poly(_PPF_E, r) / _poly(_PPF_F, r)
        if q < 0:
            x = -x
    # one Halley step against the CDF
    err = norm_cdf(x) - p
    u = err * _SQRT_2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def es_factor(level: float) -> float:
    """Left-tail shortfall factor pdf(ppf(level)) / level; 0 at level 1.

    Strictly decreasing on (0, 1], diverging as level -> 0: more caution
    means a heavier penalty per unit of idiosyncratic volatility.
    """
    if not 0.0 < level <= 1.0:
        raise InputError(f"level must be in (0, 1]; got {level!r}")
    if level == 1.0:
        return 0.0
    return norm_pdf(norm_ppf(level)) / level


@dataclass(frozen=True)
class GaussianPool:
    """Mean vector and covariance matrix of jointly normal endowments."""

    mu: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if mu.ndim != 1 or cov.shape != (mu.size, mu.size):
            raise InputError("mu must be length n and cov n-by-n")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(cov))):
            raise InputError("pool parameters must be finite")
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > 1e-12 * scale:
            raise InputError("cov must be symmetric within 1e-12")
        d = np.diag(cov)
        if np.any(d < 0):
            raise InputError("cov diagonal must be nonnegative")
        lim = np.sqrt(np.outer(d, d)) * (1.0 + 1e-12)
        if np.any(np.abs(cov) > lim + 1e-15 * scale):
            raise InputError("implied correlations must lie in [-1, 1]")
        mu.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", cov)

    @property
    def n_agents(self) -> int:
        return self.mu.size

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    @classmethod
    def from_correlation(cls, mu, sigma, rho) -> "GaussianPool":
        sigma = np.asarray(sigma, dtype=float)
        rho = np.asarray(rho, dtype=float)
        return cls(np.asarray(mu, dtype=float), rho * np.outer(sigma, sigma))


@dataclass(frozen=True)
class PoolStats:
    """Pooled-total volatility and per-agent correlations with the total."""

    sigma_total: float
    rho_bar: np.ndarray

    def idiosyncratic(self, sigma: np.ndarray) -> np.ndarray:
        """Volatility not explained by the pooled total: sqrt((1-rho_bar^2) var)."""
        return np.sqrt(np.maximum(1.0 - self.rho_bar**2, 0.0)) * sigma


def pool_stats(pool: GaussianPool) -> PoolStats:
    total_var = float(pool.cov.sum())
    if total_var <= 0.0:
        raise DegeneratePoolError(
            "the pooled endowment has zero variance; pool ratios are undefined"
        )
    sigma_total = math.sqrt(total_var)
    sigma = pool.sigma
    rowsums = pool.cov.sum(axis=1)
    rho_bar = np.zeros(pool.n_agents)
    nz = sigma > 0
    rho_bar[nz] = rowsums[nz] / (sigma[nz] * sigma_total)
    rho_bar = np.clip(rho_bar, -1.0, 1.0)
    return PoolStats(sigma_total, rho_bar)


@dataclass(frozen=True)
class EsClosedForm:
    """Affine-in-the-total allocation: H_i = intercept_i + slope_i * S - penalty_i.

    The slopes sum to one, so the pool's shortfall is the deterministic sum
    of the penalties.
    """

    intercept: np.ndarray
    slope: np.ndarray
    penalty: np.ndarray

    def evaluate(self, total) -> np.ndarray:
        total = np.asarray(total, dtype=float)
        return (
            self.intercept[:, None]
            + self.slope[:, None] * total[None, :]
            - self.penalty[:, None]
        )


def es_closed_form(pool: GaussianPool, level: float) -> EsClosedForm:
    stats = pool_stats(pool)
    sigma = pool.sigma
    slope = sigma * stats.rho_bar / stats.sigma_total
    penalty = es_factor(level) * stats.idiosyncratic(sigma)
    intercept = pool.mu - slope * pool.mu.sum()
    return EsClosedForm(intercept, slope, penalty)


def gaussian_costs(pool: GaussianPool, level: float) -> tuple[float, np.ndarray]:
    """(deterministic pool-wide cost, per-agent expected costs)."""
    stats = pool_stats(pool)
    per_agent = es_factor(level) * stats.idiosyncratic(pool.sigma)
    return float(per_agent.sum()), per_agent


@dataclass(frozen=True)
class TradeoffReport:
    """Participation economics for mean-variance agents.

    ``benefit[i]`` is the utility gain from joining, s_i (theta_i s_i - k):
    the variance relief theta_i s_i^2 net of the expected fee k s_i, where
    s_i is idiosyncratic volatility and k the shortfall factor.
    """

    expected_alloc: np.ndarray
    expected_cost: np.ndarray
    benefit: np.ndarray
    global_cost: float


def tradeoff(pool: GaussianPool, level: float, theta) -> TradeoffReport:
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (pool.n_agents,))
    stats = pool_stats(pool)
    s = stats.idiosyncratic(pool.sigma)
    k = es_factor(level)
    return TradeoffReport(
        expected_alloc=pool.mu - k * s,
        expected_cost=k * s,
        benefit=s * (theta * s - k),
        global_cost=float(k * s.sum()),
    )


def participation_threshold(
    pool: GaussianPool, theta: float, agent: int, tol: float = 1e-8
) -> float | None:
    """Smallest confidence level at which joining breaks even for ``agent``.

    Solves es_factor(level) = theta * s_agent by bisection on (1e-6, 1],
    exploiting strict monotonicity. Returns None when theta <= 0 (no taste
    for diversification), when the agent carries no idiosyncratic risk, or
    when the target exceeds the factor at the bracket edge.
    """
    if theta <= 0.0:
        return None
    stats = pool_stats(pool)
    s = float(stats.idiosyncratic(pool.sigma)[agent])
    if s == 0.0:
        return None
    target = theta * s
    lo, hi = 1e-6, 1.0
    if target >= es_factor(lo):
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if es_factor(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Parameter sweeps (cost/benefit curves suitable for plotting)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    param: float
    global_cost: float
    avg_benefit: float
    avg_cost_per_agent: float


def constant_correlation(n: int, rho: float) -> np.ndarray:
    r = np.full((n, n), rho)
    np.fill_diagonal(r, 1.0)
    return r


def power_decay_correlation(n: int, base: float = 0.5) -> np.ndarray:
    idx = np.arange(n)
    return base ** np.abs(idx[:, None] - idx[None, :])


def _require_psd(corr: np.ndarray, param) -> None:
    w = np.linalg.eigvalsh(corr)
    if w.min() < -1e-10:
        raise NotPositiveSemidefiniteError(
            f"correlation matrix at parameter {param!r} has eigenvalue {w.min():.3e}"
        )


def _sweep_row(param, corr, sigma, level, theta) -> SweepRow:
    n = corr.shape[0]
    pool = GaussianPool.from_correlation(np.zeros(n), np.full(n, sigma), corr)
    rep = tradeoff(pool, level, theta)
    return SweepRow(
        param=float(param),
        global_cost=rep.global_cost,
        avg_benefit=float(rep.benefit.mean()),
        avg_cost_per_agent=rep.global_cost / n,
    )


def correlation_sweep(
    grid, n: int = 2, sigma: float = 1.0, level: float = 0.99, theta: float = 0.5
) -> list[SweepRow]:
    """Pool cost/benefit as equicorrelation varies over ``grid``."""
    grid = list(grid)
    if not grid:
        raise InputError("correlation grid must be nonempty")
    rows = []
    for rho in grid:
        corr = constant_correlation(n, float(rho))
        _require_psd(corr, rho)
        rows.append(_sweep_row(rho, corr, sigma, level, theta))
    return rows


def participants_sweep(
    n_values,
    scheme: str = "constant",
    rho: float = 0.2,
    decay: float = 0.5,
    sigma: float = 1.0,
    level: float = 0.99,
    theta: float = 0.5,
) -> list[SweepRow]:
    """Cost/benefit as the pool grows, under a fixed correlation scheme.

    ``scheme`` is 'constant' (every off-diagonal equals rho) or
    'power_decay' (correlation decay^|i-j| between agents i and j).
    """
    n_values = [int(n) for n in n_values]
    if not n_values:
        raise InputError("participants grid must be nonempty")
    if scheme not in ("constant", "power_decay"):
        raise InputError(f"unknown correlation scheme {scheme!r}")
    rows = []
    for n in n_values:
        if n < 2:
            raise InputError("pools need at least 2 participants")
        corr = (
            constant_correlation(n, rho)
            if scheme == "constant"
            else power_decay_correlation(n, decay)
        )
        _require_psd(corr, n)
        rows.append(_sweep_row(n, corr, sigma, level, theta))
    return rows
