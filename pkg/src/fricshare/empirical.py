"""Loss-claims ingestion and the statistics-to-pool reporting pipeline.

Claims arrive as long-form CSV (period, entity, amount). They are pivoted
into an entity-by-period matrix, summarized into means/variances/
correlations under the sign convention endowment = -loss, and fed to the
Gaussian closed forms to produce per-entity expected allocations, expected
costs, and participation benefits.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, InputError, NotPositiveSemidefiniteError
from .gaussian import GaussianPool, tradeoff

__all__ = [
    "LossTable",
    "SummaryStats",
    "PoolReport",
    "ingest",
    "summarize",
    "report",
    "stats_from_json",
    "stats_to_json",
]

PSD_PROJECT_TOL = 1e-8


@dataclass(frozen=True)
class LossTable:
    """Rectangular claims matrix (entities x periods), gaps already dropped."""

    entities: tuple[str, ...]
    periods: tuple[str, ...]
    losses: np.ndarray
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=float)
        if losses.shape != (len(self.entities), len(self.periods)):
            raise InputError("losses must be entities x periods")
        losses.setflags(write=False)
        object.__setattr__(self, "losses", losses)


@dataclass(frozen=True)
class SummaryStats:
    """Endowment moments: means, unbiased variances, Pearson correlations."""

    entities: tuple[str, ...]
    means: np.ndarray
    variances: np.ndarray
    correlation: np.ndarray
    zero_variance: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.entities)
        means = np.asarray(self.means, dtype=float)
        variances = np.asarray(self.variances, dtype=float)
        corr = np.asarray(self.correlation, dtype=float)
        if means.shape != (n,) or variances.shape != (n,) or corr.shape != (n, n):
            raise InputError("stats shapes must match the entity count")
        if np.any(variances < 0):
            raise InputError("variances must be nonnegative")
        if np.abs(corr - corr.T).max() > 1e-9 or np.abs(np.diag(corr) - 1).max() > 1e-9:
            raise InputError("correlation must be symmetric with unit diagonal")
        if np.abs(corr).max() > 1.0 + 1e-9:
            raise InputError("correlation entries must lie in [-1, 1]")
        for a in (means, variances, corr):
            a.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "correlation", corr)


def ingest(path) -> LossTable:
    """Pivot a period,entity,amount CSV into a complete claims matrix.

    Duplicate (period, entity) rows are summed. Entities missing any period
    are dropped and reported in ``dropped``. Amounts must parse as finite
    nonnegative reals; offending line numbers are collected into one error.
    """
    cells: dict[tuple[str, str], float] = {}
    periods: list[str] = []
    entities: list[str] = []
    bad_lines: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"period", "entity", "amount"} <= set(
            reader.fieldnames
        ):
            raise DataFormatError(
                f"expected header with period, entity, amount; got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            period = (row.get("period") or "").strip()
            entity = (row.get("entity") or "").strip()
            raw = (row.get("amount") or "").strip()
            try:
                amount = float(raw)
                if not np.isfinite(amount) or amount < 0 or not period or not entity:
                    raise ValueError
            except ValueError:
                bad_lines.append(lineno)
                continue
            if period not in periods:
                periods.append(period)
            if entity not in entities:
                entities.append(entity)
            cells[(period, entity)] = cells.get((period, entity), 0.0) + amount
    if bad_lines:
        raise DataFormatError(f"unparsable claim rows at lines {bad_lines}")
    periods.sort()
    if len(periods) < 3:
        raise DataFormatError(f"need at least 3 periods, found {len(periods)}")
    kept, dropped = [], []
    for entity in entities:
        if all((p, entity) in cells for p in periods):
            kept.append(entity)
        else:
            dropped.append(entity)
    if not kept:
        raise DataFormatError("every entity has missing periods")
    losses = np.array([[cells[(p, e)] for p in periods] for e in kept])
    return LossTable(tuple(kept), tuple(periods), losses, tuple(dropped))


def summarize(table: LossTable) -> SummaryStats:
    """Sample moments of the endowment series (endowment = -loss).

    Variances are unbiased (n-1 denominator). Constant series get
    correlation 0 against everything by convention and are flagged.
    """
    if len(table.periods) < 2:
        raise InputError("need at least 2 periods to estimate variances")
    endow = -table.losses
    means = endow.mean(axis=1)
    variances = endow.var(axis=1, ddof=1)
    n = len(table.entities)
    corr = np.eye(n)
    sd = np.sqrt(variances)
    flagged = tuple(e for e, s in zip(table.entities, sd) if s == 0.0)
    centered = endow - means[:, None]
    denom = len(table.periods) - 1
    for i in range(n):
        for j in range(i + 1, n):
            if sd[i] == 0.0 or sd[j] == 0.0:
                corr[i, j] = corr[j, i] = 0.0
            else:
                cov = float(centered[i] @ centered[j]) / denom
                corr[i, j] = corr[j, i] = cov / (sd[i] * sd[j])
    return SummaryStats(table.entities, means, variances, corr, flagged)


@dataclass(frozen=True)
class PoolReport:
    """Per-entity pool economics at a given confidence level and risk aversion."""

    entities: tuple[str, ...]
    expected_alloc: np.ndarray
    expected_cost: np.ndarray
    benefit: np.ndarray
    global_cost: float
    psd_projected: bool = False


def _as_psd_correlation(corr: np.ndarray) -> tuple[np.ndarray, bool]:
    w, v = np.linalg.eigh(corr)
    if w.min() >= 0.0:
        return corr, False
    if w.min() < -PSD_PROJECT_TOL:
        raise NotPositiveSemidefiniteError(
            f"correlation matrix has eigenvalue {w.min():.3e}, "
            f"beyond the {PSD_PROJECT_TOL} projection tolerance"
        )
    fixed = (v * np.maximum(w, 0.0)) @ v.T
    return fixed, True


def report(stats: SummaryStats, level: float, theta) -> PoolReport:
    """Gaussian pool economics from summary statistics.

    Correlation matrices that miss positive semidefiniteness by sampling
    noise (eigenvalues above -1e-8) are projected by zeroing the negative
    eigenvalues and flagged; anything worse is an error.
    """
    corr, projected = _as_psd_correlation(stats.correlation)
    sigma = np.sqrt(stats.variances)
    pool = GaussianPool(stats.means, corr * np.outer(sigma, sigma))
    rep = tradeoff(pool, level, theta)
    return PoolReport(
        entities=stats.entities,
        expected_alloc=rep.expected_alloc,
        expected_cost=rep.expected_cost,
        benefit=rep.benefit,
        global_cost=rep.global_cost,
        psd_projected=projected,
    )


# ---------------------------------------------------------------------------
# Stats JSON: {"entities": [...], "means": [...], "variances": [...],
#              "correlation": [[...]]} — entities optional
# ---------------------------------------------------------------------------


def stats_from_json(source) -> SummaryStats:
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if text.lstrip().startswith("{"):
            doc = json.loads(text)
        else:
            with open(text, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
    try:
        means = doc["means"]
        variances = doc["variances"]
        correlation = doc["correlation"]
    except (KeyError, TypeError) as exc:
        raise DataFormatError(
            f"stats JSON needs means, variances, correlation: {exc}"
        ) from exc
    entities = tuple(doc.get("entities", [f"agent_{i}" for i in range(len(means))]))
    try:
        return SummaryStats(entities, means, variances, correlation)
    except InputError as exc:
        raise DataFormatError(str(exc)) from exc


def stats_to_json(stats: SummaryStats) -> dict:
    return {
        "entities": list(stats.entities),
        "means": stats.means.tolist(),
        "variances": stats.variances.tolist(),
        "correlation": stats.correlation.tolist(),
    }
