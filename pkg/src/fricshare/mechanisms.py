"""Allocation rules on finite spaces and their frictional costs.

A rule maps an endowment profile and an information partition to a
(sub-)allocation of the aggregate endowment. Conditioning always happens on
the join of the supplied partition with the partition generated by the
aggregate, so knowing the realized aggregate is built into every rule.

Rules
-----
Cmrs
    Each agent receives the conditional expectation of their endowment under
    the base measure. Redistributes everything: zero frictional cost.
SubjectiveCmrs
    Same, under a user-supplied measure.
RobustCmrs
    Pointwise minimum of conditional expectations over a finite ambiguity
    set of measures, each of which must agree with the base measure on the
    conditioning blocks. A sub-allocation: the shortfall is the frictional
    cost.
LeftEs
    Worst case over all measures whose density w.r.t. the base is capped at
    ``1/level``; on finite spaces this equals the conditional left-tail
    expected shortfall at ``level``, computed directly per block.
MeanDeviation
    Conditional mean minus ``theta`` times a conditional deviation (standard
    deviation or mean absolute deviation about the block mean).
Qbrs
    Quantile-based redistribution through mixed generalized inverses of the
    marginal distribution functions, driven by the comonotone counterpart of
    the aggregate. Only defined without extra information.
Proportional
    Hands everyone an equal share of the aggregate. Useful as a control: it
    redistributes fully but ignores who contributed what.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FeasibilityError,
    InapplicableAxiomError,
    InputError,
    MeasureRestrictionError,
    QuantileSolveError,
    ZeroMassBlockError,
)
from .space import (
    FiniteSpace,
    Partition,
    as_measure,
    as_profile,
    cond_expect,
    join,
    sigma_of,
    verify_measure,
)

__all__ = [
    "Cmrs",
    "SubjectiveCmrs",
    "RobustCmrs",
    "LeftEs",
    "MeanDeviation",
    "Qbrs",
    "Proportional",
    "Rule",
    "Allocation",
    "CostReport",
    "DiscreteDist",
    "allocate",
    "cond_left_es",
    "robust_cmrs",
    "mean_dev_alloc",
    "qbrs_alloc",
    "quantile_mixed",
    "frictional_costs",
    "conditioning_partition",
    "rule_from_json",
    "rule_to_json",
    "rule_token",
    "parse_rule_token",
    "FULL_ALLOCATION_RULES",
]

FEAS_TOL = 1e-9

DEV_KINDS = ("cond_std_dev", "cond_mean_abs_dev")


def _readonly_vector(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Cmrs:
    kind = "cmrs"


@dataclass(frozen=True)
class SubjectiveCmrs:
    kind = "subjective_cmrs"
    q: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))


@dataclass(frozen=True)
class RobustCmrs:
    kind = "robust_cmrs"
    measures: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        if not self.measures:
            raise InputError("robust_cmrs needs a nonempty list of measures")
        object.__setattr__(
            self,
            "measures",
            tuple(tuple(float(v) for v in m) for m in self.measures),
        )


@dataclass(frozen=True)
class LeftEs:
    kind = "left_es"
    level: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.level <= 1.0:
            raise InputError(f"left_es level must be in (0, 1]; got {self.level!r}")


@dataclass(frozen=True)
class MeanDeviation:
    kind = "mean_deviation"
    dev: str = "cond_std_dev"
    theta: float = 0.0

    def __post_init__(self):
        if self.dev not in DEV_KINDS:
            raise InputError(f"dev must be one of {DEV_KINDS}; got {self.dev!r}")
        if self.theta < 0:
            raise InputError(f"theta must be nonnegative; got {self.theta!r}")


@dataclass(frozen=True)
class Qbrs:
    kind = "qbrs"


@dataclass(frozen=True)
class Proportional:
    kind = "proportional"


Rule = Cmrs | SubjectiveCmrs | RobustCmrs | LeftEs | MeanDeviation | Qbrs | Proportional

#: rules contractually redistributing the whole aggregate (zero cost)
FULL_ALLOCATION_RULES = (Cmrs, SubjectiveCmrs, Qbrs, Proportional)


@dataclass(frozen=True)
class Allocation:
    """Per-agent payoffs plus the information partition actually used.

    The entrywise sum of ``parts`` may fall short of the aggregate (that gap
    is the frictional cost) but must never exceed it beyond float slack.
    """

    parts: np.ndarray
    info: Partition

    def __post_init__(self):
        parts = np.asarray(self.parts, dtype=float)
        parts.setflags(write=False)
        object.__setattr__(self, "parts", parts)

    @property
    def n_agents(self) -> int:
        return self.parts.shape[0]

    def total(self) -> np.ndarray:
        return self.parts.sum(axis=0)


def _check_feasible(parts: np.ndarray, aggregate: np.ndarray) -> None:
    slack = FEAS_TOL * (1.0 + np.abs(aggregate))
    excess = parts.sum(axis=0) - aggregate
    bad = np.nonzero(excess > slack)[0]
    if bad.size:
        worst = int(bad[np.argmax(excess[bad])])
        raise FeasibilityError(worst, float(excess[worst]))


@dataclass(frozen=True)
class CostReport:
    """Global and pairwise frictional costs of an allocation.

    ``global_cost`` is the unallocated part of the aggregate, entrywise;
    ``pairwise[(i, j)]`` is what pair (i, j) jointly gave up. Negative float
    dust above -1e-9 is clamped to zero.
    """

    global_cost: np.ndarray
    pairwise: dict[tuple[int, int], np.ndarray]


def conditioning_partition(
    profile: np.ndarray, g: Partition, space: FiniteSpace
) -> Partition:
    """Join of the supplied information with the aggregate's partition."""
    aggregate = profile.sum(axis=0)
    return join(g, sigma_of(aggregate, space.value_tol))


def cond_left_es(
    x: np.ndarray, part: Partition, level: float, weights: np.ndarray
) -> np.ndarray:
    """Conditional left-tail expected shortfall of ``x`` at ``level``.

    On each block, sort the values ascending under the block-conditional
    distribution of ``weights``, accumulate mass up to ``level`` with a
    fractional weight on the boundary atom, and average. ``level = 1``
    returns the block mean; smaller levels average over the worst tail only.

    Equivalently: the minimum of the block-conditional mean over all
    reweightings with density capped at ``1/level`` that preserve block
    masses. The direct tail average is O(m log m) per block; the
    reweighting view is kept as a test oracle.
    """
    if not 0.0 < level <= 1.0:
        raise InputError(f"level must be in (0, 1]; got {level!r}")
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    out = np.empty_like(x)
    for k, idx in enumerate(part.block_arrays()):
        wb = w[idx]
        total = wb.sum()
        if total <= 0.0:
            raise ZeroMassBlockError(k, part.blocks[k])
        xb = x[idx]
        order = np.argsort(xb, kind="stable")
        xs = xb[order]
        ps = (wb / total)[order]
        cum = np.cumsum(ps)
        j = int(np.searchsorted(cum, level, side="left"))
        if j >= xs.size:  # float shortfall in the cumulative sum
            j = xs.size - 1
        below = cum[j - 1] if j > 0 else 0.0
        tail = float(np.dot(ps[:j], xs[:j]) + (level - below) * xs[j])
        out[idx] = tail / level
    return out


def _cond_deviation(
    x: np.ndarray, part: Partition, weights: np.ndarray, dev: str
) -> np.ndarray:
    m = cond_expect(x, part, weights)
    centered = x - m
    if dev == "cond_std_dev":
        return np.sqrt(np.maximum(cond_expect(centered**2, part, weights), 0.0))
    return cond_expect(np.abs(centered), part, weights)


# ---------------------------------------------------------------------------
# Discrete distributions and generalized inverses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDist:
    """A distribution on finitely many real atoms, support strictly increasing."""

    support: np.ndarray
    weights: np.ndarray
    cum: np.ndarray = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if s.ndim != 1 or s.shape != w.shape or s.size == 0:
            raise InputError("support and weights must be matching nonempty vectors")
        if np.any(np.diff(s) <= 0):
            raise InputError("support must be strictly increasing")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("weights must be nonnegative and sum to 1 within 1e-12")
        cum = np.cumsum(w)
        cum[-1] = 1.0
        for a in (s, w, cum):
            a.setflags(write=False)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "cum", cum)

    @classmethod
    def from_sample(cls, values, probs) -> "DiscreteDist":
        """Aggregate repeated values; drop zero-mass atoms."""
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        support, inverse = np.unique(values, return_inverse=True)
        weights = np.bincount(inverse, weights=probs, minlength=support.size)
        keep = weights > 0
        return cls(support[keep], weights[keep] / weights[keep].sum())

    @classmethod
    def from_cum_levels(cls, values, levels) -> "DiscreteDist":
        """Build from a nondecreasing step function at exact cdf levels.

        ``values[k]`` is the step value on the interval ending at
        ``levels[k]``; runs of equal values are merged. The supplied levels
        become the cdf verbatim, so later level lookups compare bit-equal
        floats instead of re-accumulated ones.
        """
        values = np.asarray(values, dtype=float)
        levels = np.asarray(levels, dtype=float)
        if np.any(np.diff(values) < 0):
            raise InputError("step values must be nondecreasing in the level")
        last = np.concatenate([values[1:] != values[:-1], [True]])
        support = values[last]
        cum = levels[last]
        weights = np.diff(np.concatenate([[0.0], cum]))
        dist = cls(support, weights)
        object.__setattr__(dist, "cum", _readonly_vector(cum))
        return dist

    def cdf(self, y: float) -> float:
        idx = int(np.searchsorted(self.support, y, side="right"))
        return float(self.cum[idx - 1]) if idx > 0 else 0.0

    # cdf levels accumulated along different summation orders drift by a few
    # ulp; comparing them raw would split mathematically equal levels, so all
    # level lookups carry this slack (atoms lighter than it are not resolved)
    LEVEL_TOL = 1e-12

    def left_quantile(self, p) -> np.ndarray | float:
        """inf of the support points whose cdf reaches p (p in (0, 1])."""
        idx = np.clip(
            np.searchsorted(self.cum, np.asarray(p) - self.LEVEL_TOL, side="left"),
            0,
            self.support.size - 1,
        )
        return self.support[idx]

    def right_quantile(self, p) -> np.ndarray | float:
        """sup of the reals whose cdf stays at or below p (p in [0, 1))."""
        idx = np.clip(
            np.searchsorted(self.cum, np.asarray(p) + self.LEVEL_TOL, side="right"),
            0,
            self.support.size - 1,
        )
        return self.support[idx]

    def mean(self) -> float:
        return float(np.dot(self.support, self.weights))


def quantile_mixed(d: DiscreteDist, p: float, alpha: float) -> float:
    """Mixed generalized inverse: interpolates the left and right inverses.

    Three cases: at p = 0 the right inverse (minimum of the support), at
    p = 1 the left inverse (maximum of the support), strictly inside a
    convex combination weighted by ``alpha``.
    """
    if not 0.0 <= p <= 1.0 or not 0.0 <= alpha <= 1.0:
        raise InputError("p and alpha must lie in [0, 1]")
    if p == 0.0:
        return float(d.right_quantile(0.0))
    if p == 1.0:
        return float(d.left_quantile(1.0))
    lo = float(d.left_quantile(p))
    hi = float(d.right_quantile(p))
    return alpha * lo + (1.0 - alpha) * hi


def comonotone_sum(marginals: list[DiscreteDist]) -> DiscreteDist:
    """Distribution of the sum of left-quantile transforms of one uniform draw.

    Realized on the merged grid of all marginal cdf levels: between two
    consecutive levels every marginal quantile is constant, so the sum is a
    step function whose exact law this returns. The merged levels are kept
    verbatim as the cdf (left quantiles are constant on (prev, level], so
    evaluating at the level itself names each interval exactly); this keeps
    quantile additivity across the marginals bit-exact.
    """
    levels = np.unique(np.concatenate([d.cum for d in marginals]))
    levels = levels[(levels > 0.0) & (levels <= 1.0)]
    # collapse float twins of one mathematical level (keep the group max, so
    # tolerant lookups see a single break per level)
    keep = np.concatenate([np.diff(levels) > DiscreteDist.LEVEL_TOL, [True]])
    levels = levels[keep]
    vals = np.zeros(levels.size)
    for d in marginals:
        vals += d.left_quantile(levels)
    return DiscreteDist.from_cum_levels(vals, levels)


def qbrs_alloc(profile: np.ndarray, space: FiniteSpace) -> Allocation:
    """Quantile-based redistribution of the aggregate (no extra information).

    For each realized aggregate value s, find the cdf level p of s under the
    comonotone counterpart of the aggregate, solve the mixing weight that
    reproduces s from the counterpart's left/right quantiles at p, and hand
    every agent their own mixed quantile at that level. Comonotone inputs
    are fixed points; the output always sums exactly to the aggregate.
    """
    profile = np.asarray(profile, dtype=float)
    marginals = [
        DiscreteDist.from_sample(profile[i], space.probs)
        for i in range(profile.shape[0])
    ]
    counter = comonotone_sum(marginals)
    aggregate = profile.sum(axis=0)
    parts = np.empty_like(profile)
    for w, s_raw in enumerate(aggregate):
        s = float(s_raw)
        # snap to the counterpart's support so on-atom values hit their level
        idx = int(np.searchsorted(counter.support, s))
        for cand in (idx - 1, idx):
            if 0 <= cand < counter.support.size and abs(
                counter.support[cand] - s
            ) <= 1e-9 * (1.0 + abs(s)):
                s = float(counter.support[cand])
                break
        p = counter.cdf(s)
        if p <= 0.0:
            raise QuantileSolveError(s, p)
        if p >= 1.0:
            top = counter.support[-1]
            if abs(s - top) > 1e-9 * (1.0 + abs(s)):
                raise QuantileSolveError(s, p)
            parts[:, w] = [d.support[-1] for d in marginals]
            continue
        lo = float(counter.left_quantile(p))
        hi = float(counter.right_quantile(p))
        if hi == lo:
            alpha = 1.0
        else:
            alpha = (hi - s) / (hi - lo)
            if alpha < -1e-9 or alpha > 1.0 + 1e-9:
                raise QuantileSolveError(s, p)
            alpha = min(1.0, max(0.0, alpha))
        for i, d in enumerate(marginals):
            parts[i, w] = alpha * float(d.left_quantile(p)) + (1.0 - alpha) * float(
                d.right_quantile(p)
            )
    _check_feasible(parts, aggregate)
    return Allocation(parts, sigma_of(aggregate, space.value_tol))


def robust_cmrs(
    profile: np.ndarray,
    g: Partition,
    measures,
    space: FiniteSpace,
    restriction_tol: float = 1e-9,
) -> Allocation:
    """Worst-case conditional mean over an ambiguity set of measures.

    Every measure must preserve the mass of every conditioning block (the
    same set serves all agents). The output is the agentwise, pointwise
    minimum of the conditional expectations, a sub-allocation whose
    shortfall is the frictional cost.
    """
    gx = conditioning_partition(profile, g, space)
    mats = []
    for mi, q in enumerate(measures):
        q = as_measure(q, space.n_outcomes)
        if not verify_measure(q, gx, space, restriction_tol):
            qb = np.bincount(gx.labels, weights=q, minlength=gx.n_blocks)
            pb = np.bincount(gx.labels, weights=space.probs, minlength=gx.n_blocks)
            k = int(np.argmax(np.abs(qb - pb)))
            raise MeasureRestrictionError(mi, k, float(abs(qb[k] - pb[k])))
        mats.append(
            np.stack(
                [cond_expect(profile[i], gx, q) for i in range(profile.shape[0])]
            )
        )
    parts = np.minimum.reduce(mats)
    _check_feasible(parts, profile.sum(axis=0))
    return Allocation(parts, gx)


def mean_dev_alloc(
    profile: np.ndarray,
    g: Partition,
    dev: str,
    theta: float,
    space: FiniteSpace,
) -> Allocation:
    """Conditional mean minus a loading on the conditional deviation."""
    if theta < 0:
        raise InputError("theta must be nonnegative")
    gx = conditioning_partition(profile, g, space)
    parts = np.stack(
        [
            cond_expect(profile[i], gx, space.probs)
            - theta * _cond_deviation(profile[i], gx, space.probs, dev)
            for i in range(profile.shape[0])
        ]
    )
    _check_feasible(parts, profile.sum(axis=0))
    return Allocation(parts, gx)


def allocate(
    rule: Rule, profile: np.ndarray, g: Partition, space: FiniteSpace
) -> Allocation:
    """Evaluate an allocation rule on a profile with information ``g``."""
    profile = as_profile(profile, space.n_outcomes)
    if g.n_outcomes != space.n_outcomes:
        raise InputError("information partition lives on a different space")
    if isinstance(rule, Qbrs):
        if not g.is_trivial:
            raise InapplicableAxiomError(
                "the quantile-based rule is only defined without extra information"
            )
        return qbrs_alloc(profile, space)
    if isinstance(rule, RobustCmrs):
        return robust_cmrs(profile, g, [np.asarray(m) for m in rule.measures], space)
    if isinstance(rule, MeanDeviation):
        return mean_dev_alloc(profile, g, rule.dev, rule.theta, space)

    gx = conditioning_partition(profile, g, space)
    n = profile.shape[0]
    if isinstance(rule, Cmrs):
        parts = np.stack([cond_expect(profile[i], gx, space.probs) for i in range(n)])
    elif isinstance(rule, SubjectiveCmrs):
        q = as_measure(np.asarray(rule.q), space.n_outcomes)
        parts = np.stack([cond_expect(profile[i], gx, q) for i in range(n)])
    elif isinstance(rule, LeftEs):
        parts = np.stack(
            [cond_left_es(profile[i], gx, rule.level, space.probs) for i in range(n)]
        )
    elif isinstance(rule, Proportional):
        parts = np.tile(profile.sum(axis=0) / n, (n, 1))
    else:
        raise InputError(f"unknown rule {rule!r}")
    _check_feasible(parts, profile.sum(axis=0))
    return Allocation(parts, gx)


def frictional_costs(profile: np.ndarray, alloc: Allocation) -> CostReport:
    """Unallocated aggregate (global) and per-pair givebacks (local)."""
    profile = np.asarray(profile, dtype=float)
    if profile.shape != alloc.parts.shape:
        raise InputError(
            f"profile shape {profile.shape} does not match allocation "
            f"{alloc.parts.shape}"
        )
    aggregate = profile.sum(axis=0)
    gap = aggregate - alloc.total()
    slack = FEAS_TOL * (1.0 + np.abs(aggregate))
    bad = np.nonzero(gap < -slack)[0]
    if bad.size:
        worst = int(bad[np.argmin(gap[bad])])
        raise FeasibilityError(worst, float(-gap[worst]))
    gap = np.where(gap < 0.0, 0.0, gap)
    n = profile.shape[0]
    pairwise = {
        (i, j): profile[i] + profile[j] - alloc.parts[i] - alloc.parts[j]
        for i in range(n)
        for j in range(i + 1, n)
    }
    return CostReport(gap, pairwise)


# ---------------------------------------------------------------------------
# Rule serialization: JSON documents and "name:param" shorthand
# ---------------------------------------------------------------------------


def rule_to_json(rule: Rule) -> dict:
    if isinstance(rule, Cmrs):
        return {"kind": "cmrs"}
    if isinstance(rule, SubjectiveCmrs):
        return {"kind": "subjective_cmrs", "q": list(rule.q)}
    if isinstance(rule, RobustCmrs):
        return {"kind": "robust_cmrs", "measures": [list(m) for m in rule.measures]}
    if isinstance(rule, LeftEs):
        return {"kind": "left_es", "lambda": rule.level}
    if isinstance(rule, MeanDeviation):
        return {"kind": "mean_deviation", "dev": rule.dev, "theta": rule.theta}
    if isinstance(rule, Qbrs):
        return {"kind": "qbrs"}
    if isinstance(rule, Proportional):
        return {"kind": "proportional"}
    raise InputError(f"unknown rule {rule!r}")


_RULE_FIELDS = {
    "cmrs": set(),
    "subjective_cmrs": {"q"},
    "robust_cmrs": {"measures"},
    "left_es": {"lambda", "level"},
    "mean_deviation": {"dev", "theta"},
    "qbrs": set(),
    "proportional": set(),
}


def rule_from_json(doc: dict) -> Rule:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InputError("rule JSON must be an object with a 'kind' field")
    kind = doc["kind"]
    if kind not in _RULE_FIELDS:
        raise InputError(f"unknown rule kind {kind!r}")
    extra = {k for k in doc if k != "kind"} - _RULE_FIELDS[kind]
    if extra:
        raise InputError(f"unknown fields {sorted(extra)} for rule {kind!r}")
    try:
        if kind == "cmrs":
            return Cmrs()
        if kind == "subjective_cmrs":
            return SubjectiveCmrs(q=tuple(doc["q"]))
        if kind == "robust_cmrs":
            return RobustCmrs(measures=tuple(tuple(m) for m in doc["measures"]))
        if kind == "left_es":
            level = doc.get("lambda", doc.get("level"))
            if level is None:
                raise InputError("left_es needs a 'lambda' field")
            return LeftEs(level=float(level))
        if kind == "mean_deviation":
            return MeanDeviation(
                dev=doc.get("dev", "cond_std_dev"), theta=float(doc.get("theta", 0.0))
            )
        if kind == "qbrs":
            return Qbrs()
        return Proportional()
    except (KeyError, TypeError) as exc:
        raise InputError(f"bad rule JSON for kind {kind!r}: {exc}") from exc


def rule_token(rule: Rule) -> str:
    """Short stable identifier, e.g. 'left_es:0.9'. Inverse of parse_rule_token
    for parameter-light rules; parameter-heavy ones fall back to JSON."""
    if isinstance(rule, LeftEs):
        return f"left_es:{rule.level:g}"
    if isinstance(rule, MeanDeviation):
        tag = "std" if rule.dev == "cond_std_dev" else "mad"
        return f"mean_deviation:{tag}:{rule.theta:g}"
    if isinstance(rule, (Cmrs, Qbrs, Proportional)):
        return rule.kind
    return json.dumps(rule_to_json(rule), sort_keys=True)


def parse_rule_token(token: str) -> Rule:
    """Parse inline JSON or 'name[:param[:param]]' shorthand."""
    token = token.strip()
    if token.startswith("{"):
        return rule_from_json(json.loads(token))
    parts = token.split(":")
    name = parts[0]
    if name == "cmrs" and len(parts) == 1:
        return Cmrs()
    if name == "qbrs" and len(parts) == 1:
        return Qbrs()
    if name == "proportional" and len(parts) == 1:
        return Proportional()
    if name == "left_es" and len(parts) == 2:
        return LeftEs(level=float(parts[1]))
    if name == "mean_deviation" and len(parts) == 3:
        dev = {"std": "cond_std_dev", "mad": "cond_mean_abs_dev"}.get(parts[1])
        if dev is None:
            raise InputError(f"unknown deviation tag {parts[1]!r} (use std or mad)")
        return MeanDeviation(dev=dev, theta=float(parts[2]))
    raise InputError(f"cannot parse rule token {token!r}")
