"""Randomized, seeded verification of allocation-rule laws.

Each law check draws inputs satisfying the law's hypothesis, evaluates both
sides through the public allocation API, and compares within a tolerance.
A failure is certified by a stored counterexample that can be re-verified
outside the harness; a pass only means the law survived the requested number
of trials.

Generator notes
---------------
Values are drawn from a dyadic lattice (multiples of 1/64). Sums, transfers,
merges, and dyadic convex mixes of lattice values are exact in binary
floating point, so the aggregate's tie pattern — and with it the
conditioning partition — is preserved exactly across the hypothetical moves
each law compares. Without this, float dust in recomputed aggregates would
split ties and manufacture spurious counterexamples. A quarter of entries
are zeroed and a quarter of trials duplicate outcome columns so the zero-
and tie-sensitive hypotheses actually bind.

Per-trial randomness derives from (seed, law, rule, trial-index), so results
are identical under any evaluation order or parallel schedule.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import InapplicableAxiomError, InputError
from .mechanisms import (
    Qbrs,
    Rule,
    allocate,
    conditioning_partition,
    robust_cmrs,
    rule_token,
)
from .space import FiniteSpace, Partition, cond_expect, is_measurable

__all__ = [
    "AXIOMS",
    "CheckConfig",
    "CheckResult",
    "check",
    "check_cost_convexity",
    "comparison_matrix",
    "reverify_counterexample",
    "risk_sharing_properties",
    "RISK_SHARING_PROPERTIES",
    "block_preserving_measures",
    "adapted_robust_rule",
    "matrix_text",
]

AXIOMS = (
    "IF",
    "AA",
    "OA",
    "FP",
    "SI",
    "ZP",
    "IA",
    "IB",
    "FPstar",
    "Com",
    "RF",
    "AF",
    "UI",
    "CostConvexity",
)
_AXIOM_INDEX = {a: k for k, a in enumerate(AXIOMS)}

RISK_SHARING_PROPERTIES = (
    "PositiveHomogeneity",
    "Normalization",
    "Constancy",
    "Translativity",
    "NoRipoff",
)

_GRID = 64  # lattice denominator; see module notes


@dataclass(frozen=True)
class CheckConfig:
    """Trial budget and input-generation parameters for law checks."""

    trials: int = 200
    seed: int = 0
    space_size: int = 8
    n_agents: int = 3
    value_range: tuple[float, float] = (-8.0, 8.0)
    tol: float = 1e-9

    def __post_init__(self):
        if self.trials < 1:
            raise InputError("trials must be >= 1")
        if self.space_size < 4:
            raise InputError("space_size must be >= 4")
        if self.n_agents < 3:
            raise InputError("n_agents must be >= 3")
        if self.tol <= 0:
            raise InputError("tol must be positive")
        lo, hi = self.value_range
        if not lo < hi:
            raise InputError("value_range must be a nonempty interval")


@dataclass
class CheckResult:
    """Outcome of one law check for one rule.

    ``passed=False`` comes with a counterexample dict holding every input
    needed to reproduce the violation independently; ``passed=True`` records
    only that all trials survived.
    """

    axiom: str
    rule: str
    passed: bool
    trials_run: int
    counterexample: dict | None = None
    note: str = ""

    def cell(self) -> str:
        return "pass" if self.passed else "fail"


def _resolve(rule):
    """Return (allocator callable, stable token) for a rule or callable."""
    if callable(rule) and not isinstance(rule, type):
        token = getattr(rule, "token", None) or repr(rule)
        trivial_only = bool(getattr(rule, "trivial_g_only", False))
        return rule, token, trivial_only
    token = rule_token(rule)
    fn = lambda profile, g, space: allocate(rule, profile, g, space).parts
    return fn, token, isinstance(rule, Qbrs)


def _trial_rng(cfg: CheckConfig, axiom: str, token: str, trial: int):
    ent = [
        cfg.seed & 0xFFFFFFFFFFFFFFFF,
        _AXIOM_INDEX.get(axiom, 0) + zlib.crc32(axiom.encode()),
        zlib.crc32(token.encode()),
        trial,
    ]
    return np.random.default_rng(np.random.SeedSequence(ent))


def _draw_space(cfg: CheckConfig, rng) -> FiniteSpace:
    w = rng.integers(1, 9, cfg.space_size).astype(float)
    return FiniteSpace(w / w.sum())


def _draw_partition(cfg: CheckConfig, rng, trivial_only: bool) -> Partition:
    m = cfg.space_size
    if trivial_only or rng.random() < 0.5:
        return Partition.trivial(m)
    k = int(rng.integers(2, 4))
    labels = rng.integers(0, k, m)
    return Partition.from_labels(labels)


def _lattice(cfg: CheckConfig, rng, shape):
    lo, hi = cfg.value_range
    raw = rng.integers(round(lo * _GRID), round(hi * _GRID) + 1, shape)
    return raw.astype(float) / _GRID


def _draw_profile(cfg: CheckConfig, rng, duplicate=True) -> np.ndarray:
    vals = _lattice(cfg, rng, (cfg.n_agents, cfg.space_size))
    vals[rng.random(vals.shape) < 0.25] = 0.0
    if duplicate and rng.random() < 0.25:
        _duplicate_columns(vals, rng)
    return vals


def _duplicate_columns(vals: np.ndarray, rng, within: Partition | None = None):
    m = vals.shape[1]
    n_pairs = int(rng.integers(1, max(2, m // 2)))
    for _ in range(n_pairs):
        if within is None:
            a, b = rng.choice(m, size=2, replace=False)
        else:
            blk = within.blocks[int(rng.integers(0, within.n_blocks))]
            if len(blk) < 2:
                continue
            a, b = rng.choice(len(blk), size=2, replace=False)
            a, b = blk[a], blk[b]
        vals[:, b] = vals[:, a]


def _distinct_pair(n: int, rng) -> tuple[int, int]:
    i, j = rng.choice(n, size=2, replace=False)
    return int(i), int(j)


def _witness(axiom, space, g, profile, violation, **extra) -> dict:
    w = {
        "axiom": axiom,
        "space_probs": space.probs.tolist(),
        "g_blocks": [list(b) for b in g.blocks],
        "profile": np.asarray(profile).tolist(),
        "violation": float(violation),
    }
    w.update(extra)
    return w


# ---------------------------------------------------------------------------
# Per-law trial bodies: return a counterexample dict or None
# ---------------------------------------------------------------------------


def _trial_IF(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng, duplicate=False)
    i, j = _distinct_pair(cfg.n_agents, rng)
    lift = _lattice(cfg, rng, cfg.space_size)
    prof[i] = prof[j] + np.abs(lift)
    if rng.random() < 0.25:
        _duplicate_columns(prof, rng)
    parts = alloc(prof, g, space)
    gap = parts[j] - parts[i]
    k = int(np.argmax(gap))
    if gap[k] > cfg.tol:
        return _witness(
            "IF", space, g, prof, gap[k], i=i, j=j, outcome=k,
            h_i=float(parts[i, k]), h_j=float(parts[j, k]),
        )
    return None


def _trial_AA(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng)
    perm = rng.permutation(cfg.n_agents)
    base = alloc(prof, g, space)
    permuted = alloc(prof[perm], g, space)
    diff = np.abs(permuted - base[perm])
    if diff.max() > cfg.tol:
        i, k = np.unravel_index(int(np.argmax(diff)), diff.shape)
        return _witness(
            "AA", space, g, prof, diff.max(), permutation=perm.tolist(),
            agent=int(i), outcome=int(k),
        )
    return None


def _collapse(prof: np.ndarray, i: int, j: int) -> np.ndarray:
    """Profile holding agent i's endowment at i, the rest of the sum at j."""
    out = np.zeros_like(prof)
    out[i] = prof[i]
    out[j] = prof.sum(axis=0) - prof[i]
    return out


def _trial_OA(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng)
    i, j = _distinct_pair(cfg.n_agents, rng)
    moved = prof.copy()
    moved[i] = prof[i] + prof[j]
    moved[j] = 0.0
    base = alloc(prof, g, space)
    after = alloc(moved, g, space)
    others = [k for k in range(cfg.n_agents) if k not in (i, j)]
    diff = np.abs(after[others] - base[others])
    if diff.max() > cfg.tol:
        a, k = np.unravel_index(int(np.argmax(diff)), diff.shape)
        return _witness(
            "OA", space, g, prof, diff.max(), i=i, j=j, kind="transfer",
            agent=int(others[a]), outcome=int(k),
        )
    # derived two-party identity: own allocation only sees (X_i, total)
    a = int(rng.integers(0, cfg.n_agents))
    b = (a + 1) % cfg.n_agents
    solo = alloc(_collapse(prof, a, b), g, space)
    diff = np.abs(solo[a] - base[a])
    if diff.max() > cfg.tol:
        return _witness(
            "OA", space, g, prof, diff.max(), i=a, j=b, kind="collapse",
            agent=a, outcome=int(np.argmax(diff)),
        )
    return None


def _trial_FP(alloc, cfg, rng, trivial_only):
    # merged-pair form: pooling two endowments never shrinks their joint share
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    split = _draw_profile(cfg, rng)
    i, j = _distinct_pair(cfg.n_agents, rng)
    merged = split.copy()
    merged[i] = split[i] + split[j]
    merged[j] = 0.0
    parts_split = alloc(split, g, space)
    parts_merged = alloc(merged, g, space)
    gap = (parts_split[i] + parts_split[j]) - (parts_merged[i] + parts_merged[j])
    k = int(np.argmax(gap))
    if gap[k] > cfg.tol:
        return _witness("FP", space, g, split, gap[k], i=i, j=j, outcome=k)
    return None


def _trial_SI(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng, duplicate=False)
    i, j = _distinct_pair(cfg.n_agents, rng)
    prof[j] = 0.0
    if rng.random() < 0.25:
        _duplicate_columns(prof, rng)
    alpha = float(rng.integers(0, _GRID + 1)) / _GRID
    shifted = prof.copy()
    shifted[j] = alpha * prof[i]
    shifted[i] = prof[i] - alpha * prof[i]
    base = alloc(prof, g, space)
    after = alloc(shifted, g, space)
    diff = np.abs(after[j] - alpha * base[i])
    if diff.max() > cfg.tol:
        return _witness(
            "SI", space, g, prof, diff.max(), i=i, j=j, alpha=alpha,
            outcome=int(np.argmax(diff)),
        )
    return None


def _trial_ZP(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng)
    i = int(rng.integers(0, cfg.n_agents))
    prof[i] = 0.0
    parts = alloc(prof, g, space)
    diff = np.abs(parts[i])
    if diff.max() > cfg.tol:
        return _witness(
            "ZP", space, g, prof, diff.max(), i=i, outcome=int(np.argmax(diff))
        )
    return None


def _trial_IA(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng)
    parts = alloc(prof, g, space)
    gx = conditioning_partition(prof, g, space)
    for i in range(cfg.n_agents):
        if not is_measurable(parts[i], gx, cfg.tol):
            spreads = [
                float(parts[i][list(b)].max() - parts[i][list(b)].min())
                for b in gx.blocks
            ]
            b = int(np.argmax(spreads))
            return _witness(
                "IA", space, g, prof, max(spreads), i=i, block=list(gx.blocks[b])
            )
    return None


def _trial_IB(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng, duplicate=False)
    i = int(rng.integers(0, cfg.n_agents))
    if rng.random() < 0.3:
        prof[i] = float(rng.integers(-4 * _GRID, 4 * _GRID)) / _GRID
    else:
        per_block = _lattice(cfg, rng, g.n_blocks)
        prof[i] = per_block[g.labels]
    # ties only inside g-blocks keep the hypothesis row g-measurable
    if rng.random() < 0.5:
        _duplicate_columns(prof, rng, within=g)
    gx = conditioning_partition(prof, g, space)
    assert is_measurable(prof[i], gx, 0.0)
    parts = alloc(prof, g, space)
    diff = np.abs(parts[i] - prof[i])
    if diff.max() > cfg.tol:
        return _witness(
            "IB", space, g, prof, diff.max(), i=i, outcome=int(np.argmax(diff))
        )
    return None


def _trial_FPstar(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng, duplicate=False)
    i, j = _distinct_pair(cfg.n_agents, rng)
    prof[j] = 0.0
    if rng.random() < 0.25:
        _duplicate_columns(prof, rng)
    transfer = _lattice(cfg, rng, cfg.space_size)
    shifted = prof.copy()
    shifted[j] = transfer
    shifted[i] = prof[i] - transfer
    base = alloc(prof, g, space)
    after = alloc(shifted, g, space)
    cost_base = prof[i] + prof[j] - base[i] - base[j]
    cost_after = shifted[i] + shifted[j] - after[i] - after[j]
    diff = np.abs(cost_after - cost_base)
    if diff.max() > cfg.tol:
        return _witness(
            "FPstar", space, g, prof, diff.max(), i=i, j=j,
            transfer=transfer.tolist(), outcome=int(np.argmax(diff)),
        )
    return None


def _trial_Com(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng)
    parts = alloc(prof, g, space)
    n = cfg.n_agents
    for i in range(n):
        di = parts[i][:, None] - parts[i][None, :]
        for j in range(i + 1, n):
            dj = parts[j][:, None] - parts[j][None, :]
            prod = di * dj
            if prod.min() < -cfg.tol:
                a, b = np.unravel_index(int(np.argmin(prod)), prod.shape)
                return _witness(
                    "Com", space, g, prof, -prod.min(), i=i, j=j,
                    outcomes=[int(a), int(b)],
                )
    return None


def _trial_RF(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng)
    parts = alloc(prof, g, space)
    excess = parts.max(axis=1) - prof.max(axis=1)
    i = int(np.argmax(excess))
    if excess[i] > cfg.tol:
        return _witness(
            "RF", space, g, prof, excess[i], i=i,
            outcome=int(np.argmax(parts[i])),
        )
    return None


def _trial_AF(alloc, cfg, rng, trivial_only):
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng)
    parts = alloc(prof, g, space)
    gaps = np.abs((parts - prof) @ space.probs)
    i = int(np.argmax(gaps))
    if gaps[i] > cfg.tol:
        return _witness("AF", space, g, prof, gaps[i], i=i)
    return None


def _stop_loss_grid(x: np.ndarray, h: np.ndarray, n_points: int = 41) -> np.ndarray:
    lo = min(x.min(), h.min())
    hi = max(x.max(), h.max())
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n_points)


def _trial_UI(alloc, cfg, rng, trivial_only):
    # convex-order improvement: equal means plus stop-loss dominance on a grid
    space = _draw_space(cfg, rng)
    g = _draw_partition(cfg, rng, trivial_only)
    prof = _draw_profile(cfg, rng)
    parts = alloc(prof, g, space)
    p = space.probs
    for i in range(cfg.n_agents):
        mean_gap = abs(float((parts[i] - prof[i]) @ p))
        if mean_gap > cfg.tol:
            return _witness(
                "UI", space, g, prof, mean_gap, i=i, kind="mean_gap"
            )
        for t in _stop_loss_grid(prof[i], parts[i]):
            gap = float(
                np.maximum(parts[i] - t, 0.0) @ p - np.maximum(prof[i] - t, 0.0) @ p
            )
            if gap > cfg.tol:
                return _witness(
                    "UI", space, g, prof, gap, i=i, kind="stop_loss", t=float(t)
                )
    return None


_TRIALS = {
    "IF": _trial_IF,
    "AA": _trial_AA,
    "OA": _trial_OA,
    "FP": _trial_FP,
    "SI": _trial_SI,
    "ZP": _trial_ZP,
    "IA": _trial_IA,
    "IB": _trial_IB,
    "FPstar": _trial_FPstar,
    "Com": _trial_Com,
    "RF": _trial_RF,
    "AF": _trial_AF,
    "UI": _trial_UI,
}

_PASS_NOTE = "survived trials (randomized check, not a proof)"
_FAIL_NOTE = "certified by stored counterexample"


def check(rule, axiom: str, cfg: CheckConfig) -> CheckResult:
    """Run one law check; fail fast with the first counterexample found."""
    if axiom == "CostConvexity":
        return check_cost_convexity(rule, cfg)
    if axiom not in _TRIALS:
        raise InapplicableAxiomError(f"unknown law {axiom!r}")
    alloc, token, trivial_only = _resolve(rule)
    body = _TRIALS[axiom]
    for t in range(cfg.trials):
        rng = _trial_rng(cfg, axiom, token, t)
        witness = body(alloc, cfg, rng, trivial_only)
        if witness is not None:
            return CheckResult(axiom, token, False, t + 1, witness, _FAIL_NOTE)
    return CheckResult(axiom, token, True, cfg.trials, None, _PASS_NOTE)


def check_cost_convexity(rule, cfg: CheckConfig) -> CheckResult:
    """Global and pairwise costs are convex across same-sum profiles."""
    alloc, token, trivial_only = _resolve(rule)
    for t in range(cfg.trials):
        rng = _trial_rng(cfg, "CostConvexity", token, t)
        space = _draw_space(cfg, rng)
        g = _draw_partition(cfg, rng, trivial_only)
        x = _draw_profile(cfg, rng)
        total = x.sum(axis=0)
        y = np.empty_like(x)
        y[:-1] = _lattice(cfg, rng, (cfg.n_agents - 1, cfg.space_size))
        y[-1] = total - y[:-1].sum(axis=0)
        lam = float(rng.integers(0, 17)) / 16.0
        z = lam * x + (1.0 - lam) * y
        px, py, pz = (alloc(p, g, space) for p in (x, y, z))

        def costs(prof, parts):
            glob = prof.sum(axis=0) - parts.sum(axis=0)
            pair = {
                (i, j): prof[i] + prof[j] - parts[i] - parts[j]
                for i in range(cfg.n_agents)
                for j in range(i + 1, cfg.n_agents)
            }
            return glob, pair

        gx_, prx = costs(x, px)
        gy_, pry = costs(y, py)
        gz_, prz = costs(z, pz)
        gap = gz_ - (lam * gx_ + (1.0 - lam) * gy_)
        if gap.max() > cfg.tol:
            return CheckResult(
                "CostConvexity", token, False, t + 1,
                _witness(
                    "CostConvexity", space, g, x, gap.max(),
                    profile_y=y.tolist(), lam=lam, scope="global",
                    outcome=int(np.argmax(gap)),
                ),
                _FAIL_NOTE,
            )
        for key in prx:
            gap = prz[key] - (lam * prx[key] + (1.0 - lam) * pry[key])
            if gap.max() > cfg.tol:
                return CheckResult(
                    "CostConvexity", token, False, t + 1,
                    _witness(
                        "CostConvexity", space, g, x, gap.max(),
                        profile_y=y.tolist(), lam=lam, scope="pairwise",
                        i=key[0], j=key[1], outcome=int(np.argmax(gap)),
                    ),
                    _FAIL_NOTE,
                )
    return CheckResult("CostConvexity", token, True, cfg.trials, None, _PASS_NOTE)


def comparison_matrix(rules, axioms, cfg: CheckConfig) -> dict:
    """Full rules-by-laws grid; deterministic given the seed."""
    results = {}
    for rule in rules:
        _, token, _ = _resolve(rule)
        for axiom in axioms:
            results[(token, axiom)] = check(rule, axiom, cfg)
    return results


def matrix_text(results: dict, rules, axioms) -> str:
    tokens = []
    for rule in rules:
        _, token, _ = _resolve(rule)
        tokens.append(token)
    width = max(len(t) for t in tokens) + 2
    lines = [" " * width + "  ".join(f"{a:>6}" for a in axioms)]
    for token in tokens:
        cells = []
        for a in axioms:
            r = results[(token, a)]
            cells.append(f"{'✓' if r.passed else '✗':>6}")
        lines.append(f"{token:<{width}}" + "  ".join(cells))
    lines.append("✓ = survived all trials; ✗ = counterexample found")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Independent re-verification of stored counterexamples
# ---------------------------------------------------------------------------


def reverify_counterexample(rule, witness: dict, tol: float = 1e-9) -> float:
    """Recompute a stored counterexample's violation from its raw inputs.

    Uses the public allocation API directly (no generators, no trial loop),
    so a round-tripped witness certifies the failure on its own. Returns the
    violation magnitude; anything above ``tol`` confirms the stored verdict.
    """
    alloc, _, _ = _resolve(rule)
    space = FiniteSpace(np.asarray(witness["space_probs"]))
    g = Partition(witness["g_blocks"], space.n_outcomes)
    prof = np.asarray(witness["profile"], dtype=float)
    axiom = witness["axiom"]
    if axiom == "IF":
        parts = alloc(prof, g, space)
        return float(np.max(parts[witness["j"]] - parts[witness["i"]]))
    if axiom == "AA":
        perm = np.asarray(witness["permutation"], dtype=int)
        base = alloc(prof, g, space)
        permuted = alloc(prof[perm], g, space)
        return float(np.max(np.abs(permuted - base[perm])))
    if axiom == "OA":
        i, j = witness["i"], witness["j"]
        base = alloc(prof, g, space)
        if witness["kind"] == "transfer":
            moved = prof.copy()
            moved[i] = prof[i] + prof[j]
            moved[j] = 0.0
            after = alloc(moved, g, space)
            others = [k for k in range(prof.shape[0]) if k not in (i, j)]
            return float(np.max(np.abs(after[others] - base[others])))
        solo = alloc(_collapse(prof, i, j), g, space)
        return float(np.max(np.abs(solo[i] - base[i])))
    if axiom == "FP":
        i, j = witness["i"], witness["j"]
        merged = prof.copy()
        merged[i] = prof[i] + prof[j]
        merged[j] = 0.0
        ps = alloc(prof, g, space)
        pm = alloc(merged, g, space)
        return float(np.max((ps[i] + ps[j]) - (pm[i] + pm[j])))
    if axiom == "SI":
        i, j, alpha = witness["i"], witness["j"], witness["alpha"]
        shifted = prof.copy()
        shifted[j] = alpha * prof[i]
        shifted[i] = prof[i] - alpha * prof[i]
        base = alloc(prof, g, space)
        after = alloc(shifted, g, space)
        return float(np.max(np.abs(after[j] - alpha * base[i])))
    if axiom == "ZP":
        parts = alloc(prof, g, space)
        return float(np.max(np.abs(parts[witness["i"]])))
    if axiom == "IA":
        parts = alloc(prof, g, space)
        gx = conditioning_partition(prof, g, space)
        i = witness["i"]
        return max(
            float(parts[i][list(b)].max() - parts[i][list(b)].min())
            for b in gx.blocks
        )
    if axiom == "IB":
        parts = alloc(prof, g, space)
        i = witness["i"]
        return float(np.max(np.abs(parts[i] - prof[i])))
    if axiom == "FPstar":
        i, j = witness["i"], witness["j"]
        transfer = np.asarray(witness["transfer"], dtype=float)
        shifted = prof.copy()
        shifted[j] = transfer
        shifted[i] = prof[i] - transfer
        base = alloc(prof, g, space)
        after = alloc(shifted, g, space)
        cost_base = prof[i] + prof[j] - base[i] - base[j]
        cost_after = shifted[i] + shifted[j] - after[i] - after[j]
        return float(np.max(np.abs(cost_after - cost_base)))
    if axiom == "Com":
        parts = alloc(prof, g, space)
        i, j = witness["i"], witness["j"]
        a, b = witness["outcomes"]
        return float(
            -(parts[i, a] - parts[i, b]) * (parts[j, a] - parts[j, b])
        )
    if axiom == "RF":
        parts = alloc(prof, g, space)
        i = witness["i"]
        return float(parts[i].max() - prof[i].max())
    if axiom == "AF":
        parts = alloc(prof, g, space)
        i = witness["i"]
        return float(abs((parts[i] - prof[i]) @ space.probs))
    if axiom == "UI":
        parts = alloc(prof, g, space)
        i = witness["i"]
        if witness["kind"] == "mean_gap":
            return float(abs((parts[i] - prof[i]) @ space.probs))
        t = witness["t"]
        return float(
            np.maximum(parts[i] - t, 0.0) @ space.probs
            - np.maximum(prof[i] - t, 0.0) @ space.probs
        )
    if axiom == "CostConvexity":
        y = np.asarray(witness["profile_y"], dtype=float)
        lam = witness["lam"]
        z = lam * prof + (1.0 - lam) * y
        px, py, pz = (alloc(p, g, space) for p in (prof, y, z))
        if witness["scope"] == "global":
            cx = prof.sum(axis=0) - px.sum(axis=0)
            cy = y.sum(axis=0) - py.sum(axis=0)
            cz = z.sum(axis=0) - pz.sum(axis=0)
        else:
            i, j = witness["i"], witness["j"]
            cx = prof[i] + prof[j] - px[i] - px[j]
            cy = y[i] + y[j] - py[i] - py[j]
            cz = z[i] + z[j] - pz[i] - pz[j]
        return float(np.max(cz - (lam * cx + (1.0 - lam) * cy)))
    raise InapplicableAxiomError(f"cannot re-verify law {axiom!r}")


# ---------------------------------------------------------------------------
# Risk-sharing property suite and adapted robust rules
# ---------------------------------------------------------------------------


def block_preserving_measures(
    space: FiniteSpace, part: Partition, n_measures: int, key: int
) -> list[np.ndarray]:
    """Random within-block tilts of the base measure: every block keeps its mass.

    Deterministic in (key, block structure), so two profiles with the same
    conditioning partition receive the same ambiguity set — a worst-case
    rule built from these is a genuine function of (endowment, total, info).
    """
    ent = [key & 0xFFFFFFFFFFFFFFFF, zlib.crc32(repr(part.blocks).encode())]
    rng = np.random.default_rng(np.random.SeedSequence(ent))
    out = []
    for _ in range(n_measures):
        tilt = rng.uniform(0.25, 4.0, space.n_outcomes)
        q = np.empty(space.n_outcomes)
        for idx in part.block_arrays():
            w = space.probs[idx] * tilt[idx]
            q[idx] = w * (space.probs[idx].sum() / w.sum())
        out.append(q / q.sum())
    return out


def adapted_robust_rule(n_measures: int = 3, key: int = 0):
    """Worst-case conditional-mean rule whose ambiguity set adapts to the
    realized conditioning blocks (always satisfying the restriction test)."""

    def fn(profile, g, space):
        gx = conditioning_partition(profile, g, space)
        measures = block_preserving_measures(space, gx, n_measures, key)
        return robust_cmrs(profile, g, measures, space).parts

    fn.token = f"robust_cmrs(adapted:{n_measures}:{key})"
    return fn


def risk_sharing_properties(rule, cfg: CheckConfig) -> dict[str, CheckResult]:
    """Positive homogeneity, normalization, constancy, translativity, no-ripoff."""
    alloc, token, trivial_only = _resolve(rule)
    results = {}
    for prop in RISK_SHARING_PROPERTIES:
        failure = None
        trials_run = cfg.trials
        for t in range(cfg.trials):
            rng = _trial_rng(cfg, prop, token, t)
            space = _draw_space(cfg, rng)
            g = _draw_partition(cfg, rng, trivial_only)
            prof = _draw_profile(cfg, rng)
            parts = alloc(prof, g, space)
            if prop == "PositiveHomogeneity":
                scale = float(rng.uniform(0.2, 3.0))
                scaled = alloc(scale * prof, g, space)
                diff = np.abs(scaled - scale * parts)
                tol = cfg.tol * max(1.0, scale)
                if diff.max() > tol:
                    failure = _witness(prop, space, g, prof, diff.max(), scale=scale)
            elif prop == "Normalization":
                j = int(rng.integers(0, cfg.n_agents))
                zeroed = prof.copy()
                zeroed[j] = 0.0
                pz = alloc(zeroed, g, space)
                if np.abs(pz[j]).max() > cfg.tol:
                    failure = _witness(prop, space, g, zeroed, np.abs(pz[j]).max(), j=j)
            elif prop == "Constancy":
                j = int(rng.integers(0, cfg.n_agents))
                c = float(rng.integers(-4 * _GRID, 4 * _GRID)) / _GRID
                fixed = prof.copy()
                fixed[j] = c
                pc = alloc(fixed, g, space)
                diff = np.abs(pc[j] - c)
                if diff.max() > cfg.tol:
                    failure = _witness(prop, space, g, fixed, diff.max(), j=j, c=c)
            elif prop == "Translativity":
                j = int(rng.integers(0, cfg.n_agents))
                c = float(rng.integers(-4 * _GRID, 4 * _GRID)) / _GRID
                shifted = prof.copy()
                shifted[j] = prof[j] + c
                ps = alloc(shifted, g, space)
                diff = np.abs(ps[j] - (parts[j] + c))
                if diff.max() > cfg.tol:
                    failure = _witness(prop, space, g, prof, diff.max(), j=j, c=c)
            else:  # NoRipoff
                excess = parts.max(axis=1) - prof.max(axis=1)
                j = int(np.argmax(excess))
                if excess[j] > cfg.tol:
                    failure = _witness(prop, space, g, prof, excess[j], j=j)
            if failure is not None:
                trials_run = t + 1
                break
        results[prop] = CheckResult(
            prop, token, failure is None, trials_run, failure,
            _PASS_NOTE if failure is None else _FAIL_NOTE,
        )
    return results
