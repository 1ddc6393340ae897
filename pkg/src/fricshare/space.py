"""Finite probability spaces, information partitions, and exact conditioning.

Everything downstream evaluates allocation rules on a finite outcome set with
a strictly positive base probability vector. Sub-sigma-algebras are
represented as partitions of the outcome set, which is lossless on finite
spaces; the join of two partitions (their common refinement) plays the role
of combining information sets. Strict positivity of the base measure makes
almost-sure equality plain pointwise equality, so no null-set bookkeeping is
needed anywhere.

All operations are pure functions on immutable values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, InputError, ZeroMassBlockError

__all__ = [
    "FiniteSpace",
    "Partition",
    "sigma_of",
    "join",
    "cond_expect",
    "is_measurable",
    "verify_measure",
    "as_values",
    "as_measure",
    "as_profile",
    "load_market",
    "dump_market",
]

PROB_SUM_TOL = 1e-12
JSON_PROB_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FiniteSpace:
    """A finite outcome set with a strictly positive probability vector.

    Parameters
    ----------
    probs : array_like
        Base probabilities, all entries > 0, summing to 1 within 1e-12.
    value_tol : float, optional
        Tie tolerance used when grouping aggregate-endowment values into
        information blocks. 0 groups exactly equal values only.
    """

    probs: np.ndarray
    value_tol: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(self.probs))
        p = self.probs
        if p.ndim != 1 or p.size < 1:
            raise InputError("probs must be a nonempty 1-d vector")
        if not np.all(np.isfinite(p)):
            raise InputError("probs must be finite")
        if np.any(p <= 0):
            raise InputError("all base probabilities must be strictly positive")
        if abs(p.sum() - 1.0) > PROB_SUM_TOL:
            raise InputError(
                f"base probabilities must sum to 1 within {PROB_SUM_TOL}; "
                f"got {p.sum()!r}"
            )
        if self.value_tol < 0:
            raise InputError("value_tol must be nonnegative")

    @property
    def n_outcomes(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, n: int, value_tol: float = 0.0) -> "FiniteSpace":
        return cls(np.full(n, 1.0 / n), value_tol)


class Partition:
    """A partition of outcome indices, in canonical form.

    Canonical form: members of each block sorted ascending, blocks sorted by
    their smallest member. Two partitions compare equal iff their canonical
    block tuples are identical, so partition equality is exact.
    """

    __slots__ = ("blocks", "n_outcomes", "labels", "_block_arrays")

    def __init__(self, blocks, n_outcomes: int):
        cleaned = sorted(tuple(sorted(int(i) for i in b)) for b in blocks if len(b))
        seen: list[int] = []
        for b in cleaned:
            seen.extend(b)
        if sorted(seen) != list(range(n_outcomes)):
            raise InputError(
                "blocks must be disjoint, nonempty, and cover all outcomes"
            )
        self.blocks: tuple[tuple[int, ...], ...] = tuple(cleaned)
        self.n_outcomes = n_outcomes
        labels = np.empty(n_outcomes, dtype=np.intp)
        for k, b in enumerate(self.blocks):
            labels[list(b)] = k
        labels.setflags(write=False)
        self.labels = labels
        self._block_arrays = tuple(np.array(b, dtype=np.intp) for b in self.blocks)

    @classmethod
    def trivial(cls, n: int) -> "Partition":
        return cls([tuple(range(n))], n)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls([(i,) for i in range(n)], n)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        labels = np.asarray(labels)
        groups: dict[int, list[int]] = {}
        for i, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(i)
        return cls(list(groups.values()), labels.size)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def is_trivial(self) -> bool:
        return len(self.blocks) == 1

    def block_arrays(self) -> tuple[np.ndarray, ...]:
        return self._block_arrays

    def refines(self, other: "Partition") -> bool:
        """True iff every block of self lies inside a block of other."""
        if self.n_outcomes != other.n_outcomes:
            return False
        return all(
            np.all(other.labels[idx] == other.labels[idx[0]])
            for idx in self._block_arrays
        )

    def __eq__(self, other):
        return isinstance(other, Partition) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return f"Partition({[list(b) for b in self.blocks]})"


def as_values(x, n_outcomes: int) -> np.ndarray:
    """Validate a random variable: a finite real vector over the outcomes."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n_outcomes,):
        raise InputError(f"expected a vector of length {n_outcomes}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("random-variable values must be finite")
    return x


def as_measure(q, n_outcomes: int, atol: float = JSON_PROB_TOL) -> np.ndarray:
    """Validate a probability measure: nonnegative, normalized within atol."""
    q = np.asarray(q, dtype=float)
    if q.shape != (n_outcomes,):
        raise InputError(f"expected a measure of length {n_outcomes}, got {q.shape}")
    if not np.all(np.isfinite(q)) or np.any(q < 0):
        raise InputError("measure entries must be finite and nonnegative")
    if abs(q.sum() - 1.0) > atol:
        raise InputError(f"measure must be normalized within {atol}; sums to {q.sum()!r}")
    return q


def as_profile(agents, n_outcomes: int, min_agents: int = 2) -> np.ndarray:
    """Validate an endowment profile as an (n_agents, n_outcomes) matrix."""
    x = np.asarray(agents, dtype=float)
    if x.ndim != 2 or x.shape[1] != n_outcomes:
        raise InputError(
            f"profile must be (n_agents, {n_outcomes}); got shape {x.shape}"
        )
    if x.shape[0] < min_agents:
        raise InputError(f"profile needs at least {min_agents} agents")
    if not np.all(np.isfinite(x)):
        raise InputError("endowment values must be finite")
    return x


def sigma_of(x: np.ndarray, tol: float = 0.0) -> Partition:
    """Partition generated by a random variable, with gap-tolerant grouping.

    Outcomes share a block iff their values are connected by a chain of gaps
    no larger than ``tol`` (single-linkage on the sorted values). ``tol = 0``
    groups exactly equal values.
    """
    if tol < 0:
        raise InputError("tol must be nonnegative")
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    # new block exactly where the sorted gap exceeds tol
    breaks = np.diff(xs) > tol
    group = np.concatenate([[0], np.cumsum(breaks)])
    labels = np.empty(x.size, dtype=np.intp)
    labels[order] = group
    return Partition.from_labels(labels)


def join(p: Partition, q: Partition) -> Partition:
    """Common refinement of two partitions (the join of the generated algebras)."""
    if p.n_outcomes != q.n_outcomes:
        raise InputError(
            f"partitions live on different spaces ({p.n_outcomes} vs {q.n_outcomes})"
        )
    key = p.labels * q.n_blocks + q.labels
    return Partition.from_labels(key)


def cond_expect(x: np.ndarray, part: Partition, weights: np.ndarray) -> np.ndarray:
    """Conditional expectation of ``x`` given ``part`` under measure ``weights``.

    On each block B the output is constant, equal to the weights-weighted
    average of ``x`` over B. Every block must carry positive mass.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    mass = np.bincount(part.labels, weights=w, minlength=part.n_blocks)
    bad = np.nonzero(mass <= 0.0)[0]
    if bad.size:
        k = int(bad[0])
        raise ZeroMassBlockError(k, part.blocks[k])
    num = np.bincount(part.labels, weights=w * x, minlength=part.n_blocks)
    return (num / mass)[part.labels]


def is_measurable(x: np.ndarray, part: Partition, tol: float = 0.0) -> bool:
    """True iff ``x`` varies by at most ``tol`` within every block."""
    x = np.asarray(x, dtype=float)
    for idx in part.block_arrays():
        vals = x[idx]
        if vals.max() - vals.min() > tol:
            return False
    return True


def verify_measure(
    q: np.ndarray, part: Partition, space: FiniteSpace, tol: float = 1e-9
) -> bool:
    """True iff ``q`` gives every block of ``part`` the same mass as the base.

    Absolute continuity w.r.t. the base is automatic because the base is
    strictly positive, so agreement of block masses is the whole condition.
    """
    q = np.asarray(q, dtype=float)
    qb = np.bincount(part.labels, weights=q, minlength=part.n_blocks)
    pb = np.bincount(part.labels, weights=space.probs, minlength=part.n_blocks)
    return bool(np.all(np.abs(qb - pb) <= tol))


# ---------------------------------------------------------------------------
# JSON interchange: {"probs": [...], "agents": [[...], ...], "partition": [[...], ...]}
# ---------------------------------------------------------------------------


def load_market(source) -> tuple[FiniteSpace, np.ndarray, Partition]:
    """Read a space + profile (+ optional information partition) from JSON.

    ``source`` may be a dict, a JSON string, or a path to a JSON file. The
    ``partition`` key is optional and defaults to the trivial partition.
    Probability vectors off by more than 1e-9 from total mass 1 are rejected;
    smaller discrepancies are renormalized.
    """
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
        probs = np.asarray(doc["probs"], dtype=float)
        agents = doc["agents"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"market JSON needs 'probs' and 'agents': {exc}") from exc
    if probs.ndim != 1 or probs.size == 0 or not np.all(np.isfinite(probs)):
        raise DataFormatError("'probs' must be a nonempty finite vector")
    if np.any(probs <= 0):
        raise DataFormatError("'probs' entries must be strictly positive")
    total = probs.sum()
    if abs(total - 1.0) > JSON_PROB_TOL:
        raise DataFormatError(
            f"'probs' must sum to 1 within {JSON_PROB_TOL}; got {total!r}"
        )
    space = FiniteSpace(probs / total)
    profile = as_profile(agents, space.n_outcomes)
    if "partition" in doc and doc["partition"] is not None:
        try:
            part = Partition(doc["partition"], space.n_outcomes)
        except InputError as exc:
            raise DataFormatError(f"bad 'partition': {exc}") from exc
    else:
        part = Partition.trivial(space.n_outcomes)
    return space, profile, part


def dump_market(space: FiniteSpace, profile: np.ndarray, part: Partition) -> dict:
    return {
        "probs": space.probs.tolist(),
        "agents": np.asarray(profile, dtype=float).tolist(),
        "partition": [list(b) for b in part.blocks],
    }
