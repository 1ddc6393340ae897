"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError so callers (and the
CLI exit-code mapping) can distinguish contract violations from bugs.
"""


class FricshareError(Exception):
    """Base class for all domain errors raised by this package."""


class InputError(FricshareError, ValueError):
    """Inputs violate a documented contract (shape, domain, normalization)."""


class ZeroMassBlockError(FricshareError):
    """A conditioning block carries no probability mass under the given measure."""

    def __init__(self, block_index: int, outcomes: tuple[int, ...]):
        self.block_index = block_index
        self.outcomes = outcomes
        super().__init__(
            f"block {block_index} with outcomes {list(outcomes)} has zero mass"
        )


class MeasureRestrictionError(FricshareError):
    """A measure does not agree with the base measure on the conditioning blocks."""

    def __init__(self, measure_index: int, block_index: int, gap: float):
        self.measure_index = measure_index
        self.block_index = block_index
        self.gap = gap
        super().__init__(
            f"measure {measure_index} disagrees with the base measure on block "
            f"{block_index} (mass gap {gap:.3e})"
        )


class FeasibilityError(FricshareError):
    """An allocation hands out more than the aggregate endowment somewhere."""

    def __init__(self, outcome: int, excess: float):
        self.outcome = outcome
        self.excess = excess
        super().__init__(
            f"allocation exceeds the aggregate at outcome {outcome} by {excess:.3e}"
        )


class QuantileSolveError(FricshareError):
    """No mixing weight in [0, 1] reproduces the realized aggregate value."""

    def __init__(self, value: float, prob: float):
        self.value = value
        self.prob = prob
        super().__init__(
            f"no mixing weight in [0, 1] solves the quantile equation at "
            f"value {value!r} (cdf level {prob!r})"
        )


class DegeneratePoolError(FricshareError):
    """The pooled endowment has zero variance, so pool ratios are undefined."""


class NotPositiveSemidefiniteError(FricshareError):
    """A correlation/covariance input is not positive semidefinite."""


class DataFormatError(FricshareError):
    """A data file does not match its documented schema."""


class InapplicableAxiomError(FricshareError):
    """The requested check is not defined for the given rule or configuration."""
