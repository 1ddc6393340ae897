"""Risk-sharing allocation rules with frictional costs.

Exact rule evaluation on finite probability spaces, randomized verification
of the rules' structural laws with re-checkable counterexamples, and
closed-form Gaussian expected-shortfall pool analytics.
"""

from .axioms import (
    AXIOMS,
    CheckConfig,
    CheckResult,
    adapted_robust_rule,
    block_preserving_measures,
    check,
    check_cost_convexity,
    comparison_matrix,
    reverify_counterexample,
    risk_sharing_properties,
)
from .crra import FeeReport, indifference_fee
from .empirical import (
    LossTable,
    PoolReport,
    SummaryStats,
    ingest,
    report,
    stats_from_json,
    stats_to_json,
    summarize,
)
from .errors import FricshareError
from .gaussian import (
    EsClosedForm,
    GaussianPool,
    PoolStats,
    TradeoffReport,
    correlation_sweep,
    es_closed_form,
    es_factor,
    gaussian_costs,
    norm_cdf,
    norm_pdf,
    norm_ppf,
    participants_sweep,
    participation_threshold,
    pool_stats,
    tradeoff,
)
from .mechanisms import (
    Allocation,
    Cmrs,
    CostReport,
    DiscreteDist,
    LeftEs,
    MeanDeviation,
    Proportional,
    Qbrs,
    RobustCmrs,
    Rule,
    SubjectiveCmrs,
    allocate,
    cond_left_es,
    frictional_costs,
    mean_dev_alloc,
    parse_rule_token,
    qbrs_alloc,
    quantile_mixed,
    robust_cmrs,
    rule_from_json,
    rule_to_json,
    rule_token,
)
from .space import (
    FiniteSpace,
    Partition,
    cond_expect,
    dump_market,
    is_measurable,
    join,
    load_market,
    sigma_of,
    verify_measure,
)

__version__ = "0.1.0"
