"""Semi-verified crowdsourced PAC learning of thresholds, desk-scale.

The package simulates learning a 1-D threshold from crowd workers of whom
an arbitrary fraction may collude, with a trusted expert consulted only
when an empirical majority is too weak to certify itself. It provides the
full pipeline (gated quicksort and binary search, the adaptive comparison
filter with its region test, three-hypothesis boosting with restarts), an
exact query ledger, and a seeded experiment CLI.
"""

from .boost import (
    PoolConfig,
    RestartLimitExceeded,
    RunConfig,
    RunResult,
    boosting_bound_check,
    rejection_sample_disagreement,
    run,
)
from .crowd import (
    AlwaysFlip,
    ConstantPositive,
    PersistentRandom,
    PoolRole,
    Pools,
    ShiftedThreshold,
    Worker,
    WorkerPool,
    build_pool,
    draw_workers,
    majority,
    perfect_fraction,
    population_majority_size,
    prune,
)
from .domain import (
    ComparisonTag,
    DistributionSpec,
    Hypothesis,
    Instance,
    InstanceSource,
    MajorityOfThree,
    PacParams,
    Side,
    Threshold,
    m_count,
    n_count,
    sample_instances,
    true_comparison,
    true_label,
)
from .expert import BudgetExhausted, Expert
from .filtering import (
    NEG_INFINITY,
    POS_INFINITY,
    FilterOutcome,
    SupportPair,
    semi_verified_filter,
    test_region,
)
from .learner import NotRealizable, erm_threshold
from .metrics import QueryLedger, overheads, region_density, true_error, true_error_mc
from .sortlabel import (
    RestartSignal,
    SortedLabeledSet,
    prune_compare_and_label,
    semi_verified_binary_search,
    semi_verified_quicksort,
)

__version__ = "0.1.0"
