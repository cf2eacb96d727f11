"""The adaptive semi-verified filter and its region-confidence test.

The filter finds the instances a classifier gets wrong while spending only
a constant number of comparison queries on most instances: two certified
support instances bracket the label boundary, and comparisons against them
decide cheaply on which side of the boundary an instance falls. The region
test guards the regime where a constant number of workers is informative:
it restarts (pruning the comparison pool) whenever fresh instances form
low-confidence pairs with a support.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .crowd import PoolRole, Pools, annotate_comparison, batch_comparison_vote, draw_workers
from .domain import ComparisonTag, Hypothesis, Instance, InstanceSource
from .expert import Expert
from .metrics import QueryLedger
from .sortlabel import (
    RestartSignal,
    SortedLabeledSet,
    prune_compare_and_label,
    semi_verified_binary_search,
    updated_rate,
)

__all__ = [
    "FilterOutcome",
    "NEG_INFINITY",
    "POS_INFINITY",
    "SupportPair",
    "semi_verified_filter",
    "subset_size",
    "supports_from",
    "test_region",
    "test_set_size",
]


class _Sentinel:
    def __init__(self, name: str):
        self._name = name

    def __repr__(self) -> str:
        return self._name


NEG_INFINITY = _Sentinel("NEG_INFINITY")
POS_INFINITY = _Sentinel("POS_INFINITY")


@dataclass(frozen=True)
class SupportPair:
    """Certified boundary instances; a sentinel stands in for a missing side."""

    x_minus: Instance | _Sentinel
    x_plus: Instance | _Sentinel

    @property
    def has_minus(self) -> bool:
        return isinstance(self.x_minus, Instance)

    @property
    def has_plus(self) -> bool:
        return isinstance(self.x_plus, Instance)


def supports_from(labeled: SortedLabeledSet) -> SupportPair:
    """Rightmost -1 and leftmost +1 along the certified order."""
    x_minus: Instance | _Sentinel = NEG_INFINITY
    x_plus: Instance | _Sentinel = POS_INFINITY
    for inst, y in labeled.items:
        if y == -1:
            x_minus = inst
    for inst, y in labeled.items:
        if y == 1:
            x_plus = inst
            break
    return SupportPair(x_minus=x_minus, x_plus=x_plus)


@dataclass(frozen=True)
class FilterOutcome:
    """Instances the filter claims are misclassified, plus bookkeeping."""

    s_i: tuple[Instance, ...]
    s_in: tuple[Instance, ...]
    queries_charged: dict
    supports: SupportPair


def test_set_size(epsilon: float, delta2: float) -> int:
    """Fresh instances per region test: ceil((4/eps) ln(8/delta2))."""
    return math.ceil((4.0 / epsilon) * math.log(8.0 / delta2))


def subset_size(epsilon: float, delta2: float) -> int:
    """Support-subset size: ceil((4/sqrt(eps)) ln(16/delta2) + (24/delta2)^0.001)."""
    return math.ceil(
        (4.0 / math.sqrt(epsilon)) * math.log(16.0 / delta2) + (24.0 / delta2) ** 1e-3
    )


def test_region(
    x_support: Instance,
    beta: float,
    delta2: float,
    epsilon: float,
    source: InstanceSource,
    pools: Pools,
    expert: Expert,
    ledger: QueryLedger,
    rng: np.random.Generator,
) -> None:
    """Certify that low-confidence pairs with the support are rare.

    Draws fresh instances and majority-votes each against the support with
    a large worker batch; any batch whose majority size falls below
    1 - beta/4 is escalated to the expert and restarts the main algorithm.
    Returning without raising is the pass outcome.
    """
    s_r = source.draw(test_set_size(epsilon, delta2), rng)
    n_workers = math.ceil((32.0 / beta**2) * math.log(32.0 * len(s_r) / delta2))
    for x in s_r:
        _, maj_size = batch_comparison_vote(pools.comparison, x, x_support, n_workers, rng)
        ledger.charge_comparisons("test_region", n_workers)
        if maj_size < 1.0 - beta / 4.0:
            z_star = expert.verified_comparison(x, x_support)
            ledger.charge_verified_comparison("test_region")
            raise RestartSignal(PoolRole.COMPARISON, (x, x_support), z_star, updated_rate(beta))


def _strict_majority(tags: list[ComparisonTag]) -> ComparisonTag | None:
    """Strict majority tag, or None on a tie (treated as not-yet-decided)."""
    counts = Counter(tags)
    less = counts.get(ComparisonTag.LESS, 0)
    greater = counts.get(ComparisonTag.GREATER, 0)
    if less == greater:
        return None
    return ComparisonTag.LESS if less > greater else ComparisonTag.GREATER


def _probe_instance(
    x: Instance,
    h_x: int,
    supports: SupportPair,
    n_rounds: int,
    pools: Pools,
    ledger: QueryLedger,
    rng: np.random.Generator,
) -> str:
    """Adaptive comparison loop for one instance.

    Returns "agrees" when the running majorities confirm the classifier
    early, "in_band" when the full majorities place x strictly between the
    supports, and "suspect" otherwise (x is claimed misclassified).
    Comparisons against a sentinel side are definitional and free; every
    real query is charged individually.
    """
    tags_minus: list[ComparisonTag] = []
    tags_plus: list[ComparisonTag] = []
    for t in range(1, n_rounds + 1):
        worker = draw_workers(pools.comparison, 1, rng)[0]
        if supports.has_minus:
            tag_minus = annotate_comparison(worker, x, supports.x_minus)
            ledger.charge_comparisons("filter", 1)
        else:
            tag_minus = ComparisonTag.GREATER  # nothing lies left of -inf
        if tag_minus is ComparisonTag.LESS:
            tag_plus = ComparisonTag.LESS  # inferred through x_minus < x_plus
        elif supports.has_plus:
            tag_plus = annotate_comparison(worker, x, supports.x_plus)
            ledger.charge_comparisons("filter", 1)
        else:
            tag_plus = ComparisonTag.LESS  # everything lies left of +inf
        tags_minus.append(tag_minus)
        tags_plus.append(tag_plus)
        if t % 2 == 0:
            continue
        if _strict_majority(tags_minus) is ComparisonTag.LESS and h_x == -1:
            return "agrees"
        if _strict_majority(tags_plus) is ComparisonTag.GREATER and h_x == 1:
            return "agrees"
    if (
        _strict_majority(tags_minus) is ComparisonTag.GREATER
        and _strict_majority(tags_plus) is ComparisonTag.LESS
    ):
        return "in_band"
    return "suspect"


def semi_verified_filter(
    instances: list[Instance],
    h: Hypothesis,
    alpha: float,
    beta: float,
    delta2: float,
    epsilon: float,
    pools: Pools,
    expert: Expert,
    ledger: QueryLedger,
    source: InstanceSource,
    rng: np.random.Generator,
) -> FilterOutcome:
    """Collect the instances of the input set that h appears to misclassify.

    A certified-labeled subset U yields the support instances; when the
    comparison pool is not yet a strong majority the region test vets both
    supports; the remaining instances are triaged by the adaptive loop; the
    in-band stragglers are certified exactly; finally every certified
    instance whose label disagrees with h joins the output.
    """
    b = subset_size(epsilon, delta2)
    if len(instances) <= b:
        raise ValueError(f"filter needs more than {b} instances, got {len(instances)}")
    before = (ledger.m_L, ledger.m_C, ledger.verified_labels, ledger.verified_comparisons)

    chosen = rng.choice(len(instances), size=b, replace=False)
    in_u = set(int(i) for i in chosen)
    u = [instances[i] for i in sorted(in_u)]
    u_bar = prune_compare_and_label(u, alpha, beta, delta2 / 4.0, pools, expert, ledger, rng)
    supports = supports_from(u_bar)

    n_rounds = math.ceil((1.0 / beta**2) * math.log(1.0 / epsilon))
    if beta < 0.7:
        if supports.has_minus:
            test_region(
                supports.x_minus, beta, delta2 / 8.0, epsilon,
                source, pools, expert, ledger, rng,
            )
        if supports.has_plus:
            test_region(
                supports.x_plus, beta, delta2 / 8.0, epsilon,
                source, pools, expert, ledger, rng,
            )

    suspects: list[Instance] = []
    s_in: list[Instance] = []
    for i, x in enumerate(instances):
        if i in in_u:
            continue
        verdict = _probe_instance(x, h.predict(x), supports, n_rounds, pools, ledger, rng)
        if verdict == "suspect":
            suspects.append(x)
        elif verdict == "in_band":
            s_in.append(x)

    certified: list[tuple[Instance, int]] = list(u_bar.items)
    if len(s_in) == 1:
        # a singleton needs no sorting and is below the certified-sort
        # size floor; the gated search labels it directly
        s_in_bar = semi_verified_binary_search(
            s_in, alpha, delta2 / 4.0, pools, expert, ledger, rng
        )
        certified.extend(s_in_bar.items)
    elif s_in:
        s_in_bar = prune_compare_and_label(
            s_in, alpha, beta, delta2 / 4.0, pools, expert, ledger, rng
        )
        certified.extend(s_in_bar.items)
    for inst, y in certified:
        if y != h.predict(inst):
            suspects.append(inst)

    after = (ledger.m_L, ledger.m_C, ledger.verified_labels, ledger.verified_comparisons)
    charged = {
        "labels": after[0] - before[0],
        "comparisons": after[1] - before[1],
        "verified_labels": after[2] - before[2],
        "verified_comparisons": after[3] - before[3],
    }
    return FilterOutcome(
        s_i=tuple(suspects), s_in=tuple(s_in), queries_charged=charged, supports=supports
    )
