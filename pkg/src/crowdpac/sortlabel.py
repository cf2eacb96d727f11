"""Semi-verified quicksort, semi-verified binary search, and their composition.

Both routines gate every crowd majority on its empirical majority size:
a confident majority is trusted outright, while a low-confidence one is
escalated to the expert, whose verified answer both certifies the datum and
triggers a restart that prunes at least a constant fraction of low-quality
workers. A restart abandons all partial work; queries already charged stay
in the cumulative ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crowd import PoolRole, Pools, batch_comparison_vote, batch_label_vote
from .domain import ComparisonTag, Instance
from .expert import Expert
from .metrics import QueryLedger

__all__ = [
    "RestartSignal",
    "SortedLabeledSet",
    "comparison_batch_size",
    "label_batch_size",
    "prune_compare_and_label",
    "semi_verified_binary_search",
    "semi_verified_quicksort",
    "updated_rate",
]


def updated_rate(rate: float) -> float:
    """Perfect-worker fraction bookkeeping after one prune: r / (1 - r/8)."""
    return rate / (1.0 - rate / 8.0)


class RestartSignal(Exception):
    """A low-confidence majority was escalated; the main loop must restart.

    Carries the verified datum so the offending pool can be pruned, and the
    post-prune bookkeeping rate. Raising aborts the current phase; partial
    sort/search work is discarded by construction.
    """

    def __init__(self, pool_role: PoolRole, query, verified_answer, new_rate: float):
        super().__init__(f"restart: prune {pool_role.value} pool, rate -> {new_rate:.6f}")
        self.pool_role = pool_role
        self.query = query
        self.verified_answer = verified_answer
        self.updated_rate = new_rate


@dataclass(frozen=True)
class SortedLabeledSet:
    """Instances in certified comparison order with their certified labels."""

    items: tuple[tuple[Instance, int], ...]

    def labels_monotone(self) -> bool:
        """Threshold structure: no +1 may precede a -1 along the order."""
        seen_pos = False
        for _, y in self.items:
            if y == 1:
                seen_pos = True
            elif seen_pos:
                return False
        return True


def _ln_floor1(n: int) -> float:
    return max(math.log(n), 1.0)


def comparison_batch_size(n: int, beta: float, delta1: float) -> int:
    """Workers per pivot comparison: ceil((32/beta^2) ln(3006 n ln n / delta1)).

    The 32/beta^2 prefactor is what the Chernoff bound needs so that the
    union over at most 1002 n ln n comparisons fails with probability at
    most 2*delta1/3; the inner ln n is floored at 1 for tiny sets.
    """
    return math.ceil((32.0 / beta**2) * math.log(3006.0 * n * _ln_floor1(n) / delta1))


def label_batch_size(n: int, alpha: float, delta1: float) -> int:
    """Workers per bisection probe: ceil((32/alpha^2) ln(6 ln n / delta1))."""
    return math.ceil((32.0 / alpha**2) * math.log(6.0 * _ln_floor1(n) / delta1))


def semi_verified_quicksort(
    instances: list[Instance],
    beta: float,
    delta1: float,
    pools: Pools,
    expert: Expert,
    ledger: QueryLedger,
    rng: np.random.Generator,
) -> list[Instance]:
    """Randomized quicksort driven by gated crowd comparisons.

    Every pivot comparison costs one batch of k1 comparison queries. When
    beta < 0.7 and the empirical majority size drops below 1 - beta/4, the
    pair is escalated to the expert and a RestartSignal is raised with the
    pool update beta <- beta/(1 - beta/8).
    """
    n = len(instances)
    if n < 2:
        raise ValueError("need at least two instances to sort")
    k1 = comparison_batch_size(n, beta, delta1)
    confident = 1.0 - beta / 4.0

    def compare_less(x: Instance, pivot: Instance) -> bool:
        tag, maj_size = batch_comparison_vote(pools.comparison, x, pivot, k1, rng)
        ledger.charge_comparisons("quicksort", k1)
        if beta >= 0.7 or maj_size >= confident:
            return tag is ComparisonTag.LESS
        z_star = expert.verified_comparison(x, pivot)
        ledger.charge_verified_comparison("quicksort")
        raise RestartSignal(PoolRole.COMPARISON, (x, pivot), z_star, updated_rate(beta))

    ledger.mark("quicksort.start", n)

    def sort_segment(seg: list[Instance]) -> list[Instance]:
        if len(seg) <= 1:
            return seg
        pivot = seg[int(rng.integers(0, len(seg)))]
        left, right = [], []
        for x in seg:
            if x is pivot:
                continue
            (left if compare_less(x, pivot) else right).append(x)
        return sort_segment(left) + [pivot] + sort_segment(right)

    return sort_segment(list(instances))


def semi_verified_binary_search(
    ordered: list[Instance],
    alpha: float,
    delta1: float,
    pools: Pools,
    expert: Expert,
    ledger: QueryLedger,
    rng: np.random.Generator,
) -> SortedLabeledSet:
    """Label a correctly sorted sequence with one bisection over positions.

    Each probe draws k2 label workers on the instance at the midpoint
    position; a confident +1 moves the right bracket to t-1, a confident -1
    moves the left bracket to t+1, and a low-confidence majority escalates
    to the expert with alpha <- alpha/(1 - alpha/8). The loop runs until
    the bracket empties, after which every position left of the last probe
    is -1, every one right of it is +1, and the probe keeps its own label;
    this uses at most ceil(log2 n) + 1 probes.
    """
    n = len(ordered)
    if n < 1:
        raise ValueError("need at least one instance to label")
    k2 = label_batch_size(n, alpha, delta1)
    confident = 1.0 - alpha / 4.0
    ledger.mark("binary_search.start", n)

    t_min, t_max = 1, n
    last_t, last_label = 0, 1
    while t_min <= t_max:
        t = (t_min + t_max) // 2
        x_t = ordered[t - 1]
        vote, maj_size = batch_label_vote(pools.label, x_t, k2, rng)
        ledger.charge_labels("binary_search", k2)
        if alpha >= 0.7 or maj_size >= confident:
            last_t, last_label = t, vote
            if vote == 1:
                t_max = t - 1
            else:
                t_min = t + 1
        else:
            y_star = expert.verified_label(x_t)
            ledger.charge_verified_label("binary_search")
            raise RestartSignal(PoolRole.LABEL, x_t, y_star, updated_rate(alpha))

    labels = [
        last_label if t == last_t else (1 if t > last_t else -1)
        for t in range(1, n + 1)
    ]
    return SortedLabeledSet(items=tuple(zip(ordered, labels)))


def prune_compare_and_label(
    instances: list[Instance],
    alpha: float,
    beta: float,
    delta1: float,
    pools: Pools,
    expert: Expert,
    ledger: QueryLedger,
    rng: np.random.Generator,
) -> SortedLabeledSet:
    """Sort by gated crowd comparisons, then label by gated bisection.

    When neither stage restarts, the output matches ground truth with
    probability at least 1 - delta1.
    """
    if len(instances) < (1.0 / delta1) ** 1e-3:
        raise ValueError("instance set too small for the requested confidence")
    ordered = (
        list(instances)
        if len(instances) < 2
        else semi_verified_quicksort(instances, beta, delta1, pools, expert, ledger, rng)
    )
    return semi_verified_binary_search(ordered, alpha, delta1, pools, expert, ledger, rng)
