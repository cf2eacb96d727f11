"""Finite worker pools: perfect and adversarial annotators, voting, pruning.

Workers are deterministic functions of (worker_id, strategy_seed, query
content), so repeating a query always returns the same answer and pruning
can be realized as exact filtering of the finite pool. Adversaries are
oblivious: they never see the learner's state, only the queried instances.
"""

from __future__ import annotations

import enum
import hashlib
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import ComparisonTag, Instance, true_comparison, true_label

__all__ = [
    "AdversaryStrategy",
    "AlwaysFlip",
    "ConstantPositive",
    "PersistentRandom",
    "PoolRole",
    "Pools",
    "ShiftedThreshold",
    "Worker",
    "WorkerPool",
    "annotate_comparison",
    "annotate_label",
    "batch_comparison_vote",
    "batch_label_vote",
    "build_pool",
    "draw_workers",
    "majority",
    "perfect_fraction",
    "population_majority_size",
    "prune",
    "strategy_from_name",
]


class PoolRole(enum.Enum):
    LABEL = "label"
    COMPARISON = "comparison"


def _hash01(worker_id: int, seed: int, kind: str, key: str) -> float:
    """Stable uniform-[0,1) value per (worker, seed, query); not Python hash."""
    raw = f"{worker_id}:{seed}:{kind}:{key}".encode()
    digest = hashlib.blake2b(raw, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


class AdversaryStrategy:
    """Deterministic answering rule for a low-quality worker."""

    def label(self, worker: "Worker", x: Instance) -> int:
        raise NotImplementedError

    def comparison(self, worker: "Worker", x: Instance, xp: Instance) -> ComparisonTag:
        raise NotImplementedError


@dataclass(frozen=True)
class AlwaysFlip(AdversaryStrategy):
    """Negates the truth on every query; the canonical colluding worst case."""

    def label(self, worker, x):
        return -true_label(x)

    def comparison(self, worker, x, xp):
        return true_comparison(x, xp).reverse()


@dataclass(frozen=True)
class ConstantPositive(AdversaryStrategy):
    """Answers +1 on labels; on comparisons calls the lower-id instance greater."""

    def label(self, worker, x):
        return 1

    def comparison(self, worker, x, xp):
        # Stated for the id-canonical pair so reversing arguments reverses the tag.
        return ComparisonTag.GREATER if x.id < xp.id else ComparisonTag.LESS


@dataclass(frozen=True)
class PersistentRandom(AdversaryStrategy):
    """Flips the truth with probability p, decided once per (worker, query)."""

    p: float

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError("flip probability must be in [0,1]")

    def label(self, worker, x):
        y = true_label(x)
        flip = _hash01(worker.worker_id, worker.strategy_seed, "L", str(x.id)) < self.p
        return -y if flip else y

    def comparison(self, worker, x, xp):
        a, b = (x, xp) if x.id < xp.id else (xp, x)
        tag = true_comparison(a, b)
        key = f"{a.id},{b.id}"
        if _hash01(worker.worker_id, worker.strategy_seed, "C", key) < self.p:
            tag = tag.reverse()
        return tag if (a is x) else tag.reverse()


@dataclass(frozen=True)
class ShiftedThreshold(AdversaryStrategy):
    """Worker who internalized the wrong threshold theta_adv.

    Labels by sign(feature - theta_adv). Comparisons rank by distance from
    theta_adv (a confidence-magnitude judgment), which disagrees with the
    true order exactly on pairs that the worker's threshold separates
    asymmetrically; a plain shifted score would never disagree.
    """

    theta_adv: float

    def label(self, worker, x):
        return 1 if x.feature >= self.theta_adv else -1

    def comparison(self, worker, x, xp):
        gx = abs(x.feature - self.theta_adv)
        gp = abs(xp.feature - self.theta_adv)
        if (gx, x.id) < (gp, xp.id):
            return ComparisonTag.LESS
        return ComparisonTag.GREATER


@dataclass(frozen=True)
class Worker:
    worker_id: int
    strategy: AdversaryStrategy | None = None  # None means perfect
    strategy_seed: int = 0

    @property
    def is_perfect(self) -> bool:
        return self.strategy is None


def annotate_label(w: Worker, x: Instance) -> int:
    return true_label(x) if w.strategy is None else w.strategy.label(w, x)


def annotate_comparison(w: Worker, x: Instance, xp: Instance) -> ComparisonTag:
    if w.strategy is None:
        return true_comparison(x, xp)
    return w.strategy.comparison(w, x, xp)


@dataclass(frozen=True)
class WorkerPool:
    """Immutable snapshot of a finite worker pool; prune returns a new one."""

    role: PoolRole
    workers: tuple[Worker, ...]
    pruned_on: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.workers:
            raise ValueError("pool must be non-empty")

    def __len__(self) -> int:
        return len(self.workers)

    def answer(self, w: Worker, query) -> int | ComparisonTag:
        if self.role is PoolRole.LABEL:
            return annotate_label(w, query)
        return annotate_comparison(w, query[0], query[1])

    def tie_winner(self) -> int | ComparisonTag:
        return 1 if self.role is PoolRole.LABEL else ComparisonTag.LESS


@dataclass(frozen=True)
class Pools:
    """The label pool and the comparison pool a run is currently using."""

    label: WorkerPool
    comparison: WorkerPool

    def __post_init__(self):
        if self.label.role is not PoolRole.LABEL:
            raise ValueError("label pool has wrong role")
        if self.comparison.role is not PoolRole.COMPARISON:
            raise ValueError("comparison pool has wrong role")


def build_pool(
    role: PoolRole,
    size: int,
    perfect_fraction: float,
    strategy: AdversaryStrategy | None = None,
    strategy_seed: int = 0,
) -> WorkerPool:
    """Pool with round(perfect_fraction * size) perfect workers, rest adversarial."""
    if size < 1:
        raise ValueError("pool size must be >= 1")
    if not 0 < perfect_fraction <= 1:
        raise ValueError("perfect fraction must be in (0,1]")
    n_perfect = round(perfect_fraction * size)
    if n_perfect < 1:
        raise ValueError("pool must contain at least one perfect worker")
    if n_perfect < size and strategy is None:
        raise ValueError("adversarial workers need a strategy")
    workers = tuple(
        Worker(worker_id=i, strategy=None if i < n_perfect else strategy,
               strategy_seed=strategy_seed)
        for i in range(size)
    )
    return WorkerPool(role=role, workers=workers)


_STRATEGIES = {
    "always_flip": AlwaysFlip,
    "constant_positive": ConstantPositive,
    "persistent_random": PersistentRandom,
    "shifted_threshold": ShiftedThreshold,
}


def strategy_from_name(name: str, params: dict | None = None) -> AdversaryStrategy:
    if name not in _STRATEGIES:
        raise ValueError(f"unknown adversary strategy {name!r}")
    return _STRATEGIES[name](**(params or {}))


def _draw_indices(pool: WorkerPool, k: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, len(pool.workers), size=k)


def draw_workers(pool: WorkerPool, k: int, rng: np.random.Generator) -> list[Worker]:
    """k uniform draws with replacement; charging is the caller's job."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return [pool.workers[i] for i in _draw_indices(pool, k, rng)]


def majority(answers, tie_winner=None) -> tuple[int | ComparisonTag, float]:
    """Modal answer and its fraction; exact ties go to tie_winner.

    tie_winner defaults to +1 for label answers and LESS for comparison tags.
    """
    answers = list(answers)
    if not answers:
        raise ValueError("majority of empty answer set")
    if tie_winner is None:
        tie_winner = ComparisonTag.LESS if isinstance(answers[0], ComparisonTag) else 1
    counts = Counter(answers)
    top = max(counts.values())
    winners = [a for a, c in counts.items() if c == top]
    if len(winners) > 1:
        return tie_winner, top / len(answers)
    return winners[0], top / len(answers)


def _vote_from_counts(
    pool: WorkerPool, query, weights: np.ndarray
) -> tuple[int | ComparisonTag, float]:
    """Weighted census: evaluate each distinct worker once."""
    total = int(weights.sum())
    tallies: Counter = Counter()
    for i in np.nonzero(weights)[0]:
        tallies[pool.answer(pool.workers[i], query)] += int(weights[i])
    top = max(tallies.values())
    winners = [a for a, c in tallies.items() if c == top]
    if len(winners) > 1:
        return pool.tie_winner(), top / total
    return winners[0], top / total


def batch_label_vote(
    pool: WorkerPool, x: Instance, k: int, rng: np.random.Generator
) -> tuple[int, float]:
    """Majority over k worker draws on a label query.

    Identical in distribution (and in rng consumption) to draw_workers +
    annotate + majority, but evaluates each distinct worker once.
    """
    idx = _draw_indices(pool, k, rng)
    weights = np.bincount(idx, minlength=len(pool.workers))
    return _vote_from_counts(pool, x, weights)  # type: ignore[return-value]


def batch_comparison_vote(
    pool: WorkerPool, x: Instance, xp: Instance, k: int, rng: np.random.Generator
) -> tuple[ComparisonTag, float]:
    idx = _draw_indices(pool, k, rng)
    weights = np.bincount(idx, minlength=len(pool.workers))
    return _vote_from_counts(pool, (x, xp), weights)  # type: ignore[return-value]


def population_majority_size(pool: WorkerPool, query) -> tuple[int | ComparisonTag, float]:
    """Exact census over the whole pool (diagnostics only, never charged)."""
    weights = np.ones(len(pool.workers), dtype=int)
    return _vote_from_counts(pool, query, weights)


def prune(pool: WorkerPool, query, verified_answer) -> WorkerPool:
    """Keep exactly the workers that agree with the verified answer.

    The verified answer equals ground truth, so perfect workers always
    survive and the result is never empty. These evaluations model the
    distribution-level conditioning and are not charged as crowd queries.
    """
    kept = tuple(w for w in pool.workers if pool.answer(w, query) == verified_answer)
    return replace(pool, workers=kept, pruned_on=pool.pruned_on + ((query, verified_answer),))


def perfect_fraction(pool: WorkerPool) -> float:
    """Census of perfect workers; a measurement hook, not learner-visible."""
    return sum(1 for w in pool.workers if w.is_perfect) / len(pool.workers)
