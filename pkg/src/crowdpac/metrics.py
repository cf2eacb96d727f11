"""Query ledger, overhead ratios, error evaluation, and region diagnostics.

The ledger is the single accounting surface for crowd and expert queries:
counters are maintained incrementally and must always equal the fold of the
append-only event log (checked by ``replay``). Census-based diagnostics
(exact error, region density) live here so algorithm code has no reason to
import them.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .crowd import WorkerPool, population_majority_size
from .domain import (
    DistributionSpec,
    Hypothesis,
    Instance,
    MajorityOfThree,
    PacParams,
    Threshold,
    m_count,
    sample_instances,
)

__all__ = [
    "ExactUnsupported",
    "LedgerEvent",
    "QueryLedger",
    "overheads",
    "region_density",
    "true_error",
    "true_error_mc",
]

COUNTED_KINDS = ("label", "comparison", "verified_label", "verified_comparison", "restart")


@dataclass(frozen=True)
class LedgerEvent:
    phase: str
    operation: str
    kind: str  # one of COUNTED_KINDS, or "marker" for structural breadcrumbs
    count: int


class QueryLedger:
    """Append-only, replayable accounting of one run's queries."""

    def __init__(self):
        self.events: list[LedgerEvent] = []
        self.m_L = 0
        self.m_C = 0
        self.verified_labels = 0
        self.verified_comparisons = 0
        self.restarts = 0
        self._phase = ""

    def set_phase(self, phase: str) -> None:
        self._phase = phase

    @property
    def phase(self) -> str:
        return self._phase

    def _append(self, operation: str, kind: str, count: int) -> None:
        self.events.append(LedgerEvent(self._phase, operation, kind, count))

    def charge_labels(self, operation: str, count: int) -> None:
        self.m_L += count
        self._append(operation, "label", count)

    def charge_comparisons(self, operation: str, count: int) -> None:
        self.m_C += count
        self._append(operation, "comparison", count)

    def charge_verified_label(self, operation: str) -> None:
        self.verified_labels += 1
        self._append(operation, "verified_label", 1)

    def charge_verified_comparison(self, operation: str) -> None:
        self.verified_comparisons += 1
        self._append(operation, "verified_comparison", 1)

    def record_restart(self, operation: str) -> None:
        self.restarts += 1
        self._append(operation, "restart", 1)

    def mark(self, operation: str, count: int = 0) -> None:
        """Structural breadcrumb (e.g. start of a binary search); not counted."""
        self._append(operation, "marker", count)

    def replay(self) -> dict[str, int]:
        """Fold the event log back into counters."""
        totals = {k: 0 for k in COUNTED_KINDS}
        for ev in self.events:
            if ev.kind in totals:
                totals[ev.kind] += ev.count
        return totals

    def consistent(self) -> bool:
        t = self.replay()
        return (
            t["label"] == self.m_L
            and t["comparison"] == self.m_C
            and t["verified_label"] == self.verified_labels
            and t["verified_comparison"] == self.verified_comparisons
            and t["restart"] == self.restarts
        )

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(asdict(ev)) for ev in self.events)

    @staticmethod
    def events_from_jsonl(text: str) -> list[LedgerEvent]:
        return [LedgerEvent(**json.loads(line)) for line in text.splitlines() if line.strip()]


def overheads(ledger: QueryLedger, pac: PacParams) -> tuple[float, float]:
    """Label and comparison overheads relative to the standard PAC budget."""
    m = m_count(pac)
    return ledger.m_L / m, ledger.m_C / m


class ExactUnsupported(Exception):
    """Exact error is only defined for threshold-shaped hypotheses."""


def _thresholds_of(h: Hypothesis) -> list[float]:
    if isinstance(h, Threshold):
        return [h.theta]
    if isinstance(h, MajorityOfThree):
        subs = [h.h1, h.h2, h.h3]
        if all(isinstance(s, Threshold) for s in subs):
            return [s.theta for s in subs]  # type: ignore[union-attr]
    raise ExactUnsupported(f"no closed form for {type(h).__name__}")


def _predict_feature(h: Hypothesis, feature: float) -> int:
    return h.predict(Instance(id=0, feature=feature, score=0.0))


def true_error(h: Hypothesis, spec: DistributionSpec) -> float:
    """Exact disagreement mass between h and the true threshold.

    Both h and the truth are piecewise constant with finitely many
    breakpoints, so the error is the CDF mass of the intervals where the
    predictions differ (breakpoints carry no mass for continuous families).
    """
    points = sorted(set(_thresholds_of(h) + [spec.theta_star]))
    edges = [-math.inf] + points + [math.inf]
    err = 0.0
    for left, right in zip(edges, edges[1:]):
        if math.isinf(left):
            rep = right - 1.0
        elif math.isinf(right):
            rep = left + 1.0
        else:
            rep = (left + right) / 2.0
        truth = 1 if rep >= spec.theta_star else -1
        if _predict_feature(h, rep) != truth:
            lo_cdf = 0.0 if math.isinf(left) else spec.cdf(left)
            hi_cdf = 1.0 if math.isinf(right) else spec.cdf(right)
            err += hi_cdf - lo_cdf
    return min(1.0, max(0.0, err))


def true_error_mc(
    h: Hypothesis, spec: DistributionSpec, n: int, rng: np.random.Generator
) -> float:
    """Monte Carlo disagreement frequency over n fresh draws."""
    feats = spec.draw_features(n, rng)
    preds = _predict_features(h, feats)
    truth = np.where(feats >= spec.theta_star, 1, -1)
    return float(np.mean(preds != truth))


def _predict_features(h: Hypothesis, feats: np.ndarray) -> np.ndarray:
    if isinstance(h, Threshold):
        above = feats >= h.theta
        pos = above if h.positive_side.value == "above" else ~above
        return np.where(pos, 1, -1)
    if isinstance(h, MajorityOfThree):
        s = sum(_predict_features(sub, feats) for sub in (h.h1, h.h2, h.h3))
        return np.where(s > 0, 1, -1)
    return np.array([_predict_feature(h, float(f)) for f in feats])


def region_density(
    pool: WorkerPool,
    supports,
    beta: float,
    spec: DistributionSpec,
    n_mc: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo mass of the low-confidence comparison regions.

    An instance belongs to the region of a support s when the full-pool
    census majority on (x, s) has size <= 1 - beta/2. Sentinel sides
    contribute nothing. Membership is exact (census), only the instance
    draw is sampled.
    """
    real_supports = [s for s in (supports.x_minus, supports.x_plus) if isinstance(s, Instance)]
    if not real_supports:
        raise ValueError("need at least one real support")
    cut = 1.0 - beta / 2.0
    xs = sample_instances(spec, n_mc, rng, id_start=1_000_000_000)
    hits = 0
    for x in xs:
        for s in real_supports:
            _, maj = population_majority_size(pool, (x, s))
            if maj <= cut:
                hits += 1
                break
    return hits / n_mc
