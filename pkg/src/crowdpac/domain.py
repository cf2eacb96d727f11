"""Core data types, ground truth, instance distributions, and sample-size formulas.

Everything downstream derives its notion of truth from ``Instance.score``:
labels are the sign of the score and pairwise comparisons order by score.
Only the ground-truth operations in this module (and the perfect workers
that delegate to them) may read scores; learner-facing code sees features
and ids only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ComparisonTag",
    "DistributionSpec",
    "Hypothesis",
    "Instance",
    "InstanceSource",
    "MajorityOfThree",
    "PacParams",
    "Side",
    "Threshold",
    "m_count",
    "n_count",
    "sample_instances",
    "true_comparison",
    "true_label",
]


class ComparisonTag(enum.Enum):
    """Outcome of a comparison query on an ordered pair (x, x')."""

    LESS = "x<x'"
    GREATER = "x>x'"

    def reverse(self) -> "ComparisonTag":
        return ComparisonTag.GREATER if self is ComparisonTag.LESS else ComparisonTag.LESS


@dataclass(frozen=True)
class Instance:
    """An unlabeled point with a latent score; ids are unique per run.

    The id doubles as the stable identity that persistent adversaries key
    their answers on.
    """

    id: int
    feature: float
    score: float

    def __post_init__(self):
        if self.id < 0:
            raise ValueError("instance id must be non-negative")


@dataclass(frozen=True)
class DistributionSpec:
    """Marginal distribution over features plus the true threshold.

    family is "uniform" with params (lo, hi) or "gaussian" with params
    (mean, stddev). Generated instances carry score = feature - theta_star.
    """

    family: str
    params: tuple[float, float]
    theta_star: float
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("uniform", "gaussian"):
            raise ValueError(f"unknown family {self.family!r}")
        a, b = self.params
        if self.family == "uniform" and not a < b:
            raise ValueError("uniform requires lo < hi")
        if self.family == "gaussian" and not b > 0:
            raise ValueError("gaussian requires stddev > 0")

    def draw_features(self, count: int, rng: np.random.Generator) -> np.ndarray:
        a, b = self.params
        if self.family == "uniform":
            return rng.uniform(a, b, size=count)
        return rng.normal(a, b, size=count)

    def cdf(self, x: float) -> float:
        """Closed-form CDF of the feature distribution."""
        a, b = self.params
        if self.family == "uniform":
            if x <= a:
                return 0.0
            if x >= b:
                return 1.0
            return (x - a) / (b - a)
        return 0.5 * (1.0 + math.erf((x - a) / (b * math.sqrt(2.0))))


@dataclass(frozen=True)
class PacParams:
    """Target accuracy/confidence plus the class constants d and K."""

    epsilon: float
    delta: float
    vc_dim: int = 1
    big_k: float = 1.0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0,1)")
        # delta = 1 is allowed: it degrades both budgets gracefully and the
        # comparison budget's tail term is defined there.
        if not 0 < self.delta <= 1:
            raise ValueError("delta must be in (0,1]")
        if self.vc_dim < 1:
            raise ValueError("vc_dim must be a positive integer")
        if self.big_k < 1:
            raise ValueError("big_k must be >= 1")


def m_count(p: PacParams) -> int:
    """Labeled-sample budget of the standard PAC learner.

    ceil(K * (1/eps) * (d ln(1/eps) + ln(1/delta))), at least 1.
    """
    raw = p.big_k * (1.0 / p.epsilon) * (
        p.vc_dim * math.log(1.0 / p.epsilon) + math.log(1.0 / p.delta)
    )
    return max(1, math.ceil(raw))


def n_count(p: PacParams) -> int:
    """Sample budget of the comparison-based pipeline.

    ceil(K * (1/eps) * (d ln(1/eps) + (1/delta)^0.001)), at least 1. The
    polynomial tail term reflects sorting failure rates that decay only
    inverse-polynomially in the sample size.
    """
    raw = p.big_k * (1.0 / p.epsilon) * (
        p.vc_dim * math.log(1.0 / p.epsilon) + (1.0 / p.delta) ** 1e-3
    )
    return max(1, math.ceil(raw))


def sample_instances(
    spec: DistributionSpec,
    count: int,
    rng: np.random.Generator,
    id_start: int = 0,
) -> list[Instance]:
    """Draw i.i.d. instances; ids are id_start..id_start+count-1."""
    if count < 1:
        raise ValueError("count must be >= 1")
    feats = spec.draw_features(count, rng)
    return [
        Instance(id=id_start + i, feature=float(f), score=float(f - spec.theta_star))
        for i, f in enumerate(feats)
    ]


class InstanceSource:
    """Stateful wrapper that keeps instance ids unique across one run."""

    def __init__(self, spec: DistributionSpec, next_id: int = 0):
        self.spec = spec
        self.next_id = next_id

    def draw(self, count: int, rng: np.random.Generator) -> list[Instance]:
        out = sample_instances(self.spec, count, rng, id_start=self.next_id)
        self.next_id += count
        return out


def true_label(x: Instance) -> int:
    """Ground-truth label: sign of the score, with sign(0) := +1."""
    return 1 if x.score >= 0 else -1


def true_comparison(x: Instance, xp: Instance) -> ComparisonTag:
    """Ground-truth comparison: order by score, ties broken by smaller id."""
    if (x.score, x.id) < (xp.score, xp.id):
        return ComparisonTag.LESS
    return ComparisonTag.GREATER


class Side(enum.Enum):
    ABOVE = "above"
    BELOW = "below"


class Hypothesis:
    """A +/-1 predictor over instances (reads features only)."""

    def predict(self, x: Instance) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class Threshold(Hypothesis):
    """sign-threshold on the feature; ABOVE means feature >= theta is +1."""

    theta: float
    positive_side: Side = Side.ABOVE

    def predict(self, x: Instance) -> int:
        above = x.feature >= self.theta
        return 1 if above == (self.positive_side is Side.ABOVE) else -1


@dataclass(frozen=True)
class MajorityOfThree(Hypothesis):
    """Pointwise majority vote of exactly three sub-hypotheses."""

    h1: Hypothesis
    h2: Hypothesis
    h3: Hypothesis

    def predict(self, x: Instance) -> int:
        s = self.h1.predict(x) + self.h2.predict(x) + self.h3.predict(x)
        return 1 if s > 0 else -1
