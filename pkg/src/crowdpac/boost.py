"""Three-phase boosting orchestration with the restart loop.

One run builds three weak hypotheses, each on its own distribution: the
raw marginal, an equal-weight mixture of confirmed mistakes and confirmed
successes of the first hypothesis, and the disagreement conditional of the
first two. Their pointwise majority is the output. Whenever any stage
escalates a low-confidence majority to the expert, the offending pool is
pruned and the whole pipeline restarts with fresh samples; the ledger is
cumulative across restarts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .crowd import AdversaryStrategy, PoolRole, Pools, build_pool, prune
from .domain import (
    DistributionSpec,
    Hypothesis,
    Instance,
    InstanceSource,
    MajorityOfThree,
    PacParams,
    n_count,
)
from .expert import Expert, default_caps
from .filtering import semi_verified_filter, subset_size
from .learner import erm_threshold
from .metrics import QueryLedger
from .sortlabel import RestartSignal, prune_compare_and_label

__all__ = [
    "BoundCheck",
    "PoolConfig",
    "PreconditionViolated",
    "RestartLimitExceeded",
    "RunConfig",
    "RunResult",
    "boosting_bound_check",
    "rejection_sample_disagreement",
    "run",
]


class RestartLimitExceeded(Exception):
    """More restarts than the configured cap; the pruning economy failed."""


@dataclass(frozen=True)
class PoolConfig:
    size: int
    adversary: AdversaryStrategy | None = None


@dataclass(frozen=True)
class RunConfig:
    """Everything one seeded run needs."""

    alpha0: float
    beta0: float
    pac: PacParams
    dist: DistributionSpec
    label_pool: PoolConfig
    comparison_pool: PoolConfig
    c2: float = 1.0
    c_c: float = 1.0
    c_w: float = 1.0
    max_restarts: int | None = None  # None: ceil(8/alpha0 + 8/beta0)
    label_cap: int | None = None  # None: ceil(16/alpha0)
    comparison_cap: int | None = None  # None: ceil(16/beta0)
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha0 <= 1 or not 0 < self.beta0 <= 1:
            raise ValueError("alpha0 and beta0 must be in (0,1]")
        floor = math.ceil(8.0 / self.alpha0 + 8.0 / self.beta0)
        if self.max_restarts is not None and self.max_restarts < floor:
            raise ValueError(f"max_restarts must be at least {floor}")

    def resolved_max_restarts(self) -> int:
        if self.max_restarts is not None:
            return self.max_restarts
        return math.ceil(8.0 / self.alpha0 + 8.0 / self.beta0)


@dataclass(frozen=True)
class RunResult:
    hypothesis: Hypothesis
    ledger: QueryLedger
    restart_count: int
    final_alpha: float
    final_beta: float
    phase_skipped: bool
    error_estimate: float | None
    anomalies: tuple[str, ...] = ()


def rejection_sample_disagreement(
    h1: Hypothesis,
    h2: Hypothesis,
    count: int,
    source: InstanceSource,
    rng: np.random.Generator,
    max_attempts: int,
) -> list[Instance] | None:
    """Draw instances conditioned on h1 and h2 disagreeing.

    Returns None when max_attempts draws produce fewer than count accepted
    instances (the disagreement region is degenerate; the caller falls back
    to h3 := h1).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    accepted: list[Instance] = []
    for _ in range(max_attempts):
        x = source.draw(1, rng)[0]
        if h1.predict(x) != h2.predict(x):
            accepted.append(x)
            if len(accepted) == count:
                return accepted
    return None


def _draw_mixture(
    w_i: list[tuple[Instance, int]],
    w_c: list[tuple[Instance, int]],
    size: int,
    rng: np.random.Generator,
) -> list[tuple[Instance, int]]:
    """Equal-weight mixture of the two labeled sets, with replacement."""
    out = []
    for _ in range(size):
        side = w_i if (not w_c or rng.integers(0, 2) == 0) else w_c
        out.append(side[int(rng.integers(0, len(side)))])
    return out


def _attempt(
    cfg: RunConfig,
    alpha: float,
    beta: float,
    pools: Pools,
    expert: Expert,
    ledger: QueryLedger,
    source: InstanceSource,
    rng: np.random.Generator,
) -> tuple[Hypothesis, bool, float, tuple[str, ...]]:
    eps = cfg.pac.epsilon
    sq = math.sqrt(eps)
    tau = 8.0 / alpha + 8.0 / beta
    dprime = cfg.pac.delta / tau

    def sub_pac(e: float, d: float) -> PacParams:
        return replace(cfg.pac, epsilon=e, delta=d)

    def pcl(batch: list[Instance], delta1: float):
        return prune_compare_and_label(
            batch, alpha, beta, delta1, pools, expert, ledger, rng
        )

    # Phase 1: first weak hypothesis on the raw marginal.
    ledger.set_phase("phase1")
    s1 = source.draw(n_count(sub_pac(sq / 2.0, dprime / 6.0)), rng)
    s1_bar = pcl(s1, dprime / 6.0)
    h1 = erm_threshold(list(s1_bar.items), sq / 2.0, dprime / 6.0)

    # Operating-regime guard: certify h1 good enough to stop early, or go on.
    ledger.set_phase("guard")
    m_guard = math.ceil((24.0 / sq) * math.log(6.0 / dprime))
    guard_bar = pcl(source.draw(m_guard, rng), dprime / 6.0)
    mistakes = sum(1 for x, y in guard_bar.items if y != h1.predict(x))
    estimate = mistakes / m_guard
    slack = math.sqrt(math.log(6.0 / dprime) / (2.0 * m_guard))
    upper = estimate + slack
    if upper < sq / 6.0 and upper <= eps:
        return h1, True, upper, ()

    # Phase 2: second hypothesis on the mistake/success mixture.
    ledger.set_phase("phase2")
    anomalies: tuple[str, ...] = ()
    # the filter needs strictly more instances than its certified subset;
    # the multiplier hides that constant, so floor the draw accordingly
    n2 = max(
        math.ceil(cfg.c2 * n_count(sub_pac(eps, dprime / 12.0))),
        subset_size(eps, dprime / 12.0) + 1,
    )
    s2 = source.draw(n2, rng)
    outcome = semi_verified_filter(
        s2, h1, alpha, beta, dprime / 12.0, eps, pools, expert, ledger, source, rng
    )
    s_c = source.draw(math.ceil(cfg.c_c * n_count(sub_pac(sq, dprime / 12.0))), rng)
    all_bar = pcl(list(outcome.s_i) + s_c, dprime / 12.0)
    w_i = [(x, y) for x, y in all_bar.items if y != h1.predict(x)]
    w_c = [(x, y) for x, y in all_bar.items if y == h1.predict(x)]
    if not w_i:
        # No confirmed mistakes anywhere: h1 is already the answer.
        return h1, True, upper, ("no_confirmed_mistakes",)
    if not w_c:
        anomalies += ("empty_agreement_side",)
        ledger.mark("phase2.empty_agreement_side")
    w_bar = _draw_mixture(w_i, w_c, math.ceil(cfg.c_w * n_count(sub_pac(sq / 2.0, dprime / 12.0))), rng)
    h2 = erm_threshold(w_bar, sq / 2.0, dprime / 6.0)

    # Phase 3: third hypothesis on the disagreement conditional.
    ledger.set_phase("phase3")
    n3 = n_count(sub_pac(sq / 2.0, dprime / 6.0))
    s3 = rejection_sample_disagreement(
        h1, h2, n3, source, rng, max_attempts=math.ceil(200.0 * n3 / sq)
    )
    if s3 is None:
        anomalies += ("degenerate_disagreement",)
        h3: Hypothesis = h1
    else:
        s3_bar = pcl(s3, dprime / 6.0)
        h3 = erm_threshold(list(s3_bar.items), sq / 2.0, dprime / 6.0)

    return MajorityOfThree(h1, h2, h3), False, upper, anomalies


def run(cfg: RunConfig) -> RunResult:
    """Execute the full pipeline, restarting on every prune signal."""
    rng = np.random.default_rng(cfg.seed)
    label_pool = build_pool(
        PoolRole.LABEL, cfg.label_pool.size, cfg.alpha0,
        cfg.label_pool.adversary, strategy_seed=cfg.seed,
    )
    comparison_pool = build_pool(
        PoolRole.COMPARISON, cfg.comparison_pool.size, cfg.beta0,
        cfg.comparison_pool.adversary, strategy_seed=cfg.seed,
    )
    cap_l, cap_c = default_caps(cfg.alpha0, cfg.beta0)
    expert = Expert(
        label_cap=cap_l if cfg.label_cap is None else cfg.label_cap,
        comparison_cap=cap_c if cfg.comparison_cap is None else cfg.comparison_cap,
    )
    ledger = QueryLedger()
    source = InstanceSource(cfg.dist)
    alpha, beta = cfg.alpha0, cfg.beta0
    restarts = 0
    limit = cfg.resolved_max_restarts()

    while True:
        try:
            pools = Pools(label=label_pool, comparison=comparison_pool)
            h, skipped, estimate, anomalies = _attempt(
                cfg, alpha, beta, pools, expert, ledger, source, rng
            )
            return RunResult(
                hypothesis=h,
                ledger=ledger,
                restart_count=restarts,
                final_alpha=alpha,
                final_beta=beta,
                phase_skipped=skipped,
                error_estimate=estimate,
                anomalies=anomalies,
            )
        except RestartSignal as sig:
            restarts += 1
            ledger.record_restart(f"restart.{sig.pool_role.value}")
            if restarts > limit:
                raise RestartLimitExceeded(
                    f"{restarts} restarts exceed the cap of {limit}"
                ) from sig
            if sig.pool_role is PoolRole.LABEL:
                label_pool = prune(label_pool, sig.query, sig.verified_answer)
                alpha = sig.updated_rate
            else:
                comparison_pool = prune(comparison_pool, sig.query, sig.verified_answer)
                beta = sig.updated_rate


class PreconditionViolated(Exception):
    """The hypothesis triple does not satisfy the boosting conditions."""


class BoundCheck(NamedTuple):
    holds: bool
    majority_error: float
    bound: float


def boosting_bound_check(
    p: float,
    support: Sequence[tuple[object, float]],
    truth: Callable,
    h1: Callable,
    h2: Callable,
    h3: Callable,
) -> BoundCheck:
    """Exhaustively verify the majority-vote error bound 3p^2 - 2p^3.

    support is a finite distribution as (point, mass) pairs; truth and the
    three classifiers map points to +/-1. The three premises are checked
    first: h1's error on the marginal, h2's error on the balanced mixture
    of the conditionals where h1 is right/wrong, and h3's error on the
    conditional where h1 and h2 disagree; a conditional on a zero-mass
    event is vacuous. Masses need not be normalized.
    """
    pts = [(x, w) for x, w in support]
    total = math.fsum(w for _, w in pts)
    if total <= 0:
        raise ValueError("support must carry positive mass")
    guard = 1e-12

    def mass(pred: Callable[[object], bool]) -> float:
        return math.fsum(w for x, w in pts if pred(x)) / total

    err1 = mass(lambda x: h1(x) != truth(x))
    mass_c = mass(lambda x: h1(x) == truth(x))
    mass_i = 1.0 - mass_c
    err_on_c = mass(lambda x: h1(x) == truth(x) and h2(x) != truth(x))
    err_on_i = mass(lambda x: h1(x) != truth(x) and h2(x) != truth(x))
    err2 = 0.0
    if mass_c > 0:
        err2 += 0.5 * err_on_c / mass_c
    if mass_i > 0:
        err2 += 0.5 * err_on_i / mass_i
    mass_d = mass(lambda x: h1(x) != h2(x))
    err3 = 0.0
    if mass_d > 0:
        err3 = mass(lambda x: h1(x) != h2(x) and h3(x) != truth(x)) / mass_d

    for name, err in (("h1", err1), ("h2", err2), ("h3", err3)):
        if err > p + guard:
            raise PreconditionViolated(f"{name} has error {err:.6f} > p={p}")

    def maj(x) -> int:
        return 1 if h1(x) + h2(x) + h3(x) > 0 else -1

    majority_error = mass(lambda x: maj(x) != truth(x))
    bound = 3.0 * p * p - 2.0 * p**3
    return BoundCheck(majority_error <= bound + guard, majority_error, bound)
