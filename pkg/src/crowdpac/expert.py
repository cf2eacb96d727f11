"""The trusted expert: always-correct answers under a hard budget."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .domain import ComparisonTag, Instance, true_comparison, true_label

__all__ = ["BudgetExhausted", "Expert", "VerifiedBudget", "default_caps"]


class BudgetExhausted(Exception):
    """Raised when a run needs more verified queries than its cap allows."""


@dataclass
class VerifiedBudget:
    labels_used: int = 0
    comparisons_used: int = 0
    label_cap: int | None = None
    comparison_cap: int | None = None


def default_caps(alpha0: float, beta0: float) -> tuple[int, int]:
    """Twice the worst-case pruning need, so runaway runs fail loudly."""
    return math.ceil(16.0 / alpha0), math.ceil(16.0 / beta0)


class Expert:
    def __init__(self, label_cap: int | None = None, comparison_cap: int | None = None):
        self.budget = VerifiedBudget(label_cap=label_cap, comparison_cap=comparison_cap)

    def verified_label(self, x: Instance) -> int:
        cap = self.budget.label_cap
        if cap is not None and self.budget.labels_used >= cap:
            raise BudgetExhausted(f"verified-label cap {cap} reached")
        self.budget.labels_used += 1
        return true_label(x)

    def verified_comparison(self, x: Instance, xp: Instance) -> ComparisonTag:
        cap = self.budget.comparison_cap
        if cap is not None and self.budget.comparisons_used >= cap:
            raise BudgetExhausted(f"verified-comparison cap {cap} reached")
        self.budget.comparisons_used += 1
        return true_comparison(x, xp)
