"""Consistent ERM for 1-D thresholds behind a standard-PAC-learner interface."""

from __future__ import annotations

from .domain import Hypothesis, Instance, Side, Threshold

__all__ = ["NotRealizable", "erm_threshold"]


class NotRealizable(Exception):
    """Input admits no consistent threshold; signals an upstream labeling bug."""


def _fit(features_pos: list[float], features_neg: list[float], side: Side) -> float | None:
    """Midpoint threshold consistent under the given orientation, or None.

    ABOVE wants every positive feature >= theta > every negative feature;
    BELOW is the mirror image. All-one-label inputs get a threshold one
    unit beyond the data so the margin is never zero.
    """
    if side is Side.ABOVE:
        lo_side, hi_side = features_neg, features_pos
    else:
        lo_side, hi_side = features_pos, features_neg
    if not hi_side:
        return max(lo_side) + 1.0
    if not lo_side:
        return min(hi_side) - 1.0
    split_lo, split_hi = max(lo_side), min(hi_side)
    if split_lo >= split_hi:
        return None
    return (split_lo + split_hi) / 2.0


def erm_threshold(
    labeled: list[tuple[Instance, int]], epsilon: float, delta: float
) -> Hypothesis:
    """Return a threshold consistent with every training pair.

    epsilon and delta are accepted for interface fidelity only; the PAC
    bound is delivered by consistency plus the caller-chosen sample size.
    Tries the feature-above-is-positive orientation first, then the mirror.
    """
    if not labeled:
        raise ValueError("need at least one labeled instance")
    pos = [x.feature for x, y in labeled if y == 1]
    neg = [x.feature for x, y in labeled if y == -1]
    if len(pos) + len(neg) != len(labeled):
        raise ValueError("labels must be +1 or -1")
    for side in (Side.ABOVE, Side.BELOW):
        theta = _fit(pos, neg, side)
        if theta is not None:
            return Threshold(theta=theta, positive_side=side)
    raise NotRealizable("no consistent threshold in either orientation")
