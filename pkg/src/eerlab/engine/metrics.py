"""Learning-curve area and the win/tie/loss comparison rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson


@dataclass(frozen=True)
class Auc:
    value: float
    method: str  # "simpson", "trapezoid" or "degenerate"

    def __float__(self) -> float:
        return self.value


def auc_simpson(xs, ys) -> Auc:
    """Composite Simpson area under ``ys(xs)`` divided by ``xs[-1] - xs[0]``.

    Two points fall back to the trapezoid rule; a single point has zero
    width and the normalised area is taken to be that point's value.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size == 0:
        raise ValueError("xs and ys must be equal-length nonempty vectors")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    if xs.size == 1:
        return Auc(float(ys[0]), "degenerate")
    width = xs[-1] - xs[0]
    if xs.size == 2:
        return Auc(float(0.5 * (ys[0] + ys[1])), "trapezoid")
    return Auc(float(simpson(ys, x=xs) / width), "simpson")


def compare_methods(aucs_a, aucs_b, budgets_a=None, budgets_b=None) -> str:
    """``"win"``, ``"tie"`` or ``"loss"`` for method A against method B.

    A wins when ``mean_A - std_A > mean_B + std_B`` (sample standard
    deviations) and loses in the mirrored case; anything else is a tie.
    """
    a = np.asarray(aucs_a, dtype=np.float64)
    b = np.asarray(aucs_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("need at least two seeds per method")
    if budgets_a is not None and budgets_b is not None:
        if not np.array_equal(np.asarray(budgets_a), np.asarray(budgets_b)):
            raise ValueError("methods were run with different labeling budgets")
    ma, sa = a.mean(), a.std(ddof=1)
    mb, sb = b.mean(), b.std(ddof=1)
    if ma - sa > mb + sb:
        return "win"
    if mb - sb > ma + sa:
        return "loss"
    return "tie"
