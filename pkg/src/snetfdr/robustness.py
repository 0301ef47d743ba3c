"""Perturbed null families, adjusted levels, asymptotic cutoffs and band checks."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .transform import TransformTable

BAND_GRID = 4096


class Shape(str, enum.Enum):
    SMOOTH = "smooth"
    EXTREMAL = "extremal"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class EpsilonFamily:
    """A null p-value law F0 with ``|F0(x) - x| <= epsilon * x``.

    ``smooth``: ``x + eps*x*(1-x)`` (needs ``eps <= 1``);
    ``extremal``: ``min((1+eps)*x, 1)``, which sits on the band's edge;
    ``empirical``: a user CDF, checked against the band at construction.
    """

    epsilon: float
    shape: Shape = Shape.SMOOTH
    user_cdf: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        eps = self.epsilon
        if eps < 0:
            raise ValueError("epsilon must be non-negative")
        if self.shape is Shape.SMOOTH and eps > 1:
            raise ValueError("the smooth family is a valid CDF only for epsilon <= 1")
        if self.shape is Shape.EMPIRICAL and self.user_cdf is None:
            raise ValueError("the empirical shape needs user_cdf")
        x = np.linspace(0.0, 1.0, BAND_GRID)
        f = np.asarray(self.cdf(x), dtype=float)
        if abs(f[0]) > 1e-12 or abs(f[-1] - 1) > 1e-12 or np.any(np.diff(f) < -1e-12):
            raise ValueError("family CDF must be monotone with F(0)=0 and F(1)=1")
        if np.any(np.abs(f - x) > eps * x + 1e-12):
            raise ValueError("family CDF leaves the band |F0(x) - x| <= eps*x")

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        eps = self.epsilon
        if self.shape is Shape.SMOOTH:
            out = x + eps * x * (1 - x)
        elif self.shape is Shape.EXTREMAL:
            out = np.minimum((1 + eps) * x, 1.0)
        else:
            out = np.asarray(self.user_cdf(x), dtype=float)
        return float(out) if out.ndim == 0 else out

    def ppf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        eps = self.epsilon
        if eps == 0:
            out = u
        elif self.shape is Shape.SMOOTH:
            b = 1 + eps
            out = (b - np.sqrt(b * b - 4 * eps * u)) / (2 * eps)
        elif self.shape is Shape.EXTREMAL:
            out = u / (1 + eps)
        else:
            lo, hi = np.zeros_like(u), np.ones_like(u)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                left = np.asarray(self.user_cdf(mid)) < u
                lo, hi = np.where(left, mid, lo), np.where(left, hi, mid)
            out = 0.5 * (lo + hi)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: int):
        return self.ppf(rng.random(size))


def perturbed_null_cdf(family: EpsilonFamily, x):
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(x) > 1):
        raise ValueError("x must lie in [0, 1]")
    return family.cdf(x)


def adjusted_level(gamma: float, epsilon: float) -> float:
    """Level to run at so that an epsilon-family null still gives FDR <= gamma."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return gamma / (1.0 + epsilon)


def _check_concave(f: Callable, grid: int = 2048, tol: float = 1e-9) -> None:
    x = np.linspace(0.0, 1.0, grid)
    y = np.asarray(f(x), dtype=float)
    if abs(y[0]) > 1e-12:
        raise ValueError("F1hat must vanish at 0")
    if np.any(np.diff(y, 2) > tol):
        raise ValueError("F1hat is not concave on [0, 1]")


def asymptotic_cutoff(f1hat_cdf: Callable, gamma: float, theta0: float, theta1: float, tol: float = 1e-10) -> float:
    """Positive root of ``F1hat(x) = ((1/gamma - theta0) / theta1) * x``.

    The asymptotic decision point of the step-up rule for a concave
    transformed alternative CDF.  Returns 0 when the line lies above
    ``F1hat`` everywhere on (0, 1].
    """
    if abs(theta0 + theta1 - 1) > 1e-9 or theta1 <= 0:
        raise ValueError("need theta0 + theta1 = 1 with theta1 > 0")
    _check_concave(f1hat_cdf)
    slope = (1.0 / gamma - theta0) / theta1

    def g(x):
        return float(f1hat_cdf(np.array([x]))[0]) - slope * x

    lo, hi = 1e-12, 1.0
    if g(lo) <= 0:
        return 0.0
    if g(hi) >= 0:
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def power_loss(f1hat_cdf: Callable, c: float, c_prime: float, m1: float) -> float:
    """Extra expected misses, ``(F1hat(c) - F1hat(c')) * m1``, from running at the adjusted level."""
    if c_prime > c:
        raise ValueError("need c' <= c")
    if not 0 <= c_prime <= c <= 1:
        raise ValueError("cutoffs must lie in [0, 1]")
    fc, fcp = np.asarray(f1hat_cdf(np.array([c, c_prime])), dtype=float)
    return float((fc - fcp) * m1)


def estimate_epsilon(null_samples, min_count: int = 12_000) -> float:
    """Empirical band width: max over x >= x_min of ``|F_emp(x) - x| / x``.

    The ratio is only stable where the empirical CDF rests on enough points,
    so ``x_min = max(10/n, min(min_count/n, 0.5))``.  Deviations are checked
    on both sides of every jump.
    """
    x = np.sort(np.asarray(null_samples, dtype=float).reshape(-1))
    n = x.size
    if n == 0:
        raise ValueError("estimate_epsilon needs at least one sample")
    x_min = max(10.0 / n, min(min_count / n, 0.5))
    keep = x >= x_min
    ranks_hi = np.arange(1, n + 1)[keep] / n
    ranks_lo = np.arange(0, n)[keep] / n
    pts = x[keep]
    # both sides of each jump, plus the left end of the window
    k0 = np.searchsorted(x, x_min, side="left")
    dev = [abs(k0 / n - x_min) / x_min]
    if pts.size:
        dev.append(float(np.max(np.abs(ranks_hi - pts) / pts)))
        dev.append(float(np.max(np.abs(ranks_lo - pts) / pts)))
    return float(max(dev))


def tv_band_check(mu_table: TransformTable, mu0_table: TransformTable, epsilon: float, grid_tol: float = 1e-9) -> bool:
    """True iff the transformed CDFs differ by at most ``epsilon`` on the shared grid."""
    if mu_table.edges.shape != mu0_table.edges.shape or not np.allclose(mu_table.edges, mu0_table.edges):
        raise ValueError("tables must share breakpoints")
    gap = np.max(np.abs(mu_table.cdf - mu0_table.cdf))
    return bool(gap <= epsilon + grid_tol)


def uniform_table(table: TransformTable) -> TransformTable:
    """Table of the identity law on ``table``'s grid (the image of U(0,1) under a measure-invariant map)."""
    return TransformTable(table.breakpoints, np.ones_like(table.breakpoints), table.edges, table.edges.copy(), ())
