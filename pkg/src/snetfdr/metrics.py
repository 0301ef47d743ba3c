"""Confusion tallies, Monte-Carlo estimators, order statistics, KS and the entropy bound."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .distributions import DensityModel


@dataclass(frozen=True)
class ConfusionCounts:
    """Decision table: U/V are true nulls declared H0/H1, T/S true alternatives declared H0/H1."""

    U: int
    V: int
    T: int
    S: int

    def __post_init__(self):
        if min(self.U, self.V, self.T, self.S) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def R(self) -> int:
        return self.V + self.S

    @property
    def m0(self) -> int:
        return self.U + self.V

    @property
    def m1(self) -> int:
        return self.T + self.S

    @property
    def m(self) -> int:
        return self.m0 + self.m1

    @property
    def errors(self) -> int:
        return self.V + self.T


def tally(truth, selected) -> ConfusionCounts:
    """Count outcomes; ``truth`` is a boolean H1 indicator indexed by sensor id."""
    h1 = np.asarray(truth, dtype=bool).reshape(-1)
    sel = np.asarray(list(selected) if isinstance(selected, (set, frozenset)) else selected, dtype=np.int64).reshape(-1)
    if sel.size and (sel.min() < 0 or sel.max() >= h1.size):
        raise ValueError("selected contains an unknown sensor id")
    declared = np.zeros(h1.size, dtype=bool)
    declared[sel] = True
    return ConfusionCounts(
        U=int(np.sum(~h1 & ~declared)),
        V=int(np.sum(~h1 & declared)),
        T=int(np.sum(h1 & ~declared)),
        S=int(np.sum(h1 & declared)),
    )


def fdp(counts: ConfusionCounts) -> float:
    """False discovery proportion V/R, defined as 0 when nothing is declared."""
    return counts.V / counts.R if counts.R else 0.0


def power(counts: ConfusionCounts) -> float:
    return counts.S / counts.m1 if counts.m1 else float("nan")


@dataclass(frozen=True)
class TrialOutcome:
    counts: ConfusionCounts
    messages: int = 0


@dataclass(frozen=True)
class MonteCarloSummary:
    trials: int
    mean_fdp: float
    stderr_fdp: float
    mean_power: float
    stderr_power: float
    mean_messages: float
    mean_detections: float
    stderr_detections: float
    mean_errors: float
    stderr_errors: float
    outcomes: tuple[TrialOutcome, ...] = ()


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = x[~np.isnan(x)]
    if x.size == 0:
        return float("nan"), float("nan")
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def trial_streams(master_seed: int, trials: int) -> list[np.random.Generator]:
    """One independent generator per trial, keyed by (master_seed, trial index)."""
    return [np.random.default_rng(np.random.SeedSequence([master_seed, t])) for t in range(trials)]


def _run_chunk(args):
    runner, seed, idx = args
    return [runner(np.random.default_rng(np.random.SeedSequence([seed, t]))) for t in idx]


def monte_carlo_estimate(
    trial_runner: Callable[[np.random.Generator], TrialOutcome | ConfusionCounts],
    trials: int,
    master_seed: int = 0,
    jobs: int = 1,
    keep_outcomes: bool = False,
) -> MonteCarloSummary:
    """Run ``trial_runner`` on independent streams and aggregate in trial order.

    With ``jobs > 1`` trials are split over a process pool (the runner must be
    picklable); results are identical to the serial run.
    """
    if trials < 2:
        raise ValueError("need at least two trials for a standard error")
    if jobs and jobs > 1:
        chunks = np.array_split(np.arange(trials), jobs * 4)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_run_chunk, [(trial_runner, master_seed, c) for c in chunks if c.size])
            raw = [o for part in parts for o in part]
    else:
        raw = _run_chunk((trial_runner, master_seed, range(trials)))
    outs = [o if isinstance(o, TrialOutcome) else TrialOutcome(o) for o in raw]
    f = np.array([fdp(o.counts) for o in outs])
    pw = np.array([power(o.counts) for o in outs])
    det = np.array([o.counts.R for o in outs], dtype=float)
    err = np.array([o.counts.errors for o in outs], dtype=float)
    msg = np.array([o.messages for o in outs], dtype=float)
    mf, sf = _mean_se(f)
    mp, sp = _mean_se(pw)
    md, sd = _mean_se(det)
    me, se = _mean_se(err)
    return MonteCarloSummary(
        trials=trials,
        mean_fdp=mf,
        stderr_fdp=sf,
        mean_power=mp,
        stderr_power=sp,
        mean_messages=float(msg.mean()),
        mean_detections=md,
        stderr_detections=sd,
        mean_errors=me,
        stderr_errors=se,
        outcomes=tuple(outs) if keep_outcomes else (),
    )


def default_jobs() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Order statistics
# ---------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def order_stat_cdf(u: float, n: int, i: int) -> float:
    """CDF of the i-th smallest of n i.i.d. draws, through the parent CDF value ``u``.

    Equal to ``n!/((i-1)!(n-i)!) * int_0^u s^(i-1) (1-s)^(n-i) ds``.
    """
    if not (1 <= i <= n):
        raise ValueError("order-statistic index must satisfy 1 <= i <= n")
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    return regularized_incomplete_beta(float(i), float(n - i + 1), float(u))


def order_stat_cdf_quadrature(u: float, n: int, i: int) -> float:
    """Direct numerical integration of the order-statistic integrand (test oracle)."""
    log_c = math.lgamma(n + 1) - math.lgamma(i) - math.lgamma(n - i + 1)
    val, _ = integrate.quad(
        lambda s: math.exp(log_c + (i - 1) * math.log(s) + (n - i) * math.log1p(-s)) if 0 < s < 1 else 0.0,
        0.0,
        u,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    return val


# ---------------------------------------------------------------------------
# Goodness of fit
# ---------------------------------------------------------------------------


def ks_statistic(samples, reference_cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup |F_emp - F_ref|, checked on both sides of every jump."""
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    f = np.asarray(reference_cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max(), 0.0))


def uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Conditional-entropy lower bound
# ---------------------------------------------------------------------------


def _binary_entropy(q):
    q = np.clip(q, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(q * np.log2(q) + (1 - q) * np.log2(1 - q))
    return np.where((q <= 0) | (q >= 1), 0.0, h)


def _posterior(y, g0, g1, prior_h1):
    a = prior_h1 * np.asarray(g1.pdf(y))
    b = (1 - prior_h1) * np.asarray(g0.pdf(y))
    tot = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, a / np.where(tot > 0, tot, 1.0), 0.0), tot


def fano_bound(g0: DensityModel, g1: DensityModel, prior_h1: float) -> float:
    """Per-sensor conditional entropy of the hypothesis given the observation, in bits."""
    box = np.vstack([g0.support(), g1.support()])
    lo, hi = float(box[:, 0].min()), float(box[:, 1].max())
    knots = sorted({lo, hi, *box.ravel().tolist()})

    def integrand(y):
        q, tot = _posterior(np.array([y]), g0, g1, prior_h1)
        return float(tot[0] * _binary_entropy(q)[0])

    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if b > a:
            val, _ = integrate.quad(integrand, a, b, limit=400, epsabs=1e-11, epsrel=1e-10)
            total += val
    return float(min(max(total, 0.0), 1.0))


def fano_bound_monte_carlo(g0, g1, prior_h1: float, n: int, rng: np.random.Generator) -> float:
    h1 = rng.random(n) < prior_h1
    y = np.empty(n)
    y[h1] = g1.sample(rng, int(h1.sum()))
    y[~h1] = g0.sample(rng, int((~h1).sum()))
    q, _ = _posterior(y, g0, g1, prior_h1)
    return float(np.mean(_binary_entropy(q)))
