"""Centralised selection rules: BH step-up, DTBH, uncorrected testing, Bayes oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import DensityModel
from .pvalues import PValueVector
from .transform import DomainTransform


@dataclass(frozen=True, eq=False)
class SelectionResult:
    selected: np.ndarray  # sensor ids declared H1, ascending
    cutoff_index: int
    threshold_level: float

    def __len__(self):
        return int(self.selected.size)

    def mask(self, sensor_ids) -> np.ndarray:
        return np.isin(np.asarray(sensor_ids), self.selected)

    def to_csv(self, path, sensor_ids) -> None:
        flags = self.mask(sensor_ids)
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("sensor_id,selected\n")
            for i, f in zip(sensor_ids, flags):
                fh.write(f"{i},{int(f)}\n")


def _as_vector(pvals) -> PValueVector:
    return pvals if isinstance(pvals, PValueVector) else PValueVector.from_values(pvals)


def bh_cutoff(p: np.ndarray, gamma: float) -> int:
    """Largest i with p_(i) <= i*gamma/m (0 if none)."""
    m = p.size
    if m == 0:
        return 0
    s = np.sort(p)
    ok = np.nonzero(s <= np.arange(1, m + 1) * gamma / m)[0]
    return int(ok[-1] + 1) if ok.size else 0


def bh_cutoff_batch(P: np.ndarray, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise BH on a (trials, m) array; returns cutoffs and selection masks."""
    P = np.asarray(P, dtype=float)
    m = P.shape[1]
    s = np.sort(P, axis=1)
    ok = s <= np.arange(1, m + 1) * gamma / m
    last = np.where(ok.any(axis=1), m - np.argmax(ok[:, ::-1], axis=1), 0)
    thr = np.where(last > 0, s[np.arange(P.shape[0]), np.maximum(last - 1, 0)], -np.inf)
    return last, P <= thr[:, None]


def bh_select(pvals, gamma: float) -> SelectionResult:
    """Benjamini-Hochberg step-up at level ``gamma`` (last crossing).

    All p-values at or below ``p_(i_max)`` are selected, so tied values at the
    cutoff go in together.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    vec = _as_vector(pvals)
    k = bh_cutoff(vec.values, gamma)
    if k == 0:
        return SelectionResult(np.array([], dtype=vec.sensor_ids.dtype), 0, gamma)
    crit = np.sort(vec.values)[k - 1]
    sel = np.sort(vec.sensor_ids[vec.values <= crit])
    return SelectionResult(sel, k, gamma)


def dtbh_select(pvals, transform: DomainTransform, gamma: float, rng=None) -> SelectionResult:
    """Apply the level-set transformation, then BH; ids refer to the original sensors."""
    vec = _as_vector(pvals)
    if len(vec) == 0:
        return bh_select(vec, gamma)
    moved = PValueVector(np.asarray(transform(vec.values, rng), dtype=float).reshape(-1), vec.sensor_ids)
    return bh_select(moved, gamma)


def uncorrected_select(pvals, level: float) -> SelectionResult:
    vec = _as_vector(pvals)
    sel = np.sort(vec.sensor_ids[vec.values <= level]) if level > 0 else vec.sensor_ids[:0]
    return SelectionResult(sel, int(sel.size), level)


def bayes_oracle_select(observations, g0: DensityModel, g1: DensityModel, prior_h1: float) -> SelectionResult:
    """Declare H1 where ``pi * g1(y) > (1 - pi) * g0(y)`` (minimum expected errors)."""
    if not 0 < prior_h1 < 1:
        raise ValueError("prior_h1 must lie in (0, 1)")
    y = np.asarray(observations, dtype=float)
    with np.errstate(invalid="ignore"):
        lhs = np.log(prior_h1) + np.asarray(g1.logpdf(y))
        rhs = np.log1p(-prior_h1) + np.asarray(g0.logpdf(y))
    decide = np.atleast_1d(lhs > rhs)
    sel = np.nonzero(decide)[0]
    return SelectionResult(sel, int(sel.size), prior_h1)
