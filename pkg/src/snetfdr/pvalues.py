"""Observation -> p-value maps that are uniform under the null."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .distributions import BivariateGaussian, DensityModel, DimensionError, Product

SLICE_NODES = 4096


@dataclass(frozen=True, eq=False)
class PValueVector:
    values: np.ndarray
    sensor_ids: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        ids = np.asarray(self.sensor_ids)
        if v.shape[0] != ids.shape[0]:
            raise ValueError("values and sensor_ids must be aligned")
        if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise ValueError("p-values must lie in [0, 1]")
        if np.unique(ids).size != ids.size:
            raise ValueError("sensor_ids must be unique")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sensor_ids", ids)

    @classmethod
    def from_values(cls, values) -> "PValueVector":
        v = np.asarray(values, dtype=float)
        return cls(v, np.arange(v.shape[0]))

    def __len__(self):
        return self.values.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            if self.values.ndim == 1:
                fh.write("sensor_id,p\n")
                for i, p in zip(self.sensor_ids, self.values):
                    fh.write(f"{i},{p:.17g}\n")
            else:
                cols = ",".join(f"p{j + 1}" for j in range(self.values.shape[1]))
                fh.write(f"sensor_id,{cols}\n")
                for i, row in zip(self.sensor_ids, self.values):
                    fh.write(f"{i}," + ",".join(f"{p:.17g}" for p in row) + "\n")


def survival_pvalue(null_model: DensityModel, y):
    """``1 - G0(y)``, computed through the survival function for tail accuracy."""
    if null_model.dimension != 1:
        raise DimensionError("survival_pvalue needs a one-dimensional null model")
    return null_model.sf(y)


def fold_transform(p):
    """``|1 - 2p|``; maps U(0,1) to U(0,1) and sends the centre to zero."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
        raise ValueError("fold_transform expects probabilities in [0, 1]")
    out = np.abs(1.0 - 2.0 * arr)
    return float(out) if out.ndim == 0 else out


class SequentialUniformizer:
    """Map 2-D null observations to the unit square coordinate by coordinate.

    First coordinate: marginal survival of ``y1``.  Second: survival of ``y2``
    under the conditional law of the second coordinate given ``y1``.  Both are
    uniform and independent when ``y`` comes from the joint null.

    ``method="auto"`` uses closed forms for :class:`Product` and
    :class:`BivariateGaussian`; ``"quadrature"`` forces the numerical route
    (marginal table + slice quadrature on ``nodes`` points).
    """

    def __init__(self, joint_null: DensityModel, method: str = "auto", nodes: int = SLICE_NODES):
        if joint_null.dimension != 2:
            raise DimensionError("sequential uniformizer needs a 2-D model")
        if method not in ("auto", "quadrature"):
            raise ValueError("method must be 'auto' or 'quadrature'")
        self.model = joint_null
        self.nodes = nodes
        self.closed = method == "auto" and isinstance(joint_null, (Product, BivariateGaussian))
        if not self.closed:
            self._build_marginal()

    def _build_marginal(self):
        box = self.model.support()
        t = np.linspace(box[0, 0], box[0, 1], self.nodes)
        s = np.linspace(box[1, 0], box[1, 1], self.nodes)
        marg = np.empty(self.nodes)
        for a in range(0, self.nodes, 256):
            tt = t[a : a + 256]
            pts = np.column_stack([np.repeat(tt, s.size), np.tile(s, tt.size)])
            vals = self.model._pdf(pts).reshape(tt.size, s.size)
            marg[a : a + 256] = integrate.simpson(vals, x=s, axis=1)
        # survival of the first coordinate, integrated from the top down
        tail = integrate.cumulative_simpson(marg[::-1], x=-t[::-1], initial=0.0)[::-1]
        self._t, self._s = t, s
        self._surv1 = np.clip(tail / tail[0], 0.0, 1.0)

    def _closed_form(self, y):
        m = self.model
        if isinstance(m, Product):
            return np.column_stack([m.factors[0].sf(y[:, 0]), m.factors[1].sf(y[:, 1])])
        from scipy.special import ndtr

        (m1, m2), (s1, s2), r = m.mean, m.stddev, m.rho
        z1 = (y[:, 0] - m1) / s1
        cond_mean = m2 + r * s2 * z1
        cond_sd = s2 * np.sqrt(1 - r * r)
        return np.column_stack([ndtr(-z1), ndtr(-(y[:, 1] - cond_mean) / cond_sd)])

    def _quadrature(self, y):
        p1 = np.interp(y[:, 0], self._t, self._surv1)
        s = self._s
        p2 = np.empty(y.shape[0])
        chunk = max(1, 2_000_000 // s.size)
        for a in range(0, y.shape[0], chunk):
            y1 = y[a : a + chunk, 0]
            pts = np.column_stack([np.repeat(y1, s.size), np.tile(s, y1.size)])
            dens = self.model._pdf(pts).reshape(y1.size, s.size)
            cum = integrate.cumulative_trapezoid(dens, x=s, axis=1, initial=0.0)
            total = cum[:, -1]
            if np.any(total <= 0):
                raise ValueError("conditional density vanishes on the slice at y1")
            below = np.array([np.interp(v, s, c) for v, c in zip(y[a : a + chunk, 1], cum)])
            p2[a : a + chunk] = 1.0 - below / total
        return np.column_stack([p1, np.clip(p2, 0.0, 1.0)])

    def __call__(self, y):
        arr = np.asarray(y, dtype=float)
        single = arr.ndim == 1
        pts = np.atleast_2d(arr)
        if pts.shape[1] != 2:
            raise DimensionError("points must have two coordinates")
        out = self._closed_form(pts) if self.closed else self._quadrature(pts)
        return out[0] if single else out


def sequential_uniformizer(joint_null: DensityModel, y, method: str = "auto"):
    return SequentialUniformizer(joint_null, method=method)(y)
