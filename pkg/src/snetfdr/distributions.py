"""Observation models: densities, CDFs and samplers.

Every model is an immutable value with vectorised ``pdf``; one-dimensional
models also provide ``cdf``/``sf``/``isf``.  Sampling always takes an explicit
``numpy.random.Generator`` so that draws are reproducible per stream.

Models can be written as short strings (``"gaussian(0,1)"``); see
:func:`parse_density` for the grammar.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

# Gaussian support is truncated here for quadrature; the tail mass is < 1e-15.
GAUSS_TRUNC = 8.0


class DimensionError(ValueError):
    """Point dimension does not match the model, or a 1-D op on a k-D model."""


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` to shape (n,) for 1-D models or (n, dim) otherwise."""
    arr = np.asarray(x, dtype=float)
    if dim == 1:
        if arr.ndim == 2 and arr.shape[-1] == 1:
            arr = arr[:, 0]
        if arr.ndim > 1:
            raise DimensionError(f"expected scalar or 1-D array for a 1-D model, got shape {arr.shape}")
        scalar = arr.ndim == 0
        return np.atleast_1d(arr), scalar
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise DimensionError(f"point has {arr.shape[0]} components, model has {dim}")
        return arr[None, :], True
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionError(f"points must have shape (n, {dim}), got {arr.shape}")
    return arr, False


def _ret(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


class DensityModel:
    """Base class.  Subclasses implement the ``_pdf``/``_cdf``/``_sf`` kernels."""

    dimension: int = 1

    # ---- public API -------------------------------------------------------
    def pdf(self, x):
        pts, scalar = _as_points(x, self.dimension)
        return _ret(self._pdf(pts), scalar)

    def logpdf(self, x):
        pts, scalar = _as_points(x, self.dimension)
        return _ret(self._logpdf(pts), scalar)

    def cdf(self, x):
        self._require_1d("cdf")
        pts, scalar = _as_points(x, 1)
        return _ret(np.clip(self._cdf(pts), 0.0, 1.0), scalar)

    def sf(self, x):
        self._require_1d("sf")
        pts, scalar = _as_points(x, 1)
        return _ret(np.clip(self._sf(pts), 0.0, 1.0), scalar)

    def isf(self, q):
        """Inverse survival function: the y with sf(y) = q."""
        self._require_1d("isf")
        qs, scalar = _as_points(q, 1)
        return _ret(self._isf(qs), scalar)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        n = 1 if size is None else int(size)
        out = self._sample(rng, n)
        if size is None:
            return float(out[0]) if self.dimension == 1 else out[0]
        return out

    def support(self) -> np.ndarray:
        """Bounding box used for quadrature, shape (dimension, 2)."""
        raise NotImplementedError

    # ---- default kernels --------------------------------------------------
    def _logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self._pdf(x))

    def _pdf(self, x):
        return np.exp(self._logpdf(x))

    def _cdf(self, x):
        return 1.0 - self._sf(x)

    def _sf(self, x):
        return 1.0 - self._cdf(x)

    def _isf(self, q):
        # Vectorised bisection on the survival function, for models without a closed form.
        lo_b, hi_b = self.support()[0]
        q = np.asarray(q, dtype=float)
        lo = np.full(q.shape, lo_b)
        hi = np.full(q.shape, hi_b)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            above = self._sf(mid) > q
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
            if np.all(hi - lo <= 1e-13 * np.maximum(1.0, np.abs(mid))):
                break
        return 0.5 * (lo + hi)

    def _require_1d(self, op: str):
        if self.dimension != 1:
            raise DimensionError(f"{op} is only defined for one-dimensional models")


# ---------------------------------------------------------------------------
# One-dimensional closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian(DensityModel):
    mean: float = 0.0
    stddev: float = 1.0

    def __post_init__(self):
        if not self.stddev > 0:
            raise ValueError("stddev must be positive")

    def _z(self, x):
        return (x - self.mean) / self.stddev

    def _logpdf(self, x):
        z = self._z(x)
        return -0.5 * z * z - math.log(self.stddev) - 0.5 * math.log(2 * math.pi)

    def _cdf(self, x):
        return special.ndtr(self._z(x))

    def _sf(self, x):
        return special.ndtr(-self._z(x))

    def _isf(self, q):
        return self.mean - self.stddev * special.ndtri(q)

    def _sample(self, rng, n):
        return rng.normal(self.mean, self.stddev, n)

    def support(self):
        w = GAUSS_TRUNC * self.stddev
        return np.array([[self.mean - w, self.mean + w]])


@dataclass(frozen=True)
class Exponential(DensityModel):
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def _logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf)

    def _cdf(self, x):
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def _sf(self, x):
        return np.where(x > 0, np.exp(-self.rate * np.maximum(x, 0.0)), 1.0)

    def _isf(self, q):
        with np.errstate(divide="ignore"):
            return -np.log(q) / self.rate

    def _sample(self, rng, n):
        return rng.exponential(1.0 / self.rate, n)

    def support(self):
        return np.array([[0.0, 40.0 / self.rate]])


@dataclass(frozen=True)
class Uniform(DensityModel):
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError("need high > low")

    def _pdf(self, x):
        inside = (x >= self.low) & (x <= self.high)
        return np.where(inside, 1.0 / (self.high - self.low), 0.0)

    def _cdf(self, x):
        return np.clip((x - self.low) / (self.high - self.low), 0.0, 1.0)

    def _isf(self, q):
        return self.high - q * (self.high - self.low)

    def _sample(self, rng, n):
        return rng.uniform(self.low, self.high, n)

    def support(self):
        return np.array([[self.low, self.high]])


class _ScipyBacked(DensityModel):
    """1-D models delegating kernels to a frozen scipy distribution."""

    def _frozen(self):
        raise NotImplementedError

    def _pdf(self, x):
        return self._frozen().pdf(x)

    def _cdf(self, x):
        return self._frozen().cdf(x)

    def _sf(self, x):
        return self._frozen().sf(x)

    def _isf(self, q):
        return self._frozen().isf(q)

    def _sample(self, rng, n):
        return self._frozen().rvs(size=n, random_state=rng)


@dataclass(frozen=True)
class Beta(_ScipyBacked):
    a: float = 1.0
    b: float = 1.0

    def _frozen(self):
        return stats.beta(self.a, self.b)

    def support(self):
        return np.array([[0.0, 1.0]])


@dataclass(frozen=True)
class Triangular(_ScipyBacked):
    """Triangular law on [left, right] with peak at ``mode``."""

    left: float = 0.0
    mode: float = 0.5
    right: float = 1.0

    def __post_init__(self):
        if not (self.left <= self.mode <= self.right and self.right > self.left):
            raise ValueError("need left <= mode <= right and left < right")

    def _frozen(self):
        w = self.right - self.left
        return stats.triang((self.mode - self.left) / w, loc=self.left, scale=w)

    def support(self):
        return np.array([[self.left, self.right]])


@dataclass(frozen=True)
class Shifted(DensityModel):
    """Law of ``base + offset`` for a 1-D base model."""

    base: DensityModel
    offset: float

    def _logpdf(self, x):
        return self.base._logpdf(x - self.offset)

    def _cdf(self, x):
        return self.base._cdf(x - self.offset)

    def _sf(self, x):
        return self.base._sf(x - self.offset)

    def _isf(self, q):
        return self.base._isf(q) + self.offset

    def _sample(self, rng, n):
        return self.base._sample(rng, n) + self.offset

    def support(self):
        return self.base.support() + self.offset


def shifted(model: DensityModel, offset: float) -> DensityModel:
    """``model + offset``, collapsing to a closed form where one exists."""
    if isinstance(model, Gaussian):
        return Gaussian(model.mean + offset, model.stddev)
    if isinstance(model, Uniform):
        return Uniform(model.low + offset, model.high + offset)
    return Shifted(model, offset)


# ---------------------------------------------------------------------------
# Composite models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mixture(DensityModel):
    components: tuple[tuple[float, DensityModel], ...]

    def __post_init__(self):
        comps = tuple((float(w), m) for w, m in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        ws = np.array([w for w, _ in comps])
        if np.any(ws < 0) or abs(ws.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        dims = {m.dimension for _, m in comps}
        if len(dims) != 1:
            raise DimensionError("mixture components must share a dimension")
        object.__setattr__(self, "components", comps)

    @property
    def dimension(self):  # type: ignore[override]
        return self.components[0][1].dimension

    def _pdf(self, x):
        return sum(w * m._pdf(x) for w, m in self.components)

    def _logpdf(self, x):
        terms = [np.log(w) + m._logpdf(x) for w, m in self.components if w > 0]
        return special.logsumexp(np.stack(terms), axis=0)

    def _cdf(self, x):
        return sum(w * m._cdf(x) for w, m in self.components)

    def _sf(self, x):
        return sum(w * m._sf(x) for w, m in self.components)

    def _sample(self, rng, n):
        ws = np.array([w for w, _ in self.components])
        which = rng.choice(len(ws), size=n, p=ws / ws.sum())
        out = np.empty((n,) if self.dimension == 1 else (n, self.dimension))
        for j, (_, m) in enumerate(self.components):
            idx = np.nonzero(which == j)[0]
            if idx.size:
                out[idx] = m._sample(rng, idx.size)
        return out

    def support(self):
        boxes = np.stack([m.support() for _, m in self.components])
        return np.stack([boxes[:, :, 0].min(0), boxes[:, :, 1].max(0)], axis=1)


@dataclass(frozen=True)
class UniformCube(DensityModel):
    dim: int = 1

    @property
    def dimension(self):  # type: ignore[override]
        return self.dim

    def _pdf(self, x):
        if self.dim == 1:
            inside = (x >= 0) & (x <= 1)
        else:
            inside = np.all((x >= 0) & (x <= 1), axis=1)
        return inside.astype(float)

    def _cdf(self, x):
        return np.clip(x, 0.0, 1.0)

    def _isf(self, q):
        return 1.0 - q

    def _sample(self, rng, n):
        return rng.random(n) if self.dim == 1 else rng.random((n, self.dim))

    def support(self):
        return np.tile([0.0, 1.0], (self.dim, 1))


@dataclass(frozen=True)
class Product(DensityModel):
    """Independent coordinates, one 1-D model per axis."""

    factors: tuple[DensityModel, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if any(f.dimension != 1 for f in self.factors):
            raise DimensionError("product factors must be one-dimensional")

    @property
    def dimension(self):  # type: ignore[override]
        return len(self.factors)

    def _logpdf(self, x):
        return sum(f._logpdf(x[:, j]) for j, f in enumerate(self.factors))

    def _sample(self, rng, n):
        return np.column_stack([f._sample(rng, n) for f in self.factors])

    def support(self):
        return np.vstack([f.support() for f in self.factors])


@dataclass(frozen=True)
class BivariateGaussian(DensityModel):
    mean: tuple[float, float] = (0.0, 0.0)
    stddev: tuple[float, float] = (1.0, 1.0)
    rho: float = 0.0
    dimension = 2

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie in (-1, 1)")

    def _logpdf(self, x):
        z1 = (x[:, 0] - self.mean[0]) / self.stddev[0]
        z2 = (x[:, 1] - self.mean[1]) / self.stddev[1]
        r = self.rho
        q = (z1 * z1 - 2 * r * z1 * z2 + z2 * z2) / (1 - r * r)
        norm = 2 * math.pi * self.stddev[0] * self.stddev[1] * math.sqrt(1 - r * r)
        return -0.5 * q - math.log(norm)

    def _sample(self, rng, n):
        s1, s2 = self.stddev
        cov = [[s1 * s1, self.rho * s1 * s2], [self.rho * s1 * s2, s2 * s2]]
        return rng.multivariate_normal(self.mean, cov, size=n)

    def support(self):
        m = np.asarray(self.mean)[:, None]
        s = np.asarray(self.stddev)[:, None]
        return m + GAUSS_TRUNC * s * np.array([[-1.0, 1.0]])


@dataclass(frozen=True)
class Radial2D(DensityModel):
    """Circularly symmetric density on the unit square.

    ``profile`` is a non-increasing function of the radius; it is renormalised
    by midpoint quadrature over the square, so disks leaving the square are
    handled by clipping.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    center: tuple[float, float] = (0.5, 0.5)
    quad_cells: int = 1024
    _norm: float = field(init=False, repr=False, compare=False, default=1.0)
    _peak: float = field(init=False, repr=False, compare=False, default=1.0)
    dimension = 2

    def __post_init__(self):
        h = 1.0 / self.quad_cells
        c = (np.arange(self.quad_cells) + 0.5) * h
        gx, gy = np.meshgrid(c, c, indexing="ij")
        r = np.hypot(gx - self.center[0], gy - self.center[1])
        z = float(np.sum(self.profile(r)) * h * h)
        if not z > 0:
            raise ValueError("radial profile integrates to zero over the unit square")
        object.__setattr__(self, "_norm", z)
        object.__setattr__(self, "_peak", float(self.profile(np.array([0.0]))[0]) / z)

    def radius(self, x) -> np.ndarray:
        pts, _ = _as_points(x, 2)
        return np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])

    def inscribed_radius(self) -> float:
        cx, cy = self.center
        return float(min(cx, cy, 1 - cx, 1 - cy))

    def _pdf(self, x):
        inside = np.all((x >= 0) & (x <= 1), axis=1)
        r = np.hypot(x[:, 0] - self.center[0], x[:, 1] - self.center[1])
        return np.where(inside, self.profile(r) / self._norm, 0.0)

    def _sample(self, rng, n):
        out = np.empty((0, 2))
        while out.shape[0] < n:
            k = max(2 * (n - out.shape[0]), 64)
            cand = rng.random((k, 2))
            keep = rng.random(k) * self._peak <= self._pdf(cand)
            out = np.vstack([out, cand[keep]])
        return out[:n]

    def support(self):
        return np.array([[0.0, 1.0], [0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Tabulated(DensityModel):
    """Piecewise-constant density on a regular grid over the unit cube (1-D or 2-D)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2) or np.any(v < 0):
            raise ValueError("tabulated values must be a non-negative 1-D or 2-D grid")
        total = v.mean()
        if not total > 0:
            raise ValueError("tabulated density has zero mass")
        v = v / total
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dimension(self):  # type: ignore[override]
        return self.values.ndim

    def _cell(self, x):
        shape = self.values.shape
        if self.values.ndim == 1:
            inside = (x >= 0) & (x <= 1)
            idx = np.clip((x * shape[0]).astype(int), 0, shape[0] - 1)
            return inside, (idx,)
        inside = np.all((x >= 0) & (x <= 1), axis=1)
        ix = np.clip((x[:, 0] * shape[0]).astype(int), 0, shape[0] - 1)
        iy = np.clip((x[:, 1] * shape[1]).astype(int), 0, shape[1] - 1)
        return inside, (ix, iy)

    def _pdf(self, x):
        inside, idx = self._cell(x)
        return np.where(inside, self.values[idx], 0.0)

    def _cdf(self, x):
        n = self.values.shape[0]
        edges = np.linspace(0.0, 1.0, n + 1)
        cum = np.concatenate([[0.0], np.cumsum(self.values) / n])
        return np.interp(x, edges, cum)

    def _sample(self, rng, n):
        flat = self.values.ravel()
        cells = rng.choice(flat.size, size=n, p=flat / flat.sum())
        offs = rng.random((n, self.values.ndim))
        idx = np.unravel_index(cells, self.values.shape)
        pts = np.column_stack([(i + o) / s for i, o, s in zip(idx, offs.T, self.values.shape)])
        return pts[:, 0] if self.values.ndim == 1 else pts

    def support(self):
        return np.tile([0.0, 1.0], (self.values.ndim, 1))


@dataclass(frozen=True)
class PValueLaw(DensityModel):
    """Law on (0, 1) of the survival p-value ``sf_null(Y)`` when ``Y ~ alternative``.

    Its density is the likelihood ratio ``g1/g0`` evaluated at ``isf_null(p)``,
    which is what the domain transformation needs as its alternative density.
    """

    null: DensityModel
    alternative: DensityModel

    def __post_init__(self):
        if self.null.dimension != 1 or self.alternative.dimension != 1:
            raise DimensionError("PValueLaw needs one-dimensional null and alternative")

    def _logpdf(self, p):
        inside = (p > 0) & (p < 1)
        q = np.where(inside, p, 0.5)
        y = self.null._isf(q)
        with np.errstate(invalid="ignore"):
            lr = self.alternative._logpdf(y) - self.null._logpdf(y)
        lr = np.where(np.isnan(lr), -np.inf, lr)
        return np.where(inside, lr, -np.inf)

    def _cdf(self, p):
        q = np.clip(p, 0.0, 1.0)
        return self.alternative._sf(self.null._isf(q))

    def _sample(self, rng, n):
        return self.null._sf(self.alternative._sample(rng, n))

    def support(self):
        return np.array([[0.0, 1.0]])


# ---------------------------------------------------------------------------
# Module-level API
# ---------------------------------------------------------------------------


def pdf(model: DensityModel, x):
    return model.pdf(x)


def cdf(model: DensityModel, x):
    return model.cdf(x)


def sample(model: DensityModel, rng: np.random.Generator, size: int | None = None):
    return model.sample(rng, size)


def mixture(weights: Sequence[float], models: Sequence[DensityModel]) -> Mixture:
    return Mixture(tuple(zip(weights, models)))


# ---------------------------------------------------------------------------
# String grammar
# ---------------------------------------------------------------------------

_CALL = re.compile(r"^\s*([a-z_0-9]+)\s*\((.*)\)\s*$", re.S)


def _split_args(s: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in s:
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        out.append(tail)
    return out


def parse_density(text: str) -> DensityModel:
    """Parse a density expression.

    Grammar (whitespace ignored)::

        gaussian(mean, stddev)       exponential(rate)      uniform(low, high)
        uniform_cube(dim)            beta(a, b)             triangular(left, mode, right)
        shifted(model, offset)       product(model, model, ...)
        bigaussian(m1, m2, s1, s2, rho)
        mixture(w1 * model1, w2 * model2, ...)

    >>> parse_density("mixture(0.5*gaussian(0,1), 0.5*gaussian(0,3))").cdf(0.0)
    0.5
    """
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse density {text!r}")
    name, argstr = m.group(1), m.group(2)
    args = _split_args(argstr)

    def nums(k: int | None = None) -> list[float]:
        try:
            vals = [float(a) for a in args]
        except ValueError:
            raise ValueError(f"{name}() takes numeric arguments, got {argstr!r}") from None
        if k is not None and len(vals) != k:
            raise ValueError(f"{name}() takes {k} arguments, got {len(vals)}")
        return vals

    if name in ("gaussian", "normal"):
        return Gaussian(*nums(2))
    if name == "exponential":
        return Exponential(*nums(1))
    if name == "uniform":
        return Uniform(*nums(2))
    if name == "uniform_cube":
        (d,) = nums(1)
        return UniformCube(int(d))
    if name == "beta":
        return Beta(*nums(2))
    if name == "triangular":
        return Triangular(*nums(3))
    if name == "bigaussian":
        m1, m2, s1, s2, r = nums(5)
        return BivariateGaussian((m1, m2), (s1, s2), r)
    if name == "shifted":
        if len(args) != 2:
            raise ValueError("shifted() takes a model and an offset")
        return shifted(parse_density(args[0]), float(args[1]))
    if name == "product":
        return Product(tuple(parse_density(a) for a in args))
    if name == "mixture":
        comps = []
        for a in args:
            w, _, rest = a.partition("*")
            if not rest:
                raise ValueError(f"mixture component {a!r} must look like 'w*model'")
            comps.append((float(w), parse_density(rest)))
        return Mixture(tuple(comps))
    raise ValueError(f"unknown density {name!r}")
