"""Level-set domain transformation of p-values.

The transformation sends a p-value ``p`` to the Lebesgue measure of the
super-level set ``{x : f1(x) >= f1(p)}`` of the alternative density ``f1``.
Where ``f1`` is flat on a set of positive measure (a plateau) the image is
instead drawn uniformly from the interval that the plateau occupies.  Null
p-values stay uniform and the alternative is pushed towards zero with a
non-increasing density.

Everything is computed by grid quadrature: ``f1`` is evaluated on cells of
the unit interval (or square), the cells are ranked by density, and running
sums of cell volume and cell mass give the level-set profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import DensityModel, DimensionError, Radial2D

TIE_RTOL = 1e-9
DEFAULT_RESOLUTION = {1: 16384, 2: 512}
# extra log-spaced cells per endpoint in 1-D, down to TAIL_FLOOR
DEFAULT_TAIL_CELLS = 4096
TAIL_FLOOR = 1e-12


class ProfileError(ValueError):
    """A level-set profile or table violates its monotonicity invariants."""


@dataclass(frozen=True, eq=False)
class LevelSetProfile:
    """Super-level-set volumes and masses of ``f1`` on a descending level grid.

    ``alpha[k]``/``beta[k]`` are the Lebesgue measure and ``f1``-mass of
    ``{f1 >= levels[k]}``; ``alpha_start``/``beta_start`` the same for the
    strict set ``{f1 > levels[k]}``.  ``plateau[k]`` marks levels held on a set
    of positive measure.
    """

    levels: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    alpha_start: np.ndarray
    beta_start: np.ndarray
    plateau: np.ndarray
    dimension: int
    resolution: int
    # per-cell ranking, kept for push-forwards of other measures
    cell_order: np.ndarray = field(repr=False)
    cell_centers: np.ndarray = field(repr=False)
    cell_volumes: np.ndarray = field(repr=False)
    group_of_cell: np.ndarray = field(repr=False)

    @property
    def alpha_mid(self) -> np.ndarray:
        return 0.5 * (self.alpha_start + self.alpha)

    @property
    def y_max(self) -> float:
        return float(self.levels[0])

    def __len__(self):
        return self.levels.shape[0]


@dataclass(frozen=True, eq=False)
class TransformTable:
    """Transformed alternative law on [0, 1].

    ``edges``/``cdf`` give the piecewise-linear distribution function of the
    transformed alternative; ``breakpoints``/``fhat`` its density at the
    midpoint of each level band.
    """

    breakpoints: np.ndarray
    fhat: np.ndarray
    edges: np.ndarray
    cdf: np.ndarray
    plateau_intervals: tuple[tuple[float, tuple[float, float]], ...]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("breakpoint,fhat\n")
            for t, f in zip(self.breakpoints, self.fhat):
                fh.write(f"{t:.17g},{f:.17g}\n")

    def cdf_at(self, t):
        return np.interp(t, self.edges, self.cdf)


def _cells_1d(resolution: int, tail_cells: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(0.0, 1.0, resolution + 1)
    if tail_cells > 0:
        lo = np.geomspace(TAIL_FLOOR, 1.0 / resolution, tail_cells, endpoint=False)
        edges = np.concatenate([[0.0], lo, edges[1:-1], 1.0 - lo[::-1], [1.0]])
        edges = np.unique(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, np.diff(edges)


def _cells_2d(resolution: int) -> tuple[np.ndarray, np.ndarray]:
    c = (np.arange(resolution) + 0.5) / resolution
    gx, gy = np.meshgrid(c, c, indexing="ij")
    centers = np.column_stack([gx.ravel(), gy.ravel()])
    return centers, np.full(centers.shape[0], 1.0 / resolution**2)


def build_profile(
    f1: DensityModel,
    resolution: int | None = None,
    tail_cells: int | None = None,
    plateau_min_measure: float | None = None,
) -> LevelSetProfile:
    """Tabulate the level-set volumes (alpha) and masses (beta) of ``f1``.

    ``f1`` must be supported in the unit interval or unit square.  In 1-D the
    uniform grid is refined geometrically towards both endpoints, where
    alternative p-value densities often concentrate.  A run of tied cell
    values counts as a plateau when its total volume reaches
    ``plateau_min_measure`` (default ``8 / resolution**dim``); smaller ties
    (e.g. mirror-symmetric cells) are treated as a single level.
    """
    dim = f1.dimension
    if dim not in (1, 2):
        raise DimensionError("level-set profiles are supported in one or two dimensions")
    res = resolution or DEFAULT_RESOLUTION[dim]
    if dim == 1:
        centers, vols = _cells_1d(res, DEFAULT_TAIL_CELLS if tail_cells is None else tail_cells)
    else:
        centers, vols = _cells_2d(res)
    if plateau_min_measure is None:
        plateau_min_measure = 8.0 / res**dim

    vals = np.asarray(f1.pdf(centers), dtype=float)
    vals = np.where(np.isfinite(vals), np.maximum(vals, 0.0), 0.0)
    order = np.argsort(-vals, kind="stable")
    v = vals[order]
    w = vols[order]

    # a new group starts wherever the sorted density drops by more than TIE_RTOL
    brk = np.empty(v.size, dtype=bool)
    brk[0] = True
    brk[1:] = v[1:] < v[:-1] * (1.0 - TIE_RTOL)
    starts = np.nonzero(brk)[0]
    ends = np.append(starts[1:], v.size)
    gid_sorted = np.cumsum(brk) - 1

    cum_w = np.concatenate([[0.0], np.cumsum(w)])
    mass = v * w
    total = mass.sum()
    if not total > 0:
        raise ProfileError("f1 has no mass on the grid")
    cum_m = np.concatenate([[0.0], np.cumsum(mass)]) / total

    alpha_start = cum_w[starts]
    alpha = cum_w[ends]
    levels = v[starts]
    plateau = (alpha - alpha_start) >= plateau_min_measure * (1 - 1e-12)
    plateau |= (levels == 0) & (alpha > alpha_start)

    group_of_cell = np.empty(v.size, dtype=np.int64)
    group_of_cell[order] = gid_sorted
    return LevelSetProfile(
        levels=levels,
        alpha=np.minimum(alpha, 1.0),
        beta=cum_m[ends],
        alpha_start=alpha_start,
        beta_start=cum_m[starts],
        plateau=plateau,
        dimension=dim,
        resolution=res,
        cell_order=order,
        cell_centers=centers,
        cell_volumes=vols,
        group_of_cell=group_of_cell,
    )


def check_profile(profile: LevelSetProfile, tol: float = 1e-3) -> None:
    a, b = profile.alpha, profile.beta
    if np.any(np.diff(profile.levels) > 0):
        raise ProfileError("levels must be descending")
    if np.any(np.diff(a) < -1e-12) or np.any(np.diff(b) < -1e-12):
        raise ProfileError("alpha and beta must be non-decreasing as levels descend")
    if np.any(a < -1e-12) or np.any(a > 1 + 1e-9) or np.any(b < -1e-12) or np.any(b > 1 + 1e-9):
        raise ProfileError("alpha and beta must lie in [0, 1]")
    if np.any(b < a * profile.levels / max(_mass_scale(profile), 1e-300) - tol):
        raise ProfileError("beta must dominate alpha * level")


def _mass_scale(profile: LevelSetProfile) -> float:
    # quadrature mass of f1 on the grid; beta was normalised by it
    top = profile.alpha - profile.alpha_start
    return float(np.sum(profile.levels * top))


def build_transform(profile: LevelSetProfile) -> TransformTable:
    """Assemble the transformed measure: mass ``beta`` on ``(0, alpha)``.

    Each level band ``(alpha_start, alpha)`` carries mass ``beta - beta_start``
    spread uniformly, which is exactly the linear interpolation prescribed for
    jumps of alpha; the band density is the (normalised) level itself.
    """
    check_profile(profile)
    widths = profile.alpha - profile.alpha_start
    masses = profile.beta - profile.beta_start
    fhat = np.where(widths > 0, masses / np.where(widths > 0, widths, 1.0), 0.0)
    # ties merged into one band have exactly equal density; guard float noise
    fhat = np.minimum.accumulate(fhat)
    edges = np.concatenate([[0.0], profile.alpha])
    cdf = np.concatenate([[0.0], profile.beta])
    plateaus = tuple(
        (float(profile.levels[k]), (float(profile.alpha_start[k]), float(profile.alpha[k])))
        for k in np.nonzero(profile.plateau)[0]
    )
    table = TransformTable(
        breakpoints=profile.alpha_mid,
        fhat=fhat,
        edges=edges,
        cdf=cdf,
        plateau_intervals=plateaus,
    )
    return table


def _radial_closed_form(f1: Radial2D, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = f1.radius(pts)
    ok = r <= f1.inscribed_radius()
    return ok, np.pi * r * r


def apply(
    table: TransformTable,
    profile: LevelSetProfile,
    f1: DensityModel,
    p,
    rng: np.random.Generator | None = None,
):
    """Transform p-value(s) ``p`` (points of the unit cube of ``f1``).

    Non-plateau levels map deterministically to the interpolated volume of
    the super-level set through ``p``; plateau levels map to a uniform draw
    on the plateau's image interval, using ``rng``.
    """
    dim = profile.dimension
    arr = np.asarray(p, dtype=float)
    scalar = arr.ndim == 0 if dim == 1 else arr.ndim == 1
    pts = np.atleast_1d(arr) if dim == 1 else np.atleast_2d(arr)
    if dim == 2 and pts.shape[1] != 2:
        raise DimensionError("2-D transform needs points with two coordinates")
    if np.any(pts < 0) or np.any(pts > 1) or np.any(np.isnan(pts)):
        raise ValueError("p must lie in the unit cube")

    y = np.asarray(f1.pdf(pts), dtype=float).reshape(-1)
    y = np.where(np.isfinite(y), np.maximum(y, 0.0), 0.0)

    lev_asc = profile.levels[::-1]
    mid_asc = profile.alpha_mid[::-1]
    out = np.interp(y, lev_asc, mid_asc)

    # locate the level group each y belongs to (within the tie tolerance)
    k_asc = np.searchsorted(lev_asc, y)
    k_asc = np.clip(k_asc, 0, lev_asc.size - 1)
    k_lo = np.clip(k_asc - 1, 0, lev_asc.size - 1)
    hit = np.where(
        np.abs(lev_asc[k_asc] - y) <= TIE_RTOL * np.maximum(y, 1e-300), k_asc,
        np.where(np.abs(lev_asc[k_lo] - y) <= TIE_RTOL * np.maximum(y, 1e-300), k_lo, -1),
    )
    on_level = hit >= 0
    grp = np.where(on_level, lev_asc.size - 1 - np.maximum(hit, 0), 0)
    plateau = on_level & profile.plateau[grp]
    # a value equal to a non-plateau level maps to that band's midpoint
    out = np.where(on_level & ~plateau, profile.alpha_mid[grp], out)
    # below the lowest tabulated level nothing but the zero set remains
    below = y < lev_asc[0] * (1 - TIE_RTOL)
    out = np.where(below, profile.alpha[-1], out)

    if np.any(plateau):
        if rng is None:
            raise ValueError("an rng is required to randomise over plateau levels")
        a = profile.alpha_start[grp[plateau]]
        b = profile.alpha[grp[plateau]]
        out[plateau] = a + (b - a) * rng.random(a.size)

    if isinstance(f1, Radial2D):
        ok, area = _radial_closed_form(f1, pts)
        ok &= ~plateau
        out = np.where(ok, area, out)

    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def transformed_density(table: TransformTable, t) -> float | np.ndarray:
    """Density of the transformed alternative at ``t``."""
    arr = np.asarray(t, dtype=float)
    out = np.interp(arr, table.breakpoints, table.fhat)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class DomainTransform:
    """Bundle of ``f1`` with its profile and table; callable on p-values."""

    f1: DensityModel
    profile: LevelSetProfile
    table: TransformTable

    @classmethod
    def build(cls, f1: DensityModel, resolution: int | None = None, **kw) -> "DomainTransform":
        prof = build_profile(f1, resolution, **kw)
        return cls(f1, prof, build_transform(prof))

    def __call__(self, p, rng: np.random.Generator | None = None):
        return apply(self.table, self.profile, self.f1, p, rng)

    def density(self, t):
        return transformed_density(self.table, t)

    def pushforward_cdf(self, density: DensityModel | np.ndarray) -> np.ndarray:
        """CDF, at ``table.edges``, of the image of another law on the cube.

        ``density`` is evaluated on the same cells; the preimage of ``(0, x)``
        is the set of highest-``f1`` cells of total volume ``x``.
        """
        prof = self.profile
        if isinstance(density, DensityModel):
            vals = np.asarray(density.pdf(prof.cell_centers), dtype=float)
        else:
            vals = np.asarray(density, dtype=float)
        mass = vals * prof.cell_volumes
        per_group = np.bincount(prof.group_of_cell, weights=mass, minlength=len(prof))
        return np.concatenate([[0.0], np.cumsum(per_group) / mass.sum()])

    def pushforward_table(self, density) -> TransformTable:
        cdf = self.pushforward_cdf(density)
        widths = np.diff(self.table.edges)
        dens = np.where(widths > 0, np.diff(cdf) / np.where(widths > 0, widths, 1.0), 0.0)
        return TransformTable(self.table.breakpoints, dens, self.table.edges, cdf, ())


def radial_baseline(p, center=(0.5, 0.5)):
    """Radial comparison map: area of the square lying farther from the centre than ``p``.

    Only a named baseline for comparing against the level-set map; it is
    measure invariant for the uniform null on the unit square.
    """
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    r = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
    inside = _square_disk_area(r, center)
    out = 1.0 - inside
    return float(out[0]) if np.asarray(p).ndim == 1 else out


def _square_disk_area(r: np.ndarray, center, cells: int = 2048) -> np.ndarray:
    c = (np.arange(cells) + 0.5) / cells
    gx, gy = np.meshgrid(c, c, indexing="ij")
    d = np.sort(np.hypot(gx - center[0], gy - center[1]).ravel())
    return np.searchsorted(d, r, side="right") / d.size
