"""Sensor-field simulator: one sensor per pixel, point objects with an effective radius."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .distributions import DensityModel, Gaussian, Mixture, shifted


class Sensing(str, enum.Enum):
    IDEAL = "ideal"
    NONIDEAL = "nonideal"
    PHYSICS = "physics"


@dataclass(frozen=True)
class Scenario:
    """Field geometry and observation model.

    Sensors sit at integer pixel centres ``(x, y)``, ``0 <= x < grid_width``.
    ``decay_exp`` is the power-law exponent of the physics model and ``d0`` its
    interference cutoff (defaults to ``r_eff``).  The default alternative
    noise reads the 0.05 in N(0, 0.05) as a standard deviation.
    """

    grid_width: int = 100
    grid_height: int = 100
    num_objects: int = 10
    object_positions: tuple[tuple[float, float], ...] | None = None
    r_eff: float = 2.5
    theta: float = 2.8
    decay_exp: float = 2.0
    d0: float | None = None
    null_noise: DensityModel = field(default_factory=lambda: Gaussian(0.0, 1.0))
    alt_noise: DensityModel = field(default_factory=lambda: Gaussian(0.0, 0.05))
    sensing: Sensing = Sensing.IDEAL
    nonideal_xi_range: tuple[float, float] = (0.0, 0.1)
    nonideal_theta_range: tuple[float, float] | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sensing", Sensing(self.sensing))
        if self.grid_width <= 0 or self.grid_height <= 0:
            raise ValueError("grid dimensions must be positive")
        if not (self.r_eff > 0 and self.theta > 0 and self.decay_exp > 0):
            raise ValueError("r_eff, theta and decay_exp must be positive")
        if self.num_objects < 0:
            raise ValueError("num_objects must be non-negative")
        if self.object_positions is not None:
            pos = tuple(tuple(map(float, p)) for p in self.object_positions)
            for x, y in pos:
                if not (-0.5 <= x <= self.grid_width - 0.5 and -0.5 <= y <= self.grid_height - 0.5):
                    raise ValueError(f"object position {(x, y)} lies outside the grid")
            object.__setattr__(self, "object_positions", pos)

    @property
    def m(self) -> int:
        return self.grid_width * self.grid_height

    @property
    def cutoff(self) -> float:
        return self.r_eff if self.d0 is None else self.d0

    @property
    def theta_range(self) -> tuple[float, float]:
        if self.nonideal_theta_range is not None:
            return self.nonideal_theta_range
        return (self.theta - 0.1, self.theta)

    def sensor_coords(self) -> np.ndarray:
        xs, ys = np.meshgrid(np.arange(self.grid_width), np.arange(self.grid_height), indexing="xy")
        return np.column_stack([xs.ravel(), ys.ravel()]).astype(float)

    def nominal_alternative(self, theta_nodes: int = 21) -> DensityModel:
        """Observation law of an H1 sensor, as assumed by the detector.

        Ideal/physics: ``theta + nu``.  Non-ideal: ``theta_s + nu`` with
        ``theta_s`` uniform on ``theta_range``, discretised on ``theta_nodes``.
        """
        if self.sensing is Sensing.NONIDEAL:
            lo, hi = self.theta_range
            nodes = np.linspace(lo, hi, theta_nodes)
            w = 1.0 / theta_nodes
            return Mixture(tuple((w, shifted(self.alt_noise, float(t))) for t in nodes))
        return shifted(self.alt_noise, self.theta)


@dataclass(frozen=True, eq=False)
class FieldRealization:
    coords: np.ndarray  # (m, 2)
    labels: np.ndarray  # (m,) bool, True = H1
    observations: np.ndarray  # (m,)
    object_positions: np.ndarray  # (n_obj, 2)

    @property
    def m1(self) -> int:
        return int(self.labels.sum())

    @property
    def m0(self) -> int:
        return int(self.labels.size - self.labels.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "label", "observation"])
            for (x, y), lab, obs in zip(self.coords, self.labels, self.observations):
                w.writerow([int(x), int(y), int(lab), repr(float(obs))])


def place_objects(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    if scenario.object_positions is not None:
        pos = np.asarray(scenario.object_positions, dtype=float).reshape(-1, 2)
        if pos.shape[0] != scenario.num_objects:
            raise ValueError("number of explicit positions differs from num_objects")
        return pos
    n = scenario.num_objects
    return np.column_stack(
        [rng.uniform(0, scenario.grid_width - 1, n), rng.uniform(0, scenario.grid_height - 1, n)]
    )


def _distances(coords: np.ndarray, objects: np.ndarray) -> np.ndarray:
    if objects.shape[0] == 0:
        return np.full((coords.shape[0], 0), np.inf)
    return np.sqrt(((coords[:, None, :] - objects[None, :, :]) ** 2).sum(-1))


def ground_truth(scenario: Scenario, objects) -> np.ndarray:
    """H1 iff the sensor lies within ``r_eff`` of some object."""
    obj = np.asarray(objects, dtype=float).reshape(-1, 2)
    d = _distances(scenario.sensor_coords(), obj)
    if d.shape[1] == 0:
        return np.zeros(scenario.m, dtype=bool)
    return d.min(axis=1) <= scenario.r_eff


def interference(scenario: Scenario, objects, exclude_nearest: np.ndarray | None = None) -> np.ndarray:
    """Far-field term: sum over objects beyond ``d0`` of ``theta / (d + 1)**decay_exp``."""
    obj = np.asarray(objects, dtype=float).reshape(-1, 2)
    d = _distances(scenario.sensor_coords(), obj)
    if d.shape[1] == 0:
        return np.zeros(scenario.m)
    far = d > scenario.cutoff
    if exclude_nearest is not None:
        far[np.arange(d.shape[0]), d.argmin(axis=1)] &= ~exclude_nearest
    return np.where(far, scenario.theta / (d + 1.0) ** scenario.decay_exp, 0.0).sum(axis=1)


def sample_field(scenario: Scenario, labels, objects, rng: np.random.Generator) -> FieldRealization:
    lab = np.asarray(labels, dtype=bool)
    obj = np.asarray(objects, dtype=float).reshape(-1, 2)
    m1 = int(lab.sum())
    m0 = lab.size - m1
    y = np.empty(lab.size)
    noise0 = scenario.null_noise.sample(rng, m0)
    noise1 = scenario.alt_noise.sample(rng, m1)
    if scenario.sensing is Sensing.IDEAL:
        y[~lab] = noise0
        y[lab] = scenario.theta + noise1
    elif scenario.sensing is Sensing.NONIDEAL:
        xi = rng.uniform(*scenario.nonideal_xi_range, m0)
        th = rng.uniform(*scenario.theta_range, m1)
        y[~lab] = xi + noise0
        y[lab] = th + noise1
    elif scenario.sensing is Sensing.PHYSICS:
        d = _distances(scenario.sensor_coords(), obj)
        far = interference(scenario, obj, exclude_nearest=lab)
        y[~lab] = far[~lab] + noise0
        if m1:
            near = d[lab].min(axis=1)
            y[lab] = scenario.theta / (near + 1.0) ** scenario.decay_exp + far[lab] + noise1
    else:  # pragma: no cover - Sensing() already rejects unknown modes
        raise ValueError(f"unknown sensing mode {scenario.sensing!r}")
    return FieldRealization(scenario.sensor_coords(), lab, y, obj)


def simulate(scenario: Scenario, rng: np.random.Generator) -> FieldRealization:
    objects = place_objects(scenario, rng)
    return sample_field(scenario, ground_truth(scenario, objects), objects, rng)
