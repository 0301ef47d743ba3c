import numpy as np
import pytest
from hypothesis import given, strategies as st

from snetfdr.distributions import Gaussian, Mixture
from snetfdr.metrics import ks_statistic
from snetfdr.snet import Scenario, Sensing, ground_truth, interference, place_objects, sample_field, simulate


def _index(sc, x, y):
    return y * sc.grid_width + x


def test_place_objects():
    rng = np.random.default_rng(0)
    assert place_objects(Scenario(num_objects=0), rng).shape == (0, 2)
    np.testing.assert_array_equal(place_objects(Scenario(num_objects=1, object_positions=[(10, 10)]), rng), [[10, 10]])
    a = place_objects(Scenario(), np.random.default_rng(5))
    b = place_objects(Scenario(), np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (10, 2) and np.all((a >= 0) & (a <= 99))
    with pytest.raises(ValueError):
        place_objects(Scenario(num_objects=2, object_positions=[(1, 1)]), rng)


def test_scenario_validation():
    for bad in ({"r_eff": 0}, {"theta": -1}, {"decay_exp": 0}, {"object_positions": [(500, 1)], "num_objects": 1}):
        with pytest.raises(ValueError):
            Scenario(**bad)
    with pytest.raises(ValueError):
        Scenario(sensing="telepathic")


def test_ground_truth_examples():
    sc = Scenario(grid_width=30, grid_height=30)
    lab = ground_truth(sc, [(10, 10)])
    assert lab[_index(sc, 10, 12)] and not lab[_index(sc, 10, 13)]
    assert not ground_truth(sc, np.zeros((0, 2))).any()


def test_noise_free_ideal():
    sc = Scenario(grid_width=20, grid_height=20, num_objects=1, object_positions=[(5, 5)],
                  null_noise=Gaussian(0, 1e-12), alt_noise=Gaussian(0, 1e-12))
    lab = ground_truth(sc, sc.object_positions)
    f = sample_field(sc, lab, sc.object_positions, np.random.default_rng(0))
    np.testing.assert_allclose(f.observations[lab], 2.8, atol=1e-9)
    np.testing.assert_allclose(f.observations[~lab], 0.0, atol=1e-9)


def test_physics_examples():
    sc = Scenario(grid_width=20, grid_height=20, num_objects=1, object_positions=[(10, 10)], sensing="physics",
                  null_noise=Gaussian(0, 1e-12), alt_noise=Gaussian(0, 1e-12), theta=2.8, decay_exp=2, d0=2.5)
    lab = ground_truth(sc, sc.object_positions)
    f = sample_field(sc, lab, sc.object_positions, np.random.default_rng(0))
    assert f.observations[_index(sc, 10, 10)] == pytest.approx(2.8)
    assert f.observations[_index(sc, 14, 10)] == pytest.approx(2.8 / 25)
    assert interference(sc, sc.object_positions)[_index(sc, 14, 10)] == pytest.approx(0.112)


def test_counts_add_up():
    for mode in Sensing:
        f = simulate(Scenario(grid_width=40, grid_height=25, sensing=mode), np.random.default_rng(3))
        assert f.m0 + f.m1 == 1000


def test_ideal_null_observations_iid():
    sc = Scenario()
    assert sc.m == 10_000
    # pooled over ten fields: at 1e4 draws the 0.01 bar fails about one seed in four
    pooled = []
    for s in range(10):
        f = simulate(sc, np.random.default_rng([11, s]))
        pooled.append(f.observations[~f.labels])
    assert ks_statistic(np.concatenate(pooled), sc.null_noise.cdf) < 0.01


def test_nonideal_ranges():
    sc = Scenario(grid_width=50, grid_height=50, num_objects=5, sensing="nonideal",
                  null_noise=Gaussian(0, 1e-12), alt_noise=Gaussian(0, 1e-12))
    f = simulate(sc, np.random.default_rng(2))
    assert np.all((f.observations[~f.labels] >= -1e-9) & (f.observations[~f.labels] <= 0.1 + 1e-9))
    assert np.all((f.observations[f.labels] >= 2.7 - 1e-9) & (f.observations[f.labels] <= 2.8 + 1e-9))
    alt = sc.nominal_alternative()
    assert isinstance(alt, Mixture) and len(alt.components) == 21


def test_determinism_and_csv(tmp_path):
    sc = Scenario(grid_width=12, grid_height=12, num_objects=2)
    a = simulate(sc, np.random.default_rng(9))
    b = simulate(sc, np.random.default_rng(9))
    np.testing.assert_array_equal(a.observations, b.observations)
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    raw = (tmp_path / "a.csv").read_bytes()
    assert raw == (tmp_path / "b.csv").read_bytes()
    assert raw.startswith(b"x,y,label,observation\n") and b"\r" not in raw
    assert raw.count(b"\n") == 145


@given(
    ox=st.floats(0, 39),
    oy=st.floats(0, 39),
    step=st.floats(0.1, 5.0),
    kappa=st.floats(0.5, 3.0),
)
def test_interference_nonneg_nonincreasing(ox, oy, step, kappa):
    sc = Scenario(grid_width=40, grid_height=40, num_objects=1, decay_exp=kappa, sensing="physics")
    near = interference(sc, [(ox, oy)])
    assert np.all(near >= 0)
    # push the object away along x: every sensor already beyond d0 sees less
    far_obj = (ox + step, oy)
    d_old = np.hypot(sc.sensor_coords()[:, 0] - ox, sc.sensor_coords()[:, 1] - oy)
    d_new = np.hypot(sc.sensor_coords()[:, 0] - far_obj[0], sc.sensor_coords()[:, 1] - oy)
    moved = interference(sc, [far_obj])
    both_far = (d_old > sc.cutoff) & (d_new > sc.cutoff) & (d_new >= d_old)
    assert np.all(moved[both_far] <= near[both_far] + 1e-15)
