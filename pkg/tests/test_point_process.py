import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mcv2x.channel import NetworkParams
from mcv2x.errors import InsufficientDeploymentError, InvalidArgumentError, OrderingError
from mcv2x.montecarlo import displaced_distances, trial_rng
from mcv2x.point_process import (
    Deployment,
    apply_displacement,
    check_road_length,
    displacement_factors,
    edge_effect_probability,
    read_deployment_csv,
    sample_deployment,
    sample_ppp_1d,
    select_serving_set,
    transformed_intensity,
    write_deployment_csv,
)


@pytest.mark.slow
def test_ppp_count_moments():
    counts = np.array([len(sample_ppp_1d(5.0, 300.0, trial_rng(5, k))) for k in range(10**5)])
    assert abs(counts.mean() - 1500) <= 5
    assert abs(counts.var() - 1500) <= 15


def test_ppp_window_and_ordering():
    x = sample_ppp_1d(2.0, 10.0, np.random.default_rng(0))
    assert np.all(np.abs(x) <= 5.0)
    assert np.all(np.diff(np.abs(x)) >= 0)
    assert np.all(x != 0)


@pytest.mark.parametrize("lam,length", [(0, 1), (-1, 1), (1, 0), (1, -2)])
def test_ppp_rejects_bad_args(lam, length):
    with pytest.raises(InvalidArgumentError):
        sample_ppp_1d(lam, length, np.random.default_rng(0))


def test_transformed_intensity_examples():
    assert transformed_intensity(5.0, 0.0, 0.0, 3.3) == 5.0
    expected = 5 * math.exp(0.5 * (2 * math.log(10) / 40) ** 2)
    assert transformed_intensity(5.0, 0.0, 2.0, 4.0) == pytest.approx(expected, rel=1e-15)
    assert transformed_intensity(5.0, 0.0, 2.0, 4.0) == pytest.approx(5.0332, abs=1e-4)


def test_transformed_intensity_mean_sign():
    # a positive mean dB gain pulls stations closer, raising the displaced density
    assert transformed_intensity(1.0, 3.0, 0.0, 4.0) == pytest.approx(10 ** (3 / 40), rel=1e-14)


def test_transformed_intensity_matches_simulation_with_mean_shadowing():
    p = NetworkParams(shadow_mean_db=3.0, shadow_std_db=6.0)
    lam_t = transformed_intensity(p.lambda_d, p.shadow_mean_db, p.shadow_std_db, p.alpha_d)
    y1 = np.array([displaced_distances(p, trial_rng(1, k)).min() for k in range(20_000)])
    assert stats.kstest(y1, lambda x: 1 - np.exp(-2 * lam_t * x)).pvalue > 0.01


def test_apply_displacement_examples():
    x = np.array([3.0, -1.0, 2.0])
    np.testing.assert_array_equal(apply_displacement(x, np.ones(3), 4), [1.0, 2.0, 3.0])
    assert apply_displacement([2.0], [16.0], 4)[0] == pytest.approx(1.0, rel=1e-15)


def test_displacement_rejects_bad_marks():
    with pytest.raises(InvalidArgumentError):
        displacement_factors([1.0, 0.0], 4)
    with pytest.raises(InvalidArgumentError):
        apply_displacement([1.0], [-2.0], 4)


def test_serving_set_examples():
    s = select_serving_set([1, 2, 3, 5], 2)
    np.testing.assert_array_equal(s.serving_distances, [1, 2])
    assert s.boundary == 2
    np.testing.assert_array_equal(s.interferer_distances, [3, 5])
    full = select_serving_set([1, 2, 3], 3)
    assert full.m == 3 and len(full.interferer_distances) == 0


def test_serving_set_errors():
    with pytest.raises(InsufficientDeploymentError):
        select_serving_set([1.0], 2)
    with pytest.raises(OrderingError):
        select_serving_set([2.0, 1.0], 1)
    with pytest.raises(InvalidArgumentError):
        select_serving_set([1.0, 2.0], 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_deployment_invariants(seed, m):
    p = NetworkParams(lambda_d=1.0, road_length_km=20.0)
    dep = sample_deployment(p, np.random.default_rng(seed))
    assert len(dep.positions) == len(dep.shadow_marks) == len(dep.transformed_distances)
    assert np.all(np.abs(dep.positions) <= 10.0)
    y = dep.transformed_distances
    assert np.all(y > 0) and np.all(np.diff(y) >= 0)
    np.testing.assert_allclose(y, dep.shadow_marks ** (-1 / p.alpha_d) * np.abs(dep.positions), rtol=1e-15)
    if len(y) >= m:
        s = select_serving_set(y, m)
        assert s.boundary == np.sort(y)[m - 1]
        if len(s.interferer_distances):
            assert s.boundary <= s.interferer_distances.min()


def test_displacement_preserves_count():
    rng = np.random.default_rng(8)
    x = sample_ppp_1d(3.0, 40.0, rng)
    chi = 10 ** (rng.normal(0, 6, size=len(x)) / 10)
    assert len(apply_displacement(x, chi, 3.5)) == len(x)


def test_nearest_displaced_is_strongest_mean_power():
    p = NetworkParams(shadow_std_db=8.0, lambda_d=2.0, road_length_km=40.0)
    for k in range(1000):
        dep = sample_deployment(p, trial_rng(11, k))
        power = dep.shadow_marks * np.abs(dep.positions) ** (-p.alpha_d)
        assert int(np.argmax(power)) == 0


def test_displaced_nearest_distance_ks():
    p = NetworkParams()
    lam_t = transformed_intensity(p.lambda_d, p.shadow_mean_db, p.shadow_std_db, p.alpha_d)
    y1 = np.array([displaced_distances(p, trial_rng(21, k)).min() for k in range(20_000)])
    assert stats.kstest(y1, lambda x: 1 - np.exp(-2 * lam_t * x)).pvalue > 0.01


def test_edge_effect_probability():
    assert edge_effect_probability(5.0, 300.0) == pytest.approx(math.exp(-750))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_road_length(NetworkParams())
    with pytest.warns(RuntimeWarning):
        assert not check_road_length(NetworkParams(lambda_d=0.1, road_length_km=100.0))


def test_deployment_csv_round_trip(tmp_path):
    dep = sample_deployment(NetworkParams(road_length_km=10.0), np.random.default_rng(3))
    path = tmp_path / "dep.csv"
    write_deployment_csv(dep, path)
    back = read_deployment_csv(path)
    for a, b in zip((dep.positions, dep.shadow_marks, dep.transformed_distances),
                    (back.positions, back.shadow_marks, back.transformed_distances)):
        np.testing.assert_array_equal(a, b)
    assert path.read_text().splitlines()[0] == "position_km,shadow_mark,transformed_distance_km"


def test_deployment_rejects_ragged():
    with pytest.raises(InvalidArgumentError):
        Deployment(np.ones(2), np.ones(3), np.ones(2))
