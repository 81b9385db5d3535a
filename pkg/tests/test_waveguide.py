import numpy as np
import pytest
from numpy.testing import assert_allclose

from ocms.errors import ConfigError, TiltOutOfRange
from ocms.waveguide import (ArrayGeometry, Environment, FluidHalfspace, PressureRelease, apply_tilt, grid_size,
                            isovelocity, perturb_ssp, search_bounds, thermocline)


def test_grid_size_brackets_the_water_depth():
    assert grid_size(50.0, 0.1) == 500
    assert grid_size(50.05, 0.1) == 500
    L = grid_size(49.99, 0.1)
    assert L * 0.1 <= 49.99 < (L + 1) * 0.1


def test_environment_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        Environment(500.0, 0.1, 50.0, np.full(499, 1500.0))
    with pytest.raises(ConfigError):
        Environment(-1.0, 0.1, 50.0, np.full(500, 1500.0))
    with pytest.raises(ConfigError):
        Environment(500.0, 0.1, 50.0, np.full(500, -1.0))
    with pytest.raises(ConfigError):
        isovelocity(bottom=FluidHalfspace(1400.0, 1500.0))


def test_from_profile_interpolates_linearly():
    env = thermocline()
    assert_allclose(env.ssp[env.z <= 15.0], 1530.0)
    assert_allclose(env.ssp[env.z >= 25.0], 1500.0)
    assert_allclose(env.ssp[np.isclose(env.z, 20.0)], 1515.0)


def test_fingerprint_tracks_content():
    a, b = isovelocity(), isovelocity()
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != isovelocity(c=1501.0).fingerprint()


def test_geometry_validation():
    with pytest.raises(ConfigError):
        ArrayGeometry([1.0], 5000.0)
    with pytest.raises(ConfigError):
        ArrayGeometry([2.0, 1.0], 5000.0)
    with pytest.raises(ConfigError):
        ArrayGeometry([1.0, 2.0], 0.0)


def test_zero_tilt_is_identity():
    g = ArrayGeometry(np.arange(1.0, 51.0), 5000.0)
    pos = apply_tilt(g, 50.0)
    assert_allclose(pos.depths, g.nominal_depths)
    assert_allclose(pos.ranges, 5000.0)


def test_five_degree_tilt_top_element():
    # z' = z cos t + H (1 - cos t), r' = r0 + (H - z) sin t
    pos = apply_tilt(ArrayGeometry([1.0, 2.0], 5000.0, 5.0), 50.0)
    assert_allclose(pos.depths[0], 1.186460, atol=1e-6)
    assert_allclose(pos.ranges[0], 5004.2706, atol=1e-4)


def test_tilt_formula_sends_every_element_to_the_bottom_at_ninety_degrees():
    # documentation case only: the formula, evaluated directly, collapses onto H
    z, H, t = np.arange(1.0, 51.0), 50.0, np.pi / 2
    assert_allclose(z * np.cos(t) + H * (1 - np.cos(t)), H)


@pytest.mark.parametrize("theta", [90.0, -1.0, 120.0])
def test_tilt_out_of_range(theta):
    with pytest.raises(TiltOutOfRange):
        apply_tilt(ArrayGeometry([1.0, 2.0], 5000.0, theta), 50.0)


def test_perturb_ssp_zero_alpha_is_identity():
    env = thermocline()
    assert np.array_equal(perturb_ssp(env, 0.0, 123).ssp, env.ssp)


def test_perturb_ssp_bounded_and_deterministic():
    env = thermocline()
    a = perturb_ssp(env, 1.0, 7)
    assert np.all(np.abs(a.ssp - env.ssp) <= 1.0)
    b1, b2 = perturb_ssp(env, 0.5, 11), perturb_ssp(env, 0.5, 11)
    assert b1.ssp.tobytes() == b2.ssp.tobytes()
    assert not np.array_equal(perturb_ssp(env, 0.5, 12).ssp, b1.ssp)


def test_perturb_ssp_statistics():
    env = isovelocity()
    d = np.array([perturb_ssp(env, 2.0, s).ssp - env.ssp for s in range(1000)])
    assert 1.99 < np.abs(d).max() <= 2.0
    assert abs(d.mean()) < 0.05 * 2.0


def test_perturb_ssp_per_profile_shifts_uniformly():
    env = thermocline()
    d = perturb_ssp(env, 1.0, 3, mode="per_profile").ssp - env.ssp
    assert_allclose(d, d[0], atol=1e-12)
    with pytest.raises(ConfigError):
        perturb_ssp(env, 1.0, 3, mode="bogus")
    with pytest.raises(ConfigError):
        perturb_ssp(env, -1.0, 3)


def test_search_bounds():
    xi_min, xi_max = search_bounds(isovelocity())
    assert_allclose(xi_max, 2.0943951, atol=1e-7)
    assert_allclose(xi_min, 0.90 * 2.0943951, atol=1e-7)
    assert_allclose(xi_min, 1.8849556, atol=1e-7)
    xi_min, _ = search_bounds(isovelocity(bottom=FluidHalfspace(1600.0, 1500.0)))
    assert_allclose(xi_min, 1.9634954, atol=1e-7)
    _, xi_max = search_bounds(thermocline(bottom=PressureRelease(0.93)))
    assert_allclose(xi_max, 2 * np.pi * 500 / 1500, rtol=1e-12)
