"""Skew-path scheme, transform, and local-time law tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from skewsim.core import derive_stream, integrate, make_grid, sample_wiener
from skewsim.sbm import (
    LocalTimeLaw,
    SbmParams,
    drift_for_skew,
    drift_support_radius,
    ensemble_block_size,
    eval_mollified_drift,
    expected_local_time,
    limit_sigma,
    local_time_atom,
    local_time_cdf,
    local_time_cdf_right,
    local_time_resolution,
    s_inverse,
    s_transform,
    s_transform_slope,
    sample_local_time,
    simulate_sbm,
    simulate_sbm_transformed,
    skew_to_mass,
    space_map,
    space_map_inverse,
    tanaka_local_time,
    terminal_ensemble,
    transformed_terminal_ensemble,
    transformed_volatility,
)
from skewsim.stats import EmpiricalCdf, ks_critical, ks_distance, mc_summary


def _tail(z):
    return 0.5 * erfc(z / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# drift construction


@given(st.floats(min_value=-0.99, max_value=0.99))
def test_skew_to_mass_tanh_roundtrip(q):
    assert math.tanh(skew_to_mass(q)) == pytest.approx(q, abs=1e-12)


@pytest.mark.parametrize("q", [1.0, -1.0, 1.5])
def test_skew_to_mass_rejects_unit_skew(q):
    with pytest.raises(ValueError):
        skew_to_mass(q)


def test_drift_mass_integrates_to_artanh():
    # Dual route: the bump was built so its integral equals the mass; check
    # by quadrature over the numerical support.
    drift = drift_for_skew(0.6, scale=64)
    radius = drift_support_radius(drift)
    total = integrate(lambda x: eval_mollified_drift(drift, x), -radius, radius)
    assert total == pytest.approx(math.atanh(0.6), rel=1e-7)


def test_drift_peak_and_symmetry():
    drift = drift_for_skew(0.4, scale=128)
    peak = eval_mollified_drift(drift, 0.0)
    assert peak == pytest.approx(128 * math.atanh(0.4) / math.sqrt(2 * math.pi),
                                 rel=1e-12)
    assert eval_mollified_drift(drift, 0.003) == pytest.approx(
        eval_mollified_drift(drift, -0.003), rel=1e-12)
    assert eval_mollified_drift(drift, 1.0) < peak * 1e-100


def test_support_radius_shrinks_with_scale():
    d64 = drift_for_skew(0.5, scale=64)
    d256 = drift_for_skew(0.5, scale=256)
    assert drift_support_radius(d256) == pytest.approx(drift_support_radius(d64) / 4)


def test_local_time_resolution_scales_with_horizon():
    drift = drift_for_skew(0.6, 256)
    r1 = local_time_resolution(drift, 0.6, 1.0)
    r2 = local_time_resolution(drift, 0.6, 2.0)
    assert r2 == pytest.approx(2 * r1, rel=1e-12)
    assert 0.0 < r1 < 1e-4


# ---------------------------------------------------------------------------
# drift-removing transform


@pytest.mark.parametrize("q", [-0.8, -0.3, 0.3, 0.8])
def test_transform_slope_hits_half_line_limits(q):
    drift = drift_for_skew(q, 256)
    away = 2 * drift_support_radius(drift)
    assert s_transform_slope(drift, away) == pytest.approx((1 - q) / 2, rel=1e-9)
    assert s_transform_slope(drift, -away) == pytest.approx((1 + q) / 2, rel=1e-9)


def test_transform_fixes_origin_and_increases():
    drift = drift_for_skew(0.5, 256)
    assert s_transform(drift, 0.0) == 0.0
    xs = np.linspace(-0.2, 0.2, 41)
    ys = [s_transform(drift, x) for x in xs]
    assert all(b > a for a, b in zip(ys, ys[1:]))


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-3.0, max_value=3.0),
       st.sampled_from([-0.9, -0.5, 0.2, 0.7]))
def test_transform_inverse_roundtrip(x, q):
    drift = drift_for_skew(q, 64)
    y = s_transform(drift, x)
    assert s_inverse(drift, y) == pytest.approx(x, abs=1e-9)


def test_transformed_volatility_equals_slope_at_preimage():
    drift = drift_for_skew(0.6, 128)
    x = 0.37
    y = s_transform(drift, x)
    assert transformed_volatility(drift, y) == pytest.approx(
        s_transform_slope(drift, x), rel=1e-9)


def test_space_map_values_and_inverse():
    assert space_map(0.6, 1.0) == pytest.approx(0.2)
    assert space_map(0.6, -1.0) == pytest.approx(-0.8)
    assert space_map(0.6, 0.0) == 0.0
    for x in (-2.0, -0.1, 0.0, 0.1, 2.0):
        assert space_map_inverse(0.6, space_map(0.6, x)) == pytest.approx(x,
                                                                          abs=1e-12)


def test_limit_sigma_halves_at_interface():
    assert limit_sigma(0.6, 1.0) == pytest.approx(0.2)
    assert limit_sigma(0.6, -1.0) == pytest.approx(0.8)
    assert limit_sigma(0.6, 0.0) == pytest.approx(0.5)


def test_space_map_requires_open_interval():
    with pytest.raises(ValueError):
        space_map(1.0, 1.0)


# ---------------------------------------------------------------------------
# path schemes


def test_params_validate_skew_range():
    with pytest.raises(ValueError):
        SbmParams(1.2, 0.0, 256)
    with pytest.raises(ValueError):
        SbmParams(0.5, 0.0, 0)


def test_mollified_path_satisfies_decomposition_exactly():
    grid = make_grid(1.0, 2000)
    wiener = sample_wiener(grid, derive_stream(3, 0))
    params = SbmParams(0.6, 0.2, 256)
    path = simulate_sbm(params, wiener)
    rebuilt = params.x0 + params.q * path.eta + wiener.scalar()
    assert np.array_equal(path.x, rebuilt)
    assert path.eta[0] == 0.0
    assert np.all(np.diff(path.eta) >= 0.0)


def test_local_time_only_grows_near_interface():
    # Outside the bump support the drift is monotonically smaller than its
    # boundary value, so the per-step local-time gain is capped there.
    grid = make_grid(1.0, 2000)
    wiener = sample_wiener(grid, derive_stream(3, 0))
    params = SbmParams(0.6, 0.0, 256)
    drift = drift_for_skew(params.q, params.mollifier_n)
    path = simulate_sbm(params, wiener)
    radius = drift_support_radius(drift)
    cap = grid.dt * eval_mollified_drift(drift, radius) / abs(params.q)
    gains = np.diff(path.eta)
    outside = np.abs(path.x[:-1]) > radius
    assert np.any(outside)
    assert np.all(gains[outside] <= cap)


@pytest.mark.parametrize("q,x0", [(1.0, 0.0), (1.0, 0.7), (-1.0, -0.4)])
def test_reflected_path_stays_in_half_line(q, x0):
    grid = make_grid(1.0, 2000)
    wiener = sample_wiener(grid, derive_stream(5, 0))
    path = simulate_sbm(SbmParams(q, x0, 256), wiener)
    if q > 0:
        assert np.all(path.x >= 0.0)
    else:
        assert np.all(path.x <= 0.0)
    assert np.array_equal(path.x, x0 + q * path.eta + wiener.scalar())


def test_reflected_local_time_grows_only_at_zero():
    grid = make_grid(1.0, 4000)
    wiener = sample_wiener(grid, derive_stream(6, 0))
    path = simulate_sbm(SbmParams(1.0, 0.0, 256), wiener)
    gains = np.diff(path.eta)
    touched = path.x[1:][gains > 0]
    assert np.all(touched == 0.0)


def test_reflected_rejects_wrong_half_line_start():
    grid = make_grid(1.0, 100)
    wiener = sample_wiener(grid, derive_stream(0, 0))
    with pytest.raises(ValueError):
        simulate_sbm(SbmParams(1.0, -0.5, 256), wiener)
    with pytest.raises(ValueError):
        simulate_sbm(SbmParams(-1.0, 0.5, 256), wiener)


def test_driftless_route_uses_absolute_value_estimator():
    grid = make_grid(1.0, 2000)
    wiener = sample_wiener(grid, derive_stream(7, 0))
    path = simulate_sbm(SbmParams(0.0, 0.3, 256), wiener)
    assert np.array_equal(path.x, 0.3 + wiener.scalar())
    assert path.eta[0] == 0.0
    assert np.all(np.diff(path.eta) >= 0.0)
    # the discrete estimator increments are nonnegative by construction, so
    # the monotone clamp should be pure roundoff
    assert path.tanaka_clamp <= 1e-12


def test_tanaka_local_time_standalone_matches_route():
    grid = make_grid(1.0, 1000)
    wiener = sample_wiener(grid, derive_stream(8, 0))
    path = simulate_sbm(SbmParams(0.0, 0.0, 256), wiener)
    eta, clamp = tanaka_local_time(path.x, wiener)
    assert np.array_equal(eta, path.eta)
    assert clamp == path.tanaka_clamp


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([-0.9, -0.4, 0.0, 0.3, 0.8, 1.0, -1.0]),
       st.floats(min_value=-0.5, max_value=0.5))
def test_decomposition_identity_across_regimes(q, x0):
    if q == 1.0:
        x0 = abs(x0)
    if q == -1.0:
        x0 = -abs(x0)
    grid = make_grid(0.5, 200)
    wiener = sample_wiener(grid, derive_stream(11, 0))
    path = simulate_sbm(SbmParams(q, x0, 64), wiener)
    rebuilt = x0 + q * path.eta + wiener.scalar()
    assert np.allclose(path.x, rebuilt, atol=1e-12)


# ---------------------------------------------------------------------------
# local-time law


def test_law_cdf_matches_tail_formula():
    # Dual route: the packaged cdf against a direct complementary-error
    # evaluation of the reflection formula.
    law = LocalTimeLaw(0.7, 2.0)
    for a in (0.1, 0.5, 1.3):
        direct = 1.0 - 2.0 * _tail((abs(law.x) + a) / math.sqrt(law.t))
        assert local_time_cdf(law, a) == pytest.approx(direct, rel=1e-12)
    assert local_time_cdf(law, 0.0) == 0.0
    assert local_time_cdf(law, -1.0) == 0.0


def test_law_atom_and_right_limit():
    law = LocalTimeLaw(1.0, 1.0)
    atom = local_time_atom(law)
    assert atom == pytest.approx(1.0 - 2.0 * _tail(1.0), rel=1e-12)
    assert local_time_cdf_right(law, 0.0) == pytest.approx(atom, rel=1e-12)
    assert local_time_cdf(law, 1e-12) == pytest.approx(atom, rel=1e-6)
    zero_start = LocalTimeLaw(0.0, 1.0)
    assert local_time_atom(zero_start) == 0.0


def test_law_cdf_is_monotone_and_limits_to_one():
    law = LocalTimeLaw(0.5, 1.0)
    grid_points = np.linspace(0.0, 8.0, 200)
    values = [local_time_cdf_right(law, a) for a in grid_points]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0, abs=1e-9)


def test_sampler_reproduces_atom_mass():
    law = LocalTimeLaw(1.0, 1.0)
    draws = sample_local_time(law, derive_stream(2, 0), size=40_000)
    frac = np.mean(draws == 0.0)
    atom = local_time_atom(law)
    se = math.sqrt(atom * (1 - atom) / 40_000)
    assert abs(frac - atom) <= 4 * se
    assert np.all(draws >= 0.0)


def test_sampler_mean_matches_expected_local_time():
    law = LocalTimeLaw(0.5, 1.5)
    draws = sample_local_time(law, derive_stream(3, 0), size=40_000)
    summary = mc_summary(draws)
    assert summary.covers(expected_local_time(0.5, 1.5))


def test_sampler_passes_ks_against_own_law():
    law = LocalTimeLaw(0.8, 1.0)
    draws = sample_local_time(law, derive_stream(4, 0), size=20_000)
    d = ks_distance(EmpiricalCdf.from_samples(draws),
                    lambda a: local_time_cdf_right(law, a),
                    lambda a: local_time_cdf(law, a))
    assert d <= ks_critical(20_000, 0.01)


def test_sampler_scalar_mode():
    law = LocalTimeLaw(0.0, 1.0)
    value = sample_local_time(law, derive_stream(5, 0))
    assert isinstance(value, float) and value >= 0.0


def _mean_local_time_primitive(x, t):
    # Closed antiderivative of the mean: 2 sqrt(t) (phi(z) - z tail(z)) with
    # z = |x| / sqrt(t); used only as a test oracle.
    z = abs(x) / math.sqrt(t)
    phi = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return 2.0 * math.sqrt(t) * (phi - z * _tail(z))


@pytest.mark.parametrize("x", [0.0, 0.2, 1.0, -1.7])
@pytest.mark.parametrize("t", [0.25, 1.0, 2.0])
def test_expected_local_time_against_primitive(x, t):
    # Dual route: quadrature implementation versus the closed form.
    assert expected_local_time(x, t) == pytest.approx(
        _mean_local_time_primitive(x, t), rel=1e-9)


def test_expected_local_time_edge_cases():
    assert expected_local_time(0.3, 0.0) == 0.0
    assert expected_local_time(0.0, 2.0) == pytest.approx(
        math.sqrt(2 * 2.0 / math.pi), rel=1e-12)
    with pytest.raises(ValueError):
        expected_local_time(0.0, -1.0)


# ---------------------------------------------------------------------------
# terminal ensembles


def _terminal_by_route(params, grid, seed, index):
    wiener = sample_wiener(grid, derive_stream(seed, index))
    path = simulate_sbm(params, wiener)
    return float(path.x[-1]), float(path.eta[-1])


@pytest.mark.parametrize("params", [
    SbmParams(0.6, 0.1, 128),
    SbmParams(0.0, 0.1, 128),
    SbmParams(1.0, 0.1, 128),
])
def test_ensemble_agrees_with_per_path_simulation(params):
    grid = make_grid(0.5, 500)
    ens = terminal_ensemble(params, grid, 6, seed=19)
    for i in (0, 3, 5):
        x, eta = _terminal_by_route(params, grid, 19, i)
        assert ens.x[i] == pytest.approx(x, abs=1e-10)
        assert ens.eta[i] == pytest.approx(eta, abs=1e-10)


def test_ensemble_worker_count_is_invisible():
    grid = make_grid(0.5, 500)
    params = SbmParams(0.4, 0.0, 128)
    a = terminal_ensemble(params, grid, 700, seed=23, workers=1)
    b = terminal_ensemble(params, grid, 700, seed=23, workers=6)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.eta, b.eta)


def test_ensemble_block_size_depends_only_on_regime_and_steps():
    a = ensemble_block_size(SbmParams(0.3, 0.0, 128), 1000)
    b = ensemble_block_size(SbmParams(0.3, 5.0, 64), 1000)
    assert a == b
    matrix = ensemble_block_size(SbmParams(0.0, 0.0, 128), 1000)
    assert matrix < a


def test_ensemble_first_index_offsets_streams():
    grid = make_grid(0.5, 200)
    params = SbmParams(0.5, 0.0, 128)
    shifted = terminal_ensemble(params, grid, 4, seed=31, first_index=2)
    base = terminal_ensemble(params, grid, 6, seed=31)
    assert np.allclose(shifted.x, base.x[2:6], atol=1e-12)


def test_scheme_terminal_local_time_mean_converges():
    # Statistical: the scheme mean at a moderate step size stays within the
    # monte carlo band plus a discretisation allowance.
    grid = make_grid(1.0, 2000)
    params = SbmParams(0.6, 0.0, 256)
    ens = terminal_ensemble(params, grid, 3000, seed=37, workers=4)
    summary = mc_summary(ens.eta)
    target = expected_local_time(0.0, 1.0)
    assert abs(summary.mean - target) <= summary.halfwidth + 0.08 * target


# ---------------------------------------------------------------------------
# transformed scheme


def test_transformed_path_lives_in_mapped_coordinates():
    grid = make_grid(1.0, 1000)
    wiener = sample_wiener(grid, derive_stream(41, 0))
    params = SbmParams(0.6, 0.3, 256)
    tp = simulate_sbm_transformed(params, wiener)
    assert np.allclose(tp.y, space_map(params.q, tp.x), atol=1e-12)
    assert tp.y[0] == pytest.approx(space_map(params.q, params.x0))


def test_transformed_ensemble_matches_per_path():
    grid = make_grid(0.5, 400)
    params = SbmParams(0.5, 0.0, 128)
    xs = transformed_terminal_ensemble(params, grid, 5, seed=43)
    for i in (0, 2, 4):
        wiener = sample_wiener(grid, derive_stream(43, i))
        tp = simulate_sbm_transformed(params, wiener)
        assert xs[i] == pytest.approx(float(tp.x[-1]), abs=1e-12)


def test_transformed_scheme_rejects_reflected_regime():
    grid = make_grid(0.5, 100)
    with pytest.raises(ValueError):
        transformed_terminal_ensemble(SbmParams(1.0, 0.0, 128), grid, 10, seed=0)
