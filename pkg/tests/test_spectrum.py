import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from bas_spectra.flows import catalog_flow
from bas_spectra.spectrum import (
    ConvergenceWarning,
    SamplerSpec,
    ThresholdUndefined,
    bounded_orbit_certificate,
    check_sandwich,
    check_tensor_inclusion,
    connectivity_threshold,
    ess_spectral_radius,
    estimate_exponents,
    estimate_from_ensemble,
    gap_window,
    instability_certificate,
    restricted_exponents,
    run_ensemble,
    sample_phase_points,
    sobolev_bounds,
    spectral_structure,
)
from bas_spectra.symbols import catalog_symbol
from conftest import CATALOG

SMALL = SamplerSpec(n_samples=32, horizon=50.0)
QUICK = SamplerSpec(n_samples=16, horizon=10.0)


@pytest.fixture(scope="module")
def cellular_transport(cellular):
    s = catalog_symbol("transport", cellular)
    return s, run_ensemble(cellular, s, SMALL)


@pytest.mark.parametrize("key", sorted(CATALOG))
def test_transport_mu_is_zero(flows, key):
    f = flows[key]
    est = estimate_exponents(f, catalog_symbol("transport", f), 0.0, QUICK)
    assert est.mu_max == 0.0 and est.mu_min == 0.0


def test_cellular_lambda_window(cellular_transport):
    _, ens = cellular_transport
    est = estimate_from_ensemble(ens, 0.0)
    assert 0.85 <= est.lambda_max <= 1.1
    assert abs(est.lambda_min + est.lambda_max) <= 0.05


def test_shear_lambda_symmetric(shear):
    est = estimate_exponents(shear, catalog_symbol("transport", shear), 0.0, SMALL)
    assert abs(est.lambda_min + est.lambda_max) <= 0.05
    assert est.lambda_max < 0.1


def test_constant_flow_frozen_coefficients():
    f = catalog_flow("constant", [1.0, 0.5])
    est = estimate_exponents(f, catalog_symbol("euler_velocity", f), 0.0, QUICK)
    assert abs(est.mu_max) < 1e-12 and abs(est.mu_min) < 1e-12


def test_threads_do_not_change_results(cellular):
    s = catalog_symbol("euler_velocity", cellular)
    sp = SamplerSpec(n_samples=24, horizon=5.0, chunk_size=5)
    a = run_ensemble(cellular, s, sp, threads=1)
    b = run_ensemble(cellular, s, sp, threads=4)
    np.testing.assert_array_equal(a.fiber_fwd, b.fiber_fwd)
    np.testing.assert_array_equal(a.xi_bwd, b.xi_bwd)


def test_sampling_is_seeded(cellular):
    a = sample_phase_points(cellular, SamplerSpec(seed=3))
    b = sample_phase_points(cellular, SamplerSpec(seed=3))
    c = sample_phase_points(cellular, SamplerSpec(seed=4))
    np.testing.assert_array_equal(a[0], b[0])
    assert not np.array_equal(a[0], c[0])


def test_convergence_warning(shear):
    sp = SamplerSpec(n_samples=8, horizon=5.0, gap_threshold=1e-6)
    with pytest.warns(ConvergenceWarning):
        est = estimate_exponents(shear, catalog_symbol("transport", shear), 0.0, sp)
    assert not est.converged


def test_ess_radius():
    assert ess_spectral_radius(0.0, 3.0) == 1.0
    assert ess_spectral_radius(0.7, 0.0) == 1.0
    with pytest.raises(ValueError):
        ess_spectral_radius(0.7, -1.0)


def test_ess_radius_transport_m1(cellular):
    est = estimate_exponents(cellular, catalog_symbol("transport", cellular), 1.0, SMALL)
    assert math.exp(0.85) <= ess_spectral_radius(est, 1.0) <= math.exp(1.1)


def test_sobolev_bounds_examples():
    assert sobolev_bounds(0, 0, -1, 1, 2) == (-2, -2, 2, 2)
    assert sobolev_bounds(-0.3, 0.4, -1, 1, 0) == (-0.3, 0.4, -0.3, 0.4)
    for m in (-3.0, 0.5, 2.0):
        assert sobolev_bounds(-1, 1, 0, 0, m) == (-1, 1, -1, 1)


def test_gap_window_examples():
    assert gap_window(0, 0, -1, 1, 2) is None
    assert gap_window(-0.3, 0.4, -1, 1, 0) == (-0.3, 0.4)
    assert gap_window(0, 3, -1, 1, 1) == (1, 2)


def test_connectivity_threshold_examples():
    assert connectivity_threshold(0, 0, -1, 1) == 0
    assert connectivity_threshold(0, 3, -1, 1) == 1.5
    assert connectivity_threshold(0.5, 0.5, -2, 1) == 0
    with pytest.raises(ThresholdUndefined):
        connectivity_threshold(0, 1, 0.2, 0.2)


def test_structure_transport_cellular_m2(cellular, cellular_transport):
    s, ens = cellular_transport
    st_ = spectral_structure(cellular, s, 2.0, SMALL, ensemble=ens)
    lam = st_.estimates["zero"]["lambda_max"]
    assert st_.hypothesis
    np.testing.assert_allclose(st_.interval, (-2 * lam, 2 * lam), atol=1e-9)
    r = np.array(st_.annulus_radii)
    np.testing.assert_allclose(r, [math.exp(-2 * lam), 1.0, 1.0, math.exp(2 * lam)], atol=1e-6)
    assert abs(st_.s) <= 0.05 and abs(st_.S) <= 0.05


def test_structure_shear_is_m_independent(shear):
    s = catalog_symbol("euler_velocity", shear)
    ens = run_ensemble(shear, s, SMALL)
    a = spectral_structure(shear, s, 0.0, SMALL, ensemble=ens)
    for m in (-2.0, 2.0):
        b = spectral_structure(shear, s, m, SMALL, ensemble=ens)
        np.testing.assert_allclose(b.interval, a.interval, atol=0.25)


def test_structure_transport_m0_degenerate(cellular, cellular_transport):
    s, ens = cellular_transport
    st_ = spectral_structure(cellular, s, 0.0, SMALL, ensemble=ens)
    assert st_.interval == (0.0, 0.0) or np.allclose(st_.interval, 0.0)
    assert not st_.hypothesis


def test_sandwich_and_inclusion(cellular):
    s = catalog_symbol("euler_velocity", cellular)
    ens = run_ensemble(cellular, s, SMALL)
    e0 = estimate_from_ensemble(ens, 0.0)
    for m in (-2.0, -1.0, 1.0, 2.0):
        em = estimate_from_ensemble(ens, m)
        tol = 0.05 + e0.gap + em.gap
        assert check_sandwich(em, e0, tol)["ok"]
        assert check_tensor_inclusion(em, e0, tol)["ok"]


def test_restricted_matches_unrestricted(cellular):
    s = catalog_symbol("transport", cellular)
    full = estimate_exponents(cellular, s, 1.0, SMALL)
    res = restricted_exponents(cellular, s, 1.0, SamplerSpec(n_samples=32, horizon=50.0, restricted=True))
    assert res.restricted
    assert abs(res.lambda_max - full.lambda_max) <= 0.05
    assert abs(res.mu_max - full.mu_max) <= 0.05


def test_restricted_requires_flag(cellular):
    with pytest.raises(ValueError):
        restricted_exponents(cellular, catalog_symbol("transport", cellular), 1.0, QUICK)


def test_restricted_constant_flow():
    f = catalog_flow("constant", [1.0, 0.5])
    sp = SamplerSpec(n_samples=8, horizon=5.0, restricted=True)
    ens = run_ensemble(f, catalog_symbol("transport", f), sp)
    np.testing.assert_allclose(ens.XI @ np.array([1.0, 0.5]), 0.0, atol=1e-12)
    est = estimate_from_ensemble(ens, 1.0)
    assert abs(est.mu_max) < 1e-9 and abs(est.lambda_max) < 1e-9


def test_instability_certificates(cellular):
    ev = catalog_symbol("euler_velocity", cellular)
    tr = catalog_symbol("transport", cellular)
    assert instability_certificate(cellular, ev, 0.0, SMALL)["certified"]
    assert not instability_certificate(cellular, tr, 0.0, SMALL)["certified"]
    assert instability_certificate(cellular, tr, 1.0, SMALL)["certified"]


def test_bounded_orbit_transport(cellular):
    s = catalog_symbol("transport", cellular)
    rep = bounded_orbit_certificate(cellular, s, 0.0, 0.0, [0.4, 0.9], [1.0, 0.3], 5.0)
    assert rep["certified"] and abs(rep["sup"] - 1.0) < 1e-12


def test_bounded_orbit_stagnation(cellular):
    s = catalog_symbol("transport", cellular)
    T = 5.0
    good = bounded_orbit_certificate(cellular, s, 1.0, 1.0, [0.0, 0.0], [1.0, 0.0], T)
    assert good["certified"] and abs(good["sup"] - 1.0) < 1e-8
    bad = bounded_orbit_certificate(cellular, s, 1.0, 0.0, [0.0, 0.0], [1.0, 0.0], T)
    assert not bad["certified"]
    assert bad["log_sup"] == pytest.approx(T, abs=1e-8)


# property tests

reals = st.floats(min_value=-5, max_value=5, allow_nan=False)


@given(reals, reals, reals, reals, reals)
def test_bounds_ordering(a, b, c, d, m):
    mu_min, mu_max = sorted((a, b))
    lam_min, lam_max = sorted((c, d))
    A, B, C, D = sobolev_bounds(mu_min, mu_max, lam_min, lam_max, m)
    assert A <= min(B, C) + 1e-12 and max(B, C) <= D + 1e-12


@given(reals, reals, reals, reals, reals)
def test_gap_window_empty_beyond_threshold(a, b, c, d, m):
    mu_min, mu_max = sorted((a, b))
    lam_min, lam_max = sorted((c, d))
    assume(lam_max - lam_min > 1e-3)
    m_star = connectivity_threshold(mu_min, mu_max, lam_min, lam_max)
    assume(abs(abs(m) - m_star) > 1e-6)
    win = gap_window(mu_min, mu_max, lam_min, lam_max, m)
    assert (win is None) == (abs(m) > m_star)
    if win is not None:
        A, B, C, D = sobolev_bounds(mu_min, mu_max, lam_min, lam_max, m)
        assert A - 1e-9 <= win[0] <= win[1] <= D + 1e-9


@given(reals, st.floats(0, 10), st.floats(0, 10))
def test_ess_radius_multiplicative(mu, t, s):
    r = ess_spectral_radius(mu, t + s)
    assert r == pytest.approx(ess_spectral_radius(mu, t) * ess_spectral_radius(mu, s), rel=1e-12)
