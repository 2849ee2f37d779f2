import numpy as np
import pytest
from hypothesis import given, strategies as st

from bas_spectra.cocycle import (
    ConstraintError,
    adjoint_inverse_cocycle,
    bxm_log_growth,
    conserved_determinant,
    constraint_residual,
    determinant_drift,
    dual_cocycle,
    frame_trajectory,
    hamiltonian_drift,
    integrate_bas,
    inverse_cocycle,
)
from bas_spectra.flows import jacobi_cocycle
from bas_spectra.symbols import catalog_symbol, constraint_transform, sobolev_shift
from conftest import CATALOG, rand_unit

ORIGIN = np.zeros(2)
E1, E2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
TGRID = np.linspace(0.0, 3.0, 7)


def test_transport_amplitude_is_constant(cellular):
    s = catalog_symbol("transport", cellular)
    tr = integrate_bas(cellular, s, [0.4, 1.1], [0.3, 0.9], [1.0], TGRID)
    np.testing.assert_allclose(tr.logRb, 0.0, atol=1e-14)
    np.testing.assert_allclose(tr.b[..., 0], 1.0, atol=1e-14)


def test_cellular_xi_growth(cellular):
    s = catalog_symbol("transport", cellular)
    tr = integrate_bas(cellular, s, ORIGIN, E1, [1.0], TGRID)
    np.testing.assert_allclose(tr.logRxi[:, 0], TGRID, atol=1e-9)


def test_euler_velocity_stagnation_decay(cellular):
    s = catalog_symbol("euler_velocity", cellular)
    tr = integrate_bas(cellular, s, ORIGIN, E1, E2, TGRID)
    np.testing.assert_allclose(tr.logRb[:, 0, 0], -TGRID, atol=1e-9)


def test_xi_matches_inverse_transpose_jacobian(cellular):
    s = catalog_symbol("transport", cellular)
    x0, xi0, t = np.array([0.4, 1.1]), np.array([0.3, -0.9]), 2.5
    tr = integrate_bas(cellular, s, x0, xi0, [1.0], t)
    J = jacobi_cocycle(cellular, x0, t).J
    np.testing.assert_allclose(tr.xi()[-1, 0], np.linalg.solve(J.T, xi0), rtol=1e-8)


def test_bxm_m0_is_logRb(cellular):
    s = catalog_symbol("euler_velocity", cellular)
    tr = integrate_bas(cellular, s, [0.2, 0.3], [1.0, 0.5], [-0.5, 1.0], TGRID)
    np.testing.assert_array_equal(bxm_log_growth(tr, 0.0), tr.logRb)


def test_bxm_transport_m1(cellular):
    s = catalog_symbol("transport", cellular)
    tr = integrate_bas(cellular, s, ORIGIN, E1, [1.0], TGRID)
    np.testing.assert_allclose(bxm_log_growth(tr, 1.0)[:, 0, 0], TGRID, atol=1e-9)


def test_bxm_dynamo_m_minus1(cellular):
    s = catalog_symbol("kinematic_dynamo", cellular)
    tr = integrate_bas(cellular, s, ORIGIN, E1, E2, TGRID)
    np.testing.assert_allclose(tr.logRb[:, 0, 0], TGRID, atol=1e-9)
    np.testing.assert_allclose(bxm_log_growth(tr, -1.0)[:, 0, 0], 0.0, atol=1e-9)


def test_sobolev_shift_matches_bxm(cellular):
    s = catalog_symbol("euler_velocity", cellular)
    x0, xi0, b0 = [0.7, 0.2], [1.0, 2.0], [2.0, -1.0]
    for m in (-1.0, 2.0):
        base = integrate_bas(cellular, s, x0, xi0, b0, TGRID)
        shifted = integrate_bas(cellular, sobolev_shift(s, m), x0, xi0, b0, TGRID)
        np.testing.assert_allclose(shifted.logRb, bxm_log_growth(base, m), atol=1e-8)


def test_inverse_of_inverse(cellular):
    s = catalog_symbol("euler_velocity", cellular)
    T = 2.0
    fwd = inverse_cocycle(cellular, s, [0.5, 0.9], [1.0, -0.4], [0.4, 1.0], T)
    x1, xi1, b1 = fwd.restart_state()
    back = integrate_bas(cellular, s, x1, xi1, b1, T)
    np.testing.assert_allclose(back.x_unwrapped[-1, 0], [0.5, 0.9], atol=1e-8)
    np.testing.assert_allclose(back.amplitude_vectors()[-1, 0, 0], [0.4, 1.0], atol=1e-8)


def test_dual_transport_is_trivial(cellular):
    s = catalog_symbol("transport", cellular)
    tr = dual_cocycle(cellular, s, [0.3, 0.3], [1.0, 1.0], [1.0], TGRID[-1])
    np.testing.assert_allclose(tr.logRb, 0.0, atol=1e-14)


def test_dual_growth_at_fixed_point(cellular):
    # a0 = diag(-1, -1) at the origin: normal, so the adjoint-inverse grows at the opposite rate
    s = catalog_symbol("euler_velocity", cellular)
    fwd = integrate_bas(cellular, s, ORIGIN, E1, E2, TGRID)
    adj = adjoint_inverse_cocycle(cellular, s, ORIGIN, E1, E2, TGRID)
    np.testing.assert_allclose(adj.logRb, -fwd.logRb, atol=1e-9)


@pytest.mark.parametrize("key", ["cellular", "shear", "abc"])
def test_duality_pairing(flows, key):
    f = flows[key]
    s = catalog_symbol("euler_velocity", f)
    rng = np.random.default_rng(5)
    x0 = rng.uniform(0, 2 * np.pi, size=f.dim)
    xi0 = rng.normal(size=f.dim)
    fr = s.bundle.frame(xi0)
    b0, c0 = fr[:, 0], rng.normal(size=f.dim) + 1j * rng.normal(size=f.dim)
    fwd = integrate_bas(f, s, x0, xi0, b0, TGRID)
    adj = adjoint_inverse_cocycle(f, s, x0, xi0, c0, TGRID)
    pair = np.einsum("ki,ki->k", adj.amplitude_vectors()[:, 0, 0].conj(), fwd.amplitude_vectors()[:, 0, 0])
    np.testing.assert_allclose(pair, pair[0], atol=1e-8 * abs(pair[0]) + 1e-12)


def test_determinant_closed_form_euler(cellular):
    s = catalog_symbol("euler_velocity", cellular)
    b0 = np.array([0.0, 0.7])
    tr = integrate_bas(cellular, s, ORIGIN, E1, b0, TGRID)
    np.testing.assert_allclose(conserved_determinant(tr)[:, 0], -0.7, atol=1e-9)


def test_determinant_closed_form_dynamo(cellular):
    s = constraint_transform(catalog_symbol("kinematic_dynamo", cellular))
    tr = integrate_bas(cellular, s, ORIGIN, E1, E2, TGRID, check_constraint=False)
    q = conserved_determinant(tr)[:, 0]
    np.testing.assert_allclose(q, -1.0, atol=1e-9)


def test_determinant_rejects_mismatched_start(cellular):
    s = catalog_symbol("euler_velocity", cellular)
    a = integrate_bas(cellular, s, [0.1, 0.2], E1, E2, TGRID)
    b = integrate_bas(cellular, s, [0.5, 0.2], E1, E2, TGRID)
    with pytest.raises(ValueError, match="share"):
        conserved_determinant([a, b])


@pytest.mark.parametrize("key", sorted(CATALOG))
@pytest.mark.parametrize("eq", ["euler_velocity", "camassa_holm"])
def test_determinant_law(flows, key, eq):
    f = flows[key]
    s = catalog_symbol(eq, f)
    rng = np.random.default_rng(11)
    x0 = rng.uniform(0, 2 * np.pi, size=(3, f.dim))
    xi0 = rng.normal(size=(3, f.dim))
    tr = frame_trajectory(f, s, x0, xi0, np.linspace(0, 10, 11))
    assert determinant_drift(conserved_determinant(tr)) <= 1e-6


def test_determinant_negative_control(cellular):
    from dataclasses import replace

    s = catalog_symbol("euler_velocity", cellular)
    base = s.evaluate
    broken = replace(s, evaluate=lambda x, xib, du: base(x, xib, du) + 1e-3 * np.eye(2))
    tr = frame_trajectory(cellular, broken, [0.4, 1.0], [1.0, 0.3], np.linspace(0, 10, 11), check_constraint=False)
    assert determinant_drift(conserved_determinant(tr)) > 1e-3


def test_euler_velocity_constraint_residual(flows):
    for key in ("cellular", "shear", "abc"):
        f = flows[key]
        s = catalog_symbol("euler_velocity", f)
        tr = frame_trajectory(f, s, np.full(f.dim, 0.8), np.arange(1.0, f.dim + 1), np.linspace(0, 10, 11))
        assert constraint_residual(tr).max() <= 1e-8


def test_raw_vector_transport_leaves_fiber(cellular):
    raw = catalog_symbol("transport", cellular, {"components": 2})
    x0, xi0 = [0.4, 1.1], [1.0, 0.5]
    b0 = raw.bundle.frame(np.array(xi0))[:, 0]
    t = np.linspace(0, 10, 11)
    drift = constraint_residual(integrate_bas(cellular, raw, x0, xi0, b0, t))[:, 0, 0]
    assert drift[0] <= 1e-12 and drift.max() > 1e-2
    fixed = constraint_transform(raw)
    assert constraint_residual(integrate_bas(cellular, fixed, x0, xi0, b0, t)).max() <= 1e-8


def test_scalar_residual_is_zero(cellular):
    s = catalog_symbol("transport", cellular)
    tr = integrate_bas(cellular, s, [0.4, 1.1], [1.0, 0.5], [1.0], TGRID)
    assert np.all(constraint_residual(tr) == 0)


def test_off_fiber_amplitude_rejected(cellular):
    s = catalog_symbol("euler_velocity", cellular)
    with pytest.raises(ConstraintError):
        integrate_bas(cellular, s, ORIGIN, E1, E1, 1.0)


def test_zero_frequency_rejected(cellular):
    s = catalog_symbol("transport", cellular)
    with pytest.raises(ValueError):
        integrate_bas(cellular, s, ORIGIN, [0.0, 0.0], [1.0], 1.0)


# property tests

seeds = st.integers(min_value=0, max_value=2**31 - 1)
keys = st.sampled_from(["cellular", "shear", "abc"])


def _instance(flows, key, seed):
    f = flows[key]
    rng = np.random.default_rng(seed)
    s = catalog_symbol("euler_velocity", f)
    x0 = rng.uniform(0, 2 * np.pi, size=f.dim)
    xi0 = rng.normal(size=f.dim)
    b0 = s.bundle.frame(xi0) @ rng.normal(size=f.dim - 1)
    return f, s, x0, xi0, b0


@given(keys, seeds, st.floats(0.1, 4.0), st.floats(0.1, 4.0))
def test_cocycle_composition(flows, key, seed, s_, t_):
    f, s, x0, xi0, b0 = _instance(flows, key, seed)
    whole = integrate_bas(f, s, x0, xi0, b0, [0.0, s_, s_ + t_])
    first = integrate_bas(f, s, x0, xi0, b0, [0.0, s_])
    x1, xi1, b1 = first.restart_state()
    second = integrate_bas(f, s, x1, xi1, b1, [0.0, t_])
    total = whole.logRb[-1] - whole.logRb[0]
    split = (first.logRb[-1] - first.logRb[0]) + (second.logRb[-1] - second.logRb[0])
    np.testing.assert_allclose(total, split, atol=1e-6)
    np.testing.assert_allclose(whole.logRxi[-1], second.logRxi[-1], atol=1e-6)


@given(keys, seeds)
def test_hamiltonian_conserved(flows, key, seed):
    f, s, x0, xi0, b0 = _instance(flows, key, seed)
    for grid in (np.linspace(0, 20, 9), np.linspace(0, -20, 9)):
        assert hamiltonian_drift(integrate_bas(f, s, x0, xi0, b0, grid)).max() <= 1e-6


@given(keys, seeds)
def test_frequency_scale_invariance(flows, key, seed):
    f, s, x0, xi0, b0 = _instance(flows, key, seed)
    a = integrate_bas(f, s, x0, xi0, b0, TGRID)
    b = integrate_bas(f, s, x0, 3.0 * xi0, b0, TGRID)
    np.testing.assert_allclose(b.logRxi - a.logRxi, np.log(3.0), atol=1e-8)
    np.testing.assert_allclose(b.logRb, a.logRb, atol=1e-8)
