import numpy as np
import pytest
from hypothesis import given, strategies as st

from bas_spectra.flows import catalog_flow, flow_from_stream_function
from bas_spectra.pdevalidate import (
    PdeBackend,
    SpectralField,
    WavePacket,
    apply_generator,
    evolve,
    fit_decay_order,
    hm_norm,
    norm_growth,
    packet_log_growth,
    shortwave_error,
    truncated_generator_spectrum,
    write_error_csv,
    write_field_csv,
)

CONST = catalog_flow("constant", [1.0, 0.0])


def random_field(rng, N, d=1, constrained=False, mean_zero=False, real=True, bandwidth=None):
    S = 2 * N + 1
    c = rng.normal(size=(d, S, S)) + 1j * rng.normal(size=(d, S, S))
    if bandwidth is not None:
        k = np.arange(-N, N + 1)
        mask = (np.abs(k)[:, None] <= bandwidth) & (np.abs(k)[None, :] <= bandwidth)
        c = c * mask
    if real:
        c = 0.5 * (c + c[:, ::-1, ::-1].conj())
    return SpectralField(N, c, constrained, mean_zero).project()


def single_mode(N, k, b):
    f = SpectralField.zeros(N, len(b))
    f.coeffs[:, k[0] + N, k[1] + N] = b
    return f


def coeff(f, k):
    return f.coeffs[:, k[0] + f.N, k[1] + f.N]


def test_grid_roundtrip():
    f = random_field(np.random.default_rng(0), 5, d=2)
    g = SpectralField.from_grid(f.to_grid(16), 5)
    np.testing.assert_allclose(g.coeffs, f.coeffs, atol=1e-13)


def test_hm_norm_weights():
    f = single_mode(4, (3, 4), [2.0])
    assert hm_norm(f, 0) == pytest.approx(2.0)
    assert hm_norm(f, 1) == pytest.approx(10.0)


def test_constant_advection_multiplier():
    be = PdeBackend("advection", CONST, 6)
    for k in [(1, 0), (3, -2), (0, 5)]:
        Lf = apply_generator(be, single_mode(6, k, [1.0]))
        assert coeff(Lf, k)[0] == pytest.approx(-1j * k[0])
        assert np.count_nonzero(np.abs(Lf.coeffs) > 1e-14) == (1 if k[0] else 0)


def test_vorticity_with_uniform_vorticity_is_advection():
    flow = catalog_flow("constant", [0.4, -0.3])
    f = random_field(np.random.default_rng(1), 5, mean_zero=True)
    a = apply_generator(PdeBackend("euler2d_vorticity", flow, 5), f)
    b = apply_generator(PdeBackend("advection", flow, 5), f)
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-13)


def _leray_hand(k, v):
    k = np.asarray(k, float)
    return v - k * (k @ v) / (k @ k)


@pytest.mark.parametrize("k", [(1, 1), (2, -1), (3, 2)])
def test_euler_velocity_shear_mode_coupling(shear, k):
    # u = (sin y, 0): a mode k couples only to k +- e2
    N = 6
    kv = np.array(k, float)
    b = np.array([-kv[1], kv[0]]) / np.linalg.norm(kv)
    Lf = apply_generator(PdeBackend("euler2d_velocity", shear, N), single_mode(N, k, b))
    for sign in (1, -1):
        q = (k[0], k[1] + sign)
        # -u.grad f contributes -/+ k1 b / 2, -(du) f contributes -(b2, 0) / 2
        raw = -sign * 0.5 * kv[0] * b - 0.5 * np.array([b[1], 0.0])
        expected = _leray_hand(q, raw) if q != (0, 0) else raw
        np.testing.assert_allclose(coeff(Lf, q), expected, atol=1e-14)
    mask = np.ones_like(Lf.coeffs, bool)
    for sign in (1, -1):
        mask[:, k[0] + N, k[1] + sign + N] = False
    assert np.abs(Lf.coeffs[mask]).max() < 1e-14


@pytest.mark.parametrize("kind,d", [("advection", 1), ("advection", 2), ("euler2d_velocity", 2), ("euler2d_vorticity", 1)])
def test_exact_and_pseudospectral_products_agree(kind, d, cellular):
    N = 8
    f = random_field(np.random.default_rng(2), N, d=d, constrained=d == 2, mean_zero=kind == "euler2d_vorticity")
    comp = d if kind == "advection" else 1
    a = apply_generator(PdeBackend(kind, cellular, N, components=comp), f)
    b = apply_generator(PdeBackend(kind, cellular, N, components=comp, product="pseudospectral"), f)
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-12)


def test_constant_advection_period():
    be = PdeBackend("advection", CONST, 8)
    f = random_field(np.random.default_rng(3), 8)
    np.testing.assert_allclose(evolve(be, f, 2 * np.pi).coeffs, f.coeffs, atol=1e-8)


def test_zero_field_stays_zero(cellular):
    be = PdeBackend("euler2d_velocity", cellular, 6)
    assert not np.any(evolve(be, be.zeros(), 1.0).coeffs)


def test_time_zero_is_identity(cellular):
    be = PdeBackend("advection", cellular, 6)
    f = random_field(np.random.default_rng(4), 6)
    np.testing.assert_array_equal(evolve(be, f, 0.0).coeffs, f.coeffs)


def test_vorticity_shear_no_exponential_growth(shear):
    N = 32
    be = PdeBackend("euler2d_vorticity", shear, N)
    packet = WavePacket.bump((1, 0), 4, center=(0.0, 1.0), p=(2, 2))
    f0 = be.packet_field(packet)
    ft = evolve(be, f0, 5.0)
    rate = np.log(ft.l2_norm() / f0.l2_norm()) / 5.0
    assert rate <= 0.1


def test_scalar_advection_isometry(cellular):
    be = PdeBackend("advection", cellular, 40)
    f = random_field(np.random.default_rng(5), 40, bandwidth=3)
    ft = evolve(be, f, 1.0)
    assert abs(ft.l2_norm() / f.l2_norm() - 1.0) <= 1e-3


def test_norm_growth_m0_and_t0(cellular):
    be = PdeBackend("advection", cellular, 48)
    packets = [WavePacket.bump((1, 0), 8, center=(0.3, 0.2), p=(2, 2))]
    assert 0.9 <= norm_growth(be, 0.0, packets, 1.0) <= 1.1
    assert norm_growth(be, 1.0, packets, 0.0) == pytest.approx(1.0)
    assert packet_log_growth(be, packets[0], 1.0, 0.0) == 0.0


def test_blowup_guard(cellular):
    from bas_spectra.pdevalidate import EvolutionBlowup

    be = PdeBackend("euler2d_velocity", cellular, 8)
    f = random_field(np.random.default_rng(6), 8, d=2, constrained=True)
    with pytest.raises(EvolutionBlowup):
        evolve(be, f, 2.0, growth_rate=-5.0)


def test_constant_flow_shortwave_exact():
    for kind, comp in (("advection", 1), ("advection", 2), ("euler2d_velocity", 1)):
        be = PdeBackend(kind, CONST, 24, components=comp)
        b0 = (1.0,) if be.d == 1 else (0.0, 1.0)
        packet = WavePacket.bump((1, 0), 8, b0=b0, p=(2, 2))
        for t in (0.5, 3.0):
            assert shortwave_error(be, packet, t) <= 1e-8


def test_shortwave_rejects_small_truncation(shear):
    be = PdeBackend("advection", shear, 20, components=2)
    packet = WavePacket.bump((1, 0), 16, b0=(0.0, 1.0))
    with pytest.raises(ValueError, match="truncation"):
        shortwave_error(be, packet, 1.0)


def test_shortwave_first_order_small(shear):
    errs = []
    for K in (8, 16):
        be = PdeBackend("advection", shear, 3 * K, components=2)
        errs.append(shortwave_error(be, WavePacket.bump((1, 0), K, b0=(0.0, 1.0)), 1.0))
    assert 1.6 <= errs[0] / errs[1] <= 2.4
    assert fit_decay_order([1 / 8, 1 / 16], errs) == pytest.approx(np.log2(errs[0] / errs[1]))


def test_packet_requires_orthogonal_amplitude():
    with pytest.raises(ValueError, match="orthogonal"):
        WavePacket.bump((1, 0), 4, b0=(1.0, 0.0)).field(16, constrained=True)


def test_constant_flow_generator_spectrum():
    c = np.array([0.7, 0.3])
    be = PdeBackend("advection", catalog_flow("constant", list(c)), 3)
    ev = truncated_generator_spectrum(be)
    k = np.arange(-3, 4)
    expected = -(k[:, None] * c[0] + k[None, :] * c[1]).ravel()
    np.testing.assert_allclose(ev.real, 0.0, atol=1e-12)
    np.testing.assert_allclose(np.sort(ev.imag), np.sort(expected), atol=1e-12)


def test_zero_flow_generator_spectrum():
    be = PdeBackend("euler2d_vorticity", catalog_flow("constant", [0.0, 0.0]), 3)
    np.testing.assert_allclose(truncated_generator_spectrum(be), 0.0, atol=1e-14)


def test_generator_spectrum_independent_of_m(shear):
    be = PdeBackend("euler2d_vorticity", shear, 4)
    a = truncated_generator_spectrum(be, m=0.0)
    b = truncated_generator_spectrum(be, m=1.0)
    np.testing.assert_allclose(np.sort(a.imag), np.sort(b.imag), atol=1e-10)
    np.testing.assert_allclose(np.sort(a.real), np.sort(b.real), atol=1e-10)


def test_csv_writers(tmp_path):
    f = single_mode(2, (1, -1), [1 + 2j])
    path = write_field_csv(f, tmp_path / "f.csv")
    lines = path.read_text().splitlines()
    assert lines == ["k1,k2,component,re,im", "1,-1,0,1.0,2.0"]
    path = write_error_csv([(0.1, 1.0, 0.02)], tmp_path / "e.csv")
    assert path.read_text().splitlines()[0] == "delta,t,error"


# property tests

seeds = st.integers(min_value=0, max_value=2**31 - 1)
KINDS = st.sampled_from([("advection", 1), ("advection", 2), ("euler2d_velocity", 1), ("euler2d_vorticity", 1)])
FLOW = flow_from_stream_function([[1, 1, 0.3, 0.0], [0, 1, 0.0, 0.2]])


def _backend_field(kind, comp, seed, N=8):
    be = PdeBackend(kind, FLOW, N, components=comp)
    f = random_field(np.random.default_rng(seed), N, d=be.d, constrained=be.constrained,
                     mean_zero=be.mean_zero, bandwidth=3)
    return be, f


@given(KINDS, seeds)
def test_realness_preserved(kc, seed):
    be, f = _backend_field(*kc, seed)
    assert f.hermitian_defect() < 1e-14
    assert evolve(be, f, 0.7).hermitian_defect() <= 1e-10


@given(KINDS, seeds)
def test_constraint_preserved(kc, seed):
    be, f = _backend_field(*kc, seed)
    assert evolve(be, f, 0.7).bundle_residual() <= 1e-8


@given(KINDS, seeds, st.floats(0.1, 0.6), st.floats(0.1, 0.6))
def test_semigroup(kc, seed, s, t):
    be, f = _backend_field(*kc, seed)
    steps = lambda tau: max(1, int(np.ceil(tau / 0.005)))
    a = evolve(be, evolve(be, f, s, steps(s)), t, steps(t))
    b = evolve(be, f, s + t, steps(s + t))
    assert np.linalg.norm(a.coeffs - b.coeffs) <= 1e-7 * np.linalg.norm(b.coeffs)
