import numpy as np
import pytest
from hypothesis import given, strategies as st

from bas_spectra.flows import (
    advance_flow,
    catalog_flow,
    flow_from_json,
    flow_from_stream_function,
    flow_from_vector_potential,
    jacobi_cocycle,
    wrap,
)
from conftest import CATALOG

TOL = 1e-9


def test_constant_flow_is_uniform():
    f = catalog_flow("constant", [1.0, 0.0])
    x = np.random.default_rng(0).uniform(0, 2 * np.pi, size=(5, 2))
    np.testing.assert_allclose(f.velocity(x), np.tile([1.0, 0.0], (5, 1)), atol=1e-15)
    np.testing.assert_allclose(f.jacobian(x), 0.0, atol=1e-15)


def test_cellular_stagnation_jacobian(cellular):
    np.testing.assert_allclose(cellular.velocity([0.0, 0.0]), [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(cellular.jacobian([0.0, 0.0]), np.diag([-1.0, 1.0]), atol=1e-15)


def test_cellular_matches_closed_form(cellular):
    x = np.random.default_rng(1).uniform(0, 2 * np.pi, size=(20, 2))
    u = np.stack([-np.sin(x[:, 0]) * np.cos(x[:, 1]), np.cos(x[:, 0]) * np.sin(x[:, 1])], axis=1)
    np.testing.assert_allclose(cellular.velocity(x), u, atol=1e-14)


def test_shear_jacobian(shear):
    np.testing.assert_allclose(shear.jacobian([0.7, 0.0]), [[0.0, 1.0], [0.0, 0.0]], atol=1e-15)


def test_abc_matches_closed_form():
    A, B, C = 1.0, 0.7, 0.4
    f = catalog_flow("abc", [A, B, C])
    x = np.random.default_rng(2).uniform(0, 2 * np.pi, size=(10, 3))
    X, Y, Z = x.T
    u = np.stack(
        [A * np.sin(Z) + C * np.cos(Y), B * np.sin(X) + A * np.cos(Z), C * np.sin(Y) + B * np.cos(X)],
        axis=1,
    )
    np.testing.assert_allclose(f.velocity(x), u, atol=1e-14)


def test_nondivergent_modes_rejected():
    from bas_spectra.flows import flow_from_velocity_modes

    with pytest.raises(ValueError, match="divergence"):
        flow_from_velocity_modes([[1, 0]], [[1.0, 0.0]])


def test_unknown_catalog_name():
    with pytest.raises(ValueError):
        catalog_flow("vortex_street", [1.0])


def test_advance_constant():
    f = catalog_flow("constant", [1.0, 0.0])
    np.testing.assert_allclose(advance_flow(f, [0.0, 0.0], np.pi), [np.pi, 0.0], atol=TOL)


def test_advance_stagnation(cellular):
    for t in (-3.0, 0.5, 7.0):
        np.testing.assert_allclose(advance_flow(cellular, [0.0, 0.0], t), [0.0, 0.0], atol=1e-14)


def test_advance_shear(shear):
    x = advance_flow(shear, [0.0, np.pi / 2], 2.0)
    np.testing.assert_allclose(x, wrap(np.array([2.0, np.pi / 2])), atol=TOL)


def test_jacobi_constant():
    f = catalog_flow("constant", [1.0, 0.0])
    np.testing.assert_allclose(jacobi_cocycle(f, [0.3, 0.1], 4.0).J, np.eye(2), atol=1e-14)


def test_jacobi_cellular(cellular):
    t = 1.5
    J = jacobi_cocycle(cellular, [0.0, 0.0], t).J
    np.testing.assert_allclose(J, np.diag([np.exp(-t), np.exp(t)]), rtol=1e-9)


@pytest.mark.parametrize("y", [0.0, 0.4, 2.0])
def test_jacobi_shear(shear, y):
    t = 3.0
    J = jacobi_cocycle(shear, [0.2, y], t).J
    np.testing.assert_allclose(J, [[1.0, t * np.cos(y)], [0.0, 1.0]], atol=1e-9)


def test_stream_function_flow_is_divergence_free():
    f = flow_from_stream_function([[1, 2, 0.5, 0.1], [3, -1, 0.2, 0.0]])
    x = np.random.default_rng(3).uniform(0, 2 * np.pi, size=(30, 2))
    np.testing.assert_allclose(np.trace(f.jacobian(x), axis1=-2, axis2=-1), 0.0, atol=1e-13)


def test_vector_potential_flow_is_divergence_free():
    f = flow_from_vector_potential([[1, 0, 1, 0.3, 0.0, 0.2], [0, 2, 1, 0.0, 0.4, 0.0]])
    x = np.random.default_rng(4).uniform(0, 2 * np.pi, size=(30, 3))
    np.testing.assert_allclose(np.trace(f.jacobian(x), axis1=-2, axis2=-1), 0.0, atol=1e-13)


def test_flow_from_json_catalog():
    f = flow_from_json({"name": "shear", "params": [2.0]})
    np.testing.assert_allclose(f.velocity([0.0, np.pi / 2]), [2.0, 0.0], atol=1e-14)


# property tests

names = st.sampled_from(sorted(CATALOG))
times = st.floats(min_value=-10, max_value=10, allow_nan=False)
seeds = st.integers(min_value=0, max_value=2**31 - 1)


def _point(flow, seed):
    return np.random.default_rng(seed).uniform(0, 2 * np.pi, size=flow.dim)


@given(names, times, seeds)
def test_volume_preservation(flows, key, t, seed):
    f = flows[key]
    J = jacobi_cocycle(f, _point(f, seed), t).J
    assert abs(np.linalg.det(J) - 1.0) <= 1e-6


@given(names, times, times, seeds)
def test_group_property(flows, key, t, s, seed):
    f = flows[key]
    x0 = _point(f, seed)
    a = advance_flow(f, advance_flow(f, x0, s), t)
    b = advance_flow(f, x0, t + s)
    d = np.abs(wrap(a - b + np.pi) - np.pi)
    assert d.max() <= 1e-7


@given(names, times, seeds)
def test_reversibility(flows, key, t, seed):
    f = flows[key]
    x0 = _point(f, seed)
    back = advance_flow(f, advance_flow(f, x0, t), -t)
    d = np.abs(wrap(back - x0 + np.pi) - np.pi)
    assert d.max() <= 1e-8


@given(names, st.floats(0, 5), st.floats(0, 5), seeds)
def test_jacobi_cocycle_identity(flows, key, t, s, seed):
    f = flows[key]
    x0 = _point(f, seed)
    js = jacobi_cocycle(f, x0, s)
    jt = jacobi_cocycle(f, js.x, t)
    jts = jacobi_cocycle(f, x0, t + s)
    np.testing.assert_allclose(jt.J @ js.J, jts.J, atol=1e-6 * max(1.0, np.abs(jts.J).max()))
