import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tetradfield.chart import DiffConfig
from tetradfield.errors import NonPositiveDeterminant, SingularFrame
from tetradfield.frame import (FrameField, anholonomy, anholonomy_from_torsion, bump_perturbation,
                               check_orientation, constant_frame, dual_coframe, from_point_function,
                               gl_transform, invert_frame, lie_bracket, random_gl_plus, torsion,
                               torsion_array)
from tetradfield.specs import holonomic_frame

from .conftest import probes
from .oracles import SO3_TORSION_AT_IDENTITY


def test_constant_frame_zero_torsion():
    f = constant_frame([[2.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 3.0]])
    assert np.max(np.abs(torsion(f, [0.1, 0.2, 0.3]).s)) == 0.0


def test_holonomic_frame_zero_torsion():
    S = torsion_array(holonomic_frame(4), probes(10, 4))
    assert np.max(np.abs(S)) < 1e-13


def test_so3_identity_torsion(so3_frame):
    E = so3_frame.eval(np.zeros(3))
    S = torsion(so3_frame, np.zeros(3)).s
    S_frame = np.einsum("Ai,ijk,jB,kC->ABC", np.linalg.inv(E), S, E, E)
    np.testing.assert_allclose(S_frame, SO3_TORSION_AT_IDENTITY, atol=1e-13)


def test_torsion_antisymmetry(breathing_sin):
    S = torsion_array(breathing_sin, probes(8, 4, 1))
    assert np.max(np.abs(S + S.swapaxes(-1, -2))) == 0.0


@pytest.mark.parametrize("fixture", ["so3_frame", "sl2r_frame", "breathing_exp"])
def test_analytic_jacobian_matches_numeric(fixture, request):
    f = request.getfixturevalue(fixture)
    x = probes(6, f.dim, 2, -0.4, 0.4)
    numeric = f.with_matrix(f.matrix, None)
    np.testing.assert_allclose(f.jacobian(x), numeric.jacobian(x, DiffConfig(inner_step=1e-3)), atol=1e-9)


@pytest.mark.parametrize("fixture", ["so3_frame", "breathing_sin"])
def test_anholonomy_two_routes(fixture, request):
    f = request.getfixturevalue(fixture)
    x = probes(5, f.dim, 3)
    g1 = anholonomy(f, x)
    g2 = anholonomy_from_torsion(torsion_array(f, x), f.eval(x))
    np.testing.assert_allclose(g1, g2, atol=1e-12)


def test_so3_anholonomy_constant(so3_frame):
    g = anholonomy(so3_frame, probes(5, 3, 4))
    np.testing.assert_allclose(g, np.broadcast_to(g[0], g.shape), atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_torsion_gl_invariant(seed):
    from tetradfield.liealg import closed_frame, so3
    f = closed_frame(so3())
    L = random_gl_plus(3, np.random.default_rng(seed))
    x = probes(3, 3, seed)
    np.testing.assert_allclose(torsion_array(gl_transform(f, L), x), torsion_array(f, x), atol=1e-12)


def test_gl_transform_rejects_negative_det(so3_frame):
    with pytest.raises(NonPositiveDeterminant):
        gl_transform(so3_frame, np.diag([-1.0, 1.0, 1.0]))


def test_gl_transform_records_matrix():
    f = holonomic_frame(3)
    L = np.diag([2.0, 1.0, 1.0])
    assert gl_transform(gl_transform(f, L), L).spec["gl"] == np.diag([4.0, 1.0, 1.0]).tolist()


def test_singular_frame():
    with pytest.raises(SingularFrame):
        invert_frame(np.array([[1.0, 2.0], [2.0, 4.0]]))
    f = constant_frame(np.zeros((3, 3)))
    with pytest.raises(SingularFrame):
        torsion(f, np.zeros(3))


def test_dual_coframe(so3_frame):
    x = probes(4, 3, 5)
    np.testing.assert_allclose(np.einsum("nAi,niB->nAB", dual_coframe(so3_frame, x), so3_frame.eval(x)),
                               np.broadcast_to(np.eye(3), (4, 3, 3)), atol=1e-13)


def test_point_function_wrapper():
    f = from_point_function(lambda x: np.diag(1 + x ** 2), 3)
    S = torsion(f, [0.1, 0.2, 0.3]).s
    assert np.max(np.abs(S)) < 1e-9  # diagonal frame depending on its own coordinate is holonomic


def test_lie_bracket_rotations():
    X = lambda x: np.stack([-x[:, 1], x[:, 0], 0 * x[:, 0]], axis=1)
    Y = lambda x: np.stack([0 * x[:, 0], -x[:, 2], x[:, 1]], axis=1)
    p = np.array([0.3, -0.1, 0.7])
    br = lie_bracket(X, Y, p)
    np.testing.assert_allclose(br, [-p[2], 0.0, p[0]], atol=1e-10)


def test_orientation_and_bump(so3_frame):
    assert check_orientation(so3_frame, probes(10, 3)) == 1
    g = bump_perturbation(so3_frame, 0.05)
    x = probes(3, 3, 6)
    np.testing.assert_allclose(g.jacobian(x), FrameField(3, g.matrix).jacobian(x, DiffConfig(inner_step=1e-3)),
                               atol=1e-8)
