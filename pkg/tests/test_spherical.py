import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tetradfield.chart import DiffConfig
from tetradfield.concomitants import killing_array
from tetradfield.errors import ConfigError, FitFailure, NonMonotoneGauge, ProjectionFailure
from tetradfield.frame import anholonomy, bump_perturbation, teleparallel_connection, torsion_array
from tetradfield.lagrangians import LagrangianSpec
from tetradfield.liealg import BreathingFunction, BreathingSpec, breathing_closed_frame, so3
from tetradfield.radial import ZERO, constant, gaussian, parse_radial, polynomial, power
from tetradfield.spherical import (PerturbationShapes, RadialShapes, apply_gauge, check_isotropy,
                                   extract_isotropic_residual, gamma00_linear, indicial_scan,
                                   isotropic_frame, linear_gauge, linear_residual, p0_family,
                                   radial_shapes_from_dict, random_rotations, sup_residual,
                                   su2_background, synthetic_operator)

from .oracles import GAMMA00_LINEAR_EXAMPLE, GAUGE_2R, SYNTHETIC_ROOTS, su2_background_metric

BI = LagrangianSpec.parse("born_infeld:1,0.3,0.2")
R = np.array([0.3, 0.8, 1.5])


def _shell(n, seed=0, r=(0.2, 1.5), t=(-0.5, 0.5)):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return np.column_stack([rng.uniform(*t, n), u * rng.uniform(*r, n)[:, None]])


def _random_shapes(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.2, 0.8, size=(6, 3))
    c[0, 0] += 0.5
    c[5, 0] += 0.8
    return RadialShapes(*(polynomial(ci) for ci in c), alpha=0.4)


def test_identity_shapes_give_identity_frame():
    s = RadialShapes(constant(1.0), ZERO, ZERO, ZERO, ZERO, constant(1.0), alpha=0.0)
    E = isotropic_frame(s).eval(_shell(5))
    np.testing.assert_allclose(E, np.broadcast_to(np.eye(4), E.shape), atol=1e-15)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_isotropy(seed):
    f = isotropic_frame(_random_shapes(seed))
    assert check_isotropy(f, random_rotations(5, seed), _shell(4, seed)) < 1e-9


def test_isotropy_detects_broken_frame():
    f = isotropic_frame(_random_shapes(0))
    B = np.zeros((4, 4))
    B[1, 1] = 1.0
    g = f.with_matrix(lambda x: f.matrix(x) + 0.1 * B, lambda x: f.jacobian_fn(x))
    assert check_isotropy(g, random_rotations(5, 1), _shell(4, 1)) > 1e-3


def test_rotations_validated():
    f = isotropic_frame(su2_background())
    with pytest.raises(ConfigError):
        check_isotropy(f, [np.diag([1.0, 1.0, -1.0])], _shell(1))


def test_analytic_jacobian():
    f = isotropic_frame(_random_shapes(3))
    x = _shell(4, 3)
    np.testing.assert_allclose(f.jacobian(x), f.with_matrix(f.matrix, None).jacobian(x, DiffConfig(inner_step=1e-3)),
                               atol=1e-8)


def test_background_metric():
    f = isotropic_frame(su2_background(0.5))
    x = _shell(6, 4)
    np.testing.assert_allclose(killing_array(torsion_array(f, x)), su2_background_metric(0.5, x), atol=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_background_matches_group_frame(alpha):
    # left-invariant frames with lambda = -1/(alpha t') coincide with the factorised
    # background (h = -1/2) under the time change t' = -exp(-alpha t)/alpha
    iso = isotropic_frame(su2_background(alpha, h_sign=-1.0))
    grp = breathing_closed_frame(BreathingSpec(so3(), BreathingFunction("inv", (alpha,))))
    x = _shell(5, 5)
    y = x.copy()
    y[:, 0] = -np.exp(-alpha * x[:, 0]) / alpha
    np.testing.assert_allclose(anholonomy(iso, x), anholonomy(grp, y), atol=1e-10)


def test_time_independence():
    f = isotropic_frame(_random_shapes(6))
    x0 = _shell(4, 6, t=(0, 0))
    x1 = x0.copy()
    x1[:, 0] = 1.7
    for fn in (teleparallel_connection, lambda f, x: torsion_array(f, x),
               lambda f, x: killing_array(torsion_array(f, x))):
        np.testing.assert_allclose(fn(f, x0), fn(f, x1), atol=1e-8)


@pytest.mark.parametrize("h_sign", [1.0, -1.0])
def test_background_is_solution(h_sign, gl_spec):
    f = isotropic_frame(su2_background(0.5, h_sign))
    assert sup_residual(f, gl_spec, _shell(3, 7)) < 1e-7


def test_residual_projection():
    f = isotropic_frame(_random_shapes(8))
    res = extract_isotropic_residual(f, BI, 0.2, 0.7)
    assert res.projection_residual <= 1e-8 * res.raw_norm + 1e-7
    assert res.raw_norm > 1e-3
    assert set(res.to_dict()) >= {"K00", "Kb2", "projection_residual"}


def test_residual_projection_failure():
    f = bump_perturbation(isotropic_frame(_random_shapes(8)), 0.1, center=[0.2, 0.5, 0.1, 0.3])
    with pytest.raises(ProjectionFailure):
        extract_isotropic_residual(f, BI, 0.2, 0.7)


def test_residual_needs_positive_radius():
    with pytest.raises(ConfigError):
        extract_isotropic_residual(isotropic_frame(su2_background()), BI, 0.0, 0.0)


def test_radial_gauge_oracle():
    s = apply_gauge(su2_background(), {"radial": "omega:2r"})
    for name, v in GAUGE_2R.items():
        np.testing.assert_allclose(getattr(s, name)(R), v, atol=1e-12)


def test_radial_gauge_roundtrip():
    bg = _random_shapes(9)
    s = apply_gauge(apply_gauge(bg, {"radial": "2r"}), {"radial": "0.5r"})
    np.testing.assert_allclose(s.values(R), bg.values(R), atol=1e-10)


@pytest.mark.parametrize("gauge", [{"radial": "r+0.1r^2"}, {"radial": "2r"},
                                   {"time": gaussian(0.3, 0.5, 0.4)}, {"time": "0.2r^2"}],
                         ids=["quad", "scale", "gauss_t", "quad_t"])
def test_gauge_preserves_solutions(gauge):
    f = isotropic_frame(apply_gauge(su2_background(), gauge))
    assert sup_residual(f, BI, _shell(3, 10, r=(0.3, 1.5))) < 1e-6


@pytest.mark.parametrize("bad", [{"radial": "-r"}, {"radial": "r-0.5r^2"}])
def test_non_monotone_gauge(bad):
    with pytest.raises(NonMonotoneGauge):
        apply_gauge(su2_background(), bad)


def test_gauge_needs_one_key():
    with pytest.raises(ConfigError):
        apply_gauge(su2_background(), {"radial": "2r", "time": "0.5"})


@pytest.mark.parametrize("kind,fn", [("eps", parse_radial("0.3r^2")), ("eps", gaussian(1.0, 0.5, 0.5)),
                                     ("eta", parse_radial("0.1r+0.2r^3"))])
def test_linear_gauge_is_gauge_derivative(kind, fn):
    bg = su2_background(0.5)
    d = 1e-5
    if kind == "eps":
        up, dn = (apply_gauge(bg, {"time": fn * s}) for s in (d, -d))
    else:
        up, dn = (apply_gauge(bg, {"radial": power(1.0, 1) + fn * s}) for s in (d, -d))
    numeric = (up.values(R) - dn.values(R)) / (2 * d)
    lin = linear_gauge(PerturbationShapes(), {kind: fn}, bg.alpha)
    np.testing.assert_allclose(lin.values(R), numeric, atol=1e-7)


def test_linear_gauge_constant_time_shift():
    lin = linear_gauge(PerturbationShapes(), {"eps": 0.4}, 0.5)
    np.testing.assert_allclose(lin.values(R).T, np.broadcast_to([-0.1, -0.1, -0.1, 0, 0, -0.2], (3, 6)),
                               atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_linear_gauge_keeps_nu(a, b, c):
    nu = polynomial([a, b, c])
    pert = PerturbationShapes(nu=nu, phi=constant(b))
    out = linear_gauge(pert, {"eta": polynomial([0, a, c]), "eps": polynomial([b, 0, a])}, 0.5)
    assert out.nu is pert.nu


def test_gamma00_linear():
    nu = power(1.0, -1)
    assert gamma00_linear(nu, nu.derivative(), 1.0, 1.0) == pytest.approx(GAMMA00_LINEAR_EXAMPLE)
    assert gamma00_linear(ZERO, ZERO, 0.5, R) == pytest.approx(0.75)


@pytest.mark.parametrize("r", [0.1, 0.6, 1.4])
def test_p0_family_is_linear_null_direction(r):
    lin = linear_residual(su2_background(), BI, p0_family(1.0, 0.5), r)
    assert np.max(np.abs(lin)) < 1e-5


@pytest.mark.parametrize("gauge", [{"eps": "0.3r^2"}, {"eta": "0.2r^2"}])
def test_linear_gauge_directions_are_null(gauge):
    pert = linear_gauge(PerturbationShapes(), gauge, 0.5)
    assert np.max(np.abs(linear_residual(su2_background(), BI, pert, 0.7))) < 1e-5


def test_physical_direction_is_not_null():
    pert = PerturbationShapes(nu=parse_radial("r^2"))
    assert np.max(np.abs(linear_residual(su2_background(), BI, pert, 0.7))) > 1e-2


def test_radial_shapes_from_dict():
    s = radial_shapes_from_dict({"f": "0.5", "g": 0.5, "h": "0.5", "i": 0, "j": 0, "k": 1, "alpha": 0.3})
    assert s.alpha == 0.3
    np.testing.assert_allclose(s.values(R), su2_background().values(R))
    with pytest.raises(ConfigError):
        radial_shapes_from_dict({"f": 1})
    with pytest.raises(ConfigError):
        radial_shapes_from_dict({"builtin": "kerr"})


def test_perturbation_from_dict():
    p = PerturbationShapes.from_dict({"phi": "2", "kap": 0.5})
    np.testing.assert_allclose(p.values(R)[[0, 5]], [[2] * 3, [0.5] * 3])
    with pytest.raises(ConfigError):
        PerturbationShapes.from_dict({"psi": 1})


@pytest.mark.parametrize("roots", [(1.0, -2.0), (0.5, -1.5)])
def test_synthetic_indicial(roots):
    res = indicial_scan(synthetic_operator(roots), np.arange(-3, 2.001, 0.05))
    np.testing.assert_allclose(res.roots, sorted(roots), atol=0.02)
    assert res.row_shifts == [0, -1, 2]
    v = np.array([1.0, -1.0])
    assert res.in_null_space(roots[0], v) < 1e-6
    assert set(res.to_dict()) >= {"roots", "scan", "null_vectors"}


def test_synthetic_oracle_values():
    res = indicial_scan(synthetic_operator(), np.arange(-3, 2.001, 0.1))
    np.testing.assert_allclose(res.roots, SYNTHETIC_ROOTS, atol=0.02)


def test_fit_failure_on_non_power_law():
    def op(p, r):
        return np.array([[np.exp(-1.0 / r) * r ** p]])
    with pytest.raises(FitFailure):
        indicial_scan(op, np.arange(-1, 1.001, 0.25))
