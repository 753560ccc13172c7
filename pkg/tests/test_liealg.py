import json

import numpy as np
import pytest

from tetradfield.chart import DiffConfig
from tetradfield.errors import ConfigError, NonPositiveLambda, NotSemisimple
from tetradfield.frame import lie_derivative_metric
from tetradfield.liealg import (BreathingFunction, BreathingSpec, StructureConstants, abelian,
                                breathing_closed_frame, breathing_killing_vectors, breathing_metric,
                                closed_frame, cosmic_time, get_algebra, invariant_fields, is_compact,
                                is_semisimple, killing_form, left_invariant_frame,
                                rotation_vector_closed_form, sl2r, so3, so3_plus_center)
from tetradfield.concomitants import killing_tensor
from tetradfield.frame import torsion_array

from .conftest import probes
from .oracles import GAMMA00_ALPHA_HALF, SL2R_KILLING_FORM, SO3_KILLING_FRAME


@pytest.mark.parametrize("C", [so3(), sl2r(), abelian(2), so3_plus_center()], ids=lambda c: c.name)
def test_jacobi_identity(C):
    c = C.c
    jac = (np.einsum("abm,mcd->abcd", c, c) + np.einsum("acm,mdb->abcd", c, c)
           + np.einsum("adm,mbc->abcd", c, c))
    assert np.max(np.abs(jac)) < 1e-14


def test_killing_forms():
    np.testing.assert_allclose(killing_form(so3()), SO3_KILLING_FRAME)
    np.testing.assert_allclose(killing_form(sl2r()), SL2R_KILLING_FORM)


@pytest.mark.parametrize("C,semi,compact", [(so3(), True, True), (sl2r(), True, False),
                                            (abelian(3), False, False), (so3_plus_center(), False, False)],
                         ids=["so3", "sl2r", "abelian3", "so3+center"])
def test_classification(C, semi, compact):
    assert is_semisimple(C) is semi
    assert is_compact(C) is compact


def test_not_semisimple_rejected():
    with pytest.raises(NotSemisimple):
        closed_frame(abelian(2))


def test_bad_structure_constants():
    with pytest.raises(ConfigError):
        StructureConstants(np.ones((2, 2, 2)), "bad")


def test_get_algebra_file(tmp_path):
    path = tmp_path / "alg.json"
    path.write_text(json.dumps({"name": "mine", "c": so3().c.tolist()}))
    np.testing.assert_allclose(get_algebra(str(path)).c, so3().c)
    with pytest.raises(ConfigError):
        get_algebra("e8")


def test_rotation_vector_closed_form():
    x = probes(5, 3, 1)
    m, _ = invariant_fields(so3())
    np.testing.assert_allclose(m(x), rotation_vector_closed_form(x), atol=1e-13)
    mr, _ = invariant_fields(so3(), right=True)
    np.testing.assert_allclose(mr(x), rotation_vector_closed_form(x, right=True), atol=1e-13)


@pytest.mark.parametrize("chart", ["group_rotation_vector", "group_canonical"])
@pytest.mark.parametrize("C", [so3(), sl2r()], ids=["so3", "sl2r"])
def test_left_and_right_fields_commute(chart, C):
    # left- and right-invariant fields commute; checked on the frame matrices
    from tetradfield.frame import lie_bracket
    L, _ = invariant_fields(C, chart)
    R, _ = invariant_fields(C, chart, right=True)
    p = probes(1, 3, 2, -0.3, 0.3)[0]
    for a in range(3):
        for b in range(3):
            br = lie_bracket(lambda x: L(x)[:, :, a], lambda x: R(x)[:, :, b], p, DiffConfig(step=1e-3))
            assert np.max(np.abs(br)) < 1e-9


def test_left_invariant_frame_point():
    E = left_invariant_frame("so3", p=[0.0, 0.0, 0.0])
    np.testing.assert_allclose(E, 0.5 * np.eye(3), atol=1e-15)


@pytest.mark.parametrize("text,v,d", [("exp:0.5", 1.0, 0.5), ("exp:0.5,2", 2.0, 1.0),
                                      ("sin:2,0.3", 2.0, 0.3), ("const:3", 3.0, 0.0)])
def test_breathing_function_parse(text, v, d):
    lam = BreathingFunction.parse(text)
    assert lam.value(0.0) == pytest.approx(v) and lam.deriv(0.0) == pytest.approx(d)
    assert BreathingFunction.parse(lam.text) == lam


@pytest.mark.parametrize("text", ["exp", "cosh:1", "sin:a"])
def test_breathing_function_errors(text):
    with pytest.raises(ConfigError):
        BreathingFunction.parse(text)


def test_breathing_nonpositive():
    f = breathing_closed_frame(BreathingSpec(so3(), BreathingFunction.parse("sin:0.1,1")))
    with pytest.raises(NonPositiveLambda):
        f.eval([-1.0, 0.1, 0.1, 0.1])


def test_breathing_metric_matches_killing(breathing_sin):
    spec = BreathingSpec(so3(), BreathingFunction.parse("sin:2,0.3"))
    x = probes(4, 4, 3)
    np.testing.assert_allclose(killing_tensor(torsion_array(breathing_sin, x)).g, breathing_metric(spec, x),
                               atol=1e-11)


def test_breathing_gamma00():
    spec = BreathingSpec(so3(), BreathingFunction.parse("exp:0.5"))
    assert breathing_metric(spec, [0.0, 0.3, 0.2, 0.1])[0, 0] == pytest.approx(GAMMA00_ALPHA_HALF)


def test_cosmic_time_roundtrip():
    T, T_inv = cosmic_time(BreathingFunction.parse("exp:0.5"))
    assert T(1.0) == pytest.approx(np.sqrt(3) * 0.5)
    assert T_inv(T(0.7)) == pytest.approx(0.7, abs=1e-12)


@pytest.mark.parametrize("lam", ["exp:0.5", "sin:2,0.3"])
def test_breathing_killing_vectors(lam):
    spec = BreathingSpec(so3(), BreathingFunction.parse(lam))
    x0, left, right = breathing_killing_vectors(spec)
    g = lambda x: breathing_metric(spec, x)
    p = np.array([0.2, 0.1, -0.2, 0.15])
    for v in [x0] + right:
        assert np.max(np.abs(lie_derivative_metric(v, g, p, DiffConfig(step=1e-3)))) < 1e-8
    gx = g(p)
    assert np.einsum("i,ij,j->", x0(p)[0], gx, x0(p)[0]) == pytest.approx(1.0)
