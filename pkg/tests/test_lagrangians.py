import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tetradfield.dynamics import numeric_momenta_torsion
from tetradfield.errors import ConfigError
from tetradfield.lagrangians import (FAMILIES, LagrangianSpec, density_from_jet, density_from_torsion,
                                     momenta_from_torsion, parse_monomial)

from .oracles import EPS3


def _torsion(seed, n=3):
    rng = np.random.default_rng(seed)
    S = 0.5 * EPS3 + 0.2 * rng.normal(size=(n, n, n)) if n == 3 else rng.normal(size=(n, n, n))
    return S - S.swapaxes(-1, -2)


@pytest.mark.parametrize("key,exps", [("const", (0, 0, 0)), ("I1", (1, 0, 0)),
                                      ("I1^2*I3", (2, 1, 0)), ("delta", (0, 0, 1))])
def test_parse_monomial(key, exps):
    assert parse_monomial(key) == exps


@pytest.mark.parametrize("text", ["nope", "born_infeld:1,x", "born_infeld:1,2,3,4",
                                  '{"family":"affine_f","f_terms":{"I7":1}}',
                                  '{"family":"affine_f","f_terms":{"delta":1}}',
                                  '{"family":"born_infeld","Q":1}', '{"A":1}', "{bad"])
def test_spec_errors(text):
    with pytest.raises(ConfigError):
        LagrangianSpec.parse(text)


def test_spec_roundtrip():
    spec = LagrangianSpec.parse("split_sqrt:1,2,0.3")
    assert spec["C3"] == 0.3 and spec["xi"] == 0.0
    assert LagrangianSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
    assert spec.gl_invariant and not LagrangianSpec("weitzenbock").gl_invariant


@pytest.mark.parametrize("family", FAMILIES)
def test_defaults_construct(family):
    assert LagrangianSpec(family).family == family


def test_momenta_match_numeric(gl_spec):
    S = _torsion(1)[None]
    L, H = momenta_from_torsion(gl_spec, S)
    Hn = numeric_momenta_torsion(gl_spec, S, 1e-5)
    np.testing.assert_allclose(H, Hn, atol=1e-7 * max(1.0, np.max(np.abs(H))))
    np.testing.assert_allclose(H, -H.swapaxes(-1, -2), atol=1e-14)
    np.testing.assert_allclose(L, density_from_torsion(gl_spec, S))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 2.0))
def test_density_homogeneity(seed, scale):
    # GL+ densities built from sqrt|det gamma| have weight n under S -> c S
    spec = LagrangianSpec.parse("born_infeld:1,0.3,0.2")
    S = _torsion(seed)[None]
    assert density_from_torsion(spec, scale * S)[0] == pytest.approx(scale ** 3 * density_from_torsion(spec, S)[0],
                                                                       rel=1e-9)


def test_density_from_jet_agrees(gl_spec):
    rng = np.random.default_rng(5)
    e = np.eye(3) + 0.2 * rng.normal(size=(3, 3))
    de = rng.normal(size=(3, 3, 3))
    from tetradfield import kernels
    S = kernels.torsion_from_jet(np.linalg.inv(e), de)
    assert density_from_jet(gl_spec, e, de) == pytest.approx(density_from_torsion(gl_spec, S), rel=1e-12)


def test_weitzenbock_rejects_torsion_route():
    with pytest.raises(ConfigError):
        density_from_torsion(LagrangianSpec("weitzenbock"), _torsion(0))


def test_weitzenbock_density_of_identity_frame_is_zero():
    assert density_from_jet(LagrangianSpec("weitzenbock"), np.eye(4), np.zeros((4, 4, 4))) == 0.0
