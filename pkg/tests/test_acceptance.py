"""Acceptance criteria, one test per criterion.  Each prints a PASS/FAIL line."""
import time

import numpy as np
import pytest

from tetradfield.chart import DiffConfig, random_probes
from tetradfield.concomitants import density_and_signature, invariants, killing_array
from tetradfield.dynamics import (compare_residual_routes, curvature_identity_check, field_momenta,
                                  hyperspin_divergence, residual_closed_form)
from tetradfield.frame import (FrameField, bump_perturbation, gl_transform, lie_derivative_metric,
                               random_gl_plus, torsion_array)
from tetradfield.lagrangians import LagrangianSpec, density_from_torsion, momenta_from_torsion
from tetradfield.liealg import (BreathingFunction, BreathingSpec, breathing_closed_frame,
                                breathing_killing_vectors, breathing_metric, closed_frame,
                                killing_form, sl2r, so3)
from tetradfield.radial import gaussian, parse_radial
from tetradfield.specs import build_frame, holonomic_frame
from tetradfield.spherical import (PerturbationShapes, apply_gauge, indicial_exponents,
                                   indicial_scan, isotropic_frame, linear_gauge, linear_residual,
                                   p0_family, sup_residual, su2_background, synthetic_operator)

from .conftest import ACCEPTANCE_LINES, GL_SPECS
from .oracles import (BREATHING_SIGNATURE, INDICIAL_ROOTS, J2_AFFINE, SL2R_SIGNATURE, SYNTHETIC_ROOTS,
                      su2_background_metric)

FAMILIES = [LagrangianSpec.parse(t) for t in GL_SPECS.values()]
BI = LagrangianSpec.parse("born_infeld:1,0.3,0.2")


def record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def breathing(lam):
    return breathing_closed_frame(BreathingSpec(so3(), BreathingFunction.parse(lam)))


def sup_k(f, spec, x):
    return float(np.max(np.abs(residual_closed_form(f, x, spec).k)))


def shell(n, seed, r=(0.3, 1.5), t=(-0.5, 0.5)):
    return random_probes(n, 4, seed=seed, annulus=r, chart_id="spherical_txyz", t_range=t).points


def test_c01_closed_frames():
    t0 = time.perf_counter()
    worst = max(sup_k(closed_frame(C), spec, random_probes(50, 3, seed=1).points)
                for C in (so3(), sl2r()) for spec in FAMILIES)
    dt = time.perf_counter() - t0
    record(1, worst < 1e-6 and dt < 30, f"closed so3/sl2r sup residual {worst:.2e} < 1e-6 in {dt:.1f}s (< 30s)")


def test_c02_breathing_frames():
    t0 = time.perf_counter()
    x = random_probes(50, 4, seed=2).points
    worst = max(sup_k(breathing(lam), spec, x) for lam in ("exp:0.5", "sin:2,0.3") for spec in FAMILIES)
    dt = time.perf_counter() - t0
    record(2, worst < 1e-6 and dt < 120, f"breathing sup residual {worst:.2e} < 1e-6 in {dt:.1f}s (< 120s)")


def test_c03_background_metric():
    x = shell(20, 3)
    g = killing_array(torsion_array(isotropic_frame(su2_background(0.5)), x))
    iu = np.triu_indices(4)
    err = float(np.max(np.abs((g - su2_background_metric(0.5, x))[:, iu[0], iu[1]])))
    record(3, err < 1e-7, f"ten metric components of the SU(2) background within {err:.2e} < 1e-7")


def test_c04_j2_affine():
    docs = ["builtin:closed_so3", "builtin:closed_sl2r", "builtin:breathing_su2",
            {"builtin": "breathing_su2", "params": {"variant": "factorized", "alpha": 0.5}},
            {"builtin": "breathing_su2", "params": {"lambda": "sin:2,0.3"}}, "builtin:isotropic"]
    worst = 0.0
    for doc in docs:
        f = build_frame(doc)
        box = (0.3, 1.2) if f.chart_id == "spherical_txyz" else None
        pts = shell(5, 4, box) if box else random_probes(5, f.dim, seed=4).points
        worst = max(worst, max(abs(invariants(f, p).J2_affine - J2_AFFINE[f.dim]) for p in pts))
    record(4, worst < 1e-8, f"J2_affine = n/4 on {len(docs)} built-in frames, deviation {worst:.2e} < 1e-8")


def test_c05_gl_invariance():
    rng = np.random.default_rng(5)
    worst_L = worst_g = 0.0
    for f in (closed_frame(so3()), breathing("sin:2,0.3")):
        x = random_probes(5, f.dim, seed=5).points
        S0 = torsion_array(f, x)
        for _ in range(20):
            g = gl_transform(f, random_gl_plus(f.dim, rng))
            S1 = torsion_array(g, x)
            for spec in FAMILIES:
                L0, L1 = density_from_torsion(spec, S0), density_from_torsion(spec, S1)
                worst_L = max(worst_L, float(np.max(np.abs(L1 - L0) / np.abs(L0))))
            worst_g = max(worst_g, float(np.max(np.abs(killing_array(S1) - killing_array(S0)))))
    record(5, worst_L < 1e-10 and worst_g < 1e-10,
           f"20 GL+ transforms: rel density change {worst_L:.2e}, Killing change {worst_g:.2e} (< 1e-10)")


def test_c06_homogeneity():
    frames = [closed_frame(so3()), closed_frame(sl2r()), breathing("exp:0.5"), breathing("sin:2,0.3")]
    worst = 0.0
    for f in frames:
        S = torsion_array(f, random_probes(10, f.dim, seed=6).points)
        for spec in FAMILIES:
            L, H = momenta_from_torsion(spec, S)
            nL = f.dim * L
            worst = max(worst, float(np.max(np.abs(np.einsum("nkij,nkij->n", S, H) - nL) / np.abs(nL))))
    record(6, worst < 1e-8, f"Euler identity S.H = nL, rel defect {worst:.2e} < 1e-8")


def test_c07_route_agreement():
    x = random_probes(5, 4, seed=7).points
    worst = max(compare_residual_routes(breathing(lam), x, spec)[0]
                for lam in ("exp:0.5", "sin:2,0.3") for spec in FAMILIES)
    record(7, worst < 1e-4, f"closed-form vs generic residual rel difference {worst:.2e} < 1e-4")


def test_c08_momentum_antisymmetry():
    f = breathing("sin:2,0.3")
    x = random_probes(10, 4, seed=8).points
    exact = numeric = 0.0
    for spec in FAMILIES:
        Ha = field_momenta(f, x, spec).h
        Hn = field_momenta(f, x, spec, route="numeric").h
        exact = max(exact, float(np.max(np.abs(Ha + Ha.swapaxes(-1, -2)))))
        numeric = max(numeric, float(np.max(np.abs(Hn + Hn.swapaxes(-1, -2)))))
    record(8, exact == 0.0 and numeric < 1e-8,
           f"momentum antisymmetry defect analytic {exact:.1e} (exact), numeric {numeric:.2e} < 1e-8")


def test_c09_conservation():
    cases = [(closed_frame(so3()), 3), (closed_frame(sl2r()), 3), (breathing("exp:0.5"), 4),
             (breathing("sin:2,0.3"), 4)]
    worst = max(float(np.max(np.abs(hyperspin_divergence(f, random_probes(5, n, seed=9).points, spec))))
                for f, n in cases for spec in FAMILIES)
    record(9, worst < 1e-6, f"hyperspin divergence sup {worst:.2e} < 1e-6")


def _random_smooth(seed):
    B = np.random.default_rng(seed).normal(size=(4, 4))
    return bump_perturbation(holonomic_frame(4), 0.15, center=np.full(4, 0.1), width=0.8, direction=B)


def test_c10_curvature_identity():
    cfg = DiffConfig(step=1e-3)
    frames = [holonomic_frame(4), breathing("exp:0.5"), breathing("sin:2,0.3")] + [_random_smooth(s) for s in (1, 2, 3)]
    worst = 0.0
    for f in frames:
        lhs, rhs, diff = curvature_identity_check(f, random_probes(10, 4, seed=10).points, cfg)
        worst = max(worst, float(np.max(np.abs(diff) / (1 + np.abs(lhs)))))
    record(10, worst < 1e-5, f"curvature identity rel defect {worst:.2e} < 1e-5 on {len(frames)} frames")


def _smooth_2frame(seed):
    c = np.random.default_rng(seed).normal(size=(2, 2, 3))

    def matrix(x):
        base = c[..., 0] * 0.3 + np.eye(2) * 2
        return (base[None] + np.sin(x[:, 0])[:, None, None] * c[..., 1] * 0.3
                + np.cos(x[:, 1])[:, None, None] * c[..., 2] * 0.3)
    return FrameField(2, matrix)


def test_c11_two_dim_degeneracy():
    worst = 0.0
    for seed in range(50):
        f = _smooth_2frame(seed)
        gam = killing_array(torsion_array(f, random_probes(3, 2, seed=seed).points))
        scale = np.max(np.abs(gam), axis=(-2, -1)) ** 2
        worst = max(worst, float(np.max(np.abs(np.linalg.det(gam)) / np.maximum(scale, 1e-300))))
    record(11, worst < 1e-12, f"50 smooth 2-frames: |det gamma|/scale^2 = {worst:.2e} < 1e-12")


def test_c12_signature():
    spec = BreathingSpec(so3(), BreathingFunction.parse("exp:0.5"))
    g = breathing_metric(spec, random_probes(50, 4, seed=12).points)
    sigs = {density_and_signature(gi)[1] for gi in g}
    sl = density_and_signature(killing_form(sl2r()))[1]
    record(12, sigs == {BREATHING_SIGNATURE} and sl == SL2R_SIGNATURE,
           f"breathing signatures {sorted(sigs)}, sl(2,R) {sl}")


def test_c13_gauge_program():
    bg = su2_background(0.5)
    x = shell(4, 13)
    gauges = [{"radial": "r+0.1r^2"}, {"radial": "2r"}, {"time": gaussian(0.3, 0.5, 0.4)}, {"time": "0.2r^2"}]
    sup_bg = sup_residual(isotropic_frame(bg), BI, x)
    sup_g = max(sup_residual(isotropic_frame(apply_gauge(bg, g)), BI, x) for g in gauges)
    pert = PerturbationShapes(nu=parse_radial("r^2"), phi=parse_radial("0.3r"))
    lin = [{"eps": "0.3r^2"}, {"eps": gaussian(1.0, 0.5, 0.5)}, {"eta": "0.2r^2"}, {"eta": "0.1r+0.2r^3"}]
    nu_same = all(linear_gauge(pert, g, 0.5).nu is pert.nu for g in lin)
    sup_lin = max(float(np.max(np.abs(linear_residual(bg, BI, linear_gauge(PerturbationShapes(), g, 0.5), r))))
                  for g in lin for r in (0.2, 0.7, 1.3))
    ok = sup_bg < 1e-6 and sup_g < 1e-6 and nu_same and sup_lin < 1e-5
    record(13, ok, f"gauged background sup {sup_g:.2e} < 1e-6, nu identical {nu_same}, "
                   f"linear gauge directions sup {sup_lin:.2e} < 1e-5")


def test_c14_p0_family():
    bg = su2_background(0.5)
    p0 = p0_family(1.0, 0.5)
    x = shell(4, 14, r=(0.3, 1.2))

    def nonlinear(e):
        return sup_residual(isotropic_frame(bg.perturbed(p0, e)), BI, x)

    ratios = [nonlinear(2 * e) / nonlinear(e) for e in (1e-3, 5e-4)]
    lin = max(float(np.max(np.abs(linear_residual(bg, BI, p0, r)))) for r in (0.05, 0.3, 0.8, 1.5))
    ok = all(abs(q - 4) < 0.4 for q in ratios) and lin < 1e-5
    record(14, ok, f"eps^2 ratios {ratios[0]:.3f}, {ratios[1]:.3f} (4 +/- 10%), linear residual {lin:.2e} < 1e-5")


def test_c15_indicial():
    t0 = time.perf_counter()
    syn = indicial_scan(synthetic_operator(SYNTHETIC_ROOTS), np.arange(-3, 2.001, 0.05))
    res = indicial_exponents(BI)
    dt = time.perf_counter() - t0
    syn_ok = len(syn.roots) == 2 and np.allclose(syn.roots, SYNTHETIC_ROOTS, atol=0.02)
    bi_ok = len(res.roots) == 2 and np.allclose(res.roots, INDICIAL_ROOTS, atol=0.05)
    p0_in = res.in_null_space(0.0, [2.0, 1.0, 0.5, 0.0]) < 1e-6
    record(15, syn_ok and bi_ok and p0_in and dt < 600,
           f"born_infeld roots {[round(p, 4) for p in res.roots]}, synthetic {[round(p, 4) for p in syn.roots]}, "
           f"p0 family in null space {p0_in}, {dt:.0f}s (< 600s)")


@pytest.mark.parametrize("lam", ["exp:0.5"])
def test_c16_killing_vectors(lam):
    spec = BreathingSpec(so3(), BreathingFunction.parse(lam))
    x0, left, right = breathing_killing_vectors(spec)
    g = lambda x: breathing_metric(spec, x)
    cfg = DiffConfig(step=1e-3)
    pts = random_probes(10, 4, seed=16).points
    worst = max(float(np.max(np.abs(lie_derivative_metric(v, g, pts, cfg)))) for v in [x0] + left + right)
    record(16, worst < 1e-6, f"Lie derivative of gamma along X0, X_S, X*_S sup {worst:.2e} < 1e-6")
