"""Spherically symmetric frames: ansatz, residual shapes, gauges, linearisation.

Isotropic frames on the chart ``(t, x, y, z)`` are written in polynomial form

    phi_0 = K d_t + J x^mu d_mu
    phi_L = I x_L d_t + (F delta^mu_L + G x^mu x_L + H eps_{L nu mu} x^nu) d_mu

with shape functions of ``(t, r)``.  Factorised solutions have
``(F, ..., K) = exp(alpha t) (f, ..., k)(r)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial.transform import Rotation

from .chart import DiffConfig, as_points
from .dynamics import residual_closed_form
from .errors import ConfigError, FitFailure, NonMonotoneGauge, ProjectionFailure
from .frame import FrameField, torsion_array
from .concomitants import killing_array
from .lagrangians import LagrangianSpec
from .liealg import EPSILON
from .radial import ZERO, Dual, RadialFunction, as_radial, constant, dexp, parse_radial, power

SHAPE_NAMES = ("F", "G", "H", "I", "J", "K")
RADIAL_NAMES = ("f", "g", "h", "i", "j", "k")
PERT_NAMES = ("phi", "gam", "chi", "mu", "nu", "kap")
RESIDUAL_NAMES = ("K00", "K0", "Kup0", "Kb0", "Kb1", "Kb2")
CHART_ID = "spherical_txyz"

PROJ_REL_TOL = 1e-8
# absolute floor: finite-difference noise of exact solutions is not isotropic
PROJ_ABS_TOL = 1e-7
# linearisation: divergence step (times min(1, r)) and amplitude
LINEAR_CFG = DiffConfig(step=3e-3)
LINEAR_EPS = 1e-3


# ---------------------------------------------------------------------------
# shape containers


@dataclass(frozen=True)
class ShapeFunctions:
    """``evaluate(t, r) -> (values, d/dt, d/dr)``, each of shape ``(6, N)`` in F..K order."""

    evaluate: Callable
    label: str = "shapes"

    @classmethod
    def from_callables(cls, funcs: Sequence[Callable], dt: Sequence[Callable],
                       dr: Sequence[Callable], label="shapes") -> "ShapeFunctions":
        def ev(t, r):
            return (np.array([fn(t, r) for fn in funcs]),
                    np.array([fn(t, r) for fn in dt]),
                    np.array([fn(t, r) for fn in dr]))
        return cls(ev, label)


@dataclass(frozen=True)
class RadialShapes:
    """Factorised shapes ``(f, g, h, i, j, k)(r)`` with time exponent ``alpha``."""

    f: RadialFunction
    g: RadialFunction
    h: RadialFunction
    i: RadialFunction
    j: RadialFunction
    k: RadialFunction
    alpha: float = 0.5

    @property
    def funcs(self) -> tuple:
        return tuple(getattr(self, n) for n in RADIAL_NAMES)

    def values(self, r) -> np.ndarray:
        return np.array([fn(r) for fn in self.funcs])

    def derivatives(self, r) -> np.ndarray:
        return np.array([fn.derivative()(r) for fn in self.funcs])

    def shape_functions(self) -> ShapeFunctions:
        alpha, funcs = float(self.alpha), self.funcs

        def ev(t, r):
            w = np.exp(alpha * np.asarray(t, dtype=float))
            v = np.array([fn(r) for fn in funcs]) * w
            dr = np.array([fn.derivative()(r) for fn in funcs]) * w
            return v, alpha * v, dr

        return ShapeFunctions(ev, "factorised")

    def perturbed(self, pert: "PerturbationShapes", eps: float) -> "RadialShapes":
        return RadialShapes(*(b + eps * p for b, p in zip(self.funcs, pert.funcs)), alpha=self.alpha)

    def table(self, r) -> dict:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = {"r": r.tolist()}
        for name, fn in zip(RADIAL_NAMES, self.funcs):
            out[name] = np.asarray(fn(r), dtype=float).tolist()
        return out


@dataclass(frozen=True)
class PerturbationShapes:
    """Small corrections ``(phi, gam, chi, mu, nu, kap)(r)`` around a background."""

    phi: RadialFunction = ZERO
    gam: RadialFunction = ZERO
    chi: RadialFunction = ZERO
    mu: RadialFunction = ZERO
    nu: RadialFunction = ZERO
    kap: RadialFunction = ZERO
    epsilon: float = 1e-3
    slice_flags: dict = field(default_factory=dict)

    @property
    def funcs(self) -> tuple:
        return tuple(getattr(self, n) for n in PERT_NAMES)

    def values(self, r) -> np.ndarray:
        return np.array([fn(r) for fn in self.funcs])

    @classmethod
    def from_dict(cls, d: dict, epsilon: float = 1e-3) -> "PerturbationShapes":
        unknown = set(d) - set(PERT_NAMES)
        if unknown:
            raise ConfigError(f"unknown perturbation components {sorted(unknown)}")
        kw = {k: parse_radial(v) if isinstance(v, str) else as_radial(v) for k, v in d.items()}
        return cls(**kw, epsilon=epsilon)


@dataclass(frozen=True)
class IsotropicResidual:
    K00: float
    K0: float
    Kup0: float
    Kb0: float
    Kb1: float
    Kb2: float
    t: float = 0.0
    r: float = 1.0
    projection_residual: float = 0.0
    raw_norm: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in RESIDUAL_NAMES])

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def su2_background(alpha: float = 0.5, h_sign: float = 1.0) -> RadialShapes:
    """``f = g = 1/2``, ``h = +/- 1/2``, ``i = j = 0``, ``k = 1``."""
    half = constant(0.5)
    return RadialShapes(half, half, constant(0.5 * h_sign), ZERO, ZERO, constant(1.0), alpha=alpha)


def p0_family(c: float = 1.0, d: float = 0.5) -> PerturbationShapes:
    """Constant null direction ``phi = 2c, chi = c, kap = d`` (``gam = mu = nu = 0``)."""
    return PerturbationShapes(phi=constant(2 * c), chi=constant(c), kap=constant(d),
                              slice_flags={"mu": 0, "gam": 0})


def radial_shapes_from_dict(d: dict) -> RadialShapes:
    """``{"f": "0.5", ..., "alpha": 0.5}`` or ``{"builtin": "su2_background", "alpha": ...}``."""
    if d.get("builtin") == "su2_background":
        return su2_background(float(d.get("alpha", 0.5)), float(d.get("h_sign", 1.0)))
    if "builtin" in d:
        raise ConfigError(f"unknown shapes builtin {d['builtin']!r}")
    missing = [n for n in RADIAL_NAMES if n not in d]
    if missing:
        raise ConfigError(f"shapes missing components {missing}")
    funcs = [parse_radial(d[n]) if isinstance(d[n], str) else as_radial(d[n]) for n in RADIAL_NAMES]
    return RadialShapes(*funcs, alpha=float(d.get("alpha", 0.5)))


# ---------------------------------------------------------------------------
# the ansatz


def _radius(X):
    return np.sqrt(np.einsum("ni,ni->n", X, X))


def isotropic_frame(s: ShapeFunctions | RadialShapes, label: str = "isotropic") -> FrameField:
    """Frame on ``(t, x, y, z)`` with analytic jacobian from the shape partials."""
    if isinstance(s, RadialShapes):
        spec = {"builtin": "isotropic", "params": {"alpha": s.alpha}}
        s = s.shape_functions()
    else:
        spec = {"builtin": "isotropic", "params": {}}
    eye = np.eye(3)

    def matrix(x):
        x = np.atleast_2d(x)
        t, X = x[:, 0], x[:, 1:]
        (F, G, H, I, J, K), _, _ = s.evaluate(t, _radius(X))
        E = np.empty((len(x), 4, 4))
        E[:, 0, 0] = K
        E[:, 1:, 0] = J[:, None] * X
        E[:, 0, 1:] = I[:, None] * X
        W = np.einsum("lvm,nv->nml", EPSILON, X)
        E[:, 1:, 1:] = (F[:, None, None] * eye + G[:, None, None] * np.einsum("nm,nl->nml", X, X)
                        + H[:, None, None] * W)
        return E

    def jacobian(x):
        x = np.atleast_2d(x)
        t, X = x[:, 0], x[:, 1:]
        r = _radius(X)
        v, vt, vr = s.evaluate(t, r)
        F, G, H, I, J, K = v
        # d_a shape = shape_r x^a / r
        grad = vr[:, :, None] * (X / r[:, None])[None]
        Fa, Ga, Ha, Ia, Ja, Ka = grad
        Ft, Gt, Ht, It, Jt, Kt = vt
        N = len(x)
        dE = np.zeros((N, 4, 4, 4))
        XX = np.einsum("nm,nl->nml", X, X)
        W = np.einsum("lvm,nv->nml", EPSILON, X)
        # time derivative
        dE[:, 0, 0, 0] = Kt
        dE[:, 1:, 0, 0] = Jt[:, None] * X
        dE[:, 0, 1:, 0] = It[:, None] * X
        dE[:, 1:, 1:, 0] = Ft[:, None, None] * eye + Gt[:, None, None] * XX + Ht[:, None, None] * W
        # spatial derivatives, last index a
        dE[:, 0, 0, 1:] = Ka
        dE[:, 1:, 0, 1:] = np.einsum("nm,na->nma", X, Ja) + J[:, None, None] * eye
        dE[:, 0, 1:, 1:] = np.einsum("nl,na->nla", X, Ia) + I[:, None, None] * eye
        dXX = np.einsum("ma,nl->nmla", eye, X) + np.einsum("nm,la->nmla", X, eye)
        dE[:, 1:, 1:, 1:] = (np.einsum("ml,na->nmla", eye, Fa)
                             + np.einsum("nml,na->nmla", XX, Ga) + G[:, None, None, None] * dXX
                             + np.einsum("nml,na->nmla", W, Ha)
                             + H[:, None, None, None] * np.einsum("lam->mla", EPSILON)[None])
        return dE

    return FrameField(4, matrix, jacobian, CHART_ID, label, spec)


def random_rotations(n: int, seed: int = 0) -> np.ndarray:
    return Rotation.random(n, random_state=seed).as_matrix()


def check_isotropy(f: FrameField, rotations, probes, cfg: DiffConfig = DiffConfig()) -> float:
    """Largest covariance defect of the frame and of its Killing metric.

    For ``Q = diag(1, R)`` checks ``E(t, R x) = Q E(t, x) Q^T`` and
    ``gamma(t, R x) = Q gamma(t, x) Q^T`` (the latter relative to ``max(1, |gamma|)``).
    """
    x = np.atleast_2d(as_points(probes))
    E0 = f.eval(x)
    g0 = killing_array(torsion_array(f, x, cfg))
    worst = 0.0
    for R in np.asarray(rotations, dtype=float).reshape(-1, 3, 3):
        if not (np.allclose(R @ R.T, np.eye(3), atol=1e-12) and np.linalg.det(R) > 0):
            raise ConfigError("rotations must be proper orthogonal matrices")
        Q = np.eye(4)
        Q[1:, 1:] = R
        xr = x.copy()
        xr[:, 1:] = x[:, 1:] @ R.T
        dE = f.eval(xr) - Q @ E0 @ Q.T
        g1 = killing_array(torsion_array(f, xr, cfg))
        dg = (g1 - Q @ g0 @ Q.T) / max(1.0, float(np.max(np.abs(g0))))
        worst = max(worst, float(np.max(np.abs(dE))), float(np.max(np.abs(dg))))
    return worst


# ---------------------------------------------------------------------------
# residual shape functions


_DIRECTIONS = np.array([[0.48, -0.36, 0.8], [-0.6, 0.64, 0.48], [0.0, -0.8, -0.6],
                        [0.8, 0.6, 0.0], [-0.36, -0.48, 0.8]])


def _isotropic_basis(n: np.ndarray) -> np.ndarray:
    """Design matrix ``[16 m, 6]`` mapping the six shapes to ``K_m^i`` at unit-radius ``x``."""
    rows = []
    eye = np.eye(3)
    for X in n:
        B = np.zeros((4, 4, 6))
        B[0, 0, 0] = 1.0
        B[0, 1:, 1] = X
        B[1:, 0, 2] = X
        B[1:, 1:, 3] = eye
        B[1:, 1:, 4] = np.einsum("mvk,k->mv", EPSILON, X)
        B[1:, 1:, 5] = np.outer(X, X)
        rows.append(B.reshape(16, 6))
    return np.concatenate(rows)


def scaled_config(cfg: DiffConfig, r: float) -> DiffConfig:
    """Divergence step proportional to ``min(1, r)`` so that stencils resolve the centre."""
    return dataclasses.replace(cfg, step=cfg.step * min(1.0, float(r)))


def extract_isotropic_residual(f: FrameField, spec: LagrangianSpec, t: float, r: float,
                               cfg: DiffConfig = DiffConfig(), directions=None,
                               rel_tol: float = PROJ_REL_TOL, abs_tol: float = PROJ_ABS_TOL,
                               scale_step: bool = True) -> IsotropicResidual:
    """Project ``K_m^i`` on the sphere of radius ``r`` onto the isotropic basis.

    ``K_0^0 = K00``, ``K_0^mu = K0 x^mu``, ``K_mu^0 = Kup0 x_mu`` and
    ``K_mu^nu = Kb0 delta + Kb1 eps_{mu nu k} x^k + Kb2 x_mu x^nu``.
    """
    if not r > cfg.r_min:
        raise ConfigError(f"r={r} must exceed r_min={cfg.r_min}")
    n = _DIRECTIONS if directions is None else np.asarray(directions, dtype=float)
    n = n / np.linalg.norm(n, axis=1, keepdims=True)
    X = r * n
    pts = np.column_stack([np.full(len(X), float(t)), X])
    c = scaled_config(cfg, r) if scale_step else cfg
    K = residual_closed_form(f, pts, spec, c).k
    # design in terms of x = r n: rescale the columns so unknowns are the shape values
    B = _isotropic_basis(n) * np.array([1.0, r, r, 1.0, r, r * r])
    y = K.reshape(-1)
    coef, *_ = np.linalg.lstsq(B, y, rcond=None)
    resid = float(np.linalg.norm(B @ coef - y))
    raw = float(np.linalg.norm(y))
    if resid > rel_tol * raw + abs_tol:
        raise ProjectionFailure(
            f"residual is not isotropic at r={r}: projection defect {resid:.3e} vs |K|={raw:.3e}")
    return IsotropicResidual(*map(float, coef), t=float(t), r=float(r),
                             projection_residual=resid, raw_norm=raw)


def sup_residual(f: FrameField, spec: LagrangianSpec, points, cfg: DiffConfig = DiffConfig()) -> float:
    """Sup norm of the raw residual with radius-adapted divergence steps."""
    x = np.atleast_2d(as_points(points))
    r = _radius(x[:, 1:])
    out = 0.0
    for xi, ri in zip(x, r):
        K = residual_closed_form(f, xi[None], spec, scaled_config(cfg, ri)).k
        out = max(out, float(np.max(np.abs(K))))
    return out


# ---------------------------------------------------------------------------
# gauge maps


def _as_gauge_fn(v) -> RadialFunction:
    if isinstance(v, RadialFunction):
        return v
    if isinstance(v, str):
        head, sep, body = v.partition(":")
        return parse_radial(body if sep and head in ("omega", "eps", "eta", "epsilon") else v)
    return as_radial(v)


def _check_monotone(omega: RadialFunction, r_range):
    r = np.linspace(r_range[0], r_range[1], 2001)
    w, dw = omega(r), omega.derivative()(r)
    if np.any(~(w > 0)) or np.any(~(dw > 0)):
        raise NonMonotoneGauge("radial gauge omega must be positive and strictly increasing")


def _invert(omega: RadialFunction, s, r_hi: float):
    """Vectorised bisection plus Newton polish for ``omega(r) = s``."""
    s = np.asarray(s, dtype=float)
    lo = np.zeros_like(s)
    hi = np.full_like(s, r_hi)
    grow = omega(hi) < s
    while np.any(grow):
        hi = np.where(grow, 2 * hi, hi)
        grow = omega(hi) < s
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = omega(mid) < s
        lo, hi = np.where(below, mid, lo), np.where(below, hi, mid)
    r = 0.5 * (lo + hi)
    d = omega.derivative()
    for _ in range(2):
        r = r - (omega(r) - s) / d(r)
    return r


def _radial_gauge(s: RadialShapes, omega: RadialFunction, r_range) -> RadialShapes:
    _check_monotone(omega, r_range)
    w1 = omega.derivative()
    r_hi = float(r_range[1])

    def pulled(expr_name):
        def compute(sv, with_deriv):
            r = _invert(omega, sv, r_hi)
            rd = Dual(r, 1.0 / w1(r)) if with_deriv else Dual(r, 0.0)
            f, g, h, i, j, k = (fn.dual(rd) for fn in s.funcs)
            w, wp = omega.dual(rd), w1.dual(rd)
            out = {
                "f": f * w / rd,
                "g": g * rd * rd * wp / (w * w) + f / w * (wp / w - 1.0 / rd),
                "h": h,
                "i": i * rd / w,
                "j": j * rd * wp / w,
                "k": k,
            }[expr_name]
            return out.d if with_deriv else out.v

        deriv = RadialFunction(lambda sv: compute(sv, True), None, f"d{expr_name}_bar")
        return RadialFunction(lambda sv: compute(sv, False), deriv, f"{expr_name}_bar")

    return RadialShapes(*(pulled(n) for n in RADIAL_NAMES), alpha=s.alpha)


def _time_gauge(s: RadialShapes, eps: RadialFunction) -> RadialShapes:
    alpha = float(s.alpha)
    e1 = eps.derivative()

    def pulled(name):
        def compute(r, with_deriv):
            rd = Dual(np.asarray(r, dtype=float), 1.0 if with_deriv else 0.0)
            f, g, h, i, j, k = (fn.dual(rd) for fn in s.funcs)
            damp = dexp(eps.dual(rd) * (-alpha))
            ep = e1.dual(rd)
            out = {
                "f": damp * f,
                "g": damp * g,
                "h": damp * h,
                "i": damp * (i + (f + g * rd * rd) * ep / rd),
                "j": damp * j,
                "k": damp * (k + rd * j * ep),
            }[name]
            return out.d if with_deriv else out.v

        deriv = RadialFunction(lambda r: compute(r, True), None, f"d{name}_bar")
        return RadialFunction(lambda r: compute(r, False), deriv, f"{name}_bar")

    return RadialShapes(*(pulled(n) for n in RADIAL_NAMES), alpha=alpha)


def apply_gauge(s: RadialShapes, gauge: dict, r_range=(1e-3, 10.0)) -> RadialShapes:
    """Radial (``{"radial": omega}``) or time (``{"time": eps}``) coordinate change.

    Radial: ``r -> omega(r)``, ``x -> x omega / r``.  Time: ``t -> t + eps(r)``.
    Values may be :class:`RadialFunction` objects or strings like ``"omega:2r"``.
    """
    keys = set(gauge) & {"radial", "time"}
    if len(keys) != 1:
        raise ConfigError("gauge must specify exactly one of 'radial' or 'time'")
    if "radial" in gauge:
        return _radial_gauge(s, _as_gauge_fn(gauge["radial"]), r_range)
    return _time_gauge(s, _as_gauge_fn(gauge["time"]))


def linear_gauge(pert: PerturbationShapes, gauge: dict, alpha: float) -> PerturbationShapes:
    """Infinitesimal gauge on perturbations of the SU(2) background.

    ``{"eta": eta}`` shifts ``r -> r + eta(r)``; ``{"eps": eps}`` shifts ``t -> t + eps(r)``.
    ``nu`` is passed through untouched in both cases.
    """
    eta = _as_gauge_fn(gauge.get("eta", 0.0))
    eps = _as_gauge_fn(gauge.get("eps", 0.0))
    d_eta, d_eps = eta.derivative(), eps.derivative()
    a = float(alpha)
    inv_r, inv_r2, inv_r3 = power(1.0, -1), power(1.0, -2), power(1.0, -3)
    half = 0.5
    phi = pert.phi + half * eta * inv_r - (half * a) * eps
    gam = (pert.gam - (half * inv_r3 + power(1.0, -1)) * eta
           + (half * inv_r2 + half) * d_eta - (half * a) * eps)
    chi = pert.chi - (half * a) * eps
    mu = pert.mu + (half * inv_r + power(half, 1)) * d_eps
    kap = pert.kap - a * eps
    return dataclasses.replace(pert, phi=phi, gam=gam, chi=chi, mu=mu, nu=pert.nu, kap=kap)


def gamma00_linear(nu, dnu, alpha: float, r):
    """``3 alpha^2 + 2 alpha (r^2 - 3)/(1 + r^2) nu - 2 alpha r nu'`` (linear order)."""
    r = np.asarray(r, dtype=float)
    nv = nu(r) if callable(nu) else nu
    dv = dnu(r) if callable(dnu) else dnu
    return 3 * alpha ** 2 + 2 * alpha * (r ** 2 - 3) / (1 + r ** 2) * nv - 2 * alpha * r * dv


# ---------------------------------------------------------------------------
# linearisation


def _pert_scale(pert: PerturbationShapes, r: float) -> float:
    v = np.abs(pert.values(np.array([r])))
    return float(np.max(v))


def linear_residual(background: RadialShapes, spec: LagrangianSpec, pert: PerturbationShapes,
                    r: float, cfg: DiffConfig = LINEAR_CFG, eps: float | None = None,
                    t: float = 0.0, normalize: bool = True, order: int = 4, **kw) -> np.ndarray:
    """Central difference ``(R(bg + e p) - R(bg - e p)) / (2 e)`` of the six residual shapes.

    ``order=4`` uses the five-point formula, which tolerates a larger ``e``
    (less round-off) at the same O(e^4) contamination level.

    With ``normalize`` the step ``e`` is divided by the size of ``pert`` at ``r``,
    so that the actual shape change stays of order ``eps``.
    """
    eps = pert.epsilon if eps is None else eps
    scale = _pert_scale(pert, r) if normalize else 1.0
    if scale == 0:
        return np.zeros(6)
    e = eps / scale

    def R(a):
        f = isotropic_frame(background.perturbed(pert, a))
        return extract_isotropic_residual(f, spec, t, r, cfg, rel_tol=np.inf, **kw).as_array()

    if order == 2:
        return (R(e) - R(-e)) / (2 * e)
    return (8 * (R(e) - R(-e)) - (R(2 * e) - R(-2 * e))) / (12 * e)


# ---------------------------------------------------------------------------
# indicial analysis


@dataclass
class IndicialResult:
    roots: list
    p_grid: np.ndarray
    sigma_min: np.ndarray
    row_shifts: list
    threshold: float
    null_vectors: dict = field(default_factory=dict)

    def null_space(self, p: float, tol: float = 0.05) -> np.ndarray:
        """Orthonormal null vectors (rows) of the root nearest ``p``."""
        if not self.roots:
            return np.zeros((0, 0))
        k = min(self.null_vectors, key=lambda q: abs(q - p))
        if abs(k - p) > tol:
            return np.zeros((0, len(next(iter(self.null_vectors.values()))[0])))
        return np.asarray(self.null_vectors[k])

    def in_null_space(self, p: float, v) -> float:
        """Relative distance of ``v`` from the null space at ``p`` (0 = inside)."""
        v = np.asarray(v, dtype=float)
        N = self.null_space(p)
        if N.size == 0:
            return 1.0
        return float(np.linalg.norm(v - N.T @ (N @ v)) / np.linalg.norm(v))

    def to_dict(self) -> dict:
        return {"roots": [float(p) for p in self.roots],
                "row_shifts": [int(s) for s in self.row_shifts],
                "threshold": float(self.threshold),
                "scan": {"p": [float(p) for p in self.p_grid],
                         "sigma_min": [float(s) for s in self.sigma_min]},
                "null_vectors": {f"{k:.6g}": np.asarray(vec, dtype=float).tolist()
                                 for k, vec in self.null_vectors.items()}}


# largest tolerated log-deviation of a row norm from its log-log fit (median over the scan)
POWER_LAW_TOL = 1.0


def default_window(n: int = 9, r_lo: float = 1e-2, r_hi: float = 1e-1) -> np.ndarray:
    return np.geomspace(r_lo, r_hi, n)


def _row_shifts(samples: np.ndarray, p_grid: np.ndarray, r: np.ndarray) -> list:
    """Integer shift ``s_c`` with ``|V_c| ~ r^(p + s_c)``, from log-log slopes."""
    lr = np.log(r)
    shifts = []
    for c in range(samples.shape[2]):
        norms = np.linalg.norm(samples[:, :, c, :], axis=-1)  # [p, r]
        ok = np.all(norms > 0, axis=1)
        if not np.any(ok):
            shifts.append(None)
            continue
        ln = np.log(norms[ok]).T
        fit = np.polyfit(lr, ln, 1)
        slopes = fit[0]
        bend = np.median(np.max(np.abs(ln - (np.outer(lr, fit[0]) + fit[1])), axis=0))
        if bend > POWER_LAW_TOL:
            raise FitFailure(f"row {c}: samples deviate from a power law by {bend:.3f} in log")
        s = np.median(slopes - p_grid[ok])
        if abs(s - round(s)) > 0.2:
            raise FitFailure(f"row {c}: leading power shift {s:.3f} is not close to an integer")
        shifts.append(int(round(s)))
    return shifts


def _leading_matrix(V: np.ndarray, p: float, r: np.ndarray, shifts, even: bool = True) -> np.ndarray:
    """Extrapolate ``r^-(p+s_c) V_c(r)`` to ``r -> 0``.

    Corrections are fitted as a quadratic in ``r^2`` (``even``) or in ``r``.
    """
    rows = []
    q = r * r if even else r
    A = np.column_stack([np.ones_like(r), q, q * q])
    for c, s in enumerate(shifts):
        if s is None:
            continue
        y = V[:, c, :] * r[:, None] ** (-(p + s))
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        rows.append(coef[0])
    return np.array(rows)


def indicial_scan(apply_fn: Callable[[float, float], np.ndarray], p_grid, r_window=None,
                  rel_threshold: float = 1e-3, refine: bool = True,
                  even: bool = True) -> IndicialResult:
    """Rank-drop scan of a linear radial operator at ``r = 0``.

    ``apply_fn(p, r)`` returns ``V[c, d]``: row ``c`` of the operator applied to the
    monomial ``r^p e_d`` and evaluated at ``r``.  Leading coefficients are
    extracted per row, normalised, and roots are taken at local minima of the
    smallest singular value that fall below ``rel_threshold`` times its median.
    ``even`` declares that corrections to the leading power come in powers of ``r^2``.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    r = default_window() if r_window is None else np.asarray(r_window, dtype=float)
    samples = np.array([[apply_fn(p, ri) for ri in r] for p in p_grid])  # [p, r, c, d]
    shifts = _row_shifts(samples, p_grid, r)

    mats = np.array([_leading_matrix(samples[k], p, r, shifts, even) for k, p in enumerate(p_grid)])
    row_scale = np.max(np.linalg.norm(mats, axis=2), axis=0)
    row_scale[row_scale == 0] = 1.0

    def matrix_at(p):
        V = np.array([apply_fn(p, ri) for ri in r])
        return _leading_matrix(V, p, r, shifts, even) / row_scale[:, None]

    def smin(M):
        return float(np.linalg.svd(M, compute_uv=False)[-1])

    sig = np.array([smin(M / row_scale[:, None]) for M in mats])
    med = float(np.median(sig))
    threshold = rel_threshold * med
    step = float(np.median(np.diff(p_grid))) if len(p_grid) > 1 else 0.1

    roots, nulls = [], {}
    cand = [k for k in range(len(sig))
            if (k == 0 or sig[k] <= sig[k - 1]) and (k == len(sig) - 1 or sig[k] <= sig[k + 1])]
    for k in cand:
        p0, s0 = p_grid[k], sig[k]
        if refine:
            res = minimize_scalar(lambda p: smin(matrix_at(p)), bounds=(p0 - step, p0 + step),
                                  method="bounded", options={"xatol": 1e-6})
            if res.fun < s0:
                p0, s0 = float(res.x), float(res.fun)
        if s0 < threshold:
            roots.append(float(p0))
            _, sv, vt = np.linalg.svd(matrix_at(p0))
            sv = np.concatenate([sv, np.zeros(len(vt) - len(sv))])
            nulls[float(p0)] = vt[sv < threshold]
    if not np.isfinite(med) or med == 0:
        raise FitFailure("degenerate indicial scan: singular values vanish identically")
    return IndicialResult(sorted(roots), p_grid, sig, shifts, threshold, nulls)


SLICE_DIRECTIONS = ("phi", "chi", "kap", "nu")
# monomial amplitude: the gradient p e / r of the perturbation must stay small
INDICIAL_EPS = 1e-4


def monomial(p: float, r0: float = 1.0) -> RadialFunction:
    """``(r / r0)^p``."""
    return power(r0 ** -p, p)


def background_operator(spec: LagrangianSpec, background: RadialShapes | None = None,
                        cfg: DiffConfig = LINEAR_CFG, eps: float = INDICIAL_EPS,
                        directions: Sequence[str] = SLICE_DIRECTIONS) -> Callable:
    """``apply_fn(p, r)`` for the linearisation around ``background`` in the slice ``mu = gam = 0``."""
    bg = su2_background() if background is None else background

    def apply_fn(p, r):
        cols = []
        for name in directions:
            pert = PerturbationShapes(**{name: monomial(p, r)}, epsilon=eps)
            # (r/r)^p = 1 at the probe radius; rescale back to r^p
            cols.append(linear_residual(bg, spec, pert, r, cfg, normalize=False) * r ** p)
        return np.array(cols).T

    return apply_fn


def indicial_exponents(spec: LagrangianSpec, p_scan: dict | None = None, r_probe_scale: float = 1.0,
                       cfg: DiffConfig = LINEAR_CFG, background: RadialShapes | None = None,
                       n_window: int = 9, eps: float = INDICIAL_EPS) -> IndicialResult:
    """Characteristic exponents of the linearised isotropic system at ``r = 0``."""
    p_scan = {"p_min": -5.0, "p_max": 1.0, "step": 0.05} if p_scan is None else p_scan
    lo, hi, st = float(p_scan["p_min"]), float(p_scan["p_max"]), float(p_scan["step"])
    if not (st > 0 and hi > lo):
        raise ConfigError("scan needs p_min < p_max and step > 0")
    grid = lo + st * np.arange(int(round((hi - lo) / st)) + 1)
    window = default_window(n_window) * r_probe_scale
    return indicial_scan(background_operator(spec, background, cfg, eps), grid, window)


def synthetic_operator(roots=(1.0, -2.0)) -> Callable:
    """Manufactured Euler-type system whose exponents are ``roots``.

    Row 0: ``r^2 u'' + (1 - a - b) r u' + a b u + r^2 v`` (coupling at higher order);
    row 1: ``r v'' + (1 - a - b) v' + a b v / r`` (shifted by one power);
    row 2: ``r^2 (u + v)`` (no leading contribution).
    """
    a, b = roots
    c1, c0 = 1.0 - a - b, a * b

    def q(p):
        return p * (p - 1) + c1 * p + c0

    def apply_fn(p, r):
        V = np.zeros((3, 2))
        V[0, 0] = q(p) * r ** p
        V[0, 1] = r ** (p + 2)
        V[1, 1] = q(p) * r ** (p - 1)
        V[2, :] = r ** (p + 2)
        return V

    return apply_fn
