"""Lie-algebraic exact solutions: closed and breathing-closed frame fields.

Two group charts are provided for a matrix Lie algebra with basis ``e_a``:

* ``group_rotation_vector`` uses the Cayley parametrisation
  ``g(x) = (I - X)^-1 (I + X)`` with ``X = x^a e_a``.  For so(3) in its
  adjoint representation this is the rotation-vector chart, with rotation
  angle ``2 arctan |x|``.
* ``group_canonical`` uses exponential coordinates ``g(x) = exp(X)``.

The left-invariant fields ``X_a`` are dual to ``theta = g^-1 dg`` and satisfy
``[X_a, X_b] = C^c_ab X_c``.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import expm, expm_frechet
from scipy.optimize import brentq

from .chart import as_points
from .errors import ChartDomain, ConfigError, NonPositiveLambda, NotSemisimple
from .frame import FrameField

SEMISIMPLE_TOL = 1e-10


# ---------------------------------------------------------------------------
# structure constants


@dataclass(frozen=True)
class StructureConstants:
    """``c[A, B, C] = C^A_BC`` with an optional faithful matrix basis."""

    c: np.ndarray
    basis: np.ndarray | None = None
    name: str = "custom"

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        m = c.shape[0]
        if c.shape != (m, m, m):
            raise ConfigError("structure constants must be an m x m x m array")
        if not np.array_equal(c, -c.transpose(0, 2, 1)):
            raise ConfigError("structure constants must be antisymmetric in the lower pair")
        jac = (np.einsum("abe,ecd->abcd", c, c) + np.einsum("ace,edb->abcd", c, c)
               + np.einsum("ade,ebc->abcd", c, c))
        if np.max(np.abs(jac), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(c)) ** 2):
            raise ConfigError("structure constants violate the Jacobi identity")
        object.__setattr__(self, "c", c)
        if self.basis is not None:
            object.__setattr__(self, "basis", np.array(self.basis, dtype=float))

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def matrix_basis(self) -> np.ndarray:
        """Registered basis, or the adjoint representation ``(ad_a)^c_b = C^c_ab``."""
        if self.basis is not None:
            return self.basis
        return self.c.transpose(1, 0, 2)

    @classmethod
    def from_matrix_basis(cls, basis, name="custom") -> "StructureConstants":
        basis = np.array(basis, dtype=float)
        m = len(basis)
        flat = basis.reshape(m, -1).T
        c = np.zeros((m, m, m))
        for a in range(m):
            for b in range(m):
                br = basis[a] @ basis[b] - basis[b] @ basis[a]
                c[:, a, b] = np.linalg.lstsq(flat, br.ravel(), rcond=None)[0]
        c = np.round(c, 14)
        c = 0.5 * (c - c.transpose(0, 2, 1))
        return cls(c, basis, name)


def _levi_civita():
    eps = np.zeros((3, 3, 3))
    for (i, j, k), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                         (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        eps[i, j, k] = s
    return eps


EPSILON = _levi_civita()


def so3() -> StructureConstants:
    # (L_a)_bc = -eps_abc gives [L_a, L_b] = eps_abc L_c
    return StructureConstants(EPSILON.copy(), -EPSILON.copy(), "so3")


def sl2r() -> StructureConstants:
    H = np.array([[1.0, 0.0], [0.0, -1.0]])
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    F = np.array([[0.0, 0.0], [1.0, 0.0]])
    return StructureConstants.from_matrix_basis([H, E, F], "sl2r")


def abelian(m: int) -> StructureConstants:
    return StructureConstants(np.zeros((m, m, m)), None, f"abelian{m}")


def so3_plus_center() -> StructureConstants:
    c = np.zeros((4, 4, 4))
    c[:3, :3, :3] = EPSILON
    return StructureConstants(c, None, "so3_plus_center")


def get_algebra(name_or_path) -> StructureConstants:
    """Registry lookup (``so3``, ``su2``, ``sl2r``, ``abelianN``, ``so3_plus_center``) or JSON."""
    key = str(name_or_path).strip()
    if key in ("so3", "su2"):
        return so3()
    if key == "sl2r":
        return sl2r()
    if key == "so3_plus_center":
        return so3_plus_center()
    m = re.fullmatch(r"abelian(\d+)", key)
    if m:
        return abelian(int(m.group(1)))
    if Path(key).exists():
        key = Path(key).read_text()
    try:
        doc = json.loads(key)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"unknown algebra {name_or_path!r}") from exc
    if isinstance(doc, dict):
        doc = doc.get("c", doc.get("structure_constants"))
    return StructureConstants(np.array(doc, dtype=float))


def killing_form(C: StructureConstants) -> np.ndarray:
    """``gamma_AB = C^C_AD C^D_BC``."""
    return np.einsum("cad,dbc->ab", C.c, C.c)


def is_semisimple(C: StructureConstants) -> bool:
    K = killing_form(C)
    scale = np.max(np.abs(K))
    return bool(scale > 0 and abs(np.linalg.det(K)) > SEMISIMPLE_TOL * scale ** C.dim)


def is_compact(C: StructureConstants) -> bool:
    """Negative-definite Killing form (sufficient for the algebras used here)."""
    return bool(np.all(np.linalg.eigvalsh(killing_form(C)) < 0))


def _require_semisimple(C):
    if not is_semisimple(C):
        raise NotSemisimple(f"algebra {C.name} is not semisimple (degenerate Killing form)")


# ---------------------------------------------------------------------------
# group charts


def _project(basis_flat_pinv, mats):
    """Coefficients of matrices ``mats[..., d, d]`` in the basis."""
    return np.einsum("ak,...k->...a", basis_flat_pinv, mats.reshape(mats.shape[:-2] + (-1,)))


class _CayleyChart:
    """Maurer-Cartan forms in Cayley coordinates, with analytic derivatives."""

    def __init__(self, basis):
        self.basis = basis
        self.pinv = np.linalg.pinv(basis.reshape(len(basis), -1).T)

    def _resolvents(self, x):
        X = np.einsum("na,aij->nij", x, self.basis)
        eye = np.eye(X.shape[-1])
        Am, Ap = eye - X, eye + X
        dets = np.linalg.det(Am) * np.linalg.det(Ap)
        if np.any(np.abs(dets) < 1e-12):
            raise ChartDomain("Cayley chart is singular at this point")
        return np.linalg.inv(Ap), np.linalg.inv(Am)

    def coframe(self, x, right=False):
        """``theta^A_i`` with ``theta = g^-1 dg`` (left) or ``dg g^-1`` (right)."""
        P, Q = self._resolvents(x)
        if right:
            P, Q = Q, P
        # g^-1 d_i g = 2 (I + X)^-1 e_i (I - X)^-1
        mats = 2.0 * np.einsum("nij,bjk,nkl->nbil", P, self.basis, Q)
        return _project(self.pinv, mats).swapaxes(-1, -2)

    def dcoframe(self, x, right=False):
        """``d_k theta^A_i`` as ``[n, A, i, k]``."""
        P, Q = self._resolvents(x)
        sgn = 1.0
        if right:
            P, Q, sgn = Q, P, -1.0
        B = self.basis
        PB = np.einsum("nij,bjk->nbik", P, B)
        BQ = np.einsum("bij,njk->nbik", B, Q)
        PBQ = np.einsum("nbij,njk->nbik", PB, Q)
        # d_k P = P e_k P (left) ; d_k Q = Q e_k Q (left); signs flip for right forms
        t1 = -np.einsum("nkij,nbjl->nbkil", PB, PBQ)
        t2 = np.einsum("nbij,nkjl->nbkil", PBQ, BQ)
        mats = 2.0 * sgn * (t1 + t2)
        coeff = _project(self.pinv, mats)  # [n, i, k, A]
        return coeff.transpose(0, 3, 1, 2)


class _CanonicalChart:
    """Maurer-Cartan forms in exponential coordinates via block exponentials."""

    def __init__(self, C: StructureConstants):
        self.ad = C.c.transpose(1, 0, 2)  # ad[a] has entries (ad_a)^c_b

    def _blocks(self, xi, sign):
        m = len(xi)
        Z = np.zeros((2 * m, 2 * m))
        Z[:m, :m] = sign * np.einsum("a,acb->cb", xi, self.ad)
        Z[:m, m:] = np.eye(m)
        return Z

    def coframe(self, x, right=False):
        if np.any(np.linalg.norm(x, axis=-1) >= 2 * np.pi):
            raise ChartDomain("canonical chart requires |x| < 2 pi")
        m = x.shape[-1]
        sign = 1.0 if right else -1.0
        return np.array([expm(self._blocks(xi, sign))[:m, m:] for xi in x])

    def dcoframe(self, x, right=False):
        m = x.shape[-1]
        sign = 1.0 if right else -1.0
        out = np.empty((len(x), m, m, m))
        for n, xi in enumerate(x):
            Z = self._blocks(xi, sign)
            for k in range(m):
                dZ = np.zeros_like(Z)
                dZ[:m, :m] = sign * self.ad[k]
                out[n, :, :, k] = expm_frechet(Z, dZ, compute_expm=False)[:m, m:]
        return out


def _chart(C: StructureConstants, chart: str):
    if chart in ("group_rotation_vector", "rotation_vector", "cayley"):
        return _CayleyChart(C.matrix_basis()), "group_rotation_vector"
    if chart in ("group_canonical", "canonical"):
        return _CanonicalChart(C), "group_canonical"
    raise ConfigError(f"unknown group chart {chart!r}")


def _frame_from_coframe(th, dth):
    E = np.linalg.inv(th)
    dE = -np.einsum("niA,nAjk,njB->niBk", E, dth, E)
    return E, dE


def invariant_fields(C: StructureConstants, chart="group_rotation_vector", right=False):
    """Vectorised ``(matrix, jacobian)`` callables of the invariant frame on G."""
    ch, _ = _chart(C, chart)

    def matrix(x):
        return np.linalg.inv(ch.coframe(np.atleast_2d(x), right))

    def jacobian(x):
        x = np.atleast_2d(x)
        return _frame_from_coframe(ch.coframe(x, right), ch.dcoframe(x, right))[1]

    return matrix, jacobian


def left_invariant_frame(algebra, chart="group_rotation_vector", p=None) -> np.ndarray:
    """Components ``X^i_A`` of the left-invariant fields at ``p``.

    ``algebra`` is a registered name, a list of basis matrices or a
    :class:`StructureConstants`.
    """
    if isinstance(algebra, StructureConstants):
        C = algebra
    elif isinstance(algebra, str):
        C = get_algebra(algebra)
    else:
        C = StructureConstants.from_matrix_basis(algebra)
    matrix, _ = invariant_fields(C, chart)
    x = as_points(p if p is not None else np.zeros(C.dim))
    out = matrix(np.atleast_2d(x))
    return out[0] if x.ndim == 1 else out


def rotation_vector_closed_form(x, right=False):
    """``psi = 1/2 (I + x x^T -/+ [x]_x)`` for so(3) in rotation-vector coordinates.

    ``psi[mu, L] = 1/2 (delta + x^mu x^L + s eps_{L nu mu} x^nu)`` with ``s = -1``
    for left-invariant and ``+1`` for right-invariant fields.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = 1.0 if right else -1.0
    W = np.einsum("lvm,nv->nml", EPSILON, x)
    return 0.5 * (np.eye(3) + np.einsum("ni,nj->nij", x, x) + s * W)


def closed_frame(C: StructureConstants, chart: str = "group_rotation_vector") -> FrameField:
    """Left-invariant frame on the group of a semisimple algebra."""
    _require_semisimple(C)
    matrix, jac = invariant_fields(C, chart)
    _, cid = _chart(C, chart)
    return FrameField(C.dim, matrix, jac, cid, f"closed_{C.name}",
                      {"builtin": f"closed_{C.name}", "params": {"chart": cid}})


# ---------------------------------------------------------------------------
# breathing frames


@dataclass(frozen=True)
class BreathingFunction:
    """Scalar ``lambda(t)`` with analytic first and second derivatives."""

    kind: str
    args: tuple

    def value(self, t):
        return self._eval(np.asarray(t, dtype=float))[0]

    def deriv(self, t):
        return self._eval(np.asarray(t, dtype=float))[1]

    def second(self, t):
        return self._eval(np.asarray(t, dtype=float))[2]

    def _eval(self, t):
        a = self.args
        if self.kind == "exp":
            amp, rate = (a[1], a[0]) if len(a) > 1 else (1.0, a[0])
            v = amp * np.exp(rate * t)
            return v, rate * v, rate ** 2 * v
        if self.kind == "sin":
            c, amp, w = (list(a) + [1.0])[:3]
            return c + amp * np.sin(w * t), amp * w * np.cos(w * t), -amp * w * w * np.sin(w * t)
        if self.kind == "const":
            z = np.zeros_like(t)
            return a[0] + z, z, z
        if self.kind == "inv":
            # lambda = -1 / (alpha t), the factorised frame in group time
            v = -1.0 / (a[0] * t)
            return v, -v / t, 2 * v / t ** 2
        raise ConfigError(f"unknown breathing function {self.kind!r}")

    @property
    def text(self) -> str:
        return f"{self.kind}:" + ",".join(repr(float(v)) for v in self.args)

    @classmethod
    def parse(cls, text: str) -> "BreathingFunction":
        """``exp:alpha[,A]``, ``sin:c,a[,w]`` (c + a sin(w t)) or ``const:c``."""
        kind, _, vals = str(text).partition(":")
        try:
            args = tuple(float(v) for v in vals.split(",") if v)
        except ValueError as exc:
            raise ConfigError(f"bad breathing function {text!r}") from exc
        if kind not in ("exp", "sin", "const", "inv") or not args:
            raise ConfigError(f"bad breathing function {text!r}")
        return cls(kind, args)


@dataclass(frozen=True)
class BreathingSpec:
    spatial: StructureConstants
    lam: BreathingFunction
    chart: str = "group_rotation_vector"

    @property
    def dim(self) -> int:
        return self.spatial.dim + 1


def _check_lambda(lam, t):
    if np.any(~(lam.value(t) > 0)):
        raise NonPositiveLambda("breathing function must be positive on the probe range")


def breathing_closed_frame(spec: BreathingSpec) -> FrameField:
    """``phi_0 = d/dt``, ``phi_L = lambda(t) psi_L`` on adapted coordinates ``(t, xi)``."""
    C = spec.spatial
    _require_semisimple(C)
    mat, jac = invariant_fields(C, spec.chart)
    n, lam = spec.dim, spec.lam

    def matrix(x):
        x = np.atleast_2d(x)
        _check_lambda(lam, x[:, 0])
        E = np.zeros((len(x), n, n))
        E[:, 0, 0] = 1.0
        E[:, 1:, 1:] = lam.value(x[:, 0])[:, None, None] * mat(x[:, 1:])
        return E

    def jacobian(x):
        x = np.atleast_2d(x)
        _check_lambda(lam, x[:, 0])
        dE = np.zeros((len(x), n, n, n))
        dE[:, 1:, 1:, 0] = lam.deriv(x[:, 0])[:, None, None] * mat(x[:, 1:])
        dE[:, 1:, 1:, 1:] = lam.value(x[:, 0])[:, None, None, None] * jac(x[:, 1:])
        return dE

    return FrameField(n, matrix, jacobian, "adapted_breathing", f"breathing_{C.name}",
                      {"builtin": f"breathing_{C.name}",
                       "params": {"lambda": lam.text, "chart": spec.chart}})


def breathing_metric(spec: BreathingSpec, p) -> np.ndarray:
    """Closed-form Killing metric ``(n-1)(lam'/lam)^2 dt^2 + C_LS psi^L psi^S``."""
    x = np.atleast_2d(as_points(p))
    C, n = spec.spatial, spec.dim
    ch, _ = _chart(C, spec.chart)
    psi = ch.coframe(x[:, 1:])
    lam = spec.lam
    _check_lambda(lam, x[:, 0])
    g = np.zeros((len(x), n, n))
    g[:, 0, 0] = (n - 1) * (lam.deriv(x[:, 0]) / lam.value(x[:, 0])) ** 2
    g[:, 1:, 1:] = np.einsum("nai,ab,nbj->nij", psi, killing_form(C), psi)
    return g[0] if as_points(p).ndim == 1 else g


def cosmic_time(lam: BreathingFunction | Callable, n: int = 4, A: float | None = None,
                sign: int = 1, t_bracket=(-50.0, 50.0)):
    """``T(t) = +/- sqrt(n-1) ln(lambda(t)/A)`` and its inverse.

    ``A`` defaults to ``lambda(0)``.  The inverse is found by bracketing and
    requires ``lambda`` to be strictly monotone on ``t_bracket``.
    """
    value = lam.value if isinstance(lam, BreathingFunction) else lam
    if A is None:
        A = float(value(0.0))
    if not A > 0:
        raise NonPositiveLambda("lambda(0) must be positive")
    k = sign * np.sqrt(n - 1)

    def T(t):
        v = np.asarray(value(t), dtype=float)
        if np.any(~(v > 0)):
            raise NonPositiveLambda("breathing function must be positive")
        return k * np.log(v / A)

    def T_inv(tau):
        lo, hi = t_bracket
        return brentq(lambda t: float(T(t)) - tau, lo, hi, xtol=1e-14)

    return T, T_inv


def breathing_killing_vectors(spec: BreathingSpec):
    """Vectorised Killing fields ``X_0``, ``X_S`` and right-invariant ``X*_S``.

    ``X_0 = (lam / lam') phi_0 / sqrt(n-1)`` so that it has unit ``gamma``-length
    for any breathing function.
    """
    C, n, lam = spec.spatial, spec.dim, spec.lam
    left, _ = invariant_fields(C, spec.chart)
    right, _ = invariant_fields(C, spec.chart, right=True)

    def x0(x):
        x = np.atleast_2d(x)
        v = np.zeros((len(x), n))
        v[:, 0] = lam.value(x[:, 0]) / lam.deriv(x[:, 0]) / np.sqrt(n - 1)
        return v

    def lifted(fields, a):
        def fn(x):
            x = np.atleast_2d(x)
            v = np.zeros((len(x), n))
            v[:, 1:] = fields(x[:, 1:])[:, :, a]
            return v
        return fn

    return x0, [lifted(left, a) for a in range(C.dim)], [lifted(right, a) for a in range(C.dim)]
