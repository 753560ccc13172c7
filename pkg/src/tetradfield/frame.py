"""Frame fields and their first-order differential invariants."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .chart import DiffConfig, as_points, check_domain, gradient
from .errors import NonPositiveDeterminant, SingularFrame

DET_TOL = 1e-12


@dataclass(frozen=True)
class FrameField:
    """A frame field ``phi^i_A`` on a single chart.

    ``matrix`` and ``jacobian`` are vectorised: they map an ``(N, n)`` array
    of coordinates to ``(N, n, n)`` and ``(N, n, n, n)`` arrays.  The jacobian
    layout is ``[N, i, A, k] = d_k phi^i_A``.
    """

    dim: int
    matrix: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Callable[[np.ndarray], np.ndarray] | None = None
    chart_id: str = "cartesian"
    label: str = "frame"
    spec: dict = field(default_factory=dict, compare=False)

    def eval(self, p) -> np.ndarray:
        x = as_points(p)
        single = x.ndim == 1
        out = np.asarray(self.matrix(np.atleast_2d(x)), dtype=float)
        return out[0] if single else out

    def jacobian(self, p, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
        x = as_points(p)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if self.jacobian_fn is not None:
            out = np.asarray(self.jacobian_fn(x), dtype=float)
        else:
            out = gradient(self.matrix, x, cfg.frame_step, cfg.stencil_order,
                           self.chart_id, cfg.r_min)
        return out[0] if single else out

    def jet(self, x: np.ndarray, cfg: DiffConfig = DiffConfig()):
        """Frame, coframe and coframe derivatives at a batch of points.

        Returns ``E[N,i,A]``, ``e[N,A,i]`` and ``de[N,A,j,k] = d_k e^A_j``.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        check_domain(x, self.chart_id, cfg.r_min)
        E = self.eval(x)
        e = invert_frame(E)
        dE = self.jacobian(x, cfg)
        de = -np.einsum("nAi,nibk,nbj->nAjk", e, dE, e)
        return E, e, de

    def with_matrix(self, matrix, jacobian_fn=None, label=None, spec=None) -> "FrameField":
        return FrameField(self.dim, matrix, jacobian_fn, self.chart_id,
                          label or self.label, spec if spec is not None else self.spec)


def from_point_function(fn: Callable[[np.ndarray], np.ndarray], dim: int,
                        jacobian: Callable | None = None, chart_id="cartesian",
                        label="user") -> FrameField:
    """Wrap per-point callables ``fn(x) -> (n, n)`` into a vectorised FrameField."""
    def matrix(xs):
        return np.array([fn(x) for x in xs], dtype=float)
    def jac(xs):
        return np.array([jacobian(x) for x in xs], dtype=float)

    return FrameField(dim, matrix, jac if jacobian is not None else None, chart_id, label)


def constant_frame(M) -> FrameField:
    M = np.array(M, dtype=float)
    n = M.shape[0]
    return FrameField(n, lambda x: np.broadcast_to(M, (len(x), n, n)).copy(),
                      lambda x: np.zeros((len(x), n, n, n)), label="constant")


def invert_frame(E: np.ndarray) -> np.ndarray:
    """Batched inverse with the scale-aware singularity check."""
    E = np.asarray(E, dtype=float)
    n = E.shape[-1]
    scale = np.max(np.abs(E), axis=(-2, -1))
    det = np.linalg.det(E)
    if np.any(~np.isfinite(det)) or np.any(np.abs(det) <= DET_TOL * scale ** n):
        raise SingularFrame("frame matrix is singular at a probe point")
    return np.linalg.inv(E)


@dataclass(frozen=True)
class TorsionSample:
    """Torsion ``s[i, j, k] = S^i_jk`` (possibly with leading batch axes)."""

    s: np.ndarray
    point: object = None


def dual_coframe(f: FrameField, p) -> np.ndarray:
    """Coframe ``phi^A_i`` as the matrix inverse of the frame."""
    return invert_frame(f.eval(p))


def _batch(f, p, cfg):
    x = as_points(p)
    single = x.ndim == 1
    return (*f.jet(np.atleast_2d(x), cfg), single)


def torsion(f: FrameField, p, cfg: DiffConfig = DiffConfig()) -> TorsionSample:
    """``S^i_jk = 1/2 phi^i_A (phi^A_j,k - phi^A_k,j)``, exactly antisymmetric."""
    E, e, de, single = _batch(f, p, cfg)
    S = kernels.torsion_from_jet(E, de)
    return TorsionSample(S[0] if single else S, p)


def torsion_array(f: FrameField, x: np.ndarray, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    E, e, de = f.jet(x, cfg)
    return kernels.torsion_from_jet(E, de)


def teleparallel_connection(f: FrameField, p, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """``Gamma^i_jk = phi^i_A phi^A_j,k``."""
    E, e, de, single = _batch(f, p, cfg)
    G = kernels.connection_from_jet(E, de)
    return G[0] if single else G


def anholonomy(f: FrameField, p, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """``gamma^A_BC = <phi^A, [phi_B, phi_C]>`` computed from the frame derivatives.

    Uses ``[X, Y]^i = X^k d_k Y^i - Y^k d_k X^i`` directly rather than the
    torsion, so that the two routes can be compared.
    """
    x = np.atleast_2d(as_points(p))
    single = as_points(p).ndim == 1
    check_domain(x, f.chart_id, cfg.r_min)
    E = f.eval(x)
    e = invert_frame(E)
    dE = f.jacobian(x, cfg)
    # [phi_B, phi_C]^i = phi^k_B d_k phi^i_C - phi^k_C d_k phi^i_B
    t = np.einsum("nkB,niCk->niBC", E, dE)
    br = t - t.swapaxes(-1, -2)
    g = np.einsum("nAi,niBC->nABC", e, br)
    return g[0] if single else g


def anholonomy_from_torsion(S: np.ndarray, E: np.ndarray) -> np.ndarray:
    """``gamma^A_BC = 2 phi^A_i S^i_jk phi^j_B phi^k_C``."""
    e = np.linalg.inv(E)
    return 2.0 * np.einsum("...Ai,...ijk,...jB,...kC->...ABC", e, S, E, E)


def gl_transform(f: FrameField, L) -> FrameField:
    """Right action ``phi_A -> phi_B L^B_A`` by a constant matrix with det L > 0."""
    L = np.array(L, dtype=float)
    if L.shape != (f.dim, f.dim):
        raise ValueError("GL matrix has the wrong shape")
    if not np.linalg.det(L) > 0:
        raise NonPositiveDeterminant("GL transform must preserve orientation (det L > 0)")

    def matrix(x):
        return f.matrix(x) @ L

    def jac(x):
        return np.einsum("niBk,BA->niAk", f.jacobian_fn(x), L)

    spec = dict(f.spec)
    if spec:
        prev = np.array(spec["gl"]) if spec.get("gl") is not None else np.eye(f.dim)
        spec["gl"] = (prev @ L).tolist()
    return FrameField(f.dim, matrix, jac if f.jacobian_fn is not None else None, f.chart_id, f.label, spec)


def random_gl_plus(n: int, rng: np.random.Generator, spread: float = 0.5) -> np.ndarray:
    """A random well-conditioned matrix with positive determinant."""
    while True:
        L = np.eye(n) + spread * rng.normal(size=(n, n))
        d = np.linalg.det(L)
        if abs(d) > 0.1 and np.linalg.cond(L) < 50:
            if d < 0:
                L[:, 0] *= -1
            return L


def check_orientation(f: FrameField, points) -> int:
    """Sign of det(phi), required to be common to all points."""
    d = np.linalg.det(f.eval(np.atleast_2d(as_points(points))))
    signs = np.unique(np.sign(d))
    if len(signs) != 1 or signs[0] == 0:
        raise SingularFrame("frame orientation changes across the probe set")
    return int(signs[0])


def lie_bracket(X: Callable, Y: Callable, p, cfg: DiffConfig = DiffConfig(),
                chart_id: str = "cartesian") -> np.ndarray:
    """``[X, Y]^i = X^k d_k Y^i - Y^k d_k X^i`` for vectorised vector fields."""
    x = np.atleast_2d(as_points(p))
    dX = gradient(X, x, cfg.step, cfg.stencil_order, chart_id, cfg.r_min)
    dY = gradient(Y, x, cfg.step, cfg.stencil_order, chart_id, cfg.r_min)
    out = np.einsum("nk,nik->ni", X(x), dY) - np.einsum("nk,nik->ni", Y(x), dX)
    return out[0] if as_points(p).ndim == 1 else out


def _vectorise(fn, probe_dim):
    """Accept either vectorised or per-point callables."""
    def wrapped(xs):
        try:
            out = np.asarray(fn(xs), dtype=float)
            if out.shape[:1] == (len(xs),) and out.ndim >= 2:
                return out
        except Exception:
            pass
        return np.array([fn(x) for x in xs], dtype=float)
    return wrapped


def lie_derivative_metric(v: Callable, g: Callable, p, cfg: DiffConfig = DiffConfig(),
                          chart_id: str = "cartesian") -> np.ndarray:
    """``(L_v g)_ij = v^k d_k g_ij + g_kj d_i v^k + g_ik d_j v^k`` with numeric partials."""
    xp = as_points(p)
    x = np.atleast_2d(xp)
    V, Gf = _vectorise(v, x.shape[1]), _vectorise(g, x.shape[1])
    dv = gradient(V, x, cfg.step, cfg.stencil_order, chart_id, cfg.r_min, cfg.richardson)
    dg = gradient(Gf, x, cfg.step, cfg.stencil_order, chart_id, cfg.r_min, cfg.richardson)
    vv, gg = V(x), Gf(x)
    out = (np.einsum("nk,nijk->nij", vv, dg) + np.einsum("nkj,nki->nij", gg, dv)
           + np.einsum("nik,nkj->nij", gg, dv))
    out = 0.5 * (out + out.swapaxes(-1, -2))
    return out[0] if xp.ndim == 1 else out


def bump_perturbation(f: FrameField, amplitude: float = 0.1, center=None, width: float = 0.5,
                      direction=None, seed: int = 11) -> FrameField:
    """Add ``amplitude * exp(-|x - c|^2 / w^2) * B`` to the frame matrix.

    ``B`` is a fixed random matrix, which makes the change generic (not a
    symmetry or gauge direction).
    """
    n = f.dim
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    B = np.asarray(direction, dtype=float) if direction is not None else \
        np.random.default_rng(seed).normal(size=(n, n))

    def bump(x):
        return amplitude * np.exp(-np.sum((x - c) ** 2, axis=-1) / width ** 2)

    def matrix(x):
        return f.matrix(x) + bump(x)[:, None, None] * B

    def jac(x):
        db = (-2.0 * (x - c) / width ** 2) * bump(x)[:, None]
        return f.jacobian(x) + np.einsum("iA,nk->niAk", B, db)

    return FrameField(n, matrix, jac, f.chart_id, f.label + "+bump")
