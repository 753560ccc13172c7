"""Lagrangian densities, momenta, currents and field-equation residuals.

Two independent residual evaluators are provided:

* :func:`residual_closed_form` uses analytic momenta ``H_k^ij`` of the
  GL+-invariant families and the covariant form
  ``K_m^i = nabla_j H_m^ij + 2 S^k_kj H_m^ij`` with the teleparallel connection.
* :func:`residual_generic` differentiates the density numerically with respect
  to the coframe jet ``(phi^A_i, phi^A_i,j)`` and assembles the Euler-Lagrange
  expression ``d_j H_A^ij + j^i_A``, contracted with ``phi^A_m``.

Residual arrays are indexed ``K[m, i] = K_m^i`` (lower index first).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .chart import DiffConfig, as_points, first_weights, stencil_nodes
from .concomitants import (lorentz_eta, lorentz_metric_from_coframe,
                           weitzenbock_invariants)
from .errors import ConfigError
from .frame import FrameField
from .lagrangians import (LagrangianSpec, density_from_jet, density_from_torsion,
                          momenta_from_torsion)


@dataclass(frozen=True)
class MomentumSample:
    h: np.ndarray
    point: object = None


@dataclass(frozen=True)
class ResidualSample:
    k: np.ndarray
    point: object = None


@dataclass(frozen=True)
class CurrentSample:
    j_mixed: np.ndarray
    j_frame: np.ndarray
    f_hyperspin: np.ndarray


def _points(p):
    x = as_points(p)
    return np.atleast_2d(x), x.ndim == 1


def _unbatch(a, single):
    return a[0] if single else a


def _require_gl(spec: LagrangianSpec):
    if not spec.gl_invariant:
        raise ConfigError(f"family {spec.family} is not GL+-invariant; use the generic route")


# ---------------------------------------------------------------------------
# densities and momenta


def lagrangian_density(f: FrameField, p, spec: LagrangianSpec, cfg: DiffConfig = DiffConfig()):
    """Weight-one density value ``L`` at ``p``."""
    x, single = _points(p)
    E, e, de = f.jet(x, cfg)
    return _unbatch(density_from_jet(spec, e, de), single)


def momenta_at(f: FrameField, x, spec, cfg):
    """Torsion, density and analytic momenta ``H_k^ij`` at a batch of points."""
    E, e, de = f.jet(x, cfg)
    S = kernels.torsion_from_jet(E, de)
    L, H = momenta_from_torsion(spec, S)
    return E, e, de, S, L, H


def numeric_momenta_torsion(spec: LagrangianSpec, S: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """``H_k^ij`` by 4th-order differences over the independent components ``S^k_ij, i < j``."""
    S = np.atleast_2d(S) if S.ndim == 3 else S
    squeeze = S.ndim == 3
    S = S[None] if squeeze else S
    N, n = S.shape[0], S.shape[-1]
    h = step * np.maximum(np.max(np.abs(S), axis=(1, 2, 3)), 1e-12)
    iu = [(k, i, j) for k in range(n) for i in range(n) for j in range(i + 1, n)]
    offs, w = first_weights(4)
    batch = np.repeat(S[:, None, None], len(iu), axis=1).repeat(len(offs), axis=2)
    for c, (k, i, j) in enumerate(iu):
        for o, off in enumerate(offs):
            batch[:, c, o, k, i, j] += off * h
            batch[:, c, o, k, j, i] -= off * h
    vals = density_from_torsion(spec, batch.reshape((-1, n, n, n))).reshape(N, len(iu), len(offs))
    d = np.einsum("o,nco->nc", w, vals) / h[:, None]
    H = np.zeros_like(S)
    for c, (k, i, j) in enumerate(iu):
        H[:, k, i, j] = 0.5 * d[:, c]
        H[:, k, j, i] = -0.5 * d[:, c]
    return H[0] if squeeze else H


def field_momenta(f: FrameField, p, spec: LagrangianSpec, cfg: DiffConfig = DiffConfig(),
                  route: str = "analytic") -> MomentumSample:
    """Local hyperspin ``H_k^ij = dL/dS^k_ij``.

    ``route`` is ``"analytic"`` (GL+ families), ``"numeric"`` (antisymmetric
    S-space differences, GL+ families) or ``"jet"`` (any family, via
    ``H_k^ij = phi^A_k dL/dphi^A_i,j``).
    """
    x, single = _points(p)
    if route == "jet":
        E, e, de = f.jet(x, cfg)
        HA = _jet_momenta(spec, e, de, cfg.jet_step)
        return MomentumSample(_unbatch(np.einsum("nAk,nAij->nkij", e, HA), single), p)
    _require_gl(spec)
    E, e, de = f.jet(x, cfg)
    S = kernels.torsion_from_jet(E, de)
    if route == "analytic":
        H = momenta_from_torsion(spec, S)[1]
    elif route == "numeric":
        H = numeric_momenta_torsion(spec, S, cfg.jet_step * 0.1)
    else:
        raise ConfigError(f"unknown momentum route {route!r}")
    return MomentumSample(_unbatch(H, single), p)


def sigma_tensor(S: np.ndarray) -> np.ndarray:
    """``Sigma^ij_k`` with ``Sigma_ijk = gamma_im S^m_jk - gamma_jm S^m_ik``, indices raised by gamma."""
    gam = kernels.killing(S)
    ginv = np.linalg.inv(gam)
    low = np.einsum("...im,...mjk->...ijk", gam, S)
    sig = low - low.swapaxes(-3, -2)
    return np.einsum("...ai,...bj,...ijk->...abk", ginv, ginv, sig)


# ---------------------------------------------------------------------------
# currents


def currents(f: FrameField, p, spec: LagrangianSpec, cfg: DiffConfig = DiffConfig()) -> CurrentSample:
    """Self-interaction currents and the co-moving hyperspin ``F^A_B^j``.

    For GL+ families ``j^a_b = 2 H_d^ca S^d_cb - L delta^a_b`` from the analytic
    momenta; otherwise ``j^i_A = -dL/dphi^A_i`` by jet differentiation.
    """
    x, single = _points(p)
    E, e, de = f.jet(x, cfg)
    n = f.dim
    if spec.gl_invariant:
        S = kernels.torsion_from_jet(E, de)
        L, H = momenta_from_torsion(spec, S)
        jm = 2.0 * np.einsum("ndca,ndcb->nab", H, S) - L[:, None, None] * np.eye(n)
        jf = np.einsum("nab,nbA->naA", jm, E)
        HA = np.einsum("nbB,nbij->nBij", E, H)
    else:
        HA = _jet_momenta(spec, e, de, cfg.jet_step)
        jA = _jet_currents(spec, e, de, cfg.jet_step)  # [n, A, i]
        jf = jA.swapaxes(-1, -2)
        jm = np.einsum("naA,nAb->nab", jf, e)
    F = -np.einsum("nAi,nBij->nABj", e, HA)
    return CurrentSample(_unbatch(jm, single), _unbatch(jf, single), _unbatch(F, single))


# ---------------------------------------------------------------------------
# jet-space differentiation


def _jet_scale(a):
    return np.maximum(np.max(np.abs(a), axis=tuple(range(1, a.ndim))), 1e-2)


def _jet_momenta(spec, e, de, jet_step, columns=None):
    """``H_A^ij = dL/d(d_j e^A_i)`` at a batch of jets.

    ``columns`` optionally restricts the derivative index ``j`` per jet (an
    integer array of length N); other entries are returned as zero.
    """
    N, n = e.shape[0], e.shape[-1]
    offs, w = first_weights(4)
    h = jet_step * _jet_scale(de)
    cols = np.arange(n) if columns is None else None
    if columns is None:
        idx = [(A, i, j) for A in range(n) for i in range(n) for j in cols]
        sel = np.array(idx)[None].repeat(N, axis=0)
    else:
        sel = np.array([[(A, i, c) for A in range(n) for i in range(n)] for c in columns])
    m = sel.shape[1]
    de_b = np.repeat(de[:, None, None], m, axis=1).repeat(len(offs), axis=2)
    rows = np.arange(N)[:, None]
    for o, off in enumerate(offs):
        de_b[rows, np.arange(m)[None], o, sel[..., 0], sel[..., 1], sel[..., 2]] += off * h[:, None]
    e_b = np.broadcast_to(e[:, None, None], de_b.shape[:3] + e.shape[1:])
    vals = density_from_jet(spec, e_b.reshape((-1, n, n)), de_b.reshape((-1, n, n, n)))
    d = np.einsum("o,nmo->nm", w, vals.reshape(N, m, len(offs))) / h[:, None]
    H = np.zeros((N, n, n, n))
    H[rows, sel[..., 0], sel[..., 1], sel[..., 2]] = d
    return H


def _jet_currents(spec, e, de, jet_step):
    """``j^i_A = -dL/de^A_i`` as an array ``[N, A, i]``."""
    N, n = e.shape[0], e.shape[-1]
    offs, w = first_weights(4)
    h = jet_step * _jet_scale(e)
    m = n * n
    e_b = np.repeat(e[:, None, None], m, axis=1).repeat(len(offs), axis=2)
    for c in range(m):
        A, i = divmod(c, n)
        for o, off in enumerate(offs):
            e_b[:, c, o, A, i] += off * h
    de_b = np.broadcast_to(de[:, None, None], e_b.shape[:3] + de.shape[1:])
    vals = density_from_jet(spec, e_b.reshape((-1, n, n)), de_b.reshape((-1, n, n, n)))
    d = np.einsum("o,nmo->nm", w, vals.reshape(N, m, len(offs))) / h[:, None]
    return -d.reshape(N, n, n)


def _divergence_nodes(x, cfg):
    """Stencil nodes for every axis: ``(N, n, m, n)`` plus weights."""
    N, n = x.shape
    per_axis = [stencil_nodes(x, j, cfg.step, cfg.stencil_order) for j in range(n)]
    nodes = np.stack([p[0] for p in per_axis], axis=1)
    return nodes, per_axis[0][1]


def _divergence(fn, x, cfg):
    """``d_j V^{..., j}`` where ``fn(nodes, axis_index) -> V[..., j]`` for column ``j`` only."""
    def once(c):
        nodes, w = _divergence_nodes(x, c)
        N, n, m, _ = nodes.shape
        axis_idx = np.repeat(np.arange(n)[None, :, None], N, axis=0).repeat(m, axis=2)
        vals = fn(nodes.reshape(-1, n), axis_idx.ravel())
        vals = vals.reshape((N, n, m) + vals.shape[1:])
        return np.einsum("m,njm...->n...", w, vals)

    d = once(cfg)
    if cfg.richardson:
        q = 2 ** cfg.stencil_order
        half = DiffConfig(cfg.step / 2, cfg.stencil_order, False, cfg.inner_step, cfg.jet_step, cfg.r_min)
        d = (q * once(half) - d) / (q - 1)
    return d


# ---------------------------------------------------------------------------
# residuals


def residual_closed_form(f: FrameField, p, spec: LagrangianSpec,
                         cfg: DiffConfig = DiffConfig()) -> ResidualSample:
    """``K_m^i = nabla_j H_m^ij + 2 S^k_kj H_m^ij`` with analytic momenta."""
    _require_gl(spec)
    x, single = _points(p)

    def column(nodes, axes):
        H = momenta_at(f, nodes, spec, cfg)[5]
        return H[np.arange(len(nodes)), :, :, axes]

    div = _divergence(column, x, cfg)  # [N, m, i]
    E, e, de = f.jet(x, cfg)
    G = kernels.connection_from_jet(E, de)
    S = kernels.torsion_from_jet(E, de)
    H = momenta_from_torsion(spec, S)[1]
    K = (div
         - np.einsum("nkmj,nkij->nmi", G, H)
         + np.einsum("nikj,nmkj->nmi", G, H)
         + np.einsum("njkj,nmik->nmi", G, H)
         - np.einsum("nkkj,nmij->nmi", G, H)
         + 2.0 * np.einsum("nkkj,nmij->nmi", S, H))
    return ResidualSample(_unbatch(K, single), p)


def euler_lagrange_terms(f: FrameField, p, spec: LagrangianSpec, cfg: DiffConfig = DiffConfig()):
    """Numeric ``d_j H_A^ij`` and ``j^i_A`` (both ``[N, A, i]``) with the coframe."""
    x, _ = _points(p)

    def column(nodes, axes):
        E, e, de = f.jet(nodes, cfg)
        HA = _jet_momenta(spec, e, de, cfg.jet_step, columns=axes)
        return HA[np.arange(len(nodes)), :, :, axes]

    div = _divergence(column, x, cfg)
    E, e, de = f.jet(x, cfg)
    return div, _jet_currents(spec, e, de, cfg.jet_step), e


def residual_generic(f: FrameField, p, spec: LagrangianSpec,
                     cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Numeric Euler-Lagrange expression ``phi^A_m (d_j H_A^ij + j^i_A)`` for any family."""
    x, single = _points(p)
    div, j, e = euler_lagrange_terms(f, x, spec, cfg)
    K = np.einsum("nAm,nAi->nmi", e, div + j)
    return _unbatch(K, single)


def residual_scale(f: FrameField, p, spec: LagrangianSpec, cfg: DiffConfig = DiffConfig()) -> float:
    """Natural size of the residual terms: ``sup |phi^A_m j^i_A|`` over the probes."""
    c = currents(f, p, spec, cfg)
    return float(np.max(np.abs(c.j_mixed)))


def compare_residual_routes(f: FrameField, p, spec: LagrangianSpec, cfg: DiffConfig = DiffConfig()):
    """Relative sup difference between the two evaluators.

    The difference is normalised by the larger of ``sup |K|`` and the natural
    term scale, since on exact solutions ``K`` itself is pure round-off.
    """
    Kc = residual_closed_form(f, p, spec, cfg).k
    Kg = residual_generic(f, p, spec, cfg)
    scale = max(float(np.max(np.abs(Kc))), residual_scale(f, p, spec, cfg))
    return float(np.max(np.abs(Kc - Kg))) / scale, Kc, Kg


def hyperspin_divergence(f: FrameField, p, spec: LagrangianSpec,
                         cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Ordinary divergence ``d_j F^A_B^j`` of the co-moving hyperspin density."""
    _require_gl(spec)
    x, single = _points(p)

    def column(nodes, axes):
        E, e, de, S, L, H = momenta_at(f, nodes, spec, cfg)
        F = -np.einsum("nAi,nbB,nbij->nABj", e, E, H)
        return F[np.arange(len(nodes)), :, :, axes]

    return _unbatch(_divergence(column, x, cfg), single)


def hyperspin_density(f: FrameField, spec: LagrangianSpec, cfg: DiffConfig = DiffConfig()):
    """Vectorised ``x -> F^A_B^j`` suitable for :func:`charge_integral`."""
    _require_gl(spec)

    def fn(x):
        E, e, de, S, L, H = momenta_at(f, np.atleast_2d(x), spec, cfg)
        return -np.einsum("nAi,nbB,nbij->nABj", e, E, H)

    return fn


def charge_integral(density_current, slice_spec: dict, quadrature_n: int = 32):
    """Midpoint quadrature of ``J^axis`` over a coordinate slice.

    Parameters
    ----------
    density_current : callable
        Vectorised map ``(N, n) -> (N, ..., n)``; the last axis is the vector index.
    slice_spec : dict
        ``{"axis": j, "value": x_j, "box": [(lo, hi), ...]}`` with one interval per
        remaining coordinate.
    quadrature_n : int
        Points per remaining coordinate.
    """
    axis, value = int(slice_spec["axis"]), float(slice_spec["value"])
    box = np.asarray(slice_spec["box"], dtype=float)
    k = len(box)
    grids = [lo + (np.arange(quadrature_n) + 0.5) * (hi - lo) / quadrature_n for lo, hi in box]
    mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, k)
    pts = np.insert(mesh, axis, value, axis=1)
    vals = np.asarray(density_current(pts), dtype=float)[..., axis]
    cell = np.prod((box[:, 1] - box[:, 0]) / quadrature_n)
    return np.sum(vals, axis=0) * cell


def hyperspin_metric_candidate(f: FrameField, p, spec: LagrangianSpec, cfg: DiffConfig = DiffConfig()):
    """Experimental contravariant candidate ``|gamma|^-1 H_i^aj H_j^bi`` (unit coefficient)."""
    _require_gl(spec)
    x, single = _points(p)
    E, e, de, S, L, H = momenta_at(f, x, spec, cfg)
    detg = np.abs(np.linalg.det(kernels.killing(S)))
    M = np.einsum("niaj,njbi->nab", H, H) / detg[:, None, None]
    return _unbatch(0.5 * (M + M.swapaxes(-1, -2)), single)


# ---------------------------------------------------------------------------
# curvature identity


def _christoffel_from_jet(e, de):
    eta = lorentz_eta(e.shape[-1])
    h = lorentz_metric_from_coframe(e)
    # dh[i, j, k] = d_k h_ij
    t = np.einsum("nAik,AB,nBj->nijk", de, eta, e)
    dh = t + t.swapaxes(1, 2)
    hinv = np.linalg.inv(h)
    # low[d,b,c] = 1/2 (d_b h_dc + d_c h_db - d_d h_bc)
    low = 0.5 * (np.einsum("ndcb->ndbc", dh) + np.einsum("ndbc->ndbc", dh)
                 - np.einsum("nbcd->ndbc", dh))
    return h, hinv, np.einsum("nad,ndbc->nabc", hinv, low)


def scalar_curvature(f: FrameField, p, cfg: DiffConfig = DiffConfig(), convention: str = "teleparallel"):
    """Scalar curvature of the injected metric ``h``.

    ``convention="mtw"`` contracts ``R_bc = d_a G^a_bc - d_c G^a_ba + G^a_ad G^d_bc
    - G^a_cd G^d_ba``; ``"teleparallel"`` (default) is its negative, the sign for which
    ``R = J1 + 2 J2 - 4 J3 + 4 div`` holds.
    """
    if convention not in ("teleparallel", "mtw"):
        raise ConfigError(f"unknown curvature convention {convention!r}")
    x, single = _points(p)
    E, e, de = f.jet(x, cfg)
    h, hinv, Gm = _christoffel_from_jet(e, de)

    def chris(nodes):
        return _christoffel_from_jet(*f.jet(nodes, cfg)[1:])[2]

    n = x.shape[1]
    dG = np.stack([_axis_derivative(chris, x, k, cfg) for k in range(n)], axis=-1)
    Ric = (np.einsum("nabca->nbc", dG) - np.einsum("nabac->nbc", dG)
           + np.einsum("naad,ndbc->nbc", Gm, Gm) - np.einsum("nacd,ndba->nbc", Gm, Gm))
    R = np.einsum("nbc,nbc->n", hinv, Ric)
    if convention == "teleparallel":
        R = -R
    return _unbatch(R, single)


def _axis_derivative(fn, x, axis, cfg):
    nodes, w = stencil_nodes(x, axis, cfg.step, cfg.stencil_order)
    N, m, n = nodes.shape
    vals = fn(nodes.reshape(-1, n))
    return np.einsum("m,nm...->n...", w, vals.reshape((N, m) + vals.shape[1:]))


def curvature_identity_check(f: FrameField, p, cfg: DiffConfig = DiffConfig()):
    """``R[h]`` against ``J1 + 2 J2 - 4 J3 + 4 nabla_i (S^a_ab h^bi)``.

    Returns ``(lhs, rhs, difference)`` arrays (scalars for a single point).
    """
    x, single = _points(p)
    lhs = scalar_curvature(f, x, cfg)
    E, e, de = f.jet(x, cfg)
    S = kernels.torsion_from_jet(E, de)
    h = lorentz_metric_from_coframe(e)
    J1, J2, J3 = weitzenbock_invariants(S, h)

    def weighted(nodes):
        E_, e_, de_ = f.jet(nodes, cfg)
        S_ = kernels.torsion_from_jet(E_, de_)
        h_ = lorentz_metric_from_coframe(e_)
        V = np.einsum("naab,nbi->ni", S_, np.linalg.inv(h_))
        return np.abs(np.linalg.det(e_))[:, None] * V

    n = x.shape[1]
    div = sum(_axis_derivative(weighted, x, k, cfg)[:, k] for k in range(n))
    div = div / np.abs(np.linalg.det(e))
    rhs = J1 + 2.0 * J2 - 4.0 * J3 + 4.0 * div
    return _unbatch(lhs, single), _unbatch(rhs, single), _unbatch(lhs - rhs, single)
