"""Algebraic concomitants of the torsion tensor."""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import kernels
from .chart import DiffConfig, as_points
from .errors import DegenerateTensor, SingularKilling
from .frame import FrameField, TorsionSample, invert_frame

KILLING_TOL = 1e-12
EIG_TOL = 1e-10


def _s(S):
    return S.s if isinstance(S, TorsionSample) else np.asarray(S, dtype=float)


@dataclass(frozen=True)
class TensorSpec:
    """Coefficients of ``G = lam*gamma_ij + mu*gamma_i gamma_j + nu*Gamma_ij``."""

    lam: float = 1.0
    mu: float = 0.0
    nu: float = 0.0
    hermitian: bool = False


@dataclass(frozen=True)
class MetricSample:
    g: np.ndarray
    point: object = None
    kind: str = "killing"


@dataclass(frozen=True)
class HermitianTensor:
    """``K = sym + i * anti`` stored as a real pair with its real determinant."""

    sym: np.ndarray
    anti: np.ndarray
    det: float


@dataclass
class InvariantSet:
    I1: float
    I3: float
    J1: float
    J2: float
    J3: float
    J2_affine: float
    delta: float
    trace_powers: list

    def to_dict(self) -> dict:
        d = asdict(self)
        tp = d.pop("trace_powers")
        for p, v in zip(range(2, 2 + len(tp)), tp):
            d[f"tr_gamma_p{p}"] = v
        return d


def gamma_vector(S) -> np.ndarray:
    """``gamma_i = 2 S^k_ik``."""
    return kernels.trace_vector(_s(S))


def killing_array(S) -> np.ndarray:
    return kernels.killing(_s(S))


def killing_tensor(S) -> MetricSample:
    """``gamma_ij = 4 S^k_im S^m_jk`` (symmetrised)."""
    point = S.point if isinstance(S, TorsionSample) else None
    return MetricSample(kernels.killing(_s(S)), point, "killing")


def gamma_two_form(S) -> np.ndarray:
    """``Gamma_ij = 4 S^k_lk S^l_ij = 2 gamma_m S^m_ij``."""
    S = _s(S)
    return 2.0 * np.einsum("...m,...mij->...ij", gamma_vector(S), S)


def second_order_tensor(S, spec: TensorSpec = TensorSpec()):
    """General second-order concomitant.

    Returns the real matrix ``G`` or, for ``spec.hermitian``, a
    :class:`HermitianTensor` whose determinant is that of
    ``lam*gamma + mu*gamma gamma + i*nu*Gamma``.
    """
    S = _s(S)
    gv = gamma_vector(S)
    sym = spec.lam * kernels.killing(S) + spec.mu * np.einsum("...i,...j->...ij", gv, gv)
    anti = spec.nu * gamma_two_form(S)
    if not spec.hermitian:
        return sym + anti
    return HermitianTensor(sym, anti, hermitian_det(sym, anti))


def real_embedding(X, Y):
    """The ``2n x 2n`` real form of ``X + iY``."""
    top = np.concatenate([X, -Y], axis=-1)
    bot = np.concatenate([Y, X], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def hermitian_det(X, Y):
    """Real determinant of the Hermitian matrix ``X + iY`` (X symmetric, Y antisymmetric).

    ``det`` of the real embedding equals ``|det(X + iY)|^2``; the sign is the
    product of the signs of the (real) eigenvalues.
    """
    H = np.asarray(X) + 1j * np.asarray(Y)
    ev = np.linalg.eigvalsh(H)
    mag = np.sqrt(np.abs(np.linalg.det(real_embedding(X, Y))))
    return np.prod(np.sign(ev), axis=-1) * mag


def lorentz_eta(n: int) -> np.ndarray:
    return np.diag([1.0] + [-1.0] * (n - 1))


def lorentz_metric_from_coframe(e: np.ndarray) -> np.ndarray:
    """``h_ij = eta_AB phi^A_i phi^B_j``."""
    eta = lorentz_eta(e.shape[-1])
    return np.einsum("...Ai,AB,...Bj->...ij", e, eta, e)


def lorentz_metric(f: FrameField, p) -> MetricSample:
    """Injected Lorentz metric ``h = eta_AB phi^A (x) phi^B``."""
    e = invert_frame(f.eval(p))
    return MetricSample(lorentz_metric_from_coframe(e), p, "lorentz")


def density_and_signature(T) -> tuple[float, tuple]:
    """``sqrt|det T|`` and the eigenvalue signs of the symmetric part.

    The signature lists ``'+'`` signs first.  Raises ``DegenerateTensor`` when an
    eigenvalue is below ``1e-10`` of the largest in magnitude.
    """
    T = np.asarray(T, dtype=float)
    ev = np.linalg.eigvalsh(0.5 * (T + T.T))
    scale = np.max(np.abs(ev))
    if scale == 0 or np.any(np.abs(ev) <= EIG_TOL * scale):
        raise DegenerateTensor("tensor has a (numerically) vanishing eigenvalue")
    npos = int(np.sum(ev > 0))
    sig = ("+",) * npos + ("-",) * (len(ev) - npos)
    return float(np.sqrt(abs(np.linalg.det(T)))), sig


def check_killing(gam: np.ndarray):
    """Raise ``SingularKilling`` where ``|det gamma| < 1e-12 scale^n``."""
    n = gam.shape[-1]
    scale = np.max(np.abs(gam), axis=(-2, -1))
    det = np.linalg.det(gam)
    if np.any(~(np.abs(det) > KILLING_TOL * scale ** n)) or np.any(scale == 0):
        raise SingularKilling("Killing tensor is singular; affine invariants are undefined")
    return det


def affine_invariants(S, gam=None, ginv=None):
    """``I1 = gamma_il gamma^jm gamma^kn S^i_jk S^l_mn`` and ``I3 = gamma^ij S^k_ik S^m_jm``."""
    S = _s(S)
    if gam is None:
        gam = kernels.killing(S)
        check_killing(gam)
    if ginv is None:
        ginv = np.linalg.inv(gam)
    Sup = np.einsum("...jm,...kn,...ijk->...imn", ginv, ginv, S)
    I1 = np.einsum("...il,...imn,...lmn->...", gam, S, Sup)
    gv = gamma_vector(S)
    I3 = 0.25 * np.einsum("...ij,...i,...j->...", ginv, gv, gv)
    return I1, I3


def weitzenbock_invariants(S, h):
    """``J1 = h_ai h^bj h^ck S^a_bc S^i_jk``, ``J2 = h^ij S^a_ib S^b_ja``, ``J3 = h^ij S^a_ai S^b_bj``."""
    S = _s(S)
    hinv = np.linalg.inv(h)
    Sup = np.einsum("...bj,...ck,...ibc->...ijk", hinv, hinv, S)
    J1 = np.einsum("...ai,...abc,...ibc->...", h, S, Sup)
    J2 = np.einsum("...ij,...aib,...bja->...", hinv, S, S)
    tr = np.einsum("...aai->...i", S)
    J3 = np.einsum("...ij,...i,...j->...", hinv, tr, tr)
    return J1, J2, J3


def invariant_arrays(E: np.ndarray, S: np.ndarray) -> dict:
    """All scalar invariants for batched frames ``E`` and torsions ``S``."""
    n = S.shape[-1]
    e = np.linalg.inv(E)
    gam = kernels.killing(S)
    check_killing(gam)
    ginv = np.linalg.inv(gam)
    I1, I3 = affine_invariants(S, gam, ginv)
    J2a = np.einsum("...ij,...min,...njm->...", ginv, S, S)
    h = lorentz_metric_from_coframe(e)
    J1, J2, J3 = weitzenbock_invariants(S, h)
    delta = np.linalg.det(gam) * np.linalg.det(E) ** 2
    Gh = np.einsum("...ik,...kj->...ij", ginv, gamma_two_form(S))
    powers, P = [], Gh
    for _ in range(2, 5):
        P = P @ Gh
        powers.append(np.trace(P, axis1=-2, axis2=-1))
    return {"I1": I1, "I3": I3, "J1": J1, "J2": J2, "J3": J3, "J2_affine": J2a,
            "delta": delta, "trace_powers": np.stack(powers, axis=-1), "n": n}


def invariants(f: FrameField, p, cfg: DiffConfig = DiffConfig()) -> InvariantSet:
    """Affine, Weitzenboeck and Killing-determinant invariants at a single point."""
    x = np.atleast_2d(as_points(p))
    E, e, de = f.jet(x, cfg)
    S = kernels.torsion_from_jet(E, de)
    d = invariant_arrays(E, S)
    return InvariantSet(float(d["I1"][0]), float(d["I3"][0]), float(d["J1"][0]),
                        float(d["J2"][0]), float(d["J3"][0]), float(d["J2_affine"][0]),
                        float(d["delta"][0]), [float(v) for v in d["trace_powers"][0]])
