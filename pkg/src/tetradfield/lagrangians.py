"""Lagrangian families and their analytic torsion gradients.

GL+-invariant families (``affine_f``, ``born_infeld``, ``split_sqrt``) are
functions of the torsion alone; :func:`momenta_from_torsion` returns their
density together with ``H_k^ij = dL/dS^k_ij`` (antisymmetrised).  The
remaining families depend on the frame itself and are only available as jet
functions through :func:`density_from_jet`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .concomitants import (affine_invariants, check_killing, gamma_two_form,
                           gamma_vector, lorentz_metric_from_coframe,
                           weitzenbock_invariants)
from .errors import ConfigError, DegenerateTensor

GL_FAMILIES = ("affine_f", "born_infeld", "split_sqrt")
FAMILIES = GL_FAMILIES + ("weitzenbock", "mixed", "sl_delta")

_DEFAULTS = {
    "affine_f": {"f_terms": {"const": 1.0}},
    "born_infeld": {"A": 1.0, "B": 0.0, "C": 0.0, "hermitian": False},
    "split_sqrt": {"C1": 1.0, "C2": 1.0, "C3": 0.0, "xi": 0.0},
    "weitzenbock": {"c1": 1.0, "c2": 0.0, "c3": 0.0},
    "mixed": {"c1": 1.0, "c2": 0.0, "c3": 0.0, "c_aff": 1.0},
    "sl_delta": {"f_terms": {"const": 1.0}},
}
_SHORT_KEYS = {
    "born_infeld": ("A", "B", "C"),
    "split_sqrt": ("C1", "C2", "C3", "xi"),
    "weitzenbock": ("c1", "c2", "c3"),
    "mixed": ("c1", "c2", "c3", "c_aff"),
}
_MONOMIAL_VARS = ("I1", "I3", "delta")


def parse_monomial(key: str) -> tuple[int, int, int]:
    """Exponents of ``I1``, ``I3`` and ``delta`` in keys like ``"I1"``, ``"I1^2*I3"``, ``"const"``."""
    exps = [0, 0, 0]
    if key in ("const", "1", ""):
        return tuple(exps)
    for factor in key.replace(" ", "").split("*"):
        name, _, power = factor.partition("^")
        if name not in _MONOMIAL_VARS:
            raise ConfigError(f"unknown variable {name!r} in f_terms")
        exps[_MONOMIAL_VARS.index(name)] += int(power) if power else 1
    return tuple(exps)


@dataclass(frozen=True)
class LagrangianSpec:
    """Family tag plus coefficients; see the module docstring."""

    family: str = "affine_f"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown Lagrangian family {self.family!r}")
        merged = {**_DEFAULTS[self.family], **self.params}
        unknown = set(merged) - set(_DEFAULTS[self.family])
        if unknown:
            raise ConfigError(f"unknown parameters for {self.family}: {sorted(unknown)}")
        if "f_terms" in merged:
            terms = {str(k): float(v) for k, v in merged["f_terms"].items()}
            for k in terms:
                parse_monomial(k)
            if self.family == "affine_f" and any(parse_monomial(k)[2] for k in terms):
                raise ConfigError("affine_f cannot depend on delta; use sl_delta")
            merged["f_terms"] = terms
        object.__setattr__(self, "params", merged)

    @property
    def gl_invariant(self) -> bool:
        return self.family in GL_FAMILIES

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}

    @classmethod
    def from_dict(cls, doc: dict) -> "LagrangianSpec":
        doc = dict(doc)
        try:
            family = doc.pop("family")
        except KeyError as exc:
            raise ConfigError("Lagrangian spec needs a 'family'") from exc
        return cls(family, doc)

    @classmethod
    def parse(cls, text: str) -> "LagrangianSpec":
        """Parse JSON or the shorthand ``family:v1,v2,...``."""
        text = text.strip()
        if text.startswith("{"):
            try:
                return cls.from_dict(json.loads(text))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid Lagrangian JSON: {exc}") from exc
        family, _, vals = text.partition(":")
        if not vals:
            return cls(family)
        if family not in _SHORT_KEYS:
            raise ConfigError(f"no positional shorthand for family {family!r}")
        try:
            nums = [float(v) for v in vals.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad coefficients in {text!r}") from exc
        keys = _SHORT_KEYS[family]
        if len(nums) > len(keys):
            raise ConfigError(f"too many coefficients for {family}")
        return cls(family, dict(zip(keys, nums)))


# ---------------------------------------------------------------------------
# polynomial f

def _poly(terms: dict, I1, I3, delta=None):
    """Value and partials of ``f`` in (I1, I3, delta)."""
    f = np.zeros_like(I1)
    d = [np.zeros_like(I1) for _ in range(3)]
    vals = (I1, I3, delta if delta is not None else np.zeros_like(I1))
    for key, c in terms.items():
        ex = parse_monomial(key)
        f = f + c * np.prod([v ** k for v, k in zip(vals, ex)], axis=0)
        for a in range(3):
            if ex[a]:
                others = np.prod([v ** (k - (b == a)) for b, (v, k) in enumerate(zip(vals, ex))],
                                 axis=0)
                d[a] = d[a] + c * ex[a] * others
    return f, d


def _sqrt_det_grad(T):
    """``sqrt|det T|`` and its gradient ``1/2 sqrt|det T| T^-T``."""
    n = T.shape[-1]
    det = np.linalg.det(T)
    scale = np.max(np.abs(T), axis=(-2, -1))
    if np.any(~(np.abs(det) > 1e-12 * scale ** n)):
        raise DegenerateTensor("determinant tensor is singular")
    sq = np.sqrt(np.abs(det))
    return sq, 0.5 * sq[..., None, None] * np.linalg.inv(T).swapaxes(-1, -2)


def _pfaffian_grad(M):
    """Pfaffian of antisymmetric ``M`` (n = 2, 4) with its gradient on the upper triangle."""
    n = M.shape[-1]
    G = np.zeros_like(M)
    if n == 2:
        G[..., 0, 1] = 1.0
        return M[..., 0, 1], G
    if n == 4:
        pf = M[..., 0, 1] * M[..., 2, 3] - M[..., 0, 2] * M[..., 1, 3] + M[..., 0, 3] * M[..., 1, 2]
        G[..., 0, 1], G[..., 2, 3] = M[..., 2, 3], M[..., 0, 1]
        G[..., 0, 2], G[..., 1, 3] = -M[..., 1, 3], -M[..., 0, 2]
        G[..., 0, 3], G[..., 1, 2] = M[..., 1, 2], M[..., 0, 3]
        return pf, G
    raise ConfigError("Pfaffian implemented for n = 2 and 4 only")


# ---------------------------------------------------------------------------
# GL+-invariant families


class _Grad:
    """Accumulates upstream gradients wrt gamma_ij, gamma_i, Gamma_ij and S."""

    def __init__(self, S):
        self.S = S
        n = S.shape[-1]
        lead = S.shape[:-3]
        self.g_gam = np.zeros(lead + (n, n))
        self.g_vec = np.zeros(lead + (n,))
        self.g_Gam = np.zeros(lead + (n, n))
        self.g_S = np.zeros(S.shape)

    def finish(self, gv):
        S = self.S
        # Gamma_ij = 2 gamma_m S^m_ij
        self.g_S += 2.0 * np.einsum("...p,...qr->...pqr", gv, self.g_Gam)
        self.g_vec += 2.0 * np.einsum("...ij,...mij->...m", self.g_Gam, S)
        # gamma_i = 2 S^k_ik
        n = S.shape[-1]
        self.g_S += 2.0 * np.einsum("...q,pr->...pqr", self.g_vec, np.eye(n))
        self.g_S += kernels.killing_pullback(self.g_gam, S)
        return 0.5 * (self.g_S - self.g_S.swapaxes(-1, -2))


def _affine_f(spec, S, grad):
    gam = kernels.killing(S)
    det = check_killing(gam)
    ginv = np.linalg.inv(gam)
    sq = np.sqrt(np.abs(det))
    I1, I3 = affine_invariants(S, gam, ginv)
    f, (f1, f3, _) = _poly(spec["f_terms"], I1, I3)
    L = f * sq
    if not grad:
        return L, None
    gv = gamma_vector(S)
    acc = _Grad(S)
    acc.g_gam += 0.5 * (f * sq)[..., None, None] * ginv
    w1 = (f1 * sq)[..., None, None]
    Sup = np.einsum("...jm,...kn,...ijk->...imn", ginv, ginv, S)
    acc.g_S += 2.0 * w1[..., None] * np.einsum("...pl,...lqr->...pqr", gam, Sup)
    A = np.einsum("...ijk,...ljk->...il", S, Sup)
    T = np.einsum("...li,...ijk->...ljk", gam, S)
    B = np.einsum("...ljk,...kn,...lmn->...jm", T, ginv, S)
    acc.g_gam += w1 * (A - 2.0 * ginv @ B @ ginv)
    w3 = f3 * sq
    u = np.einsum("...ij,...j->...i", ginv, gv)
    acc.g_vec += 0.5 * w3[..., None] * u
    acc.g_gam += -0.25 * w3[..., None, None] * np.einsum("...i,...j->...ij", u, u)
    return L, acc.finish(gv)


def _born_infeld(spec, S, grad):
    gam = kernels.killing(S)
    gv = gamma_vector(S)
    Gam = gamma_two_form(S)
    X = spec["A"] * gam + spec["B"] * np.einsum("...i,...j->...ij", gv, gv)
    Y = spec["C"] * Gam
    if spec["hermitian"]:
        return _born_infeld_hermitian(spec, S, X, Y, gv, grad)
    L, Gt = _sqrt_det_grad(X + Y)
    if not grad:
        return L, None
    acc = _Grad(S)
    acc.g_gam += spec["A"] * Gt
    acc.g_vec += spec["B"] * np.einsum("...ij,...j->...i", Gt + Gt.swapaxes(-1, -2), gv)
    acc.g_Gam += spec["C"] * Gt
    return L, acc.finish(gv)


def _born_infeld_hermitian(spec, S, X, Y, gv, grad):
    from .concomitants import real_embedding
    n = X.shape[-1]
    Emb = real_embedding(X, Y)
    det = np.linalg.det(Emb)
    scale = np.max(np.abs(Emb), axis=(-2, -1))
    if np.any(~(np.abs(det) > 1e-12 * scale ** (2 * n))):
        raise DegenerateTensor("Hermitian tensor is singular")
    L = np.abs(det) ** 0.25
    if not grad:
        return L, None
    inv = np.linalg.inv(Emb)
    U, V = inv[..., :n, :n], inv[..., n:, :n]
    # d ln|det K| = Re tr(K^-1 dK), with K^-1 = U + iV
    acc = _Grad(S)
    Gx = 0.5 * L[..., None, None] * U.swapaxes(-1, -2)
    Gy = -0.5 * L[..., None, None] * V.swapaxes(-1, -2)
    acc.g_gam += spec["A"] * Gx
    acc.g_vec += spec["B"] * np.einsum("...ij,...j->...i", Gx + Gx.swapaxes(-1, -2), gv)
    acc.g_Gam += spec["C"] * Gy
    return L, acc.finish(gv)


def _split_sqrt(spec, S, grad):
    n = S.shape[-1]
    gam = kernels.killing(S)
    gv = gamma_vector(S)
    Gam = gamma_two_form(S)
    # S^a_ib S^b_ja = gamma_ij / 4, S^a_ia S^b_jb = gamma_i gamma_j / 4, S^b_ab S^a_ij = Gamma_ij / 4
    Msym = 0.25 * (spec["C2"] * gam + spec["C3"] * np.einsum("...i,...j->...ij", gv, gv))
    L, Gs = _sqrt_det_grad(Msym)
    pf_grad = None
    if n % 2 == 0 and spec["xi"] != 0:
        pf, pf_grad = _pfaffian_grad(0.25 * spec["C1"] * Gam)
        L = L + spec["xi"] * np.abs(pf)
    if not grad:
        return L, None
    acc = _Grad(S)
    acc.g_gam += 0.25 * spec["C2"] * Gs
    acc.g_vec += 0.25 * spec["C3"] * np.einsum("...ij,...j->...i", Gs + Gs.swapaxes(-1, -2), gv)
    if pf_grad is not None:
        acc.g_Gam += (0.25 * spec["C1"] * spec["xi"] * np.sign(pf))[..., None, None] * pf_grad
    return L, acc.finish(gv)


_GL_IMPL = {"affine_f": _affine_f, "born_infeld": _born_infeld, "split_sqrt": _split_sqrt}


def density_from_torsion(spec: LagrangianSpec, S: np.ndarray) -> np.ndarray:
    """Density of a GL+-invariant family as a function of the torsion."""
    if not spec.gl_invariant:
        raise ConfigError(f"{spec.family} depends on the frame, not only on the torsion")
    return _GL_IMPL[spec.family](spec, np.asarray(S, dtype=float), False)[0]


def momenta_from_torsion(spec: LagrangianSpec, S: np.ndarray):
    """Density ``L`` and momenta ``H_k^ij = dL/dS^k_ij`` (antisymmetric in ij)."""
    if not spec.gl_invariant:
        raise ConfigError(f"{spec.family} depends on the frame, not only on the torsion")
    return _GL_IMPL[spec.family](spec, np.asarray(S, dtype=float), True)


# ---------------------------------------------------------------------------
# all families as jet functions


def density_from_jet(spec: LagrangianSpec, e: np.ndarray, de: np.ndarray) -> np.ndarray:
    """Density as a function of the coframe ``e[A,i]`` and ``de[A,j,k] = d_k e^A_j``."""
    E = np.linalg.inv(e)
    S = kernels.torsion_from_jet(E, de)
    if spec.gl_invariant:
        return density_from_torsion(spec, S)
    fam = spec.family
    if fam == "sl_delta":
        gam = kernels.killing(S)
        det = check_killing(gam)
        I1, I3 = affine_invariants(S, gam)
        delta = det * np.linalg.det(E) ** 2
        f, _ = _poly(spec["f_terms"], I1, I3, delta)
        return f * np.sqrt(np.abs(det))
    h = lorentz_metric_from_coframe(e)
    J1, J2, J3 = weitzenbock_invariants(S, h)
    L = (spec["c1"] * J1 + spec["c2"] * J2 + spec["c3"] * J3) * np.abs(np.linalg.det(e))
    if fam == "mixed" and spec["c_aff"] != 0:
        gam = kernels.killing(S)
        L = L + spec["c_aff"] * np.sqrt(np.abs(np.linalg.det(gam)))
    return L
