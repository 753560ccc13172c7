"""Coordinate charts, probe sets and central finite-difference stencils.

All internal helpers are vectorised over a leading batch of points: a
point-function ``fn`` maps an ``(m, n)`` array of coordinates to an array of
shape ``(m, ...)``.  The public ``numeric_partial`` family accepts plain
per-point callables and is meant for users and tests.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ChartDomain, ConfigError, StencilOutOfDomain

CHART_IDS = ("cartesian", "spherical_txyz", "group_rotation_vector",
             "adapted_breathing", "group_canonical")

DEFAULT_R_MIN = 1e-3

# central first-derivative weights for offsets -k..k
_FIRST = {
    2: np.array([-1 / 2, 0.0, 1 / 2]),
    4: np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]),
    6: np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60]),
}
# central second-derivative weights for offsets -k..k
_SECOND = {
    2: np.array([1.0, -2.0, 1.0]),
    4: np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]),
    6: np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90]),
}


@dataclass(frozen=True)
class DiffConfig:
    """Finite-difference settings.

    Parameters
    ----------
    step : float
        Outer stencil spacing in chart units.
    stencil_order : {2, 4, 6}
        Order of the central stencils.
    richardson : bool
        Combine estimates at ``step`` and ``step / 2``.
    inner_step : float, optional
        Spacing for frame derivatives when no analytic jacobian exists.
        Defaults to ``step / 10``.
    jet_step : float
        Relative spacing used when differentiating a Lagrangian with respect
        to jet variables.
    r_min : float
        Guard radius for spherical charts.
    """

    step: float = 1e-3
    stencil_order: int = 4
    richardson: bool = False
    inner_step: float | None = None
    jet_step: float = 1e-3
    r_min: float = DEFAULT_R_MIN

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigError(f"step must be positive, got {self.step}")
        if self.stencil_order not in _FIRST:
            raise ConfigError(f"stencil_order must be 2, 4 or 6, got {self.stencil_order}")

    @property
    def radius(self) -> int:
        return self.stencil_order // 2

    @property
    def frame_step(self) -> float:
        return self.inner_step if self.inner_step is not None else self.step / 10

    def to_dict(self) -> dict:
        return {"step": self.step, "stencil_order": self.stencil_order,
                "richardson": self.richardson, "inner_step": self.frame_step,
                "jet_step": self.jet_step, "r_min": self.r_min}


@dataclass(frozen=True)
class ChartPoint:
    """A point ``coords`` in the chart ``chart_id``."""

    coords: tuple
    chart_id: str = "cartesian"

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        if self.chart_id not in CHART_IDS:
            raise ConfigError(f"unknown chart {self.chart_id!r}")
        if self.chart_id == "spherical_txyz" and spatial_radius(np.array(self.coords)) <= 0:
            raise ChartDomain("spherical chart requires r > 0")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)


def as_points(p) -> np.ndarray:
    """Coerce a ChartPoint, a sequence of them, or an array to float coordinates."""
    if isinstance(p, ChartPoint):
        return p.array()
    if isinstance(p, (list, tuple)) and p and isinstance(p[0], ChartPoint):
        return np.array([q.coords for q in p], dtype=float)
    return np.asarray(p, dtype=float)


def spatial_radius(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(x)[..., 1:], axis=-1)


def in_domain(points: np.ndarray, chart_id: str, r_min: float = DEFAULT_R_MIN) -> np.ndarray:
    """Boolean mask of points inside the chart domain."""
    points = np.asarray(points, dtype=float)
    ok = np.all(np.isfinite(points), axis=-1)
    if chart_id == "spherical_txyz":
        ok &= spatial_radius(points) > r_min
    elif chart_id == "group_canonical":
        ok &= np.linalg.norm(points, axis=-1) < 2 * np.pi
    return ok


def check_domain(points, chart_id: str, r_min: float = DEFAULT_R_MIN, stencil: bool = True):
    if not np.all(in_domain(points, chart_id, r_min)):
        exc = StencilOutOfDomain if stencil else ChartDomain
        raise exc(f"point outside the {chart_id} chart domain (r_min={r_min})")


# ---------------------------------------------------------------------------
# stencils

def first_weights(order: int) -> tuple[np.ndarray, np.ndarray]:
    w = _FIRST[order]
    k = len(w) // 2
    offs = np.arange(-k, k + 1)
    keep = w != 0
    return offs[keep], w[keep]


def second_weights(order: int) -> tuple[np.ndarray, np.ndarray]:
    w = _SECOND[order]
    k = len(w) // 2
    return np.arange(-k, k + 1), w


def stencil_nodes(points: np.ndarray, axis: int, step: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``(N, m, n)`` and weights ``(m,)`` of the first-derivative stencil."""
    offs, w = first_weights(order)
    points = np.atleast_2d(points)
    nodes = np.repeat(points[:, None, :], len(offs), axis=1)
    nodes[:, :, axis] += offs * step
    return nodes, w / step


def derivative(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, axis: int,
               step: float, order: int = 4, chart_id: str = "cartesian",
               r_min: float = DEFAULT_R_MIN, richardson: bool = False) -> np.ndarray:
    """Vectorised central derivative of ``fn`` along ``axis`` at each point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))

    def once(h):
        nodes, w = stencil_nodes(points, axis, h, order)
        check_domain(nodes.reshape(-1, points.shape[-1]), chart_id, r_min)
        vals = np.asarray(fn(nodes.reshape(-1, points.shape[-1])))
        vals = vals.reshape(nodes.shape[:2] + vals.shape[1:])
        return np.tensordot(w, vals, axes=(0, 1))

    d = once(step)
    if richardson:
        d2 = once(step / 2)
        d = (2 ** order * d2 - d) / (2 ** order - 1)
    return d


def gradient(fn, points, step, order=4, chart_id="cartesian", r_min=DEFAULT_R_MIN,
             richardson=False) -> np.ndarray:
    """All partials; the derivative index is appended last."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    parts = [derivative(fn, points, k, step, order, chart_id, r_min, richardson)
             for k in range(points.shape[-1])]
    return np.stack(parts, axis=-1)


# ---------------------------------------------------------------------------
# public scalar operations

def _scalar_fn(field):
    def fn(nodes):
        return np.array([float(field(x)) for x in nodes])
    return fn


def _resolve(p):
    if isinstance(p, ChartPoint):
        return p.array(), p.chart_id
    return np.asarray(p, dtype=float), "cartesian"


def numeric_partial(field: Callable, p, axis: int, cfg: DiffConfig = DiffConfig()) -> float:
    """Central-difference estimate of ``d field / d x^axis`` at ``p``.

    Parameters
    ----------
    field : callable
        Maps a coordinate array of shape ``(n,)`` to a real number.
    p : ChartPoint or array_like
    axis : int
    cfg : DiffConfig

    Raises
    ------
    StencilOutOfDomain
        If a stencil node leaves the chart domain.
    """
    x, chart_id = _resolve(p)
    d = derivative(_scalar_fn(field), x[None], axis, cfg.step, cfg.stencil_order,
                   chart_id, cfg.r_min, cfg.richardson)
    return float(d[0])


def numeric_second_partial(field: Callable, p, axis_a: int, axis_b: int,
                           cfg: DiffConfig = DiffConfig()) -> float:
    """Second partial derivative; symmetric in the two axes by construction."""
    x, chart_id = _resolve(p)
    a, b = sorted((axis_a, axis_b))
    fn = _scalar_fn(field)

    def once(h):
        if a == b:
            offs, w = second_weights(cfg.stencil_order)
            nodes = np.repeat(x[None], len(offs), axis=0)
            nodes[:, a] += offs * h
            check_domain(nodes, chart_id, cfg.r_min)
            return float(np.dot(w, fn(nodes))) / h ** 2
        offs, w = first_weights(cfg.stencil_order)
        oa, ob = np.meshgrid(offs, offs, indexing="ij")
        nodes = np.repeat(x[None], oa.size, axis=0)
        nodes[:, a] += oa.ravel() * h
        nodes[:, b] += ob.ravel() * h
        check_domain(nodes, chart_id, cfg.r_min)
        return float(np.dot(np.outer(w, w).ravel(), fn(nodes))) / h ** 2

    d = once(cfg.step)
    if cfg.richardson:
        q = 2 ** cfg.stencil_order
        d = (q * once(cfg.step / 2) - d) / (q - 1)
    return d


# ---------------------------------------------------------------------------
# probe sets

@dataclass(frozen=True)
class ProbeSet:
    """A batch of points sharing one chart."""

    points: np.ndarray
    chart_id: str = "cartesian"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def chart_points(self) -> list[ChartPoint]:
        return [ChartPoint(tuple(x), self.chart_id) for x in self.points]

    def to_dict(self) -> dict:
        return {"chart": self.chart_id, "points": self.points.tolist()}


def load_probes(source) -> ProbeSet:
    """Load ``{"chart": ..., "points": [[...], ...]}`` from a path, string or dict."""
    if isinstance(source, (str, Path)) and Path(source).exists():
        doc = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = dict(source)
    try:
        chart = doc.get("chart", "cartesian")
        pts = np.array(doc["points"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid probe document: {exc}") from exc
    if chart not in CHART_IDS or pts.ndim != 2:
        raise ConfigError("probe document needs a known chart and a 2-D point list")
    check_domain(pts, chart, stencil=False)
    return ProbeSet(pts, chart)


def random_probes(n_points: int, dim: int, seed: int = 0, box: Sequence | None = None,
                  annulus: tuple[float, float] | None = None, chart_id: str = "cartesian",
                  t_range: tuple[float, float] = (-1.0, 1.0)) -> ProbeSet:
    """Seeded random probes.

    ``box`` is a list of ``(lo, hi)`` per coordinate (default ``[-0.5, 0.5]``).
    ``annulus=(r_lo, r_hi)`` samples the spatial part uniformly in direction and
    radius with the time coordinate in ``t_range``.
    """
    rng = np.random.default_rng(np.uint64(seed))
    if annulus is not None:
        t = rng.uniform(*t_range, size=n_points)
        u = rng.normal(size=(n_points, dim - 1))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = rng.uniform(*annulus, size=n_points)
        pts = np.column_stack([t, u * r[:, None]])
    else:
        box = np.array(box if box is not None else [(-0.5, 0.5)] * dim, dtype=float)
        pts = rng.uniform(box[:, 0], box[:, 1], size=(n_points, dim))
    return ProbeSet(pts, chart_id, {"seed": int(seed)})
