"""Contractive Markov systems: state space, vertex regions, edge maps, probabilities.

Points are numpy arrays of shape ``(d,)``; every vectorised routine also
accepts batches of shape ``(n, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .graph import DirectedMultigraph

METRIC_KINDS = ("L1", "L2", "Linf")
DEFAULT_BOX_HALF_WIDTH = 8.0


class DimensionError(ValueError):
    pass


class StateSpaceEscape(RuntimeError):
    """A point left the union of the vertex regions."""


RATIONAL_DENOMINATOR = 10**6


def as_rational(v: float) -> Optional[Fraction]:
    """The small-denominator fraction whose float is exactly ``v``, if there is one."""
    f = Fraction(float(v)).limit_denominator(RATIONAL_DENOMINATOR)
    return f if float(f) == float(v) else None


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def as_points(x, d: int) -> np.ndarray:
    """Coerce to a 2-d ``(n, d)`` float array."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != d:
        raise DimensionError(f"expected points of dimension {d}, got shape {np.shape(x)}")
    return pts


@dataclass(frozen=True)
class MetricSpace:
    dimension: int
    metric_kind: str = "L2"

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionError("dimension must be positive")
        if self.metric_kind not in METRIC_KINDS:
            raise ValueError(f"metric_kind must be one of {METRIC_KINDS}")

    def norm(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dimension:
            raise DimensionError(f"expected dimension {self.dimension}, got {v.shape[-1]}")
        if self.metric_kind == "L1":
            return np.abs(v).sum(axis=-1)
        if self.metric_kind == "Linf":
            return np.abs(v).max(axis=-1)
        return np.sqrt((v * v).sum(axis=-1))

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape[-1] != self.dimension or y.shape[-1] != self.dimension:
            raise DimensionError(
                f"points must have dimension {self.dimension}, got {x.shape} and {y.shape}"
            )
        out = self.norm(x - y)
        return float(out) if out.ndim == 0 else out


def distance(space: MetricSpace, x, y):
    return space.distance(x, y)


# -- vertex regions ---------------------------------------------------------


class Region:
    """A Borel piece ``K_i`` of the state space."""

    kind = "region"

    def contains(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounds(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Tightest axis-aligned box inside ``[lo, hi]`` known to cover the region."""
        return lo, hi


@dataclass(frozen=True)
class FullSpace(Region):
    kind = "full"

    def contains(self, pts):
        return np.ones(len(pts), dtype=bool)


@dataclass(frozen=True)
class Box(Region):
    lower: np.ndarray
    upper: np.ndarray
    kind = "box"

    def __post_init__(self):
        object.__setattr__(self, "lower", _frozen(self.lower))
        object.__setattr__(self, "upper", _frozen(self.upper))
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("box needs lower <= upper componentwise")

    def contains(self, pts):
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def bounds(self, lo, hi):
        return np.maximum(lo, self.lower), np.minimum(hi, self.upper)


@dataclass(frozen=True)
class HalfSpace(Region):
    """``{x : <normal, x> >= offset}`` (orientation ``ge``) or ``<= offset`` (``le``)."""

    normal: np.ndarray
    offset: float
    orientation: str = "ge"
    kind = "halfspace"

    def __post_init__(self):
        object.__setattr__(self, "normal", _frozen(self.normal))
        object.__setattr__(self, "offset", float(self.offset))
        if self.orientation not in ("ge", "le"):
            raise ValueError("orientation must be 'ge' or 'le'")
        if not np.any(self.normal):
            raise ValueError("half-space normal must be nonzero")

    def contains(self, pts):
        s = pts @ self.normal
        return s >= self.offset if self.orientation == "ge" else s <= self.offset

    def bounds(self, lo, hi):
        nz = np.flatnonzero(self.normal)
        if len(nz) != 1:
            return lo, hi
        k = nz[0]
        edge = self.offset / self.normal[k]
        upward = (self.orientation == "ge") == (self.normal[k] > 0)
        lo, hi = lo.copy(), hi.copy()
        if upward:
            lo[k] = max(lo[k], edge)
        else:
            hi[k] = min(hi[k], edge)
        return lo, hi


# -- maps and probabilities -------------------------------------------------


@dataclass(frozen=True)
class EdgeMap:
    """``x -> linear @ x' + offset`` where ``x'_k = |x_k|`` for flagged coordinates.

    ``pre_abs`` is one flag per coordinate; a single bool flags all of them.
    """

    linear: np.ndarray
    offset: np.ndarray
    pre_abs: tuple = False

    def __post_init__(self):
        lin = np.atleast_2d(np.array(self.linear, dtype=float))
        off = np.atleast_1d(np.array(self.offset, dtype=float))
        if lin.shape != (len(off), len(off)):
            raise DimensionError(f"linear part {lin.shape} does not match offset {off.shape}")
        object.__setattr__(self, "linear", _frozen(lin))
        object.__setattr__(self, "offset", _frozen(off))
        flags = np.broadcast_to(np.asarray(self.pre_abs, dtype=bool), off.shape)
        object.__setattr__(self, "pre_abs", tuple(bool(f) for f in flags))
        rl = [[as_rational(v) for v in row] for row in lin]
        ro = [as_rational(v) for v in off]
        exact = all(v is not None for v in ro) and all(v is not None for row in rl for v in row)
        object.__setattr__(self, "_rational", (rl, ro) if exact else None)

    @property
    def is_rational(self) -> bool:
        return self._rational is not None

    def exact(self, x: list) -> list:
        """The map on a point given as a list of Fractions, in exact arithmetic."""
        rl, ro = self._rational
        x = [abs(v) if f else v for v, f in zip(x, self.pre_abs)]
        return [sum((a * v for a, v in zip(row, x)), b) for row, b in zip(rl, ro)]

    @property
    def dimension(self) -> int:
        return len(self.offset)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        if any(self.pre_abs):
            pts = np.where(self.pre_abs, np.abs(pts), pts)
        return pts @ self.linear.T + self.offset


def apply_map(m: EdgeMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.dimension:
        raise DimensionError(f"map acts on dimension {m.dimension}, got {x.shape}")
    out = m(as_points(x, m.dimension))
    return out[0] if x.ndim == 1 else out


PROBABILITY_FORMS = ("constant", "sin2", "cos2")


@dataclass(frozen=True)
class ProbabilityFunction:
    """``value`` for constants, ``scale * sin^2|x| + value`` or the cos^2 analogue."""

    form: str
    value: float
    scale: float = 0.0

    def __post_init__(self):
        if self.form not in PROBABILITY_FORMS:
            raise ValueError(f"probability form must be one of {PROBABILITY_FORMS}")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def constant(cls, value: float) -> "ProbabilityFunction":
        return cls("constant", value)

    @property
    def is_constant(self) -> bool:
        return self.form == "constant" or self.scale == 0.0

    def raw(self, pts: np.ndarray, space: MetricSpace) -> np.ndarray:
        """Formula value, ignoring the vertex region."""
        if self.form == "constant":
            return np.full(len(pts), self.value)
        r = space.norm(pts)
        trig = np.sin(r) if self.form == "sin2" else np.cos(r)
        return self.scale * trig * trig + self.value


# -- the system -------------------------------------------------------------


@dataclass(frozen=True)
class MarkovSystem:
    """A contractive Markov system ``(K_i(e), w_e, p_e)`` over a directed multigraph.

    ``regions[v - 1]`` is ``K_v`` and ``anchors[v - 1]`` is the anchor ``x_v``.
    ``declared_rate`` is the trusted average contraction rate used by every
    error bound downstream.
    """

    graph: DirectedMultigraph
    space: MetricSpace
    regions: tuple
    maps: tuple
    probabilities: tuple
    anchors: np.ndarray
    declared_rate: float
    bbox: Optional[tuple] = None
    name: str = "system"
    _stack: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        g, d = self.graph, self.space.dimension
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "probabilities", tuple(self.probabilities))
        if len(self.regions) != g.vertex_count:
            raise ValueError(f"need {g.vertex_count} regions, got {len(self.regions)}")
        if len(self.maps) != g.edge_count or len(self.probabilities) != g.edge_count:
            raise ValueError(f"need one map and one probability per edge ({g.edge_count})")
        for e, m in enumerate(self.maps):
            if m.dimension != d:
                raise DimensionError(f"map {e} has dimension {m.dimension}, space has {d}")
        anchors = np.array(self.anchors, dtype=float).reshape(g.vertex_count, d)
        for v in range(1, g.vertex_count + 1):
            if not self.regions[v - 1].contains(anchors[v - 1 : v])[0]:
                raise ValueError(f"anchor {anchors[v - 1].tolist()} is not in K_{v}")
        object.__setattr__(self, "anchors", _frozen(anchors))
        if not 0.0 < float(self.declared_rate) < 1.0:
            raise ValueError("declared_rate must lie in (0, 1)")
        object.__setattr__(self, "declared_rate", float(self.declared_rate))
        if self.bbox is None:
            lo = np.full(d, -DEFAULT_BOX_HALF_WIDTH)
            bbox = (lo, -lo)
        else:
            bbox = (np.asarray(self.bbox[0], float).reshape(d), np.asarray(self.bbox[1], float).reshape(d))
        object.__setattr__(self, "bbox", (_frozen(bbox[0]), _frozen(bbox[1])))
        stack = {
            "linear": _frozen([m.linear for m in self.maps]),
            "offset": _frozen([m.offset for m in self.maps]),
            "pre_abs": _frozen([m.pre_abs for m in self.maps], dtype=bool),
            "initial": _frozen([a for a, _ in g.edges], dtype=int),
            "terminal": _frozen([b for _, b in g.edges], dtype=int),
        }
        object.__setattr__(self, "_stack", stack)

    @property
    def dimension(self) -> int:
        return self.space.dimension

    @property
    def edge_count(self) -> int:
        return self.graph.edge_count

    @property
    def initial(self) -> np.ndarray:
        return self._stack["initial"]

    @property
    def terminal(self) -> np.ndarray:
        return self._stack["terminal"]

    def anchor(self, vertex: int) -> np.ndarray:
        return self.anchors[vertex - 1]

    def vertex_of(self, pts) -> np.ndarray:
        """Vertex id of each point, 0 where no region contains it."""
        pts = as_points(pts, self.dimension)
        out = np.zeros(len(pts), dtype=int)
        for v in range(self.graph.vertex_count, 0, -1):
            out[self.regions[v - 1].contains(pts)] = v
        return out

    def probability_matrix(self, pts) -> np.ndarray:
        """``P[k, e] = p_e(pts[k])``, exactly 0 outside ``K_i(e)``."""
        pts = as_points(pts, self.dimension)
        out = np.zeros((len(pts), self.edge_count))
        members = [self.regions[v].contains(pts) for v in range(self.graph.vertex_count)]
        for e, p in enumerate(self.probabilities):
            inside = members[self.initial[e] - 1]
            if inside.any():
                out[inside, e] = p.raw(pts[inside], self.space)
        return out

    def apply_edge(self, e: int, pts) -> np.ndarray:
        return self.maps[e](as_points(pts, self.dimension))

    def apply_edges(self, pts: np.ndarray, edges: np.ndarray) -> np.ndarray:
        """Row-wise ``w_{edges[k]}(pts[k])``."""
        s = self._stack
        x = np.where(s["pre_abs"][edges], np.abs(pts), pts)
        return np.einsum("kij,kj->ki", s["linear"][edges], x) + s["offset"][edges]

    def fold(self, x, symbols: Sequence[int]) -> np.ndarray:
        """``w_{s_n} o ... o w_{s_m} (x)`` for chronological ``symbols``."""
        pt = as_points(x, self.dimension)
        for s in symbols:
            pt = self.maps[s](pt)
        return pt[0]

    def fold_exact(self, x, symbols: Sequence[int]) -> Optional[np.ndarray]:
        """``fold`` in rational arithmetic, rounded once at the end.

        Returns None unless ``x`` and every map used have small-denominator
        rational coefficients.
        """
        if not all(self.maps[s].is_rational for s in set(symbols)):
            return None
        pt = [as_rational(v) for v in np.asarray(x, dtype=float).reshape(self.dimension)]
        if any(v is None for v in pt):
            return None
        for s in symbols:
            pt = self.maps[s].exact(pt)
        return np.array([float(v) for v in pt])

    def sampling_bounds(self, vertex: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.regions[vertex - 1].bounds(self.bbox[0].copy(), self.bbox[1].copy())
        return lo, hi


def eval_probability(s: MarkovSystem, e: int, x) -> float | np.ndarray:
    """``p_e(x)``; exactly 0.0 when ``x`` is not in ``K_i(e)``."""
    x = np.asarray(x, dtype=float)
    out = s.probability_matrix(x)[:, e]
    return float(out[0]) if x.ndim == 1 else out


def require_inside(s: MarkovSystem, pts, what: str = "point") -> np.ndarray:
    v = s.vertex_of(pts)
    if np.any(v == 0):
        bad = as_points(pts, s.dimension)[np.argmax(v == 0)]
        raise StateSpaceEscape(f"{what} {bad.tolist()} lies outside every vertex region")
    return v
