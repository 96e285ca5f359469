"""Particle measures on the state space, the Markov operator and its adjoint,
invariant-measure iteration, and forward chain sampling."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import wasserstein_distance

from . import rng as rngmod
from .graph import CodeWindow
from .system import MarkovSystem, MetricSpace, StateSpaceEscape, as_points, require_inside

N_SLICES = 32
_SLICE_SEED = 20240601


@dataclass(frozen=True)
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(pts) != len(w):
            raise ValueError("points and weights differ in length")
        if len(w) == 0:
            raise ValueError("empirical measure is empty")
        if np.any(w < 0):
            raise ValueError("negative particle weight")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "EmpiricalMeasure":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    @classmethod
    def dirac(cls, x) -> "EmpiricalMeasure":
        return cls(np.atleast_2d(np.asarray(x, dtype=float)), [1.0])

    def __len__(self):
        return len(self.weights)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def variance(self) -> np.ndarray:
        c = self.points - self.mean()
        return self.weights @ (c * c)

    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow([f"x{k}" for k in range(self.dimension)] + ["weight"])
            for p, w in zip(self.points, self.weights):
                out.writerow([repr(float(v)) for v in p] + [repr(float(w))])

    @classmethod
    def from_csv(cls, path) -> "EmpiricalMeasure":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, :-1], data[:, -1])


# -- operators --------------------------------------------------------------


def markov_apply(s: MarkovSystem, f: Callable[[np.ndarray], np.ndarray], x) -> float | np.ndarray:
    """``(Uf)(x) = sum_e p_e(x) f(w_e x)``; ``f`` is never called where ``p_e(x) = 0``."""
    single = np.asarray(x).ndim == 1
    pts = as_points(x, s.dimension)
    require_inside(s, pts)
    p = s.probability_matrix(pts)
    out = np.zeros(len(pts))
    for e in range(s.edge_count):
        live = p[:, e] > 0
        if live.any():
            out[live] += p[live, e] * np.asarray(f(s.apply_edge(e, pts[live])), dtype=float)
    return float(out[0]) if single else out


def push_children(s: MarkovSystem, nu: EmpiricalMeasure, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Atoms of ``U* nu`` before any resampling, ordered by (particle, edge)."""

    def part(idx: range):
        pts = nu.points[idx.start : idx.stop]
        w = nu.weights[idx.start : idx.stop]
        p = s.probability_matrix(pts) * w[:, None]
        rows, edges = np.nonzero(p > 0)
        return s.apply_edges(pts[rows], edges), p[rows, edges]

    parts = rngmod.map_chunks(part, len(nu), workers)
    pts = np.concatenate([a for a, _ in parts])
    w = np.concatenate([b for _, b in parts])
    if len(w) == 0:
        raise StateSpaceEscape("no particle carries positive probability (all outside the regions)")
    if np.any(s.vertex_of(pts) == 0):
        raise StateSpaceEscape("a particle left the union of vertex regions under a positive-probability map")
    return pts, w


def systematic_resample(
    points: np.ndarray, weights: np.ndarray, cap: int, offset: float
) -> tuple[np.ndarray, np.ndarray]:
    """Systematic resampling to at most ``cap`` atoms with uniform ``offset`` in [0, 1).

    Atoms are sorted lexicographically first, which keeps the resampled
    distribution function within ``1/cap`` of the input in one dimension.
    Repeated picks are merged, so weights are multiples of ``1/cap``.
    """
    total = weights.sum()
    if len(weights) <= cap:
        return points, weights / total
    order = np.lexsort(points.T[::-1])
    cdf = np.cumsum(weights[order])
    cdf /= cdf[-1]
    u = (offset + np.arange(cap)) / cap
    picks = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    uniq, counts = np.unique(picks, return_counts=True)
    return points[order[uniq]], counts / cap


def resample_offset(seed: int) -> float:
    return float(rngmod.stream(seed, rngmod.RESAMPLE).random())


def adjoint_push(
    s: MarkovSystem,
    nu: EmpiricalMeasure,
    cap: int,
    rng_seed: int = 0,
    workers: int = 1,
    offset: Optional[float] = None,
) -> EmpiricalMeasure:
    """One application of ``U*`` followed by systematic resampling to ``cap``.

    The resampling offset comes from ``rng_seed`` unless given explicitly.
    """
    if offset is None:
        offset = resample_offset(rng_seed)
    pts, w = push_children(s, nu, workers)
    pts, w = systematic_resample(pts, w, cap, offset)
    return EmpiricalMeasure(pts, w / w.sum())


# -- distance ---------------------------------------------------------------


def slice_directions(d: int) -> np.ndarray:
    g = np.random.default_rng(_SLICE_SEED + d).standard_normal((N_SLICES, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def measure_distance(space: MetricSpace | int, nu1: EmpiricalMeasure, nu2: EmpiricalMeasure) -> float:
    """Exact W1 on the line; sliced W1 over fixed directions in higher dimension."""
    d = space.dimension if isinstance(space, MetricSpace) else int(space)
    if nu1.dimension != d or nu2.dimension != d:
        raise ValueError("measures and space differ in dimension")
    if d == 1:
        return float(wasserstein_distance(nu1.points[:, 0], nu2.points[:, 0], nu1.weights, nu2.weights))
    dirs = slice_directions(d)
    a, b = nu1.points @ dirs.T, nu2.points @ dirs.T
    return float(
        np.mean([wasserstein_distance(a[:, k], b[:, k], nu1.weights, nu2.weights) for k in range(len(dirs))])
    )


# -- invariant measure ------------------------------------------------------


@dataclass
class InvariantEstimate:
    measure: EmpiricalMeasure
    converged: bool
    history: list

    def __iter__(self):
        return iter((self.measure, self.converged, self.history))


def estimate_invariant(
    s: MarkovSystem,
    particles: int = 10_000,
    max_iters: int = 200,
    tol: float = 1e-3,
    rng_seed: int = 0,
    workers: int = 1,
    min_iters: int = 1,
) -> InvariantEstimate:
    """Iterate ``U*`` from the uniform measure on the anchors.

    Stops once the distance between successive iterates drops below ``tol``
    (after at least ``min_iters`` pushes). One resampling offset is used for
    the whole run, which makes the resampled iteration a fixed quantiser;
    fresh offsets each step leave a noise floor in heavy-tailed systems.
    """
    if particles < 1:
        raise ValueError("particles must be positive")
    offset = resample_offset(rng_seed)
    nu = EmpiricalMeasure.uniform(s.anchors)
    history: list[float] = []
    for it in range(max_iters):
        nxt = adjoint_push(s, nu, particles, workers=workers, offset=offset)
        history.append(measure_distance(s.space, nu, nxt))
        nu = nxt
        if it + 1 >= min_iters and history[-1] < tol:
            return InvariantEstimate(nu, True, history)
    return InvariantEstimate(nu, False, history)


# -- chains -----------------------------------------------------------------


@dataclass(frozen=True)
class ChainSample:
    start: np.ndarray
    window: CodeWindow
    trajectory: np.ndarray


def draw_edges(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF edge choice per row; zero-probability edges are never picked."""
    cum = np.cumsum(p, axis=1)
    total = cum[:, -1]
    if np.any(total <= 0):
        raise StateSpaceEscape("chain reached a point where every probability vanishes")
    return (cum <= (u * total)[:, None]).sum(axis=1)


def run_chains(
    s: MarkovSystem,
    starts: np.ndarray,
    uniforms: Callable[[int, int], np.ndarray],
    steps: int,
    on_step: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None,
    block: int = 1024,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance ``len(starts)`` chains by ``steps`` moves.

    ``uniforms(a, b)`` returns the ``(T, b - a)`` uniforms for moves ``a..b-1``.
    ``on_step(j, edges, points)`` sees the points after move ``j``.
    Returns ``(symbols, endpoints)``.
    """
    x = as_points(starts, s.dimension).copy()
    require_inside(s, x, "chain start")
    symbols = np.empty((len(x), steps), dtype=np.int64)
    for a in range(0, steps, block):
        b = min(a + block, steps)
        u = uniforms(a, b)
        for j in range(a, b):
            e = draw_edges(s.probability_matrix(x), u[:, j - a])
            x = s.apply_edges(x, e)
            symbols[:, j] = e
            if on_step is not None:
                on_step(j, e, x)
    return symbols, x


class TrialStreams:
    """One generator per trial, drawn sequentially in blocks."""

    def __init__(self, seed: int, key: int, trials: range):
        self.gens = [rngmod.stream(seed, key, k) for k in trials]

    def first(self) -> np.ndarray:
        return np.array([g.random() for g in self.gens])

    def __call__(self, a: int, b: int) -> np.ndarray:
        return np.stack([g.random(b - a) for g in self.gens]) if self.gens else np.empty((0, b - a))


def sample_chain(s: MarkovSystem, x, steps: int, rng_seed: int = 0, start_index: Optional[int] = None) -> ChainSample:
    """One chain from ``x``: symbols drawn from ``p_e`` at the current point."""
    if steps < 1:
        raise ValueError("steps must be positive")
    x = np.asarray(x, dtype=float).reshape(s.dimension)
    streams = TrialStreams(rng_seed, rngmod.CHAIN, range(1))
    traj = [x.copy()]
    symbols, _ = run_chains(s, x[None, :], streams, steps, on_step=lambda j, e, pts: traj.append(pts[0].copy()))
    m = 1 - steps if start_index is None else start_index
    return ChainSample(start=x, window=CodeWindow(m, symbols[0]), trajectory=np.array(traj))
