"""Coding map by backward iteration, with certified error bounds, anchor
independence, Hoelder checks and trajectory comparison."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as rngmod
from .graph import CodeWindow, is_admissible
from .measure import TrialStreams, run_chains
from .system import MarkovSystem, as_points, require_inside

DEFAULT_TOL = 1e-9
EXACT_MAX_DEPTH = 400


class WindowError(ValueError):
    pass


def coding_constant(s: MarkovSystem) -> float:
    """``C = max_e d(x_t(e), w_e(x_i(e)))``."""
    return max(
        float(s.space.distance(s.anchor(int(s.terminal[e])), s.maps[e](s.anchor(int(s.initial[e]))[None])[0]))
        for e in range(s.edge_count)
    )


def error_bound(s: MarkovSystem, depth: int) -> float:
    """Bound on ``d(Y_m0, F)`` off the exceptional set, for a window of ``depth = 1 - m`` symbols."""
    a = s.declared_rate
    return coding_constant(s) * a ** (depth / 2) / (1 - math.sqrt(a))


def certified_depth(s: MarkovSystem, tol: float = DEFAULT_TOL) -> int:
    """Smallest window depth whose certified error bound is at most ``tol``."""
    C = coding_constant(s)
    if C == 0:
        return 1
    a = s.declared_rate
    need = 2 * math.log(tol * (1 - math.sqrt(a)) / C) / math.log(a)
    depth = max(1, math.ceil(need))
    while error_bound(s, depth) > tol:
        depth += 1
    return depth


@dataclass
class CodingResult:
    point: np.ndarray
    depth: int
    error_bound: float
    converged: bool
    successive_gaps: list = field(default_factory=list)

    @property
    def start_index(self) -> int:
        return 1 - self.depth


def _check_window(s: MarkovSystem, w: CodeWindow) -> None:
    if w.end_index != 0:
        raise WindowError(f"window must end at index 0, it ends at {w.end_index}")
    if not is_admissible(s.graph, w):
        raise WindowError(f"window {w.label()} is not admissible")


def suffix_images(s: MarkovSystem, symbols) -> np.ndarray:
    """``Y_j0`` for every start ``j`` of the window, deepest first.

    Row ``t`` starts at the anchor of ``symbols[t]`` and applies
    ``symbols[t:]``. Rows that become bitwise equal stay equal, so they are
    merged on the fly and the work stays near linear for contracting systems.
    """
    symbols = list(symbols)
    d = s.dimension
    pts = np.empty((0, d))
    counts: list[int] = []
    for sym in symbols:
        start = s.anchor(int(s.initial[sym]))[None, :]
        pts = s.maps[sym](np.vstack([pts, start]))
        counts.append(1)
        if len(pts) > 1:
            same = np.all(pts[1:] == pts[:-1], axis=1)
            if same.any():
                keep = np.concatenate([[True], ~same])
                groups = np.cumsum(keep) - 1
                counts = np.bincount(groups, weights=counts).astype(int).tolist()
                pts = pts[keep]
    return np.repeat(pts, counts, axis=0)


def coding_eval(
    s: MarkovSystem, w: CodeWindow, tol: float = DEFAULT_TOL, gaps: bool = True, exact: Optional[bool] = None
) -> CodingResult:
    """Approximate ``F(sigma)`` by ``Y_m0(sigma)`` for a window ending at index 0.

    For rational affine systems and windows up to ``EXACT_MAX_DEPTH`` symbols
    the point is folded in exact arithmetic (``exact=None`` picks this
    automatically); otherwise, or with ``exact=False``, in floating point.
    """
    _check_window(s, w)
    depth = len(w)
    start = s.anchor(int(s.initial[w.symbols[0]]))
    point = None
    if exact or (exact is None and depth <= EXACT_MAX_DEPTH):
        point = s.fold_exact(start, w.symbols)
        if point is None and exact:
            raise WindowError("exact evaluation needs rational maps and anchors")
    gap_list = []
    if gaps:
        images = suffix_images(s, w.symbols)
        if point is None:
            point = images[0]
        # gaps[k] = d(Y at depth k+1, Y at depth k+2), shallow first
        gap_list = s.space.distance(images[1:], images[:-1])[::-1].tolist() if depth > 1 else []
    elif point is None:
        point = s.fold(start, w.symbols)
    bound = error_bound(s, depth)
    return CodingResult(np.array(point), depth, bound, bound <= tol, gap_list)


def fold_windows(s: MarkovSystem, symbols: np.ndarray, starts: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-wise fold of chronological symbol rows, from the anchors by default."""
    symbols = np.asarray(symbols)
    if starts is None:
        starts = s.anchors[s.initial[symbols[:, 0]] - 1]
    x = as_points(starts, s.dimension).copy()
    for j in range(symbols.shape[1]):
        x = s.apply_edges(x, symbols[:, j])
    return x


def sample_windows(
    s: MarkovSystem, steps: int, trials: int, rng_seed: int, key: int = rngmod.CHAIN, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Chains started at uniformly chosen anchors (a draw from ``P^m_{x_1...x_N}``).

    Returns ``(symbols, endpoints)``; each endpoint is ``Y_m0`` of its window.
    """

    def part(idx: range):
        streams = TrialStreams(rng_seed, key, idx)
        vertex = np.minimum((streams.first() * s.graph.vertex_count).astype(int), s.graph.vertex_count - 1)
        return run_chains(s, s.anchors[vertex], streams, steps)

    parts = rngmod.map_chunks(part, trials, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def coding_eval_on_sample(
    s: MarkovSystem, steps: int, rng_seed: int = 0, tol: float = DEFAULT_TOL, gaps: bool = False
) -> CodingResult:
    if steps < 1:
        raise ValueError("steps must be positive")
    symbols, _ = sample_windows(s, steps, 1, rng_seed)
    return coding_eval(s, CodeWindow.ending_at_zero(symbols[0]), tol, gaps)


# -- anchor independence ----------------------------------------------------


@dataclass
class AnchorReport:
    max_discrepancy: float
    bound: float
    exceed_fraction: float
    failure_bound: float
    std_error: float
    discrepancies: np.ndarray

    def __iter__(self):
        return iter((self.max_discrepancy, self.bound, self.exceed_fraction))


def anchor_independence(
    s: MarkovSystem, alt_anchors, trials: int = 1000, steps: int = 200, rng_seed: int = 0, workers: int = 1
) -> AnchorReport:
    """Compare ``Y_m0`` from the system anchors and from ``alt_anchors`` on the same windows.

    With ``depth = steps`` the Markov-inequality bound says the discrepancy
    exceeds ``a^(depth/2) * mean_i d(x_i, y_i)`` with probability at most
    ``a^(depth/2)``.
    """
    alt = as_points(alt_anchors, s.dimension)
    if len(alt) != s.graph.vertex_count:
        raise ValueError("need one alternative anchor per vertex")
    for v in range(1, s.graph.vertex_count + 1):
        if not s.regions[v - 1].contains(alt[v - 1 : v])[0]:
            raise ValueError(f"alternative anchor {alt[v - 1].tolist()} is not in K_{v}")
    symbols, y_x = sample_windows(s, steps, trials, rng_seed, workers=workers)
    y_y = fold_windows(s, symbols, alt[s.initial[symbols[:, 0]] - 1])
    disc = np.asarray(s.space.distance(y_x, y_y)).reshape(-1)
    fail = s.declared_rate ** (steps / 2)
    bound = fail * float(np.mean(s.space.distance(s.anchors, alt)))
    frac = float(np.mean(disc > bound))
    return AnchorReport(
        max_discrepancy=float(disc.max()),
        bound=bound,
        exceed_fraction=frac,
        failure_bound=fail,
        std_error=math.sqrt(frac * (1 - frac) / trials),
        discrepancies=disc,
    )


# -- Hoelder ----------------------------------------------------------------


@dataclass
class HolderReport:
    alpha: float
    constant: float
    pairs: list
    violations: int
    depth: int = 0
    allowance: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["agree", "code_distance", "image_distance", "bound", "violation"])
            for k, dc, di, b in self.pairs:
                out.writerow([k, repr(dc), repr(di), repr(b), int(di > b)])


def holder_exponent(a: float) -> float:
    return math.log(math.sqrt(a)) / math.log(0.5)


def holder_constant(s: MarkovSystem) -> float:
    return 2 * coding_constant(s) / (1 - math.sqrt(s.declared_rate))


def _agreeing_partners(
    s: MarkovSystem, symbols: np.ndarray, agree: np.ndarray, rng_seed: int, slack: int = 64, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Partner windows sharing the last ``agree[k]`` symbols of ``symbols[k]``.

    A fresh chain of ``depth + slack`` moves is cut at the latest position
    whose terminal vertex feeds the shared suffix, so the partner is
    admissible and at least as deep as the original. Returns the partner
    images, depths and realised agreement lengths (chance matches before the
    shared suffix are counted, up to the recorded tail).
    """
    trials, depth = symbols.shape
    kmax = int(agree.max())
    length = depth + slack
    window = slack + kmax

    def part(idx: range):
        streams = TrialStreams(rng_seed, rngmod.HOLDER, idx)
        vertex = np.minimum((streams.first() * s.graph.vertex_count).astype(int), s.graph.vertex_count - 1)
        states = np.empty((len(idx), window, s.dimension))

        def keep(j, e, z):
            if j >= length - window:
                states[:, j - (length - window)] = z

        syms, _ = run_chains(s, s.anchors[vertex], streams, length, on_step=keep)
        return syms[:, -window:], states

    parts = rngmod.map_chunks(part, trials, workers)
    tail_syms = np.concatenate([p[0] for p in parts])
    tail_states = np.concatenate([p[1] for p in parts])
    images = np.empty((trials, s.dimension))
    depths = np.empty(trials, dtype=int)
    realised = agree.astype(int).copy()
    for k in np.unique(agree):
        rows = np.flatnonzero(agree == k)
        target = s.initial[symbols[rows, depth - k]]
        # cut after position p (p moves taken) with p + k >= depth
        cols = np.arange(window)
        moves = length - window + cols + 1
        ok = (s.terminal[tail_syms[rows]] == target[:, None]) & (moves[None, :] + k >= depth)
        if not ok.any(axis=1).all():
            raise RuntimeError("no admissible cut point for a Hoelder partner; raise slack")
        last = window - 1 - np.argmax(ok[:, ::-1], axis=1)
        start = tail_states[rows, last]
        images[rows] = fold_windows(s, symbols[rows, depth - k :], start)
        depths[rows] = moves[last] + k
        still = np.ones(len(rows), dtype=bool)
        for j in range(min(window, depth - k)):
            col = last - j
            eq = still & (col >= 0)
            eq[eq] = symbols[rows[eq], depth - k - 1 - j] == tail_syms[rows[eq], col[eq]]
            realised[rows[eq]] += 1
            still = eq
            if not still.any():
                break
    return images, depths, realised


def holder_estimate(
    s: MarkovSystem,
    trials: int = 1000,
    max_agree: int = 20,
    rng_seed: int = 0,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
) -> HolderReport:
    """Check ``d(F(sigma), F(sigma')) <= 2C/(1-sqrt a) d'(sigma, sigma')^alpha`` on sampled pairs.

    Pair ``k`` shares its last ``1 + k % max_agree`` symbols (possibly more by
    chance; the realised agreement length is used). Both windows have the
    certified depth for ``tol``, and twice the error bound is tolerated.
    """
    depth = certified_depth(s, tol)
    max_agree = min(max_agree, depth - 1)
    symbols, y1 = sample_windows(s, depth, trials, rng_seed, workers=workers)
    agree = 1 + np.arange(trials) % max_agree
    y2, _, realised = _agreeing_partners(s, symbols, agree, rng_seed, workers=workers)
    alpha = holder_exponent(s.declared_rate)
    const = holder_constant(s)
    eb = error_bound(s, depth)
    image = np.asarray(s.space.distance(y1, y2)).reshape(-1)
    code = 0.5 ** realised.astype(float)
    bound = const * code**alpha + 2 * eb
    pairs = list(zip(realised.tolist(), code.tolist(), image.tolist(), bound.tolist()))
    a = s.declared_rate
    allowance = a ** (depth / 2) / (1 - math.sqrt(a))
    return HolderReport(alpha, const, pairs, int(np.sum(image > bound)), depth, allowance)


# -- trajectory comparison --------------------------------------------------


@dataclass
class TrajectoryReport:
    exceed_fraction: np.ndarray
    bound_curve: np.ndarray
    std_error: np.ndarray
    distances: np.ndarray
    start_distance: float

    def __iter__(self):
        return iter((self.exceed_fraction, self.bound_curve))


def trajectory_comparison(
    s: MarkovSystem, x, steps: int = 100, trials: int = 1000, rng_seed: int = 0, workers: int = 1
) -> TrajectoryReport:
    """Chains from ``x`` against the replay of the same windows from the anchor of ``x``'s vertex.

    Entry ``j`` concerns the state after ``j + 1`` moves; the threshold and
    the failure probability bound are both ``a^((j+1)/2)`` (the threshold
    scaled by ``d(x, x_i0)``).
    """
    x = np.asarray(x, dtype=float).reshape(s.dimension)
    i0 = int(require_inside(s, x)[0])
    anchor = s.anchor(i0)
    d0 = float(s.space.distance(x, anchor))

    def part(idx: range):
        n = len(idx)
        streams = TrialStreams(rng_seed, rngmod.CHAIN, idx)
        y = np.repeat(anchor[None, :], n, axis=0)
        dist = np.empty((n, steps))

        def step(j, e, z):
            nonlocal y
            y = s.apply_edges(y, e)
            dist[:, j] = s.space.distance(z, y)

        run_chains(s, np.repeat(x[None, :], n, axis=0), streams, steps, on_step=step)
        return dist

    dist = np.concatenate(rngmod.map_chunks(part, trials, workers))
    curve = s.declared_rate ** ((np.arange(steps) + 1) / 2)
    frac = np.mean(dist > curve * d0, axis=0)
    se = np.sqrt(frac * (1 - frac) / trials)
    return TrajectoryReport(frac, curve, se, dist, d0)
