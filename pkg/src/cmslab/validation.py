"""Empirical checks of the CMS hypotheses: normalisation, region mapping,
average contraction, lower bound on probabilities and Dini continuity."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .system import MarkovSystem, MetricSpace, Region


class EmptyRegionSample(RuntimeError):
    pass


def region_sample(
    region: Region,
    lo: np.ndarray,
    hi: np.ndarray,
    grid_density: int,
    rng: np.random.Generator,
    label: str = "region",
) -> np.ndarray:
    """Grid points plus as many uniform points over ``[lo, hi]``, kept if inside."""
    d = len(lo)
    if np.any(lo > hi):
        raise EmptyRegionSample(f"{label}: sampling box is empty")
    axes = [np.linspace(lo[k], hi[k], grid_density) for k in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    rand = rng.uniform(lo, hi, size=(len(grid), d))
    pts = np.concatenate([grid, rand])
    pts = pts[region.contains(pts)]
    if len(pts) == 0:
        raise EmptyRegionSample(f"{label}: no sample point falls inside the region")
    return pts


def unit_directions(space: MetricSpace, n: int, rng: np.random.Generator) -> np.ndarray:
    """Axis directions ``+-e_k`` followed by random directions, unit in the metric."""
    d = space.dimension
    eye = np.eye(d)
    axis = np.concatenate([eye, -eye])
    extra = max(n - len(axis), 0)
    g = rng.standard_normal((extra, d))
    dirs = np.concatenate([axis, g])
    norms = space.norm(dirs)
    return dirs[norms > 0] / norms[norms > 0, None]


def vertex_sample(s: MarkovSystem, vertex: int, grid_density: int, rng) -> np.ndarray:
    lo, hi = s.sampling_bounds(vertex)
    return region_sample(s.regions[vertex - 1], lo, hi, grid_density, rng, label=f"vertex {vertex}")


# -- contraction ------------------------------------------------------------


def contraction_ratios(s: MarkovSystem, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``sum_e p_e(x) d(w_e x, w_e y) / d(x, y)`` row-wise."""
    p = s.probability_matrix(x)
    num = np.zeros(len(x))
    for e in range(s.edge_count):
        live = p[:, e] > 0
        if live.any():
            dist = s.space.distance(s.apply_edge(e, x[live]), s.apply_edge(e, y[live]))
            num[live] += p[live, e] * dist
    return num / s.space.distance(x, y)


def _pairs_for_vertex(s: MarkovSystem, vertex: int, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    region = s.regions[vertex - 1]
    lo, hi = s.sampling_bounds(vertex)
    d = s.dimension
    span = float(np.max(hi - lo)) or 1.0
    # half global pairs, half local pairs along mostly axis and random directions
    n_global = n // 2
    n_local = n - n_global
    xg = rng.uniform(lo, hi, size=(n_global, d))
    yg = rng.uniform(lo, hi, size=(n_global, d))
    xl = rng.uniform(lo, hi, size=(n_local, d))
    dirs = unit_directions(s.space, 4 * d, rng)
    pick = rng.integers(0, len(dirs), size=n_local)
    r = span * 10.0 ** rng.uniform(-4.0, -0.5, size=n_local)
    yl = xl + r[:, None] * dirs[pick]
    x = np.concatenate([xg, xl])
    y = np.concatenate([yg, yl])
    keep = region.contains(x) & region.contains(y) & (s.space.distance(x, y) > 0)
    return x[keep], y[keep]


def estimate_contraction_rate(s: MarkovSystem, pair_samples: int = 20000, rng_seed: int = 0) -> float:
    """Sampled supremum of the average-contraction ratio over same-vertex pairs."""
    if pair_samples < 1:
        raise ValueError("pair_samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    best = -np.inf
    found = False
    for v in range(1, s.graph.vertex_count + 1):
        x, y = _pairs_for_vertex(s, v, pair_samples, rng)
        if len(x) == 0:
            continue
        found = True
        best = max(best, float(contraction_ratios(s, x, y).max()))
    if not found:
        raise RuntimeError("no valid same-vertex sample pairs were found")
    return best


# -- Dini continuity --------------------------------------------------------


@dataclass
class DiniReport:
    modulus_samples: list
    series_partial_sums: list
    verdict: str
    tail_ratio: float = float("nan")
    tail_slope: float = float("nan")


def dini_verdict(
    terms: np.ndarray,
    ratio_threshold: float = 1.0,
    divergence_bound: float = 1e3,
    zero_tol: float = 1e-14,
    slope_tol: float = 0.05,
) -> tuple[str, float, float]:
    """Classify ``sum_n phi(b c^n)`` from its first terms.

    Diverging when the partial sum passes ``divergence_bound`` or the last
    quartile decays no faster than ``1/n`` (log-log slope at least
    ``-1 - slope_tol``); converged when the last quartile
    is numerically zero or shrinks geometrically with ratio below
    ``ratio_threshold``.
    """
    terms = np.asarray(terms, dtype=float)
    if terms.sum() > divergence_bound:
        return "diverging", float("nan"), float("nan")
    q = max(3, len(terms) // 4)
    tail = terms[-q:]
    idx = np.arange(len(terms))[-q:] + 1
    if np.all(tail <= zero_tol):
        return "converged", 0.0, -np.inf
    if np.any(tail <= 0):
        return "inconclusive", float("nan"), float("nan")
    logs = np.log(tail)
    ratio = float(np.exp((logs[-1] - logs[0]) / (q - 1)))
    slope = float(np.polyfit(np.log(idx), logs, 1)[0])
    if slope >= -1.0 - slope_tol:
        return "diverging", ratio, slope
    if ratio < ratio_threshold:
        return "converged", ratio, slope
    return "inconclusive", ratio, slope


def check_dini(
    f: Callable[[np.ndarray], np.ndarray],
    region: Region,
    space: MetricSpace,
    bounds: tuple,
    b: float = 1.0,
    c: float = 0.5,
    n_terms: int = 32,
    grid_density: int = 64,
    rng_seed: int = 0,
    n_directions: int = 8,
    ratio_threshold: float = 1.0,
    divergence_bound: float = 1e3,
) -> DiniReport:
    """Empirical modulus of continuity of ``f`` on ``region`` at ``t = b c^n``.

    ``phi(t)`` is the largest ``|f(x) - f(y)|`` seen over sampled pairs with
    ``d(x, y) <= t``; pairs found at smaller scales count for larger ones, so
    the reported modulus is nondecreasing in ``t``.
    """
    if not (b > 0 and 0 < c < 1):
        raise ValueError("need b > 0 and 0 < c < 1")
    rng = np.random.default_rng(rng_seed)
    lo, hi = region.bounds(np.asarray(bounds[0], float).copy(), np.asarray(bounds[1], float).copy())
    x = region_sample(region, lo, hi, grid_density, rng)
    fx = f(x)
    dirs = unit_directions(space, n_directions, rng)
    ts = b * c ** np.arange(n_terms)
    raw = np.zeros(n_terms)
    for n, t in enumerate(ts):
        best = 0.0
        for u in dirs:
            y = x + t * u
            inside = region.contains(y)
            if inside.any():
                best = max(best, float(np.abs(f(y[inside]) - fx[inside]).max()))
        raw[n] = best
    # ts decreases with n: running max from the small end
    phi = np.maximum.accumulate(raw[::-1])[::-1]
    partial = np.cumsum(phi)
    verdict, ratio, slope = dini_verdict(phi, ratio_threshold, divergence_bound)
    return DiniReport(
        modulus_samples=list(zip(ts.tolist(), phi.tolist())),
        series_partial_sums=partial.tolist(),
        verdict=verdict,
        tail_ratio=ratio,
        tail_slope=slope,
    )


def probability_dini(s: MarkovSystem, e: int, **kw) -> DiniReport:
    """Dini report for ``p_e`` restricted to ``K_i(e)``."""
    v = int(s.initial[e])
    p = s.probabilities[e]
    return check_dini(lambda pts: p.raw(pts, s.space), s.regions[v - 1], s.space, s.bbox, **kw)


# -- full report ------------------------------------------------------------


@dataclass
class ValidationReport:
    normalization_max_error: float
    contraction_rate_estimate: float
    region_violations: int
    delta_estimate: float
    dini: list = field(default_factory=list)
    declared_rate: float = float("nan")
    sample_count: int = 0
    pair_samples: int = 0

    FIELDS = (
        "normalization_max_error",
        "contraction_rate_estimate",
        "declared_rate",
        "region_violations",
        "delta_estimate",
        "sample_count",
        "pair_samples",
    )

    def failures(self, normalization_tol: float = 1e-9, rate_tol: float = 1e-9) -> list[str]:
        """Names of the violated hypotheses (empty when all hold)."""
        out = []
        if self.normalization_max_error > normalization_tol:
            out.append("normalization")
        if self.region_violations > 0:
            out.append("region_mapping")
        if self.contraction_rate_estimate > self.declared_rate + rate_tol:
            out.append("contraction")
        if not self.delta_estimate > 0:
            out.append("delta")
        bad = [e for e, r in enumerate(self.dini) if r.verdict == "diverging"]
        if bad:
            out.append("dini")
        return out


def validate_system(
    s: MarkovSystem,
    grid_density: int = 64,
    rng_seed: int = 0,
    pair_samples: int = 100_000,
    dini_terms: int = 32,
) -> ValidationReport:
    rng = np.random.default_rng(rng_seed)
    norm_err = 0.0
    violations = 0
    delta = np.inf
    count = 0
    for v in range(1, s.graph.vertex_count + 1):
        x = vertex_sample(s, v, grid_density, rng)
        count += len(x)
        out = s.graph.out_edges(v)
        p = s.probability_matrix(x)
        norm_err = max(norm_err, float(np.abs(p.sum(axis=1) - 1.0).max()))
        for e in out:
            delta = min(delta, float(p[:, e].min()))
            images = s.apply_edge(e, x)
            target = s.regions[s.terminal[e] - 1]
            violations += int((~target.contains(images)).sum())
    rate = estimate_contraction_rate(s, pair_samples, rng_seed)
    dini = [
        probability_dini(s, e, n_terms=dini_terms, grid_density=min(grid_density, 64), rng_seed=rng_seed)
        for e in range(s.edge_count)
    ]
    return ValidationReport(
        normalization_max_error=norm_err,
        contraction_rate_estimate=rate,
        region_violations=violations,
        delta_estimate=float(delta if np.isfinite(delta) else 0.0),
        dini=dini,
        declared_rate=s.declared_rate,
        sample_count=count,
        pair_samples=pair_samples,
    )
