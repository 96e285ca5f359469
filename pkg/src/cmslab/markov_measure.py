"""Generalised Markov measure on cylinders, shift-invariance checks, the
absolute-continuity diagnostic and the entropy functional."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import CodeWindow, enumerate_words, is_admissible
from .measure import EmpiricalMeasure
from .system import MarkovSystem, require_inside
from .validation import vertex_sample


@dataclass
class CylinderMass:
    word: tuple
    estimate: float
    std_error: float
    exact: bool

    @property
    def label(self) -> str:
        return "-".join(str(s) for s in self.word)


def _word(word) -> tuple[int, ...]:
    if isinstance(word, CodeWindow):
        return word.symbols
    return tuple(int(s) for s in word)


def word_integrand(s: MarkovSystem, pts: np.ndarray, word: Sequence[int]) -> np.ndarray:
    """``p_e1(x) p_e2(w_e1 x) ... p_ek(w_e(k-1) ... w_e1 x)`` per point."""
    g = np.ones(len(pts))
    x = pts
    for j, e in enumerate(word):
        g = g * s.probability_matrix(x)[:, e]
        if j + 1 < len(word):
            x = s.apply_edge(e, x)
    return g


def _weighted_mean_se(mu: EmpiricalMeasure, g: np.ndarray) -> tuple[float, float]:
    est = mu.integrate(g)
    var = mu.integrate((g - est) ** 2)
    return est, math.sqrt(max(var, 0.0) / mu.ess())


def _constant_word(s: MarkovSystem, word) -> bool:
    return all(s.probabilities[e].is_constant for e in word)


def cylinder_mass(s: MarkovSystem, mu: EmpiricalMeasure, word) -> CylinderMass:
    """Mass of the cylinder ``[e_1, ..., e_k]`` under the generalised Markov measure.

    Uses the weighted sample mean of the word integrand; the standard error
    is the weighted standard deviation over the effective sample size.
    """
    word = _word(word)
    if not word:
        return CylinderMass(word, 1.0, 0.0, True)
    if not is_admissible(s.graph, word):
        return CylinderMass(word, 0.0, 0.0, True)
    g = word_integrand(s, mu.points, word)
    if _constant_word(s, word) and np.all(g == g[0]):
        return CylinderMass(word, float(g[0]), 0.0, True)
    est, se = _weighted_mean_se(mu, g)
    return CylinderMass(word, min(max(est, 0.0), 1.0), se, False)


@dataclass
class ShiftRow:
    word: tuple
    mass: float
    left_sum: float
    right_sum: float
    left_discrepancy: float
    right_discrepancy: float
    combined_std_error: float


def shift_invariance_check(s: MarkovSystem, mu: EmpiricalMeasure, max_word_length: int) -> list[ShiftRow]:
    """Both one-symbol extension identities for every word up to ``max_word_length``.

    The right extension holds by normalisation of the probabilities. The left
    extension integrates ``U g`` instead of ``g`` and so tests invariance of
    ``mu``; its error bar combines the two standard errors.
    """
    rows = []
    E = s.edge_count
    for length in range(1, max_word_length + 1):
        for w in enumerate_words(s.graph, length):
            word = w.symbols
            base = cylinder_mass(s, mu, word)
            right = sum(cylinder_mass(s, mu, word + (e,)).estimate for e in range(E))
            lefts = [cylinder_mass(s, mu, (e,) + word) for e in range(E)]
            left = sum(m.estimate for m in lefts)
            if all(m.exact for m in lefts):
                left_se = 0.0
            else:
                ug = sum(word_integrand(s, mu.points, (e,) + word) for e in range(E))
                _, left_se = _weighted_mean_se(mu, ug)
            rows.append(
                ShiftRow(
                    word=word,
                    mass=base.estimate,
                    left_sum=left,
                    right_sum=right,
                    left_discrepancy=abs(left - base.estimate),
                    right_discrepancy=abs(right - base.estimate),
                    combined_std_error=math.hypot(base.std_error, left_se),
                )
            )
    return rows


# -- absolute continuity ----------------------------------------------------


@dataclass
class AbsContinuityReport:
    start: np.ndarray
    depth: int
    words: list
    x_mass: np.ndarray
    anchor_mass: np.ndarray
    lift_mass: Optional[np.ndarray]
    flagged: list
    delta_estimate: float
    hypothesis_ok: bool
    notes: list = field(default_factory=list)


def cylinder_lift_mass(s: MarkovSystem, x, word) -> float:
    """``P^m_x`` of the cylinder starting at position ``m`` with ``word``."""
    return float(word_integrand(s, np.asarray(x, float).reshape(1, -1), _word(word))[0])


def anchor_lift_mass(s: MarkovSystem, word) -> float:
    """``P^m_{x_1...x_N}``: ``1/N`` times the product along the orbit of ``x_i(e_m)``."""
    word = _word(word)
    a = s.anchor(int(s.initial[word[0]]))
    return cylinder_lift_mass(s, a, word) / s.graph.vertex_count


def abs_continuity_diagnostic(
    s: MarkovSystem,
    x,
    mu: Optional[EmpiricalMeasure] = None,
    word_length: int = 3,
    depth: int = 0,
    grid_density: int = 64,
    rng_seed: int = 0,
) -> AbsContinuityReport:
    """Look for cylinders charged by ``P^m_x`` (or by the lift of ``mu``) but not by ``P^m_{x_1...x_N}``.

    Also estimates the lower bound ``delta`` of the probabilities on their
    regions; a flagged word is only possible when that hypothesis fails.
    """
    x = np.asarray(x, dtype=float).reshape(s.dimension)
    require_inside(s, x)
    words = enumerate_words(s.graph, word_length, start_index=depth)
    pts = x[None, :]
    xm = np.array([word_integrand(s, pts, w.symbols)[0] for w in words])
    am = np.array([anchor_lift_mass(s, w) for w in words])
    lm = None
    if mu is not None:
        lm = np.array([cylinder_mass(s, mu, w).estimate for w in words])
    flagged = [w.symbols for w, px, pa in zip(words, xm, am) if pa == 0 and px > 0]
    if lm is not None:
        flagged += [w.symbols for w, pl, pa in zip(words, lm, am) if pa == 0 and pl > 0 and w.symbols not in flagged]
    rng = np.random.default_rng(rng_seed)
    delta = np.inf
    for v in range(1, s.graph.vertex_count + 1):
        p = s.probability_matrix(vertex_sample(s, v, grid_density, rng))
        for e in s.graph.out_edges(v):
            delta = min(delta, float(p[:, e].min()))
    ok = delta > 0
    notes = [] if ok else [f"probabilities are not bounded away from zero (sampled inf {delta:.3g})"]
    return AbsContinuityReport(x, depth, [w.symbols for w in words], xm, am, lm, flagged, delta, ok, notes)


# -- entropy ----------------------------------------------------------------


def entropy_integrand(s: MarkovSystem, pts: np.ndarray) -> np.ndarray:
    p = s.probability_matrix(pts)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def entropy_estimate(s: MarkovSystem, mu: EmpiricalMeasure) -> float:
    """``-sum_e int p_e log p_e dmu`` in nats (nonnegative; ``0 log 0 = 0``).

    The same expression without the leading minus, as it is usually written
    for the shift entropy, is ``-entropy_estimate(...)``.
    """
    h = entropy_integrand(s, mu.points)
    if np.all(h == h[0]):
        return float(h[0])
    return mu.integrate(h)


def write_cylinder_csv(path, masses: Sequence[CylinderMass]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["word", "estimate", "std_error", "exact"])
        for m in masses:
            out.writerow([m.label, repr(m.estimate), repr(m.std_error), int(m.exact)])


def write_shift_csv(path, rows: Sequence[ShiftRow]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["word", "mass", "left_sum", "right_sum", "left_discrepancy", "right_discrepancy", "combined_std_error"])
        for r in rows:
            out.writerow(
                ["-".join(map(str, r.word))]
                + [repr(v) for v in (r.mass, r.left_sum, r.right_sum, r.left_discrepancy, r.right_discrepancy, r.combined_std_error)]
            )
