"""Acceptance run: one test per criterion, each logging a PASS/FAIL line
into the terminal summary (see conftest)."""
import contextlib
import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES

from cmslab import builtins as bi
from cmslab.cli import main
from cmslab.coding import (
    anchor_independence,
    coding_constant,
    coding_eval,
    fold_windows,
    holder_estimate,
    sample_windows,
    trajectory_comparison,
)
from cmslab.graph import CodeWindow, enumerate_words
from cmslab.markov_measure import cylinder_mass, entropy_estimate, shift_invariance_check
from cmslab.measure import EmpiricalMeasure, estimate_invariant
from cmslab.validation import estimate_contraction_rate

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@contextlib.contextmanager
def criterion(n, title, budget):
    t0 = time.perf_counter()
    notes = []
    status = "FAIL"
    try:
        yield notes
        status = "PASS"
    finally:
        dt = time.perf_counter() - t0
        extra = f" [{'; '.join(notes)}]" if notes else ""
        ACCEPTANCE_LINES.append(f"{status} criterion {n:2d}: {title} ({dt:.1f}s, budget {budget}s){extra}")
        print(ACCEPTANCE_LINES[-1])


def test_c01_contraction_constants(be, planar):
    with criterion(1, "contraction constants", 5) as notes:
        a3 = estimate_contraction_rate(be, 100_000, rng_seed=0)
        a6 = estimate_contraction_rate(planar, 100_000, rng_seed=0)
        notes.append(f"barnsley_elton {a3!r}, two_vertex_planar {a6!r}")
        assert abs(a3 - 7 / 8) <= 1e-9
        assert 209 / 210 - 1e-3 <= a6 <= 209 / 210 + 1e-9


def test_c02_coding_exactness(decimal, cantor):
    with criterion(2, "coding-map exactness on affine systems", 1) as notes:
        r = coding_eval(decimal, CodeWindow.ending_at_zero((5,) * 40))
        notes.append(f"|Y - 5/9| = {abs(r.point[0] - 5 / 9):.1e}")
        assert abs(r.point[0] - 5 / 9) <= 1e-12
        rng = np.random.default_rng(0)
        for _ in range(50):
            digits = rng.integers(0, 10, 40)
            y = coding_eval(decimal, CodeWindow.ending_at_zero(digits), gaps=False).point[0]
            assert abs(y - sum(d * 10.0 ** -(j + 1) for j, d in enumerate(digits[::-1]))) <= 1e-12
        for k in (1, 10, 40):
            assert coding_eval(cantor, CodeWindow.ending_at_zero((0,) * k)).point[0] == 0.0
        assert coding_eval(cantor, CodeWindow.ending_at_zero((1,) * 40)).point[0] == 1.0


# |m| per system: deep enough that the tolerated fraction is below 1
DEPTHS = {"decimal": 20, "cantor": 20, "barnsley_elton": 100, "two_vertex_planar": 3000}


@pytest.mark.parametrize("name", bi.BUILTIN_NAMES)
def test_c03_certified_bound(name):
    s = bi.builtin(name)
    a = s.declared_rate
    m_abs, extra, trials = DEPTHS[name], 40, 1000
    with criterion(3, f"certified error bound, {name}", 30) as notes:
        # window from m - 40 to 0; Y_m0 uses its last |m| + 1 symbols
        symbols, deep = sample_windows(s, m_abs + 1 + extra, trials, rng_seed=3)
        shallow = fold_windows(s, symbols[:, extra:])
        tail = np.asarray(s.space.distance(shallow, deep)).reshape(-1)
        bound = 2 * coding_constant(s) * a ** ((m_abs - 1) / 2) / (1 - math.sqrt(a))
        frac = float(np.mean(tail > bound))
        allowed = a ** (m_abs / 2) / (1 - math.sqrt(a))
        se = math.sqrt(frac * (1 - frac) / trials)
        notes.append(f"|m|={m_abs}, max tail {tail.max():.3g} vs bound {bound:.3g}, exceed {frac} of {allowed:.3g}")
        assert allowed < 1
        assert frac <= allowed + 3 * se


@pytest.mark.parametrize("name, alt", [("barnsley_elton", [[1.0]]), ("two_vertex_planar", [[1.0, 1.0], [1.0, -1.0]])])
def test_c04_anchor_independence(name, alt):
    s = bi.builtin(name)
    with criterion(4, f"anchor independence, {name}", 30) as notes:
        assert np.allclose(s.space.distance(s.anchors, np.array(alt)), 1.0)
        rep = anchor_independence(s, alt, trials=1000, steps=200, rng_seed=4)
        notes.append(f"exceed {rep.exceed_fraction} vs {rep.failure_bound:.3g}, max {rep.max_discrepancy:.3g}")
        assert rep.exceed_fraction <= rep.failure_bound + 3 * rep.std_error


def _ks_uniform(mu):
    order = np.argsort(mu.points[:, 0], kind="stable")
    x, cdf = mu.points[order, 0], np.cumsum(mu.weights[order])
    before = np.concatenate([[0.0], cdf[:-1]])
    return max(np.abs(cdf - x).max(), np.abs(before - x).max())


def test_c05_invariant_oracles(decimal, cantor):
    with criterion(5, "invariant-measure oracles", 60) as notes:
        mu = estimate_invariant(decimal, 100_000, rng_seed=5).measure
        ks = _ks_uniform(mu)
        mc = estimate_invariant(cantor, 100_000, rng_seed=5).measure
        mean, var = float(mc.mean()[0]), float(mc.variance()[0])
        notes.append(f"KS {ks:.2g}, cantor mean {mean:.4f} var {var:.4f}")
        assert ks < 0.02
        assert abs(mean - 0.5) <= 0.01 and abs(var - 0.125) <= 0.01


def test_c06_generalised_markov_measure(be, planar):
    with criterion(6, "generalised Markov measure", 120) as notes:
        m = cylinder_mass(be, EmpiricalMeasure.dirac([0.0]), (0, 0, 1))
        assert abs(m.estimate - 9 / 64) <= 1e-15
        for k in (1, 2, 3):
            for w in enumerate_words(be.graph, k):
                got = cylinder_mass(be, EmpiricalMeasure.dirac([0.0]), w).estimate
                assert abs(got - math.prod(0.75 if e == 0 else 0.25 for e in w.symbols)) <= 1e-15
        res = estimate_invariant(planar, 100_000, rng_seed=6)
        assert res.converged
        rows = shift_invariance_check(planar, res.measure, 4)
        worst = max(r.left_discrepancy / r.combined_std_error for r in rows if r.combined_std_error > 0)
        right = max(r.right_discrepancy for r in rows)
        notes.append(f"{len(rows)} words, max left/SE {worst:.3f}, max right {right:.1e}")
        for r in rows:
            assert r.left_discrepancy <= 3 * r.combined_std_error
        assert right <= 1e-12


def test_c07_entropy(be, cantor):
    with criterion(7, "entropy of constant-probability systems", 1) as notes:
        one = EmpiricalMeasure.dirac([0.0])
        h3 = entropy_estimate(be, one)
        hc = entropy_estimate(cantor, one)
        notes.append(f"barnsley_elton {h3:.6f}, cantor {hc:.6f}")
        assert abs(h3 + (0.75 * math.log(0.75) + 0.25 * math.log(0.25))) <= 1e-12
        assert abs(h3 - 0.562335) <= 5e-7
        assert abs(hc - math.log(2)) <= 1e-12


@pytest.mark.parametrize("name", ["cantor", "two_vertex_planar"])
def test_c08_holder(name):
    s = bi.builtin(name)
    with criterion(8, f"Hoelder bound, {name}", 30) as notes:
        rep = holder_estimate(s, trials=1000, rng_seed=8)
        n = len(rep.pairs)
        allowed = rep.allowance * n + 3 * math.sqrt(n * rep.allowance * (1 - rep.allowance))
        notes.append(f"alpha {rep.alpha:.4g}, violations {rep.violations} of {n}, allowed {allowed:.3g}")
        assert n == 1000
        assert rep.alpha == pytest.approx(math.log(math.sqrt(s.declared_rate)) / math.log(0.5))
        assert rep.violations <= allowed


def test_c09_trajectory(be):
    with criterion(9, "trajectory comparison", 30) as notes:
        rep = trajectory_comparison(be, [1.0], steps=100, trials=1000, rng_seed=9)
        worst = float(np.max(rep.exceed_fraction - rep.bound_curve - 3 * rep.std_error))
        notes.append(f"max(exceed - bound - 3se) = {worst:.3g}")
        assert worst <= 0


def _exit(argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


def test_c10_hypothesis_diagnostics(capsys):
    with criterion(10, "hypothesis diagnostics", 10) as notes:
        for name in bi.BUILTIN_NAMES:
            assert _exit(["validate", "--system", name, "--seed", 10]) == 0
        capsys.readouterr()
        for cfg, failure in [
            ("broken_normalization", "normalization"),
            ("broken_region", "region_mapping"),
            ("broken_contraction", "contraction"),
        ]:
            code = _exit(["validate", "--config", CONFIGS / f"{cfg}.yaml", "--seed", 10])
            err = capsys.readouterr().err
            assert code != 0 and f"hypothesis violated: {failure}" in err
            notes.append(f"{cfg}: exit {code}")


RUNS = [
    ["validate", "--system", "two_vertex_planar", "--pairs", 20000, "--out", "{d}/v.csv"],
    ["invariant", "--system", "barnsley_elton", "--particles", 5000, "--out", "{d}/mu.csv", "--history", "{d}/h.csv"],
    ["code", "--system", "two_vertex_planar", "--steps", 300, "--trials", 300, "--tol", 10, "--out", "{d}/c.csv"],
    ["holder", "--system", "cantor", "--trials", 500, "--out", "{d}/hold.csv"],
    ["cylinder", "--system", "two_vertex_planar", "--particles", 5000, "--word-length", 3,
     "--out", "{d}/cyl.csv", "--shift-out", "{d}/shift.csv"],
    ["entropy", "--system", "two_vertex_planar", "--particles", 5000],
    ["render", "--system", "two_vertex_planar", "--particles", 5000, "--width", 128, "--height", 128,
     "--out", "{d}/r.pgm", "--hist-out", "{d}/r.csv"],
    ["render", "--system", "cantor", "--source", "coded", "--points", 20000, "--width", 243, "--height", 8,
     "--out", "{d}/rc.pgm"],
    ["anchor", "--system", "two_vertex_planar", "--alt=1,1,1,-1", "--trials", 300, "--out", "{d}/a.csv"],
    ["trajectory", "--system", "barnsley_elton", "--start", 1, "--trials", 300, "--out", "{d}/t.csv"],
]


def test_c11_determinism(tmp_path, capsys):
    with criterion(11, "determinism across reruns and worker counts", 60) as notes:
        outputs = {}
        for tag, workers in [("a", 1), ("b", 1), ("c", 3)]:
            d = tmp_path / tag
            d.mkdir()
            for k, argv in enumerate(RUNS):
                args = [str(a).format(d=d) for a in argv] + ["--seed", "11", "--workers", str(workers)]
                code = _exit(args)
                text = capsys.readouterr().out.replace(str(d), "<dir>")
                outputs[(tag, f"stdout-{k}")] = (code, text)
            for f in sorted(d.iterdir()):
                outputs[(tag, f.name)] = f.read_bytes()
        keys_a = sorted(k[1:] for k in outputs if k[0] == "a")
        for other in ("b", "c"):
            for key in keys_a:
                assert outputs[("a",) + key] == outputs[(other,) + key], (other, key)
        notes.append(f"{len(RUNS)} subcommand runs x 3, {sum(1 for k in outputs if k[0] == 'a')} artefacts")
