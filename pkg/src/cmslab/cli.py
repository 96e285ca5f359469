"""Command-line laboratory.

Exit codes: 0 success, 2 hypothesis violation, 3 non-convergence, 4 config
or usage error. Every stochastic subcommand takes ``--seed``; identical
arguments give byte-identical outputs for any ``--workers``.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import builtins as bi
from .coding import (
    anchor_independence,
    certified_depth,
    error_bound,
    holder_estimate,
    sample_windows,
    trajectory_comparison,
)
from .config import ConfigError, load_system
from .graph import CapacityError, enumerate_words
from .markov_measure import (
    cylinder_mass,
    entropy_estimate,
    shift_invariance_check,
    write_cylinder_csv,
    write_shift_csv,
)
from .measure import EmpiricalMeasure, estimate_invariant
from .system import StateSpaceEscape
from .validation import ValidationReport, validate_system

EXIT_OK = 0
EXIT_HYPOTHESIS = 2
EXIT_NONCONVERGED = 3
EXIT_CONFIG = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _system(args):
    if args.config:
        return load_system(args.config)
    probs = None
    if args.probs:
        try:
            probs = [float(p) for p in args.probs.split(",")]
        except ValueError:
            raise UsageError(f"--probs: not a comma-separated list of numbers: {args.probs!r}")
    try:
        return bi.builtin(args.system, probs)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\""))


def _out(path):
    if path is None:
        return None
    p = Path(path)
    if not p.parent.exists():
        raise UsageError(f"cannot write {p}: directory {p.parent} does not exist")
    return p


def _fmt(v) -> str:
    return repr(float(v))


def _write_rows(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(header)
            out.writerows(rows)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}")


# -- subcommands ------------------------------------------------------------


def cmd_validate(args) -> int:
    s = _system(args)
    rep: ValidationReport = validate_system(s, args.grid, args.seed, args.pairs)
    print(f"system: {s.name}")
    for f in ValidationReport.FIELDS:
        print(f"{f}: {getattr(rep, f)!r}")
    for e, d in enumerate(rep.dini):
        print(f"dini[{e}]: {d.verdict} (partial sum {d.series_partial_sums[-1]!r})")
    failed = rep.failures()
    if args.out:
        rows = [[f, repr(getattr(rep, f))] for f in ValidationReport.FIELDS]
        rows += [[f"dini_{e}", d.verdict] for e, d in enumerate(rep.dini)]
        rows.append(["failures", ";".join(failed)])
        _write_rows(_out(args.out), ["field", "value"], rows)
    if failed:
        for name in failed:
            print(f"hypothesis violated: {name}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    print("all hypotheses hold on the sample")
    return EXIT_OK


def _ks_uniform(mu: EmpiricalMeasure, lo: float, hi: float) -> float:
    order = np.argsort(mu.points[:, 0], kind="stable")
    x = mu.points[order, 0]
    cdf = np.cumsum(mu.weights[order])
    u = np.clip((x - lo) / (hi - lo), 0, 1)
    before = np.concatenate([[0.0], cdf[:-1]])
    return float(max(np.max(np.abs(cdf - u)), np.max(np.abs(before - u))))


def cmd_invariant(args) -> int:
    s = _system(args)
    res = estimate_invariant(s, args.particles, args.iters, args.tol, args.seed, args.workers)
    mu = res.measure
    print(f"system: {s.name}")
    print(f"converged: {res.converged} after {len(res.history)} iterations")
    print(f"last distance: {res.history[-1]!r}")
    print(f"particles: {len(mu)}")
    print("mean: " + " ".join(repr(float(v)) for v in mu.mean()))
    print("variance: " + " ".join(repr(float(v)) for v in mu.variance()))
    if s.dimension == 1:
        lo, hi = float(s.bbox[0][0]), float(s.bbox[1][0])
        print(f"ks_vs_uniform[{lo!r},{hi!r}]: {_ks_uniform(mu, lo, hi)!r}")
    if args.out:
        mu.to_csv(_out(args.out))
    if args.history:
        _write_rows(_out(args.history), ["iteration", "distance"], [[i + 1, _fmt(d)] for i, d in enumerate(res.history)])
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_code(args) -> int:
    s = _system(args)
    steps = args.steps if args.steps else certified_depth(s, args.tol)
    symbols, pts = sample_windows(s, steps, args.trials, args.seed, workers=args.workers)
    eb = error_bound(s, steps)
    conv = eb <= args.tol
    print(f"system: {s.name}")
    print(f"depth: {steps}  error_bound: {eb!r}  converged: {conv}  trials: {args.trials}")
    if args.out:
        header = ["trial", "depth"] + [f"x{k}" for k in range(s.dimension)] + ["error_bound", "converged", "last_symbols"]
        rows = [
            [t, steps] + [_fmt(v) for v in p] + [_fmt(eb), int(conv), "-".join(map(str, sym[-8:]))]
            for t, (p, sym) in enumerate(zip(pts, symbols))
        ]
        _write_rows(_out(args.out), header, rows)
    return EXIT_OK if conv else EXIT_NONCONVERGED


def cmd_holder(args) -> int:
    s = _system(args)
    rep = holder_estimate(s, args.trials, args.max_agree, args.seed, args.tol, args.workers)
    print(f"system: {s.name}")
    print(f"alpha: {rep.alpha!r}  constant: {rep.constant!r}  depth: {rep.depth}")
    print(f"pairs: {len(rep.pairs)}  violations: {rep.violations}  allowance_fraction: {rep.allowance!r}")
    if args.out:
        rep.to_csv(_out(args.out))
    allowed = rep.allowance * len(rep.pairs) + 3 * math.sqrt(len(rep.pairs) * rep.allowance)
    return EXIT_OK if rep.violations <= allowed else EXIT_HYPOTHESIS


def _invariant_or_fail(s, args):
    res = estimate_invariant(s, args.particles, args.iters, args.tol, args.seed, args.workers)
    if not res.converged:
        print(f"invariant measure did not converge in {len(res.history)} iterations", file=sys.stderr)
    return res


def cmd_cylinder(args) -> int:
    s = _system(args)
    res = _invariant_or_fail(s, args)
    words = enumerate_words(s.graph, args.word_length)
    masses = [cylinder_mass(s, res.measure, w) for w in words]
    total = sum(m.estimate for m in masses)
    print(f"system: {s.name}")
    print(f"words: {len(words)}  total_mass: {total!r}")
    if args.out:
        write_cylinder_csv(_out(args.out), masses)
    if args.shift_out:
        write_shift_csv(_out(args.shift_out), shift_invariance_check(s, res.measure, args.word_length))
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_entropy(args) -> int:
    s = _system(args)
    res = _invariant_or_fail(s, args)
    h = entropy_estimate(s, res.measure)
    print(f"system: {s.name}")
    print(f"entropy_nats (-sum int p log p dmu): {h!r}")
    print(f"signed_integral (sum int p log p dmu): {-h!r}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def _bbox(args, s):
    if not args.bbox:
        return np.array(s.bbox[0]), np.array(s.bbox[1])
    try:
        vals = [float(v) for v in args.bbox.split(",")]
    except ValueError:
        raise UsageError(f"--bbox: expected comma-separated numbers, got {args.bbox!r}")
    d = s.dimension
    if len(vals) != 2 * d:
        raise UsageError(f"--bbox needs {2 * d} numbers: lower coordinates then upper coordinates")
    return np.array(vals[:d]), np.array(vals[d:])


def histogram(points: np.ndarray, weights: np.ndarray, lo, hi, shape) -> np.ndarray:
    """Mass per cell on a regular grid; points outside ``[lo, hi]`` are dropped."""
    d = points.shape[1]
    idx = []
    inside = np.all((points >= lo) & (points <= hi), axis=1)
    for k in range(d):
        n = shape[k]
        i = np.floor((points[inside, k] - lo[k]) / (hi[k] - lo[k]) * n).astype(int)
        idx.append(np.clip(i, 0, n - 1))
    out = np.zeros(shape)
    np.add.at(out, tuple(idx), weights[inside])
    return out


def write_pgm(path, grid: np.ndarray) -> None:
    """Binary P5, max-normalised to 255, first row at the top."""
    m = grid.max()
    img = np.floor(grid / m * 255 + 0.5).astype(np.uint8) if m > 0 else np.zeros(grid.shape, np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def cmd_render(args) -> int:
    s = _system(args)
    lo, hi = _bbox(args, s)
    if args.source == "measure":
        res = _invariant_or_fail(s, args)
        pts, w = res.measure.points, res.measure.weights
    else:
        steps = args.steps or 40
        _, pts = sample_windows(s, steps, args.points, args.seed, workers=args.workers)
        w = np.full(len(pts), 1.0 / len(pts))
    if s.dimension == 1:
        hist = histogram(pts, w, lo, hi, (args.width,))
        grid = np.repeat(hist[None, :], args.height, axis=0)
        if args.hist_out:
            edges = np.linspace(lo[0], hi[0], args.width + 1)
            _write_rows(
                _out(args.hist_out),
                ["bin", "left", "right", "mass"],
                [[i, _fmt(edges[i]), _fmt(edges[i + 1]), _fmt(hist[i])] for i in range(args.width)],
            )
    elif s.dimension == 2:
        hist = histogram(pts, w, lo, hi, (args.width, args.height))
        grid = hist.T[::-1]
        if args.hist_out:
            rows = [[i, j, _fmt(hist[i, j])] for i, j in zip(*np.nonzero(hist))]
            _write_rows(_out(args.hist_out), ["col", "row_from_bottom", "mass"], rows)
    else:
        raise UsageError("render supports dimension 1 or 2")
    if grid.max() <= 0:
        raise UsageError("empty point cloud inside the render box")
    out = _out(args.out)
    if out is not None:
        try:
            write_pgm(out, grid)
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc}")
    occupied = int(np.count_nonzero(grid[0] if s.dimension == 1 else grid))
    print(f"system: {s.name}  source: {args.source}  points: {len(pts)}  occupied_cells: {occupied}")
    return EXIT_OK


def _point(text, d) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"not a point: {text!r}")
    if len(vals) % d:
        raise UsageError(f"point {text!r} does not have dimension {d}")
    return np.array(vals).reshape(-1, d)


def cmd_anchor(args) -> int:
    s = _system(args)
    alt = _point(args.alt, s.dimension)
    rep = anchor_independence(s, alt, args.trials, args.steps or 200, args.seed, args.workers)
    print(f"system: {s.name}")
    print(f"max_discrepancy: {rep.max_discrepancy!r}  bound: {rep.bound!r}")
    print(f"exceed_fraction: {rep.exceed_fraction!r}  failure_bound: {rep.failure_bound!r}")
    if args.out:
        _write_rows(_out(args.out), ["trial", "discrepancy"], [[i, _fmt(d)] for i, d in enumerate(rep.discrepancies)])
    ok = rep.exceed_fraction <= rep.failure_bound + 3 * rep.std_error
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def cmd_trajectory(args) -> int:
    s = _system(args)
    x = _point(args.start, s.dimension)[0]
    rep = trajectory_comparison(s, x, args.steps or 100, args.trials, args.seed, args.workers)
    worst = float(np.max(rep.exceed_fraction - rep.bound_curve - 3 * rep.std_error))
    print(f"system: {s.name}  start_distance: {rep.start_distance!r}")
    print(f"max(exceed - bound - 3se): {worst!r}")
    if args.out:
        _write_rows(
            _out(args.out),
            ["moves", "exceed_fraction", "bound", "std_error"],
            [[j + 1, _fmt(f), _fmt(b), _fmt(e)] for j, (f, b, e) in enumerate(zip(rep.exceed_fraction, rep.bound_curve, rep.std_error))],
        )
    return EXIT_OK if worst <= 0 else EXIT_HYPOTHESIS


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cmslab", description="Contractive Markov system laboratory")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, particles=10_000):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--system", choices=bi.BUILTIN_NAMES, help="built-in system")
        src.add_argument("--config", help="system-definition YAML file")
        sp.add_argument("--probs", help="comma-separated constant probabilities (decimal, cantor)")
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out")
        sp.add_argument("--particles", type=int, default=particles)
        sp.add_argument("--iters", type=int, default=200)
        sp.add_argument("--tol", type=float, default=1e-3)
        sp.add_argument("--steps", type=int, default=None)
        sp.add_argument("--trials", type=int, default=1000)
        return sp

    sp = common(sub.add_parser("validate", help="check the CMS hypotheses on samples"))
    sp.add_argument("--grid", type=int, default=64)
    sp.add_argument("--pairs", type=int, default=100_000)
    sp.set_defaults(func=cmd_validate)

    sp = common(sub.add_parser("invariant", help="estimate the invariant measure"))
    sp.add_argument("--history")
    sp.set_defaults(func=cmd_invariant)

    sp = common(sub.add_parser("code", help="evaluate the coding map on sampled windows"))
    sp.set_defaults(func=cmd_code, tol=1e-9)

    sp = common(sub.add_parser("holder", help="Hoelder check on agreeing-tail pairs"))
    sp.add_argument("--max-agree", type=int, default=20)
    sp.set_defaults(func=cmd_holder, tol=1e-9)

    sp = common(sub.add_parser("cylinder", help="cylinder masses of the generalised Markov measure"))
    sp.add_argument("--word-length", type=int, default=2)
    sp.add_argument("--shift-out")
    sp.set_defaults(func=cmd_cylinder)

    sp = common(sub.add_parser("entropy", help="entropy functional"))
    sp.set_defaults(func=cmd_entropy)

    sp = common(sub.add_parser("render", help="P5 raster of the invariant measure or coded points"))
    sp.add_argument("--source", choices=("measure", "coded"), default="measure")
    sp.add_argument("--points", type=int, default=100_000)
    sp.add_argument("--width", type=int, default=512)
    sp.add_argument("--height", type=int, default=512)
    sp.add_argument("--bbox", help="lower coordinates then upper coordinates, comma-separated")
    sp.add_argument("--hist-out")
    sp.set_defaults(func=cmd_render)

    sp = common(sub.add_parser("anchor", help="anchor independence of the coding map"))
    sp.add_argument("--alt", required=True, help="alternative anchors, flattened, comma-separated")
    sp.set_defaults(func=cmd_anchor)

    sp = common(sub.add_parser("trajectory", help="chain from a point vs replay from its anchor"))
    sp.add_argument("--start", required=True, help="start point, comma-separated")
    sp.set_defaults(func=cmd_trajectory)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StateSpaceEscape as exc:
        print(f"hypothesis violated: state space escape: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS


if __name__ == "__main__":
    sys.exit(main())
