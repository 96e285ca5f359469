"""Two-vertex planar system: invariant measure, its atoms, cylinder and
shift tables, and a raster of the support."""
import argparse
from pathlib import Path

import numpy as np

from cmslab import builtins as bi
from cmslab.cli import histogram, write_pgm
from cmslab.markov_measure import entropy_estimate, shift_invariance_check, write_shift_csv
from cmslab.measure import estimate_invariant


def atoms(mu, decimals=3):
    """Mass grouped by rounded location, heaviest first."""
    keys = np.round(mu.points, decimals)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    mass = np.bincount(inv.reshape(-1), weights=mu.weights)
    order = np.argsort(-mass)
    return uniq[order], mass[order]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--particles", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--word-length", type=int, default=3)
    ap.add_argument("--out", default="out/planar")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    s = bi.two_vertex_planar()
    res = estimate_invariant(s, args.particles, rng_seed=args.seed)
    mu = res.measure
    print(f"converged {res.converged} in {len(res.history)} iterations, {len(mu)} atoms")
    print(f"mass in K1: {mu.weights[s.vertex_of(mu.points) == 1].sum():.4f}")
    where, mass = atoms(mu)
    for p, m in zip(where[:5], mass[:5]):
        print(f"  atom near ({p[0]:+.3f}, {p[1]:+.3f}): {m:.4f}")
    print(f"entropy (nats): {entropy_estimate(s, mu):.6f}")

    rows = shift_invariance_check(s, mu, args.word_length)
    write_shift_csv(out / "shift.csv", rows)
    ratio = max((r.left_discrepancy / r.combined_std_error for r in rows if r.combined_std_error > 0), default=0)
    print(f"shift check: {len(rows)} words, max left discrepancy / SE {ratio:.3f}")

    lo, hi = np.array([-2.0, -2.0]), np.array([2.0, 2.0])
    grid = histogram(mu.points, mu.weights, lo, hi, (256, 256))
    write_pgm(out / "support.pgm", np.sqrt(grid).T[::-1])
    mu.to_csv(out / "measure.csv")
    print(f"wrote {out}/shift.csv, support.pgm, measure.csv")


if __name__ == "__main__":
    main()
