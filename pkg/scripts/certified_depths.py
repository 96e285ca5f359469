"""Coding constants, certified depths and error bounds for the built-in systems."""
import argparse

from cmslab import builtins as bi
from cmslab.coding import certified_depth, coding_constant, error_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tol", type=float, nargs="+", default=[1e-3, 1e-6, 1e-9])
    ap.add_argument("--steps", type=int, nargs="+", default=[40, 200, 400])
    args = ap.parse_args()

    head = ["system", "a", "C"] + [f"depth@{t:g}" for t in args.tol] + [f"bound@{n}" for n in args.steps]
    print(",".join(head))
    for name in bi.BUILTIN_NAMES:
        s = bi.builtin(name)
        row = [name, repr(s.declared_rate), repr(coding_constant(s))]
        row += [str(certified_depth(s, t)) for t in args.tol]
        row += [f"{error_bound(s, n):.6g}" for n in args.steps]
        print(",".join(row))


if __name__ == "__main__":
    main()
