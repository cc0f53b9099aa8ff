"""Age density V_t/t from the joint (X, Y, V, R) law against the generalised arcsine density.

    python scripts/age_law.py --beta 0.3 0.5 0.7 -o age.csv
"""

import argparse

import numpy as np

from ctrw_fdd.fdd import joint_xyvr, marginal_density
from ctrw_fdd.io import write_table
from ctrw_fdd.renewal_kernels import ModelSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beta", type=float, nargs="+", default=[0.3, 0.5, 0.7])
    ap.add_argument("--t", type=float, default=2.0)
    ap.add_argument("--points", type=int, default=19)
    ap.add_argument("-o", "--output")
    args = ap.parse_args()

    u = np.linspace(0.0, 1.0, args.points + 2)[1:-1]
    rows = []
    for beta in args.beta:
        for name, make in (("example1", ModelSpec.example1), ("example2", ModelSpec.example2)):
            got = args.t * marginal_density(joint_xyvr(make(beta), 0.0, 0.0, args.t), "v", args.t * u)
            want = np.sin(np.pi * beta) / np.pi * u ** -beta * (1 - u) ** (beta - 1)
            print(f"{name} beta={beta}: max |error| {np.abs(got - want).max():.2e}")
            rows += [(name, beta, ui, gi, wi) for ui, gi, wi in zip(u, got, want)]
    if args.output:
        write_table(rows, ("model", "beta", "u", "kernel", "arcsine"), {"t": args.t}, "csv", args.output)


if __name__ == "__main__":
    main()
