"""KS distance of the CTRW position X^c_t (Example1) from the E_t law as the scale c grows.

    python scripts/prelimit_ks.py --beta 0.5 --scales 100 1000 10000 --paths 100000
"""

import argparse

from ctrw_fdd.ecdf import ks_critical_value, ks_distance
from ctrw_fdd.mc_sim import CtrwConfig, WaitingLaw, simulate_ctrw
from ctrw_fdd.renewal_kernels import ModelSpec
from ctrw_fdd.stable_core import density_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--scales", type=float, nargs="+", default=[1e2, 1e3, 1e4])
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20261016)
    ap.add_argument("--pareto", action="store_true", help="Pareto-tailed waiting times instead of exact stable")
    args = ap.parse_args()

    tab = density_table(args.beta)
    crit = ks_critical_value(args.paths)
    law = WaitingLaw.PARETO_TAIL if args.pareto else WaitingLaw.EXACT_STABLE
    scales = sorted(args.scales)
    if args.pareto:
        runs = [(c, simulate_ctrw(ModelSpec.example1(args.beta), CtrwConfig(c, law), [args.t], args.seed,
                                  args.paths).at_scale(c)[0]) for c in scales]
    else:
        # one run at the largest scale; smaller scales by grouping steps
        top = scales[-1]
        s = simulate_ctrw(ModelSpec.example1(args.beta), CtrwConfig(top), [args.t], args.seed, args.paths,
                          coarsen=tuple(int(round(top / c)) for c in scales))
        runs = [(c, s.at_scale(c)[0]) for c in scales]
    print(f"1% critical value at n={args.paths}: {crit:.5f}")
    for c, x in runs:
        print(f"c={c:>10g}  KS={ks_distance(x[:, 0], lambda z: tab.inverse_cdf(args.t, z)):.5f}")


if __name__ == "__main__":
    main()
