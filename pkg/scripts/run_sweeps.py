"""Run the metric-asymptotics sweeps and write one CSV plus a JSON manifest per sweep.

    python scripts/run_sweeps.py --out results/sweeps --workers 4
"""

import argparse
import sys

from locgn.experiments import SWEEPS, SweepConfig, parse_grid

DEFAULT_GRIDS = {
    "long_cut_edge": "1..64",
    "intricate_core": "1..64",
    "signpost": "2^-6..2^6",
}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/sweeps")
    p.add_argument("--only", choices=sorted(SWEEPS), action="append")
    p.add_argument("--mesh-h", type=float, default=0.01)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--workers", type=int, default=None)
    args = p.parse_args(argv)
    cfg = SweepConfig(h=args.mesh_h, n_starts=args.starts, workers=args.workers)
    failed = False
    for name in args.only or sorted(SWEEPS):
        res = SWEEPS[name](parse_grid(DEFAULT_GRIDS[name]), cfg)
        res.write(args.out)
        print(f"\n== {name}")
        print(f"{'param':>10} {'C_K':>10} {'mu_K':>9} {'test Q':>9} conv")
        for r in res.rows:
            print(f"{r['param']:10.4g} {r['C_K_estimate']:10.6f} {r['mu_K_estimate']:9.5f} "
                  f"{r['test_family_Q']:9.5f} {'y' if r['converged'] else 'n'}")
        for k, v in res.verdicts.items():
            print(f"  {'PASS' if v else 'FAIL'} {k}")
        for f in res.flags:
            print(f"  flag: {f}")
        failed |= res.failed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
