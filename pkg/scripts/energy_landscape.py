"""Ground-state energy of a graph across a mass grid, with the blow-up
certificate for masses above the line's critical mass.

    python scripts/energy_landscape.py --family tadpole --masses 1.0,1.5,1.7,2.0,2.6,3.0
"""

import argparse
import json

from locgn.constants import MU_R
from locgn.families import FAMILIES
from locgn.ground_state import blowup_probe, minimize_at_mass


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--family", default="tadpole", choices=sorted(FAMILIES))
    p.add_argument("--masses", default="1.0,1.5,1.7,2.0,2.6,3.0")
    p.add_argument("--json", help="write all results to this file")
    args = p.parse_args(argv)
    needs_param = {"long_cut_edge", "signpost", "intricate_core"}
    g = (FAMILIES[args.family](1) if args.family in needs_param else FAMILIES[args.family]()).build()
    out = []
    for mu in (float(x) for x in args.masses.split(",")):
        r = minimize_at_mass(g, mu)
        d = r.to_dict()
        line = f"mu={mu:<6g} {r.status.value:24s} E={r.energy:.6g}"
        if r.lagrange_multiplier is not None and r.status.value == "NegativeMinimizerFound":
            line += f"  lambda={r.lagrange_multiplier:.5f}  flux={r.kirchhoff_flux_max:.1e}"
        if mu > MU_R:
            cert = blowup_probe(g, mu)
            d["blowup_certificate"] = cert.to_dict()
            line += f"  blow-up certificate valid={cert.valid}"
        print(line)
        out.append(d)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(out, fh, indent=2, default=float)


if __name__ == "__main__":
    main()
