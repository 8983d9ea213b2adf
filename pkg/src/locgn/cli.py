"""Command line entry points.

``locgn <command> ...`` dispatches to the same handlers that are also
installed as standalone commands (``gn-constant``, ``ground-state``,
``threshold``, ``family``, ``sweep``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .constants import MU_R
from .experiments import SWEEPS, SweepConfig, parse_grid
from .families import FAMILIES
from .gn import maximize_gn
from .graph import classify, load_graph
from .ground_state import Status, blowup_probe, minimize_at_mass, threshold_scan
from .mesh import Mesh, MeshConfig, save_snapshot


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2, default=float)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _mesh_config(args) -> MeshConfig:
    return MeshConfig(h=args.mesh_h, L_trunc=args.ltrunc)


def _add_mesh_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mesh-h", type=float, default=0.01, help="cell size on bounded edges")
    p.add_argument("--ltrunc", type=float, default=None,
                   help="half-line truncation length (default: from the expected decay rate)")


def _gn_parser(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="graph JSON file")
    _add_mesh_args(p)
    p.add_argument("--starts", type=int, default=8, help="number of random starts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--richardson", action="store_true", help="also report an extrapolated value")
    p.add_argument("--snapshot", help="CSV file for the optimizer")
    p.add_argument("--out", help="report JSON (stdout if omitted)")


def run_gn(args) -> int:
    g = load_graph(args.graph)
    rep = maximize_gn(g, _mesh_config(args), n_starts=args.starts, seed=args.seed,
                      richardson=args.richardson)
    if args.snapshot:
        save_snapshot(rep.optimizer, args.snapshot)
    _emit(rep.to_dict(), args.out)
    return 0 if rep.converged else 2


def _gs_parser(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True)
    p.add_argument("--mass", type=float, required=True)
    _add_mesh_args(p)
    p.add_argument("--snapshot", help="CSV file for the final iterate")
    p.add_argument("--out")


def run_ground_state(args) -> int:
    g = load_graph(args.graph)
    res = minimize_at_mass(g, args.mass, config=_mesh_config(args))
    out = res.to_dict()
    out["classification"] = classify(g).to_dict()
    if res.status is Status.UNBOUNDED and args.mass > MU_R:
        out["blowup_certificate"] = blowup_probe(g, args.mass).to_dict()
    if args.snapshot and res.minimizer is not None:
        save_snapshot(res.minimizer, args.snapshot)
    _emit(out, args.out)
    return 0 if res.status is not Status.NOT_CONVERGED else 2


def _threshold_parser(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True)
    p.add_argument("--lo", type=float, default=None)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--compare-gn", action="store_true",
                   help="also maximize the quotient and report the consistency delta")
    _add_mesh_args(p)
    p.add_argument("--out")


def run_threshold(args) -> int:
    g = load_graph(args.graph)
    mesh = Mesh.from_graph(g, _mesh_config(args))
    gn = maximize_gn(g, mesh=mesh) if args.compare_gn else None
    scan = threshold_scan(g, args.lo, args.hi, tol=args.tol, mesh=mesh, gn=gn)
    _emit(scan.to_dict(), args.out)
    return 2 if scan.inconsistent else 0


def _family_parser(p: argparse.ArgumentParser) -> None:
    p.add_argument("--name", required=True, choices=sorted(FAMILIES))
    p.add_argument("--l", type=float, help="cut edge length (long_cut_edge, signpost)")
    p.add_argument("--n", type=int, help="half the number of parallel edges minus one (intricate_core)")
    p.add_argument("--circle", type=float, help="circle length (signpost, tadpole loop)")
    p.add_argument("--neck", type=float, help="neck length (tadpole)")
    p.add_argument("--edge-len", type=float, help="parallel edge length (intricate_core)")
    p.add_argument("--pendant", type=float, help="pendant length (terminal_pendant)")
    p.add_argument("--lens", help="comma-separated edge lengths (cycle_covered)")
    p.add_argument("--emit", help="graph JSON file (stdout if omitted)")


def _family_spec(args):
    name = args.name
    kw = {}
    if name == "tadpole":
        kw = {k: v for k, v in (("loop_len", args.circle), ("neck_len", args.neck)) if v is not None}
    elif name == "long_cut_edge":
        kw = {"ell": args.l if args.l is not None else 1.0}
    elif name == "signpost":
        kw = {"ell": args.l if args.l is not None else 1.0}
        if args.circle is not None:
            kw["circle_len"] = args.circle
    elif name == "intricate_core":
        kw = {"n": args.n if args.n is not None else 1}
        if args.edge_len is not None:
            kw["edge_len"] = args.edge_len
    elif name == "cycle_covered" and args.lens:
        lens = tuple(float(x) for x in args.lens.split(","))
        kw = {"k": len(lens), "lens": lens}
    elif name == "terminal_pendant" and args.pendant is not None:
        kw = {"pendant_len": args.pendant}
    return FAMILIES[name](**kw)


def run_family(args) -> int:
    spec = _family_spec(args)
    g = spec.build()
    cls = classify(g)
    if args.emit:
        g.to_json(args.emit)
        print(f"{args.emit}: {cls.case_label.value}, |K| = {g.core_length:g}, {g.n_halflines} half-line(s)")
    else:
        print(g.to_json())
    return 0


def _sweep_parser(p: argparse.ArgumentParser) -> None:
    p.add_argument("--experiment", required=True, choices=sorted(SWEEPS))
    p.add_argument("--grid", help='e.g. "2^-6..2^6", "1..64" or "1,2,4"')
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mesh-h", type=float, default=0.01)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $LOCGN_WORKERS or 1)")


def run_sweep(args) -> int:
    cfg = SweepConfig(h=args.mesh_h, n_starts=args.starts, seed=args.seed, workers=args.workers)
    fn = SWEEPS[args.experiment]
    res = fn(parse_grid(args.grid), cfg) if args.grid else fn(cfg=cfg)
    csv_path, manifest = res.write(args.out)
    for k, v in res.verdicts.items():
        print(f"{'PASS' if v else 'FAIL'}  {k}")
    for f in res.flags:
        print(f"flag: {f}")
    print(f"wrote {csv_path} and {manifest}")
    return 1 if res.failed else 0


COMMANDS = {
    "gn-constant": (_gn_parser, run_gn, "maximize the reduced GN quotient on a graph"),
    "ground-state": (_gs_parser, run_ground_state, "minimize the energy at a fixed mass"),
    "threshold": (_threshold_parser, run_threshold, "bisect for the critical mass"),
    "family": (_family_parser, run_family, "build a named graph family"),
    "sweep": (_sweep_parser, run_sweep, "run a parameter sweep"),
}


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="locgn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (build, _, help_) in COMMANDS.items():
        build(sub.add_parser(name, help=help_))
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return COMMANDS[args.command][1](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _standalone(name: str):
    def entry(argv=None) -> int:
        build, run, help_ = COMMANDS[name]
        parser = argparse.ArgumentParser(prog=name, description=help_)
        parser.add_argument("-v", "--verbose", action="store_true")
        build(parser)
        args = parser.parse_args(argv)
        _setup_logging(args.verbose)
        try:
            return run(args)
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    return entry


gn_constant_main = _standalone("gn-constant")
ground_state_main = _standalone("ground-state")
threshold_main = _standalone("threshold")
family_main = _standalone("family")
sweep_main = _standalone("sweep")


if __name__ == "__main__":
    sys.exit(main())
