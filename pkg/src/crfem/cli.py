"""Command line entry point ``crfem``.

Examples::

    crfem uniform --p 1.5,2,3 --delta 1e-4 --levels 7 --case square_alpha --out results
    crfem afem --p 2 --delta 1e-5 --theta 0.5 --levels 20 --case lshape_sigma --out results

Options may also come from a JSON file (``--config``) whose keys mirror the
long flag names; explicit flags win.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench.cases import CASES
from .bench.experiments import figure_slopes, run_figure_experiment, run_table_experiment, table_rows
from .bench.output import write_figure_svg, write_records_json, write_table_csv
from .mesh import write_vtk

log = logging.getLogger("crfem")

DEFAULTS = {
    "uniform": {"p": [1.5, 2.0, 3.0], "delta": 1e-4, "levels": 7, "case": "square_alpha", "out": "."},
    "afem": {"p": [1.5, 2.0, 2.5, 3.0], "delta": 1e-5, "theta": 0.5, "levels": 20, "uniform_levels": 5,
             "case": "lshape_sigma", "out": "."},
}


def _plist(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def build_parser():
    ap = argparse.ArgumentParser(prog="crfem", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=_plist, help="exponents, comma separated")
    common.add_argument("--delta", type=float)
    common.add_argument("--levels", type=int)
    common.add_argument("--case", choices=CASES)
    common.add_argument("--out", type=str)
    common.add_argument("--config", type=str, help="JSON file with default option values")
    common.add_argument("--vtk", action="store_true", help="write mesh_k<level>.vtk files")
    common.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("uniform", parents=[common], help="uniform refinement and EOC tables")
    pa = sub.add_parser("afem", parents=[common], help="adaptive refinement and convergence plot")
    pa.add_argument("--theta", type=float)
    pa.add_argument("--uniform-levels", dest="uniform_levels", type=int)
    return ap


def resolve_options(args):
    opts = dict(DEFAULTS[args.command])
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        opts.update({k.replace("-", "_"): v for k, v in cfg.items()})
    for k, v in vars(args).items():
        if v is not None and k in opts:
            opts[k] = v
    opts["p"] = _plist(opts["p"])
    return opts


def _tag(p):
    return f"{p:g}"


def _dump_vtk(out, p, recs, multi):
    base = out / f"p{_tag(p)}" if multi else out
    base.mkdir(parents=True, exist_ok=True)
    for r in recs:
        if r.fields:
            f = r.fields
            write_vtk(base / f"mesh_k{r.level}.vtk", f["mesh"],
                      {"eta_A": f["eta_A"], "eta_B": f["eta_B"], "eta": f["eta_A"] + f["eta_B"], "osc": f["osc"]})


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    opts = resolve_options(args)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    multi = len(opts["p"]) > 1

    if args.command == "uniform":
        results = run_table_experiment(opts["p"], levels=opts["levels"], delta=opts["delta"],
                                       case=opts["case"], keep_fields=args.vtk, log=log.info)
        rows = table_rows(results)
        write_table_csv(out / "table1.csv", rows)
        write_table_csv(out / "table3.csv", rows)
        write_records_json(out / "records.json", {"command": "uniform", "options": opts, "runs": results})
        for p, recs in results.items():
            last = [r for r in rows if r["p"] == p][-1]
            print(f"p={_tag(p)} k={last['k']} eoc_F={last['eoc_F']:.3f} eoc_Fstar={last['eoc_Fstar']:.3f}")
            if args.vtk:
                _dump_vtk(out, p, recs, multi)
    else:
        results = run_figure_experiment(opts["p"], delta=opts["delta"], theta=opts["theta"],
                                        levels=opts["levels"], uniform_levels=opts["uniform_levels"],
                                        case=opts["case"], keep_fields=args.vtk, log=log.info)
        slopes = {}
        for p, runs in results.items():
            write_figure_svg(out / f"figure1_p{_tag(p)}.svg", p, runs)
            slopes[p] = figure_slopes(runs)
            print(f"p={_tag(p)} " + " ".join(f"{k}={v:.3f}" for k, v in slopes[p].items()))
            if args.vtk:
                _dump_vtk(out, p, runs["adaptive"], multi)
        write_records_json(out / "records.json",
                           {"command": "afem", "options": opts, "slopes": slopes, "runs": results})
    return 0


if __name__ == "__main__":
    sys.exit(main())
