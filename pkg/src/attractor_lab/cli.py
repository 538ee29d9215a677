"""Command line front end.

Exit codes: 0 pass, 1 criterion failure, 2 invalid or degenerate input,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import discretization as disc
from .config import load_config
from .dynamics import find_connections
from .equilibria import (
    build_counterexample_a,
    continue_in_tau,
    enumerate_equilibria,
    find_record,
    scan_fixed_points,
)
from .errors import DegenerateParameterError, InvalidInputError, LabError
from .model import ProblemSpec, SaturatingDiffusion
from .modelflow import model_connection_search
from .morse import assemble_connection_matrix, check_consistency, predicted_graph
from .pipeline import lab_for, verify
from .spectrum import attach_morse_indices, spectrum_of

log = logging.getLogger("attractor_lab")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset, tuple)):
        return sorted(o) if isinstance(o, (set, frozenset)) else list(o)
    return str(o)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _emit(args, text: str, name: str):
    out = getattr(args, "out", None)
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text)
    sys.stdout.write(text)


def _config(args):
    return load_config(getattr(args, "config", None), lam=getattr(args, "lam", None),
                       K=getattr(args, "K", None), diffusion=getattr(args, "diffusion", None),
                       samples=getattr(args, "samples", None), seed=getattr(args, "seed", None),
                       out_dir=getattr(args, "out", None))


def _indexed(cfg):
    lab = lab_for(cfg)
    return lab.spec, lab.equilibria, lab.spectra


# -- subcommands ----------------------------------------------------------------

def cmd_equilibria(args) -> int:
    cfg = _config(args)
    if args.counterexample or cfg.diffusion == "counterexample":
        delta, J = args.counterexample or (cfg.cx_delta, cfg.cx_J)
        ca = build_counterexample_a(SaturatingDiffusion(), cfg.lam, delta, J, cfg.K)
        spec = ProblemSpec(cfg.lam, a=ca)
        recs = scan_fixed_points(spec, 1, "+", cfg.K)
        recs, _ = attach_morse_indices(spec, recs)
        _emit(args, dumps({"diffusion": ca.describe(),
                           "positive_equilibria": [r.to_dict() for r in recs]}),
              "counterexample_equilibria.json")
        return 0
    if args.tau_grid:
        return _tau(args, cfg, args.tau_grid)
    _, recs, _ = _indexed(cfg)
    _emit(args, dumps([r.to_dict() for r in recs]), "equilibria.json")
    return 0


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    spec, recs, reports = _indexed(cfg)
    if args.branch:
        j, sign = int(args.branch[0]), args.branch[1]
        rec = find_record(recs, j, sign) if j else recs[0]
        reports = [spectrum_of(spec, rec)]
    _emit(args, dumps([r.to_dict() for r in reports]), "spectrum.json")
    return 0


def _trajectory_csv(dep) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["t", "energy", "lap", "distance_to_nearest_equilibrium"])
    lg = dep.log
    for t, e, lap, d in zip(lg.times, lg.energies, lg.laps, lg.distances):
        w.writerow([repr(float(t)), repr(float(e)), "" if lap is None else lap, repr(float(d))])
    return buf.getvalue()


def cmd_connect(args) -> int:
    cfg = _config(args)
    spec, recs, _ = _indexed(cfg)
    if args.source:
        j, sign = int(args.source[0]), args.source[1]
        sources = [find_record(recs, j, sign) if j else recs[0]]
    else:
        sources = [r for r in recs if r.morse_index > 0]
    out = []
    for src in sources:
        s = find_connections(spec, src, recs, samples=cfg.samples, seed=cfg.seed,
                             offset=cfg.departure, r_capture=cfg.r_capture, dwell=cfg.dwell,
                             T_max=cfg.T_max, tol=cfg.step_tol)
        if args.out:
            d = Path(args.out) / "trajectories"
            d.mkdir(parents=True, exist_ok=True)
            for dep in s.departures:
                (d / f"{src.name}_{dep.index:03d}.csv").write_text(_trajectory_csv(dep))
        out.append({
            "source": src.name,
            "unstable_dim": s.unstable_dim,
            "targets": sorted(f"phi_{j}^{g}" for j, g in s.targets),
            "unresolved": s.unresolved,
            "samples": [{"index": d.index, "kind": d.kind, "weights": d.weights,
                         "target": d.target if d.target == "unresolved" else f"phi_{d.target[0]}^{d.target[1]}",
                         "energy_decreasing": d.energy_drop_ok} for d in s.departures],
        })
    _emit(args, dumps(out), "connections.json")
    return 1 if any(o["unresolved"] for o in out) else 0


def cmd_morse_check(args) -> int:
    if args.matrix_only:
        m = assemble_connection_matrix(args.N)
        rep = {"matrix": m.to_dict(), "axioms": m.check_axioms(),
               "predicted_graph": predicted_graph(args.N).to_dict()}
        _emit(args, dumps(rep), "morse.json")
        return 0 if all(rep["axioms"].values()) else 1
    cfg = _config(args)
    lab = lab_for(cfg)
    if lab.N < 1:
        raise InvalidInputError("morse-check needs at least one nontrivial branch")
    delta = assemble_connection_matrix(lab.N)
    rep = check_consistency(lab.graph, delta, predicted_graph(lab.N))
    body = {"consistency": rep.to_dict(), "matrix": delta.to_dict(), "axioms": delta.check_axioms(),
            "graph": lab.graph.to_dict()}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "graph.dot").write_text(lab.graph.to_dot())
    _emit(args, dumps(body), "morse.json")
    return 0 if rep.ok and all(body["axioms"].values()) else 1


def cmd_modelflow(args) -> int:
    s = model_connection_search(args.n, args.samples, args.seed)
    if args.format == "dot":
        _emit(args, s.graph.to_dot(), "model_graph.dot")
    else:
        _emit(args, dumps({"graph": s.graph.to_dict(), "unresolved": s.unresolved}),
              "model_graph.json")
    return 1 if s.unresolved else 0


def _tau(args, cfg, points) -> int:
    cont = continue_in_tau(cfg.spec(), args.sign, np.linspace(0.0, 1.0, points), cfg.K)
    rows = []
    for sl in cont.slices:
        rows.append({"tau": sl.tau, "count": len(sl.equilibria),
                     "equilibria": [{"name": r.name, "D": r.D,
                                     "conley_dim": spectrum_of(sl.spec, r).positive_count}
                                    for r in sl.equilibria]})
    _emit(args, dumps({"anchor": list(cont.anchor), "D_anchor": cont.d_anchor,
                       "continuity_constant": cont.continuity_constant, "slices": rows}),
          "tau_continuation.json")
    return 0


def cmd_continue_tau(args) -> int:
    return _tau(args, _config(args), args.points)


def cmd_sweep(args) -> int:
    cfg = _config(args)
    lams = [float(v) for v in args.lambdas.split(",")]
    a0 = float(cfg.spec(1.0).a(0.0))
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["lambda", "count", "branch", "sign", "D", "energy", "morse_index"])
    for lam in lams:
        k = max(1, round(np.sqrt(lam / a0)))
        if any(abs(lam - a0 * q * q) < 1e-6 for q in (k - 1, k, k + 1) if q >= 1):
            log.warning("skipping lambda = %g: too close to a bifurcation value", lam)
            continue
        spec = cfg.spec(lam)
        try:
            recs, _ = attach_morse_indices(spec, enumerate_equilibria(spec, cfg.K))
        except DegenerateParameterError as exc:
            log.warning("skipping lambda = %g: %s", lam, exc)
            continue
        for r in recs:
            w.writerow([lam, len(recs), r.j, r.sign, repr(r.D), repr(r.energy), r.morse_index])
    _emit(args, buf.getvalue(), "sweep.csv")
    return 0


def cmd_counterexample(args) -> int:
    cfg = _config(args)
    args.counterexample = (cfg.cx_delta if args.delta is None else args.delta,
                           cfg.cx_J if args.J is None else args.J)
    args.tau_grid = None
    return cmd_equilibria(args)


def cmd_verify_paper(args) -> int:
    cfg = _config(args)
    only = {int(v) for v in args.only.split(",")} if args.only else None
    report, code = verify(cfg, only)
    _emit(args, dumps(report), "verify_report.json")
    for r in report["criteria"]:
        log.info("criterion %2d %-40s %s", r["id"], r["title"], r["status"].upper())
    return code


# -- parser ---------------------------------------------------------------------

def _common(p, lam=True):
    p.add_argument("--config", help="YAML or JSON run configuration")
    if lam:
        p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--diffusion", choices=("default", "constant", "counterexample"))
    p.add_argument("--out", help="directory for output files")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="attractor-lab")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("equilibria")
    _common(p)
    p.add_argument("--tau-grid", type=int, metavar="n")
    p.add_argument("--sign", default="+", choices=("+", "-"))
    p.add_argument("--counterexample", nargs=2, type=float, metavar=("delta", "J"))
    p.set_defaults(fn=cmd_equilibria)

    p = sub.add_parser("spectrum")
    _common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--all", action="store_true")
    g.add_argument("--branch", nargs=2, metavar=("j", "sign"))
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("connect")
    _common(p)
    p.add_argument("--source", nargs=2, metavar=("j", "sign"))
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_connect)

    p = sub.add_parser("morse-check")
    _common(p)
    p.add_argument("--matrix-only", action="store_true")
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_morse_check)

    p = sub.add_parser("modelflow")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "dot"), default="json")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_modelflow)

    p = sub.add_parser("continue-tau")
    _common(p)
    p.add_argument("--points", type=int, default=11)
    p.add_argument("--sign", default="+", choices=("+", "-"))
    p.set_defaults(fn=cmd_continue_tau)

    p = sub.add_parser("sweep")
    _common(p, lam=False)
    p.add_argument("--lambdas", default="0.5,2,5,10")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("counterexample")
    _common(p)
    p.add_argument("--delta", type=float, help="default 0.02, or a_params.delta")
    p.add_argument("--J", type=float, help="default 6, or a_params.J")
    p.set_defaults(fn=cmd_counterexample)

    p = sub.add_parser("verify-paper")
    _common(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--only", help="comma separated criterion ids")
    p.set_defaults(fn=cmd_verify_paper)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.fn(args)
    except LabError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
