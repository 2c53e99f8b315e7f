"""Command line front end.

    nhcircles [--config F] [--out DIR] [--workers N] [--seed N] [--tol name=value ...] CMD ...

Exit codes: 0 success, 2 configuration error, 3 partial failure (ERROR cells
or failed points), 4 resume mismatch.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import ConfigError, NHError, ResumeMismatchError
from .graph_transform import (LipschitzGraph, basin_probe, find_invariant_graph, gt1_feasibility,
                              perturbation_bounds)
from .model_maps import (GOLDEN, ClosedFormMap, IntegratedMap, IntegratorOpts, SpinOrbitParams,
                         rho_coordinates, rho_tilde_coordinates)
from .normal_form import compute_normal_form, gt2_region_test
from .russmann import CalphaConfig, solve_translated_curve, trace_c_alpha, write_calpha_csv
from .sweep import DEFAULT_TOLERANCES, SweepConfig, config_from_dict, load_config, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_RESUME = 0, 2, 3, 4


def _parse_tol(items):
    out = {}
    for it in items or []:
        if "=" not in it:
            raise ConfigError(f"--tol expects name=value, got {it!r}")
        k, v = it.split("=", 1)
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {k!r}")
        out[k] = type(DEFAULT_TOLERANCES[k])(float(v))
    return out


def _config(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = SweepConfig(eps=args.eps if args.eps is not None else 1e-3)
    d = cfg.content()
    d["classifier"] = dict(d["classifier"])
    d["potential"] = {"terms": d["potential"]}
    d["tolerances"].update(_parse_tol(args.tol))
    if getattr(args, "eps", None) is not None:
        d["eps"] = args.eps
    if args.seed is not None:
        d["seed"] = args.seed
    d["workers"] = args.workers or cfg.workers
    d["output_dir"] = args.out or cfg.output_dir
    return config_from_dict(d)


def _point(cfg, args):
    return SpinOrbitParams(eta=args.eta, nu=cfg.alpha + args.dnu if args.nu is None else args.nu,
                           eps=cfg.eps, alpha=cfg.alpha, dioph_gamma=cfg.dioph_gamma,
                           dioph_tau=cfg.dioph_tau, potential=cfg.potential)


def _emit(obj):
    print(json.dumps(obj, indent=2, default=float))


def cmd_map_eval(cfg, args):
    p = _point(cfg, args)
    m = ClosedFormMap(p) if args.closed_form else IntegratedMap(p, IntegratorOpts(cfg.tolerances["n_steps"]))
    th, r, j = m.jacobian(args.theta, args.r)
    _emit({"kind": m.kind, "theta": float(th), "r": float(r), "jacobian": j.tolist(),
           "det": float(np.linalg.det(j)), "det_expected": p.contraction})
    return EXIT_OK


def cmd_circle(cfg, args):
    p = _point(cfg, args)
    tol = cfg.tolerances
    integ = IntegratorOpts(tol["n_steps"])
    n = tol["a_grid"]
    bd = perturbation_bounds(p, integ, n, n)
    g1 = gt1_feasibility(p.eta, p.eps, bd.A_f, bd.A_g)
    Q = rho_coordinates(IntegratedMap(p, integ))
    out = {"eta": p.eta, "nu": p.nu, "eps": p.eps, "A_f": bd.A_f, "A_g": bd.A_g,
           "gt1_feasible": g1.feasible, "gt1_k": g1.k}
    try:
        g, rep = find_invariant_graph(Q, LipschitzGraph.constant(0.0, tol["n_modes"]), tol=tol["gt_tol"])
    except NHError as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
        _emit(out)
        return EXIT_PARTIAL
    out.update(iterations=rep.iterations, invariance_residual=rep.invariance_residual,
               contraction=rep.contraction_estimate, normal_multiplier=rep.normal_multiplier,
               tangential_multiplier=rep.tangential_multiplier,
               rotation_number=rep.rotation_number, sup_phi=g.phi.max_abs())
    _emit(out)
    return EXIT_OK


def cmd_curve(cfg, args):
    p = _point(cfg, args)
    tol = cfg.tolerances
    Q = rho_tilde_coordinates(IntegratedMap(p, IntegratorOpts(tol["n_steps"])))
    tc = solve_translated_curve(Q, p.alpha, tol=tol["curve_tol"], n_modes=tol["n_modes"])
    _emit({"eta": p.eta, "nu": p.nu, "eps": p.eps, "b": tc.b, "c_offset": tc.c_offset,
           "conj_residual": tc.conj_residual, "trans_residual": tc.trans_residual,
           "iterations": tc.iterations, "sup_gamma": tc.gamma.max_abs()})
    return EXIT_OK


def _calpha_cfg(cfg, force=False):
    tol = cfg.tolerances
    return CalphaConfig(potential=cfg.potential, margin=tol["calpha_margin"], tol_b=tol["tol_b"],
                        curve_tol=min(tol["curve_tol"], 0.1 * tol["tol_b"]),
                        n_modes=tol["n_modes"], n_steps=tol["n_steps"],
                        dioph_gamma=cfg.dioph_gamma, dioph_tau=cfg.dioph_tau, force=force)


def cmd_calpha(cfg, args):
    etas = [float(x) for x in args.etas.split(",")]
    tr = trace_c_alpha(cfg.eps, cfg.alpha, etas, _calpha_cfg(cfg, args.force))
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "calpha.csv")
    write_calpha_csv(tr, path)
    _emit({"points": [{"eta": p.eta, "nu_star": p.nu_star, "b_residual": p.b_residual,
                       "iterations": p.iterations, "slope": p.slope} for p in tr.points],
           "errors": tr.errors, "csv": path})
    return EXIT_PARTIAL if tr.errors else EXIT_OK


def cmd_nf(cfg, args):
    p = _point(cfg, args)
    tol = cfg.tolerances
    nf = compute_normal_form(p, k=args.order or tol["order_k"], radius=tol["radius"],
                             n_modes=tol["n_modes"], integ=IntegratorOpts(tol["n_steps"]),
                             curve_tol=tol["curve_tol"])
    g2 = gt2_region_test(p, nf, tol["margin"], tol["safety"])
    rec = {"eta": p.eta, "nu": p.nu, "eps": p.eps, **nf.to_record(), "classification": g2.classification}
    _emit(rec)
    return EXIT_OK


def cmd_basin(cfg, args):
    p = _point(cfg, args)
    tol = cfg.tolerances
    Q = rho_coordinates(IntegratedMap(p, IntegratorOpts(tol["n_steps"])))
    g, _ = find_invariant_graph(Q, LipschitzGraph.constant(0.0, tol["n_modes"]), tol=tol["gt_tol"],
                                n_orbit=100)
    res = basin_probe(Q, g, args.samples, args.iters, args.capture_tol, args.r_box, cfg.seed)
    _emit({"eta": p.eta, "nu": p.nu, "fraction": res.fraction,
           "max_capture_iters": res.max_capture_iters, "n_samples": res.n_samples})
    return EXIT_OK


def cmd_sweep(cfg, args):
    r = run_sweep(cfg, resume=not args.fresh)
    m = r.manifest
    _emit({"output_dir": cfg.output_dir, "counts": m["counts"], "shape": m["shape"],
           "wall_time_s": m["wall_time_s"]})
    return EXIT_PARTIAL if m["counts"]["ERROR"] else EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="nhcircles", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="TOML run configuration")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol", action="append", metavar="NAME=VALUE")
    ap.add_argument("--eps", type=float, help="perturbation size (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def point(sp):
        sp.add_argument("--eta", type=float, required=True)
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--nu", type=float)
        g.add_argument("--dnu", type=float, default=0.0, help="nu - alpha")

    sp = sub.add_parser("map-eval", help="image and Jacobian of one point under P or Q")
    point(sp)
    sp.add_argument("--theta", type=float, default=0.0)
    sp.add_argument("--r", type=float, default=0.0)
    sp.add_argument("--closed-form", action="store_true")
    sp.set_defaults(func=cmd_map_eval)
    sp = sub.add_parser("circle", help="graph transform at one parameter point")
    point(sp)
    sp.set_defaults(func=cmd_circle)
    sp = sub.add_parser("curve", help="translated curve at one parameter point")
    point(sp)
    sp.set_defaults(func=cmd_curve)
    sp = sub.add_parser("calpha", help="trace the curve C_alpha")
    sp.add_argument("--etas", required=True, help="comma separated eta values")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_calpha)
    sp = sub.add_parser("nf", help="normal-form report")
    point(sp)
    sp.add_argument("--order", type=int)
    sp.set_defaults(func=cmd_nf)
    sp = sub.add_parser("sweep", help="classify the (eta, nu) raster")
    sp.add_argument("--fresh", action="store_true", help="ignore an existing checkpoint")
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("basin", help="basin probe around the invariant circle")
    point(sp)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--iters", type=int, default=500)
    sp.add_argument("--capture-tol", type=float, default=1e-8)
    sp.add_argument("--r-box", type=float, default=5.0)
    sp.set_defaults(func=cmd_basin)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = _config(args)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResumeMismatchError as exc:
        print(f"resume mismatch: {exc}", file=sys.stderr)
        return EXIT_RESUME
    except NHError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
