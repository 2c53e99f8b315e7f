"""Parameter sweeps of the (eta, nu) plane at fixed eps.

Every cell gets one code:
  GT1, GT2, BOTH    certified by the graph-transform inequalities, the normal
                    form region test, or both
  C_ALPHA_NEAR      not certified, but within one grid step of a traced
                    point of C_alpha
  UNRESOLVED        nothing applies
  ERROR             an unexpected failure; the reason column says what
"""

import csv
import hashlib
import json
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import tomli

from . import __version__
from .errors import ConfigError, NHError, ResumeMismatchError
from .graph_transform import (LipschitzGraph, find_invariant_graph, gt1_feasibility,
                              perturbation_bounds)
from .model_maps import (GOLDEN, IntegratedMap, IntegratorOpts, PotentialSpec, SpinOrbitParams,
                         rho_coordinates)
from .normal_form import compute_normal_form, gt2_region_test, recentered_map
from .russmann import CalphaConfig, trace_c_alpha, write_calpha_csv

CODES = ("GT1", "GT2", "BOTH", "C_ALPHA_NEAR", "UNRESOLVED", "ERROR")

DEFAULT_TOLERANCES = {
    "n_steps": 512,
    "n_modes": 16,
    "a_grid": 64,
    "a_grid_coarse": 16,
    "gt_tol": 1e-10,
    "curve_tol": 1e-10,
    "margin": 10.0,
    "safety": 0.05,
    "order_k": 3,
    "radius": 1e-2,
    "tol_b": 1e-10,
    "calpha_margin": 10.0,
}

CHECKPOINT_EVERY = 64


@dataclass(frozen=True)
class ClassifierFlags:
    run_gt1: bool = True
    run_gt2: bool = True
    run_empirical_gt: bool = False


@dataclass
class SweepConfig:
    eps: float
    alpha: float = GOLDEN
    eta_range: tuple = (1e-3, 0.5, 64)
    nu_range: tuple = (GOLDEN - 0.2, GOLDEN + 0.2, 64)
    classifier: ClassifierFlags = field(default_factory=ClassifierFlags)
    tolerances: dict = field(default_factory=dict)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    workers: int = 1
    seed: int = 0
    output_dir: str = "sweep_out"
    dioph_gamma: float = 0.38
    dioph_tau: float = 1.0

    def __post_init__(self):
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance names: {sorted(unknown)}")
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.tolerances)
        self.tolerances = tol
        for name in ("eta_range", "nu_range"):
            r = tuple(getattr(self, name))
            if len(r) != 3:
                raise ConfigError(f"{name} must be (min, max, count)")
            lo, hi, n = float(r[0]), float(r[1]), int(r[2])
            if not hi > lo or n < 2:
                raise ConfigError(f"{name} is degenerate: {r}")
            setattr(self, name, (lo, hi, n))
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        if self.eps < 0:
            raise ConfigError("eps must be non-negative")

    @property
    def etas(self):
        return np.linspace(*self.eta_range)

    @property
    def nus(self):
        return np.linspace(*self.nu_range)

    def content(self):
        """Everything that determines the raster (workers and paths excluded)."""
        return {"eps": self.eps, "alpha": self.alpha, "eta_range": list(self.eta_range),
                "nu_range": list(self.nu_range), "classifier": asdict(self.classifier),
                "tolerances": self.tolerances, "potential": self.potential.to_list(),
                "seed": self.seed, "dioph_gamma": self.dioph_gamma, "dioph_tau": self.dioph_tau}

    def config_hash(self):
        blob = json.dumps(self.content(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def params(self, eta, nu):
        return SpinOrbitParams(eta=float(eta), nu=float(nu), eps=self.eps, alpha=self.alpha,
                               dioph_gamma=self.dioph_gamma, dioph_tau=self.dioph_tau,
                               potential=self.potential)


_TOP_KEYS = {"eps", "alpha", "eta_range", "nu_range", "nu_relative", "classifier", "tolerances",
             "potential", "workers", "seed", "output_dir", "dioph_gamma", "dioph_tau"}


def config_from_dict(d):
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "eps" not in d:
        raise ConfigError("eps is required")
    d = dict(d)
    alpha = float(d.get("alpha", GOLDEN))
    if d.pop("nu_relative", False) and "nu_range" in d:
        lo, hi, n = d["nu_range"]
        d["nu_range"] = (alpha + lo, alpha + hi, n)
    cl = d.get("classifier", {})
    bad = set(cl) - {"run_gt1", "run_gt2", "run_empirical_gt"}
    if bad:
        raise ConfigError(f"unknown classifier keys: {sorted(bad)}")
    d["classifier"] = ClassifierFlags(**cl)
    pot = d.get("potential", {})
    if set(pot) - {"terms"}:
        raise ConfigError("potential accepts only 'terms'")
    try:
        if "terms" in pot:
            d["potential"] = PotentialSpec(tuple(tuple(t) for t in pot["terms"]))
        else:
            d.pop("potential", None)
        return SweepConfig(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    try:
        with open(path, "rb") as fh:
            d = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(d)


# ---------------------------------------------------------------------------

def _gt1(p, tol):
    integ = IntegratorOpts(int(tol["n_steps"]))
    # a coarse grid gives a lower bound on the sup; if even that is infeasible we are done
    nc = int(tol["a_grid_coarse"])
    bd = perturbation_bounds(p, integ, nc, nc)
    res = gt1_feasibility(p.eta, p.eps, bd.A_f, bd.A_g)
    if res.feasible:
        n = int(tol["a_grid"])
        bd = perturbation_bounds(p, integ, n, n)
        res = gt1_feasibility(p.eta, p.eps, bd.A_f, bd.A_g)
    return res, bd


def classify_point(p, flags=None, tolerances=None):
    """Run the enabled classifiers at one parameter point and merge them into a code."""
    flags = flags or ClassifierFlags()
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    m = {}
    gt1 = gt2 = False
    try:
        if flags.run_gt1:
            res, bd = _gt1(p, tol)
            gt1 = res.feasible
            m.update(A_f=bd.A_f, A_g=bd.A_g, gt1_k=res.k, gt1_contraction=res.contraction)
        nf = None
        if flags.run_gt2:
            ca = abs(p.eta) >= np.sqrt(2.0 * np.pi) * abs(p.nu - p.alpha)
            cb = abs(p.eta) >= tol["margin"] * p.eps
            m["gt2"] = "outside"
            if ca and cb:
                try:
                    nf = compute_normal_form(p, k=int(tol["order_k"]), radius=tol["radius"],
                                             n_modes=int(tol["n_modes"]),
                                             integ=IntegratorOpts(int(tol["n_steps"])),
                                             curve_tol=tol["curve_tol"])
                except NHError as exc:
                    m["gt2_reason"] = type(exc).__name__
                else:
                    g2 = gt2_region_test(p, nf, tol["margin"], tol["safety"])
                    gt2 = g2.classification == "inside"
                    m.update(gt2=g2.classification, gt2_effective=g2.effective,
                             beta1=nf.beta_bar[0], R0=nf.R0, lam=nf.lambda_,
                             remainder=max(nf.remainder_norms["angular"], nf.remainder_norms["tail"]))
        if flags.run_empirical_gt and (gt1 or gt2):
            try:
                if gt1:
                    Q = rho_coordinates(IntegratedMap(p, IntegratorOpts(int(tol["n_steps"]))))
                else:
                    Q = recentered_map(nf)
                _, rep = find_invariant_graph(Q, LipschitzGraph.constant(0.0, int(tol["n_modes"])),
                                              tol=tol["gt_tol"], n_orbit=1000)
                m.update(contraction=rep.contraction_estimate, residual=rep.invariance_residual,
                         empirical="ok")
            except NHError as exc:
                m["empirical"] = type(exc).__name__
    except Exception as exc:  # a cell must never abort the sweep
        return {"code": "ERROR", "reason": f"{type(exc).__name__}: {exc}", **m}
    code = "BOTH" if gt1 and gt2 else "GT1" if gt1 else "GT2" if gt2 else "UNRESOLVED"
    return {"code": code, "reason": "", **m}


def _row_task(args):
    cfg_dict, i = args
    cfg = config_from_dict(cfg_dict)
    eta = cfg.etas[i]
    out = []
    for nu in cfg.nus:
        try:
            p = cfg.params(eta, nu)
        except Exception as exc:
            out.append({"code": "ERROR", "reason": f"{type(exc).__name__}: {exc}"})
            continue
        out.append(classify_point(p, cfg.classifier, cfg.tolerances))
    return i, out


def _cfg_dict(cfg):
    d = cfg.content()
    d["classifier"] = dict(d["classifier"])
    d["potential"] = {"terms": d["potential"]}
    d["workers"] = cfg.workers
    d["output_dir"] = cfg.output_dir
    return d


# ---------------------------------------------------------------------------

RASTER_COLUMNS = ["i", "j", "eta", "nu", "code", "near_calpha", "contraction", "beta1", "R0",
                  "residual", "A_f", "A_g", "gt1_k", "gt2", "gt2_effective", "remainder", "reason"]


@dataclass
class RegionRaster:
    etas: np.ndarray
    nus: np.ndarray
    cells: list             # row-major dicts
    manifest: dict
    trace: object = None

    def cell(self, i, j):
        return self.cells[i * len(self.nus) + j]

    def code_grid(self):
        return np.array([c["code"] for c in self.cells], dtype=object).reshape(len(self.etas), len(self.nus))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(RASTER_COLUMNS)
            for n, c in enumerate(self.cells):
                i, j = divmod(n, len(self.nus))
                row = [i, j, repr(float(self.etas[i])), repr(float(self.nus[j]))]
                for col in RASTER_COLUMNS[4:]:
                    v = c.get(col, "")
                    row.append(repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                wr.writerow(row)


def _mark_calpha(cells, etas, nus, trace, eps, margin):
    deta = etas[1] - etas[0]
    dnu = nus[1] - nus[0]
    for c in cells:
        c["near_calpha"] = 0
    for pt in trace.points:
        if pt.eta < margin * eps:
            continue
        for i in np.nonzero(np.abs(etas - pt.eta) < deta * (1 - 1e-9))[0]:
            for j in np.nonzero(np.abs(nus - pt.nu_star) < dnu * (1 - 1e-9))[0]:
                c = cells[i * len(nus) + j]
                c["near_calpha"] = 1
                if c["code"] == "UNRESOLVED":
                    c["code"] = "C_ALPHA_NEAR"


def figure_properties(raster):
    """The three shape assertions: GT1 band, GT2 cusp, C_alpha inside the cusp."""
    codes = raster.code_grid()
    etas, nus = raster.etas, raster.nus
    eps = raster.manifest["config"]["eps"]
    gt1 = np.isin(codes, ["GT1", "BOTH"])
    gt2 = np.isin(codes, ["GT2", "BOTH"])
    # band: the fully-GT1 rows run up to the top of the raster, and GT1 is
    # upward closed in every column (its lower edge may depend on nu)
    full = gt1.all(axis=1)
    rows = np.nonzero(full)[0]
    upward = bool(np.all(np.diff(gt1.astype(int), axis=0) >= 0))
    band = bool(rows.size and np.all(full[rows[0]:]) and upward)
    eta1 = float(etas[rows[0]]) if rows.size else np.nan
    # cusp: in every row below the band that holds GT2 cells, they form one interval around
    # the column nearest alpha, and the interval does not shrink with eta
    alpha = raster.manifest["config"]["alpha"]
    jc = np.argsort(np.abs(nus - alpha))[:2]
    cusp_rows = [i for i in range(len(etas)) if gt2[i].any() and (not rows.size or i < rows[0])]
    ok = bool(cusp_rows)
    width = 0
    for i in cusp_rows:
        js = np.nonzero(gt2[i])[0]
        contiguous = js[-1] - js[0] + 1 == js.size
        centred = gt2[i, jc].any()
        ok &= bool(contiguous and centred and js.size >= width)
        width = js.size
    lowest = float(etas[cusp_rows[0]]) if cusp_rows else np.nan
    step = etas[1] - etas[0]
    cusp = ok and lowest <= 10 * eps + 1.5 * step
    inside = True
    npts = 0
    if raster.trace is not None:
        for pt in raster.trace.points:
            if pt.eta < 10 * eps:
                continue
            i = int(np.argmin(np.abs(etas - pt.eta)))
            j = int(np.argmin(np.abs(nus - pt.nu_star)))
            inside &= bool(gt2[i, j])
            npts += 1
    inside = bool(inside and npts > 0)
    return {"gt1_band": band, "gt2_cusp": bool(cusp), "calpha_inside": inside,
            "eta1": eta1, "cusp_lowest_eta": lowest, "trace_points": npts}


def _load_checkpoint(path, h):
    if not os.path.exists(path):
        return {}
    with open(path) as fh:
        ck = json.load(fh)
    if ck.get("config_hash") != h:
        raise ResumeMismatchError(f"checkpoint {path} belongs to a different configuration")
    return {int(k): v for k, v in ck["rows"].items()}


def _save_checkpoint(path, h, rows):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump({"config_hash": h, "rows": {str(k): v for k, v in sorted(rows.items())}}, fh)
    os.replace(tmp, path)


def run_sweep(cfg, resume=True, stop_after_rows=None):
    """Classify all cells, trace C_alpha, and persist raster, trace and manifest.

    ``stop_after_rows`` interrupts the sweep after that many new rows (used to
    exercise resume).
    """
    t0 = time.time()
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    os.makedirs(cfg.output_dir, exist_ok=True)
    h = cfg.config_hash()
    ck_path = os.path.join(cfg.output_dir, "checkpoint.json")
    done = _load_checkpoint(ck_path, h) if resume else {}
    etas, nus = cfg.etas, cfg.nus
    todo = [i for i in range(len(etas)) if i not in done]
    if stop_after_rows is not None:
        todo = todo[:stop_after_rows]
    d = _cfg_dict(cfg)
    per_ck = max(1, int(np.ceil(CHECKPOINT_EVERY / len(nus))))
    since = 0
    tasks = [(d, i) for i in todo]
    if cfg.workers > 1 and len(tasks) > 1:
        chunk = int(np.ceil(len(tasks) / cfg.workers))
        with ProcessPoolExecutor(cfg.workers) as ex:
            for i, row in ex.map(_row_task, tasks, chunksize=chunk):
                done[i] = row
                since += 1
                if since >= per_ck:
                    _save_checkpoint(ck_path, h, done)
                    since = 0
    else:
        for t in tasks:
            i, row = _row_task(t)
            done[i] = row
            since += 1
            if since >= per_ck:
                _save_checkpoint(ck_path, h, done)
                since = 0
    _save_checkpoint(ck_path, h, done)
    if len(done) < len(etas):
        return None
    cells = [c for i in range(len(etas)) for c in done[i]]
    tol = cfg.tolerances
    ccfg = CalphaConfig(potential=cfg.potential, margin=tol["calpha_margin"], tol_b=tol["tol_b"],
                        curve_tol=min(tol["curve_tol"], 0.1 * tol["tol_b"]),
                        n_modes=int(tol["n_modes"]), n_steps=int(tol["n_steps"]),
                        dioph_gamma=cfg.dioph_gamma, dioph_tau=cfg.dioph_tau)
    grid = [float(e) for e in etas if abs(e) > tol["calpha_margin"] * cfg.eps]
    trace = trace_c_alpha(cfg.eps, cfg.alpha, grid, ccfg)
    _mark_calpha(cells, etas, nus, trace, cfg.eps, tol["calpha_margin"])
    counts = {c: sum(1 for x in cells if x["code"] == c) for c in CODES}
    manifest = {
        "config_hash": h,
        "config": cfg.content(),
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_time_s": round(time.time() - t0, 3),
        "workers": cfg.workers,
        "counts": counts,
        "calpha_errors": trace.errors,
    }
    raster = RegionRaster(etas, nus, cells, manifest, trace)
    manifest["shape"] = figure_properties(raster)
    out = cfg.output_dir
    raster.write_csv(os.path.join(out, "raster.csv"))
    write_calpha_csv(trace, os.path.join(out, "calpha.csv"))
    os.makedirs(os.path.join(out, "plotdata"), exist_ok=True)
    with open(os.path.join(out, "plotdata", "codes.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["eta"] + [repr(float(v)) for v in nus])
        for i, row in enumerate(raster.code_grid()):
            wr.writerow([repr(float(etas[i]))] + list(row))
    with open(os.path.join(out, "plotdata", "calpha_trace.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["eta", "nu_star"])
        for pt in trace.points:
            wr.writerow([repr(float(pt.eta)), repr(float(pt.nu_star))])
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
    return raster
