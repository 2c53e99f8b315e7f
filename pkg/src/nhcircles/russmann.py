"""Translated curves of Q and the curves C_alpha where the translation vanishes.

The curve is sought in parameterised form K(xi) = (xi + w(xi), Gamma(xi)) with
    Q(K(xi)) = K(xi + 2 pi alpha) + (0, b),
so that h = id + w, gamma = Gamma o h^{-1}.  Each outer step does three
linearised corrections, reevaluating nothing in between:
  vertical    Gamma, b   from  db + dG(xi + 2 pi alpha) - Bbar dG(xi) = E_v
  offset      constant shift of Gamma killing the mean rotation defect (twist)
  tangential  w          from  dw(xi + 2 pi alpha) - dw(xi) = E_t - mean
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .cohomology import solve_difference_equation
from .errors import (ConvergenceError, NHError, NoRootError, OutsideRegionError,
                     PrecisionError, TorsionLossError)
from .fourier import DEFAULT_MODES, TWO_PI, CircleMap, PeriodicFn, fit_periodic, invert_circle_map
from .model_maps import (IntegratedMap, IntegratorOpts, PotentialSpec, SpinOrbitParams,
                         rho_tilde_coordinates)


@dataclass
class TranslatedCurve:
    gamma: PeriodicFn           # rho~ = gamma(theta)
    h: CircleMap                # xi -> xi + w(xi), h(0) = 0
    b: float
    c_offset: float
    conj_residual: float
    trans_residual: float
    alpha: float
    Gamma: PeriodicFn = None    # gamma o h
    h_inv: CircleMap = None
    iterations: int = 0
    twist: float = np.nan
    history: list = field(default_factory=list)

    def g(self, theta):
        """h o R_{2 pi alpha} o h^{-1}."""
        xi = self.h_inv(theta)
        return self.h(xi + TWO_PI * self.alpha)


def _normalize(w, G):
    s = 0.0
    for _ in range(200):
        s_new = -float(w(s))
        if abs(s_new - s) < 1e-16:
            break
        s = s_new
    ws = w.shift(s) + s
    return ws, G.shift(s)


def curve_residuals(Q, tc, factor=4):
    m = factor * tc.gamma.grid_size
    th = TWO_PI * np.arange(m) / m
    big, r = Q(th, tc.gamma(th))
    g = tc.g(th)
    return float(np.abs(big - g).max()), float(np.abs(r - tc.b - tc.gamma(g)).max())


def solve_translated_curve(Q, alpha, tol=1e-10, max_newton=50, n_modes=DEFAULT_MODES,
                           initial=None, verify=True):
    """Translated curve of Q (given in rho~ coordinates) with rotation 2 pi alpha."""
    m = 2 * n_modes + 2
    xi = TWO_PI * np.arange(m) / m
    shift = TWO_PI * alpha
    if initial is None:
        w = np.zeros(m)
        G = np.zeros(m)
        b = 0.0
    else:
        w = initial.h.displacement.resample(n_modes).values.copy()
        G = initial.Gamma.resample(n_modes).values.copy()
        b = initial.b
    hist = []
    twist = np.nan
    it = 0
    while True:
        wf, Gf = fit_periodic(w), fit_periodic(G)
        big, r, jac = Q.jacobian(xi + w, G)
        ev = r - b - Gf.shift(shift).values
        et = big - (xi + shift + wf.shift(shift).values)
        res = max(float(np.abs(ev).max()), float(np.abs(et).max()))
        hist.append(res)
        if res <= 0.5 * tol or not np.isfinite(res):
            break
        it += 1
        if it > max_newton:
            raise ConvergenceError("translated curve: max_newton reached", residual=res, history=hist)
        if len(hist) >= 4 and hist[-1] > 0.9 * hist[-4]:
            raise ConvergenceError("translated curve stagnates", residual=res, history=hist)
        twist = float(jac[:, 0, 1].mean())
        if abs(twist) < 1e-6:
            raise TorsionLossError(f"twist {twist:.3e} too small")
        bbar = float(jac[:, 1, 1].mean())
        sv = solve_difference_equation(fit_periodic(ev), 1.0, bbar, alpha, verify=False)
        dG = sv.f.values
        G = G + dG
        b += sv.mu
        et = et + jac[:, 0, 1] * dG
        dc = -float(et.mean()) / twist
        G = G + dc
        et = et + jac[:, 0, 1] * dc
        st = solve_difference_equation(fit_periodic(et), 1.0, 1.0, alpha, verify=False)
        w = w + st.f.values
    if not np.isfinite(res):
        raise ConvergenceError("translated curve diverged", residual=res, history=hist)
    wf, Gf = _normalize(fit_periodic(w), fit_periodic(G))
    h = CircleMap(wf)
    hinv = invert_circle_map(h, tol=1e-15 + 1e-3 * tol)
    gamma = fit_periodic(Gf(xi + hinv.displacement.values))
    tc = TranslatedCurve(gamma, h, float(b), float(Gf.mean), np.nan, np.nan, alpha, Gf, hinv,
                         it, twist, hist)
    if verify:
        tc.conj_residual, tc.trans_residual = curve_residuals(Q, tc)
        worst = max(tc.conj_residual, tc.trans_residual)
        if worst > tol:
            raise PrecisionError(worst, tol)
    return tc


def weighted_birkhoff(values):
    n = len(values)
    t = (np.arange(n) + 0.5) / n
    w = np.exp(-1.0 / (t * (1.0 - t)))
    return float(w @ np.asarray(values) / w.sum())


def restricted_rotation_number(Q, tc, n_iter=4000, theta0=0.0):
    """Rotation number of theta -> Theta_Q(theta, gamma(theta)) by direct iteration.

    Uses a smoothly weighted Birkhoff average of the displacements, which
    converges much faster than the plain mean for quasi-periodic orbits.
    """
    disp = np.empty(n_iter)
    x = float(theta0)
    for i in range(n_iter):
        big, _ = Q(x, float(tc.gamma(x)))
        disp[i] = float(big) - x
        x = float(big) % TWO_PI
    return weighted_birkhoff(disp)


# ---------------------------------------------------------------------------
# C_alpha

@dataclass(frozen=True)
class CalphaConfig:
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    margin: float = 10.0
    tol_b: float = 1e-10
    max_secant: int = 30
    curve_tol: float = 1e-11
    n_modes: int = 32
    n_steps: int = 512
    dioph_gamma: float = 0.38
    dioph_tau: float = 1.0
    force: bool = False


@dataclass
class CalphaPoint:
    eta: float
    nu_star: float
    b_residual: float
    conj_residual: float
    iterations: int
    slope: float
    curve: TranslatedCurve = None
    history: list = field(default_factory=list)


def curve_at(eta, nu, eps, alpha, cfg, initial=None):
    p = SpinOrbitParams(eta=eta, nu=nu, eps=eps, alpha=alpha, dioph_gamma=cfg.dioph_gamma,
                        dioph_tau=cfg.dioph_tau, potential=cfg.potential)
    Q = rho_tilde_coordinates(IntegratedMap(p, IntegratorOpts(cfg.n_steps)))
    return solve_translated_curve(Q, alpha, tol=cfg.curve_tol, n_modes=cfg.n_modes, initial=initial)


def find_c_alpha_frequency(eta, eps, alpha, cfg=None, nu0=None):
    """Secant solve of b(nu) = 0 seeded at nu0 (default alpha) with slope 2 pi eta."""
    cfg = cfg or CalphaConfig()
    if abs(eta) <= cfg.margin * eps and not cfg.force:
        raise OutsideRegionError(f"|eta| = {abs(eta):.3g} <= {cfg.margin} eps")
    nu_a = alpha if nu0 is None else float(nu0)
    tc = curve_at(eta, nu_a, eps, alpha, cfg)
    ba = tc.b
    hist = [(nu_a, ba)]
    slope = TWO_PI * eta
    while abs(ba) > cfg.tol_b:
        if len(hist) > cfg.max_secant:
            raise NoRootError("secant did not converge", residual=abs(ba), history=hist)
        if slope == 0.0 or not np.isfinite(slope):
            raise NoRootError("flat secant", residual=abs(ba), history=hist)
        nu_b = nu_a - ba / slope
        tc = curve_at(eta, nu_b, eps, alpha, cfg, initial=tc)
        bb = tc.b
        hist.append((nu_b, bb))
        if nu_b != nu_a:
            slope = (bb - ba) / (nu_b - nu_a)
        nu_a, ba = nu_b, bb
    return CalphaPoint(eta, nu_a, abs(ba), tc.conj_residual, len(hist), slope, tc, hist)


@dataclass
class CalphaTrace:
    eps: float
    alpha: float
    points: list
    errors: dict

    def as_array(self):
        return np.array([(p.eta, p.nu_star) for p in self.points]).reshape(-1, 2)


def trace_c_alpha(eps, alpha, eta_grid, cfg=None):
    cfg = cfg or CalphaConfig()
    pts, errs = [], {}
    seed = None
    for eta in eta_grid:
        try:
            pt = find_c_alpha_frequency(float(eta), eps, alpha, cfg, nu0=seed)
        except NHError as exc:
            errs[float(eta)] = f"{type(exc).__name__}: {exc}"
            continue
        pts.append(pt)
        seed = pt.nu_star
    return CalphaTrace(eps, alpha, pts, errs)


def write_calpha_csv(trace, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["eta", "nu_star", "b_residual", "conj_residual", "iterations"])
        for p in trace.points:
            wr.writerow([repr(float(p.eta)), repr(float(p.nu_star)), repr(float(p.b_residual)),
                         repr(float(p.conj_residual)), p.iterations])
