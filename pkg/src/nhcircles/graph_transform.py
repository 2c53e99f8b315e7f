"""Hadamard graph transform for invariant circles r = phi(theta).

All maps handed to this module must already live in the coordinates in
which the annulus |rho| <= 1 is centred (rho-coordinates for Q, or the
recentred normal-form coordinates).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import (AnnulusEscapeError, ConvergenceError, DivergenceError,
                     IterationLimitError)
from .fourier import (DEFAULT_MODES, TWO_PI, CircleMap, PeriodicFn, fit_periodic,
                      invert_circle_map)
from .model_maps import ClosedFormMap, IntegratedMap, contraction, twist_factor


@dataclass(frozen=True)
class LipschitzGraph:
    phi: PeriodicFn
    lip_k: float

    @classmethod
    def from_phi(cls, phi):
        return cls(phi, float(np.abs(phi.derivative().values).max()))

    @classmethod
    def constant(cls, c, n_modes=DEFAULT_MODES):
        return cls(PeriodicFn.constant(c, n_modes), 0.0)

    def __call__(self, theta):
        return self.phi(theta)


@dataclass
class GtReport:
    iterations: int
    final_residual: float
    contraction_estimate: float
    invariance_residual: float
    normal_multiplier: float
    tangential_multiplier: float
    rotation_number: float
    history: list = field(default_factory=list)

    @property
    def dominated(self):
        return self.normal_multiplier < self.tangential_multiplier


def _image(Q, phi):
    th = phi.grid
    big, r = Q(th, phi.values)
    return fit_periodic(big - th), r


def apply_graph_transform(Q, graph, tol=1e-13, bound=1.0):
    """Gamma phi = R o (id, phi) o [Theta o (id, phi)]^{-1}, resampled on the grid."""
    phi = graph.phi if isinstance(graph, LipschitzGraph) else graph
    u, r = _image(Q, phi)
    v = invert_circle_map(CircleMap(u), tol=tol).displacement
    th = phi.grid
    pre = th + v.values
    new = fit_periodic(r)(pre)
    sup = float(np.abs(new).max())
    if not np.isfinite(sup) or sup > bound:
        raise AnnulusEscapeError(sup)
    return LipschitzGraph.from_phi(fit_periodic(new))


def invariance_residual(Q, phi, factor=4):
    m = factor * phi.grid_size
    th = TWO_PI * np.arange(m) / m
    big, r = Q(th, phi(th))
    return float(np.abs(r - phi(big)).max())


def _weights(n):
    t = (np.arange(n) + 0.5) / n
    w = np.exp(-1.0 / (t * (1.0 - t)))
    return w / w.sum()


def multipliers_along(Q, phi, n_orbit=10_000, theta0=0.0):
    """Per-period geometric means of the tangential and normal factors.

    Returns (tangential, normal, rotation number).  The orbit is run on the
    circle map theta -> Theta(theta, phi(theta)), whose displacement and
    log-factors are spectrally interpolated from grid Jacobians.
    """
    th = phi.grid
    big, _, jac = Q.jacobian(th, phi.values)
    lt = jac[..., 0, 0] + jac[..., 0, 1] * phi.derivative().values
    ln = np.linalg.det(jac) / lt
    if np.any(lt <= 0.0):
        return np.nan, np.nan, np.nan
    u = fit_periodic(big - th)
    log_t = fit_periodic(np.log(np.abs(lt)))
    log_n = fit_periodic(np.log(np.abs(ln)))
    orbit = np.empty(n_orbit)
    disp = np.empty(n_orbit)
    x = theta0
    k = np.arange(1, u.half_coeffs.size)
    cu = u.half_coeffs[1:]
    c0 = u.mean
    for i in range(n_orbit):
        x = x % TWO_PI
        orbit[i] = x
        d = c0 + 2.0 * (np.exp(1j * k * x) @ cu).real
        disp[i] = d
        x = x + d
    mt = float(np.exp(log_t(orbit).mean()))
    mn = float(np.exp(log_n(orbit).mean()))
    rot = float(_weights(n_orbit) @ disp)
    return mt, mn, rot


def find_invariant_graph(Q, phi0, tol=1e-10, max_iter=500, k_bound=1.0, window=5,
                         n_orbit=10_000, bound=1.0):
    """Iterate the graph transform to its fixed point.

    For eta < 0 the circle is repelling and the iteration runs on Q^{-1}.
    """
    if Q.params.eta < 0:
        Q = Q.inverse()
    graph = phi0 if isinstance(phi0, LipschitzGraph) else LipschitzGraph.from_phi(phi0)
    hist = []
    ratios = []
    q = 0.0
    for it in range(1, max_iter + 1):
        new = apply_graph_transform(Q, graph, bound=bound)
        d = float(np.abs(new.phi.values - graph.phi.values).max())
        hist.append(d)
        graph = new
        if len(hist) > 1 and hist[-2] > 1e-13:
            ratios.append(d / hist[-2])
            rec = ratios[-window:]
            q = max(rec)
            if len(rec) == window and min(rec) >= 1.0:
                raise DivergenceError("graph transform is not contracting", ratio=q)
        qq = min(q, 0.999) if ratios else 0.5
        if d <= 1e-15 or d * qq / (1.0 - qq) <= 0.1 * tol:
            break
    else:
        raise IterationLimitError("graph transform hit max_iter", residual=hist[-1], history=hist)
    res = invariance_residual(Q, graph.phi)
    if res > tol:
        raise ConvergenceError(f"invariance residual {res:.3e} above tol", residual=res, history=hist)
    if graph.lip_k > k_bound:
        raise ConvergenceError(f"Lipschitz constant {graph.lip_k:.3g} exceeds the class bound",
                               residual=res, history=hist)
    mt, mn, rot = multipliers_along(Q, graph.phi, n_orbit)
    rep = GtReport(it, hist[-1], float(q), res, mn, mt, rot, hist)
    return graph, rep


# ---------------------------------------------------------------------------
# explicit feasibility inequalities

@dataclass(frozen=True)
class Gt1Result:
    feasible: bool
    k: float = None
    contraction: float = None

    def __bool__(self):
        return self.feasible


def gt1_feasibility(eta, eps, A_f, A_g, n_grid=400):
    """Search k in (eps/eta, eta) satisfying both graph-transform inequalities."""
    eta = abs(float(eta))
    if eta == 0.0:
        return Gt1Result(False)
    e = contraction(eta)
    c = twist_factor(eta)
    lo = eps / eta if eps > 0 else eta * 1e-6
    if lo >= eta:
        return Gt1Result(False)
    k = np.logspace(np.log10(lo), np.log10(eta), n_grid + 2)[1:-1]
    well = k * e + eps * A_g * (1.0 + k) <= k * (1.0 - (c * k + eps * A_f * (1.0 + k)))
    lip = e + eps * A_g + TWO_PI * k + eps * k * A_f
    ok = well & (lip < 1.0)
    if not ok.any():
        return Gt1Result(False)
    i = int(np.argmin(np.where(ok, lip, np.inf)))
    return Gt1Result(True, float(k[i]), float(lip[i]))


@dataclass(frozen=True)
class PerturbationBounds:
    A_f: float
    A_g: float
    sup_g: float


def perturbation_bounds(params, integ=None, n_theta=64, n_rho=64, half_width=1.0):
    """Sup-derivative bounds of the perturbation terms of Q over T x [-1, 1].

    Q - P is split as eps (f, g) in rho-coordinates; the derivatives follow
    from the variational Jacobian minus the constant Jacobian of P.  For
    eta < 0 the inverse maps are used.
    """
    if params.eps == 0.0:
        return PerturbationBounds(0.0, 0.0, 0.0)
    back = params.eta < 0
    Q = IntegratedMap(params, integ, backward=back)
    P = ClosedFormMap(params, backward=back)
    th = TWO_PI * np.arange(n_theta) / n_theta
    rho = np.linspace(-half_width, half_width, n_rho)
    T, R = np.meshgrid(th, rho + params.detuning, indexing="ij")
    _, rq, jq = Q.jacobian(T, R)
    _, rp, jp = P.jacobian(T, R)
    dj = np.abs(jq - jp)
    eps = params.eps
    af = max(dj[..., 0, 0].max(), dj[..., 0, 1].max()) / eps
    ag = max(dj[..., 1, 0].max(), dj[..., 1, 1].max()) / eps
    return PerturbationBounds(float(af), float(ag), float(np.abs(rq - rp).max() / eps))


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasinResult:
    fraction: float
    max_capture_iters: int
    n_samples: int
    n_captured: int


def basin_probe(Q, graph, n_samples=1000, n_iters=500, capture_tol=1e-8, r_box=5.0, seed=0):
    """Fraction of quasi-random starts with |r| <= r_box captured by the graph."""
    if Q.params.eta < 0:
        Q = Q.inverse()
    phi = graph.phi if isinstance(graph, LipschitzGraph) else graph
    pts = qmc.Halton(d=2, scramble=True, seed=seed).random(n_samples)
    th = TWO_PI * pts[:, 0]
    r = r_box * (2.0 * pts[:, 1] - 1.0)
    alive = np.arange(n_samples)
    captured = np.zeros(n_samples, dtype=bool)
    worst = 0
    for n in range(n_iters + 1):
        dist = np.abs(r - phi(th))
        hit = dist < capture_tol
        if hit.any():
            captured[alive[hit]] = True
            worst = n
        lost = ~np.isfinite(r) | (np.abs(r) > 10.0 * r_box)
        keep = ~hit & ~lost
        alive, th, r = alive[keep], th[keep], r[keep]
        if alive.size == 0 or n == n_iters:
            break
        th, r = Q(th, r, strict=False)
        th = th % TWO_PI
    nc = int(captured.sum())
    return BasinResult(nc / n_samples, int(worst), n_samples, nc)
