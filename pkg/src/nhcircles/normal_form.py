"""Localisation at the translated curve and reduction to constant coefficients.

Maps near x = 0 are stored as truncated power series in the vertical
variable whose coefficients are sampled on the xi-grid:

    xi' = xi + 2 pi alpha + sum_i a_i(xi) x^i,      x' = sum_i b_i(xi) x^i.

The coefficients of the localised map come from Taylor jets of the flow.
Every coordinate change of the reduction is polynomial in x, so conjugating
by it is exact series algebra (composition, reversion, Taylor shifts of
periodic coefficients) and no refit is needed between steps.
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .cohomology import DUST, solve_difference_equation
from .errors import LogBranchError, NoRadiusError, RadiusTooLargeError
from .fourier import TWO_PI, PeriodicFn, fit_periodic
from .model_maps import TransformedMap, VerticalShift, _bcast


# ---------------------------------------------------------------------------
# truncated series with grid coefficients, shape (D + 1, M)

def smul(p, q):
    d = p.shape[0]
    out = np.zeros_like(p)
    for i in range(d):
        out[i:] += p[i] * q[: d - i]
    return out


def spow(p, n):
    out = np.zeros_like(p)
    out[0] = 1.0
    for _ in range(n):
        out = smul(out, p)
    return out


def compose_fn(f, base, ds):
    """Series of f(base + ds) for a series ds without constant term.

    Coefficients below the dust level are dropped first: the m-th derivative
    turns roundoff in mode k into k^m times that.
    """
    c = np.array(f.half_coeffs)
    c[np.abs(c) < DUST] = 0.0
    f = PeriodicFn(c)
    d = ds.shape[0]
    out = np.zeros_like(ds)
    out[0] = f(base)
    pw = np.zeros_like(ds)
    pw[0] = 1.0
    for m in range(1, d):
        pw = smul(pw, ds)
        if not np.any(pw):
            break
        out += f.derivative(m)(base) / factorial(m) * pw
    return out


def dealias(f):
    """Drop the top third of the modes (2/3 rule).

    Taylor shifts differentiate the coefficient functions up to the series
    degree, which multiplies roundoff in mode k by k^m; for resolved
    functions those modes carry nothing but that noise.
    """
    c = np.array(f.half_coeffs)
    c[(2 * c.size) // 3:] = 0.0
    return PeriodicFn(c)


def _ident_series(d, m):
    y = np.zeros((d, m))
    if d > 1:
        y[1] = 1.0
    return y


# ---------------------------------------------------------------------------
# coordinate changes

class CurveChange:
    """G: (theta, rho~) -> (h^{-1}(theta), rho~ - gamma(theta))."""

    def __init__(self, tc):
        self.tc = tc
        self.v = tc.h_inv.displacement
        self.w = tc.h.displacement
        self.dv = self.v.derivative()
        self.dg = tc.gamma.derivative()

    def forward(self, theta, r):
        return theta + self.v(theta), r - self.tc.gamma(theta)

    def inverse(self, xi, x):
        return xi + self.w(xi), x + self.tc.Gamma(xi)

    def jacobian(self, theta, r):
        theta, r = _bcast(theta, r)
        j = np.zeros(theta.shape + (2, 2))
        j[..., 0, 0] = 1.0 + self.dv(theta)
        j[..., 1, 0] = -self.dg(theta)
        j[..., 1, 1] = 1.0
        return j


class ScaleChange:
    """y = x / X(xi)."""

    def __init__(self, X):
        self.X = X
        self.invX = X.map_values(lambda v: 1.0 / v)
        self.dX = X.derivative()

    def forward(self, xi, x):
        return xi, x / self.X(xi)

    def inverse(self, xi, y):
        return xi, y * self.X(xi)

    def jacobian(self, xi, x):
        xi, x = _bcast(xi, x)
        X = self.X(xi)
        j = np.zeros(xi.shape + (2, 2))
        j[..., 0, 0] = 1.0
        j[..., 1, 0] = -x * self.dX(xi) / X ** 2
        j[..., 1, 1] = 1.0 / X
        return j

    def series_inverse(self, xi, d):
        chi = np.zeros((d, xi.size))
        if d > 1:
            chi[1] = self.X(xi)
        return np.zeros((d, xi.size)), chi

    def series_forward(self, p, ds, s, yv):
        return s, smul(compose_fn(self.invX, p, ds), yv)


class VerticalPowerChange:
    """Y = y + X(xi) y^i."""

    def __init__(self, i, X):
        self.i = i
        self.X = X
        self.dX = X.derivative()

    def forward(self, xi, y):
        return xi, y + self.X(xi) * y ** self.i

    def inverse(self, xi, Y):
        xi, Y = _bcast(xi, Y)
        X = self.X(xi)
        y = np.array(Y, dtype=float)
        for _ in range(60):
            f = y + X * y ** self.i - Y
            step = f / (1.0 + self.i * X * y ** (self.i - 1))
            y = y - step
            if np.all(np.abs(step) <= 1e-17 + 1e-16 * np.abs(y)):
                break
        return xi, y

    def jacobian(self, xi, y):
        xi, y = _bcast(xi, y)
        j = np.zeros(xi.shape + (2, 2))
        j[..., 0, 0] = 1.0
        j[..., 1, 0] = self.dX(xi) * y ** self.i
        j[..., 1, 1] = 1.0 + self.i * self.X(xi) * y ** (self.i - 1)
        return j

    def series_inverse(self, xi, d):
        Y = _ident_series(d, xi.size)
        X = self.X(xi)
        chi = Y.copy()
        for _ in range(d):
            chi = Y - X * spow(chi, self.i)
        return np.zeros((d, xi.size)), chi

    def series_forward(self, p, ds, s, yv):
        return s, yv + smul(compose_fn(self.X, p, ds), spow(yv, self.i))


class AngularPowerChange:
    """Xi = xi + Z(xi) y^i."""

    def __init__(self, i, Z):
        self.i = i
        self.Z = Z
        self.dZ = Z.derivative()

    def forward(self, xi, y):
        return xi + self.Z(xi) * y ** self.i, y

    def inverse(self, Xi, y):
        Xi, y = _bcast(Xi, y)
        yi = y ** self.i
        xi = np.array(Xi, dtype=float)
        for _ in range(100):
            new = Xi - self.Z(xi) * yi
            done = np.all(np.abs(new - xi) <= 1e-16 * (1.0 + np.abs(xi)))
            xi = new
            if done:
                break
        return xi, y

    def jacobian(self, xi, y):
        xi, y = _bcast(xi, y)
        j = np.zeros(xi.shape + (2, 2))
        j[..., 0, 0] = 1.0 + self.dZ(xi) * y ** self.i
        j[..., 0, 1] = self.i * self.Z(xi) * y ** (self.i - 1)
        j[..., 1, 1] = 1.0
        return j

    def series_inverse(self, xi, d):
        Y = _ident_series(d, xi.size)
        yi = spow(Y, self.i)
        sig = np.zeros((d, xi.size))
        for _ in range(d):
            sig = -smul(compose_fn(self.Z, xi, sig), yi)
        return sig, Y

    def series_forward(self, p, ds, s, yv):
        return s + smul(compose_fn(self.Z, p, ds), spow(yv, self.i)), yv


def chain_forward(chain, xi, x):
    for ch in chain:
        xi, x = ch.forward(xi, x)
    return xi, x


def chain_inverse(chain, xi, y):
    for ch in reversed(chain):
        xi, y = ch.inverse(xi, y)
    return xi, y


# ---------------------------------------------------------------------------

@dataclass
class SeriesMap:
    a: np.ndarray       # angle: xi' - xi - 2 pi alpha
    b: np.ndarray       # vertical
    alpha: float

    @property
    def degree(self):
        return self.a.shape[0] - 1

    @property
    def grid(self):
        m = self.a.shape[1]
        return TWO_PI * np.arange(m) / m

    def fn(self, comp, i):
        return dealias(fit_periodic((self.a if comp == "a" else self.b)[i]))

    def conjugate(self, change):
        """Series of change o self o change^{-1}."""
        d = self.a.shape[0]
        xi = self.grid
        sig, chi = change.series_inverse(xi, d)
        s = sig.copy()
        yv = np.zeros_like(sig)
        powc = np.zeros_like(chi)
        powc[0] = 1.0
        moved = np.any(sig)
        for i in range(d):
            if i:
                powc = smul(powc, chi)
            if not np.any(powc):
                continue
            ai = compose_fn(self.fn("a", i), xi, sig) if moved else self.a[i][None, :] * _unit(d, xi.size)
            bi = compose_fn(self.fn("b", i), xi, sig) if moved else self.b[i][None, :] * _unit(d, xi.size)
            s += smul(ai, powc)
            yv += smul(bi, powc)
        p = xi + TWO_PI * self.alpha + s[0]
        ds = s.copy()
        ds[0] = 0.0
        s_new, y_new = change.series_forward(p, ds, s, yv)
        return SeriesMap(s_new, y_new, self.alpha)

    def evaluate(self, y):
        """Pointwise values on the grid for one scalar or an array y (shape (n,))."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        pw = y[None, :] ** np.arange(self.a.shape[0])[:, None]
        return np.einsum("dm,dn->mn", self.a, pw), np.einsum("dm,dn->mn", self.b, pw)


def _unit(d, m):
    u = np.zeros((d, m))
    u[0] = 1.0
    return u


# ---------------------------------------------------------------------------

class LocalizedMap(TransformedMap):
    """G o Q o G^{-1} for the translated curve tc of Q (Q in rho~ coordinates)."""

    kind = "transformed"

    def __init__(self, Q, tc):
        super().__init__(Q, [CurveChange(tc)])
        self.curve = tc
        self.alpha = tc.alpha
        m = tc.gamma.grid_size
        xi = TWO_PI * np.arange(m) / m
        big, r = self(xi, np.zeros(m))
        self.lambda_ = float(r.mean())
        self.identity_residual = max(float(np.abs(big - xi - TWO_PI * tc.alpha).max()),
                                     float(np.abs(r - self.lambda_).max()))

    def jets(self, degree, n_modes=None):
        tc = self.curve
        w, G = tc.h.displacement, tc.Gamma
        if n_modes is not None:
            w, G = w.resample(n_modes), G.resample(n_modes)
        xi = w.grid
        out = self.base.taylor_in_r(xi + w.values, G.values, degree)
        big = out[:, 0, :].T
        r = out[:, 1, :].T
        base = big[0]
        dth = big.copy()
        dth[0] = 0.0
        v = tc.h_inv.displacement
        xi1 = big + compose_fn(v, base, dth)
        x1 = r - compose_fn(tc.gamma, base, dth)
        xi1[0] -= xi + TWO_PI * tc.alpha
        return SeriesMap(xi1, x1, tc.alpha)


def localize_at_translated_curve(Q, tc, tol=None):
    return LocalizedMap(Q, tc)


@dataclass
class TaylorCoefficients:
    series: SeriesMap
    order_k: int
    radius: float
    lambda_: float
    empirical_remainder: float
    jet_mismatch: float

    def A(self, i):
        return self.series.fn("a", i)

    def B(self, i):
        return self.series.fn("b", i)


def _cheb(radius, n):
    return radius * np.cos(np.pi * (np.arange(n) + 0.5) / n)


def taylor_coefficients_in_x(L, k=3, radius=1e-2, extra=2, n_check=None):
    """Coefficients A_i, B_i of L up to degree k + extra, from flow jets.

    The jets are cross-checked against pointwise evaluations of L at
    Chebyshev nodes in [-radius, radius]; a mismatch beyond 1e-8 means the
    truncated series does not describe L on that annulus.
    """
    d = k + extra
    sm = L.jets(d)
    xs = _cheb(radius, n_check or d + 2)
    xi = sm.grid
    XI, X = np.meshgrid(xi, xs, indexing="ij")
    big, r = L(XI, X)
    sa, sb = sm.evaluate(xs)
    ea = big - XI - TWO_PI * sm.alpha - sa
    eb = r - sb
    mismatch = max(float(np.abs(ea).max()), float(np.abs(eb).max()))
    if mismatch > 1e-8:
        raise RadiusTooLargeError(f"degree-{d} jet misses L by {mismatch:.2e} at radius {radius}")
    low = SeriesMap(sm.a[: k + 1], sm.b[: k + 1], sm.alpha)
    la, lb = low.evaluate(xs)
    emp = max(float(np.abs(big - XI - TWO_PI * sm.alpha - la).max()), float(np.abs(r - lb).max()))
    return TaylorCoefficients(sm, k, radius, L.lambda_, emp, mismatch)


# ---------------------------------------------------------------------------

@dataclass
class NormalForm:
    order_k: int
    alpha_bar: list
    beta_bar: list
    lambda_: float
    R0: float
    remainder_norms: dict
    transform_chain: list
    alpha: float
    eta: float
    radius: float
    series: SeriesMap = None
    R_minus: float = np.nan
    R0_residual: float = np.nan
    localized: LocalizedMap = None
    lambda_localized: float = np.nan
    variance: dict = field(default_factory=dict)

    def polynomial(self, Xi, Y):
        ang = Xi + TWO_PI * self.alpha + sum(c * Y ** (i + 1) for i, c in enumerate(self.alpha_bar))
        ver = self.lambda_ + sum(c * Y ** (i + 1) for i, c in enumerate(self.beta_bar))
        return ang, ver

    def to_record(self):
        return {"k": self.order_k, "alpha_bar": list(map(float, self.alpha_bar)),
                "beta_bar": list(map(float, self.beta_bar)), "lambda": float(self.lambda_),
                "R0": float(self.R0), "remainders": {k: float(v) for k, v in self.remainder_norms.items()}}


def _remainders(sm, k, radius, abar, bbar, lam):
    d = sm.degree
    ang = np.zeros(sm.a.shape[1])
    ver = np.zeros(sm.a.shape[1])
    var = {}
    for i in range(k + 1):
        ca = sm.a[i] - (abar[i - 1] if i else 0.0)
        cb = sm.b[i] - (bbar[i - 1] if i else lam)
        var[f"a{i}"] = float(np.abs(ca).max())
        var[f"b{i}"] = float(np.abs(cb).max())
        ang += np.abs(ca) * radius ** i
        ver += np.abs(cb) * radius ** i
    tail_a = sum(np.abs(sm.a[i]) * radius ** i for i in range(k + 1, d + 1))
    tail_b = sum(np.abs(sm.b[i]) * radius ** i for i in range(k + 1, d + 1))
    lip = sum(i * np.abs(sm.b[i] - bbar[i - 1]) * radius ** (i - 1) for i in range(1, k + 1))
    lip = lip + sum(i * np.abs(sm.b[i]) * radius ** (i - 1) for i in range(k + 1, d + 1))
    rem = {"angular": float(max(ang.max(), ver.max())),
           "tail": float(max(np.max(tail_a), np.max(tail_b))) if d > k else 0.0,
           "vertical_lip": float(np.max(lip))}
    return rem, var


def reduce_to_constants(coeffs, alpha, eta, k=3, tol=1e-10):
    """Chain X, Z1, X2, Z2, ..., Xk, Zk making the degree <= k coefficients constant."""
    sm = coeffs.series
    if k > coeffs.order_k:
        raise ValueError("coefficients were extracted to a lower order")
    B1 = sm.b[1]
    if np.any(B1 <= 0.0):
        raise LogBranchError("B_1 is not positive on the grid")
    chain = []
    logb = dealias(fit_periodic(np.log(B1)))
    sol = solve_difference_equation(logb, 1.0, 1.0, alpha, tol=tol)
    beta1 = float(np.exp(sol.mu))
    ch = ScaleChange(sol.f.map_values(np.exp))
    chain.append(ch)
    sm = sm.conjugate(ch)
    for i in range(1, k + 1):
        if i >= 2:
            g = -sm.fn("b", i)
            sol = solve_difference_equation(g, beta1 ** i, beta1, alpha, tol=tol * max(1.0, g.max_abs()))
            ch = VerticalPowerChange(i, sol.f)
            chain.append(ch)
            sm = sm.conjugate(ch)
        g = -sm.fn("a", i)
        sol = solve_difference_equation(g, beta1 ** i, 1.0, alpha, tol=tol * max(1.0, g.max_abs()))
        ch = AngularPowerChange(i, sol.f)
        chain.append(ch)
        sm = sm.conjugate(ch)
    abar = [float(sm.a[i].mean()) for i in range(1, k + 1)]
    bbar = [float(sm.b[i].mean()) for i in range(1, k + 1)]
    bbar[0] = beta1
    lam = float(sm.b[0].mean())
    rem, var = _remainders(sm, k, coeffs.radius, abar, bbar, lam)
    nf = NormalForm(k, abar, bbar, lam, np.nan, rem, chain, alpha, eta, coeffs.radius, sm,
                    lambda_localized=coeffs.lambda_, variance=var)
    try:
        rr = normal_form_radius(nf)
        nf.R0, nf.R_minus, nf.R0_residual = rr.R0, rr.R_minus, rr.residual
    except NoRadiusError:
        pass
    return nf


@dataclass(frozen=True)
class RadiusResult:
    R0: float
    R_minus: float
    residual: float
    iterations: int


def normal_form_radius(nf, max_iter=50):
    """Newton solve of R = lambda + sum beta_i R^i seeded at -lambda / (beta_1 - 1)."""
    b = np.asarray(nf.beta_bar, dtype=float)
    if abs(b[0] - 1.0) <= 1e-10:
        raise NoRadiusError("beta_1 too close to 1")
    lam = nf.lambda_
    rm = -lam / (b[0] - 1.0)
    pw = np.arange(1, b.size + 1)
    R = rm
    res = np.inf
    for it in range(1, max_iter + 1):
        F = lam + b @ R ** pw - R
        dF = (b * pw) @ R ** (pw - 1) - 1.0
        R = R - F / dF
        res = abs(lam + b @ R ** pw - R)
        if not np.isfinite(R) or abs(R) > 1.0:
            raise NoRadiusError(f"Newton left |R| <= 1 (R = {R:.3g})")
        if res <= 1e-14 or (res <= 1e-12 and it > 3):
            break
    if res > 1e-12:
        raise NoRadiusError(f"Newton residual {res:.2e}")
    return RadiusResult(float(R), float(rm), float(res), it)


def effective_multiplier(nf):
    b = nf.beta_bar
    R0 = nf.R0
    return float(b[0] + sum((i + 1) * b[i] * R0 ** i for i in range(1, len(b))))


@dataclass(frozen=True)
class Gt2Result:
    classification: str
    cond_a: bool
    cond_b: bool
    multiplier: float
    effective: float


def gt2_region_test(p, nf, margin=10.0, safety=0.05):
    eta = abs(p.eta)
    ca = eta >= np.sqrt(TWO_PI) * abs(p.nu - p.alpha)
    cb = eta >= margin * p.eps
    if nf is None or not np.isfinite(nf.R0):
        return Gt2Result("outside", bool(ca), bool(cb), np.nan, np.nan)
    mult = abs(effective_multiplier(nf))
    if p.eta < 0:
        mult = 1.0 / mult
    eff = mult + nf.remainder_norms["vertical_lip"]
    if not (ca and cb):
        cls = "outside"
    elif eff < 1.0 - safety:
        cls = "inside"
    elif eff < 1.0:
        cls = "marginal"
    else:
        cls = "outside"
    return Gt2Result(cls, bool(ca), bool(cb), float(mult), float(eff))


# ---------------------------------------------------------------------------

def recentered_map(nf):
    """The map in the final coordinates R~ = R - R0 of the normal form."""
    L = nf.localized
    return TransformedMap(L.base, list(L.changes) + list(nf.transform_chain) + [VerticalShift(nf.R0)])


def pointwise_remainder(nf, n_y=7):
    """Sup of (transformed map - normal-form polynomial) at real points |Y| <= radius."""
    L = nf.localized
    m = nf.series.a.shape[1]
    xi = TWO_PI * np.arange(m) / m
    ys = _cheb(nf.radius, n_y)
    XI, Y = np.meshgrid(xi, ys, indexing="ij")
    a, x = chain_inverse(nf.transform_chain, XI, Y)
    a1, x1 = L(a, x)
    b1, y1 = chain_forward(nf.transform_chain, a1, x1)
    pa, py = nf.polynomial(XI, Y)
    return max(float(np.abs(b1 - pa).max()), float(np.abs(y1 - py).max()))


def compute_normal_form(p, k=3, radius=1e-2, n_modes=32, integ=None, curve_tol=1e-10):
    """Pipeline: translated curve, localisation, coefficients, reduction."""
    from .model_maps import IntegratedMap, rho_tilde_coordinates
    from .russmann import solve_translated_curve
    Q = rho_tilde_coordinates(IntegratedMap(p, integ))
    tc = solve_translated_curve(Q, p.alpha, tol=curve_tol, n_modes=n_modes)
    L = localize_at_translated_curve(Q, tc)
    co = taylor_coefficients_in_x(L, k, radius)
    nf = reduce_to_constants(co, p.alpha, p.eta, k)
    nf.localized = L
    return nf
