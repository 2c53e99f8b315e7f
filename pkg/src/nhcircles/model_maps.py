"""Spin-orbit field, the closed-form time-2pi map P and the integrated map Q.

Coordinates: theta is the angle, r the shifted velocity (theta_dot = alpha + r).
The perturbation terms of Q are understood in rho = r - (nu - alpha).
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .cohomology import diophantine_report
from .errors import DivergenceError, InvalidInputError
from .fourier import DEFAULT_MODES, TWO_PI

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def twist_factor(eta):
    """(1 - exp(-2 pi eta)) / eta, with its limit 2 pi at eta = 0."""
    eta = float(eta)
    if abs(eta) < 1e-8:
        x = TWO_PI * eta
        return TWO_PI * (1.0 - x / 2.0 + x * x / 6.0 - x ** 3 / 24.0)
    return -np.expm1(-TWO_PI * eta) / eta


def contraction(eta):
    return float(np.exp(-TWO_PI * eta))


@dataclass(frozen=True)
class PotentialSpec:
    """f(theta, t) = sum a cos(k theta + l t) + b sin(k theta + l t)."""

    terms: tuple = ((2, -2, 1.0, 0.0),)

    def __post_init__(self):
        terms = tuple((int(k), int(l), float(a), float(b)) for k, l, a, b in self.terms)
        pairs = [(k, l) for k, l, _, _ in terms]
        if len(set(pairs)) != len(pairs):
            raise InvalidInputError("potential terms must have distinct (k, l)")
        object.__setattr__(self, "terms", terms)

    def arrays(self):
        t = np.array(self.terms, dtype=float).reshape(-1, 4)
        return (np.ascontiguousarray(t[:, 0]), np.ascontiguousarray(t[:, 1]),
                np.ascontiguousarray(t[:, 2]), np.ascontiguousarray(t[:, 3]))

    def value(self, theta, t):
        out = 0.0
        for k, l, a, b in self.terms:
            arg = k * theta + l * t
            out = out + a * np.cos(arg) + b * np.sin(arg)
        return out

    def d_theta(self, theta, t):
        out = 0.0
        for k, l, a, b in self.terms:
            arg = k * theta + l * t
            out = out + k * (b * np.cos(arg) - a * np.sin(arg))
        return out

    def to_list(self):
        return [list(t) for t in self.terms]


@dataclass(frozen=True)
class SpinOrbitParams:
    eta: float
    nu: float
    eps: float
    alpha: float = GOLDEN
    dioph_gamma: float = 0.38
    dioph_tau: float = 1.0
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    audit_modes: int = DEFAULT_MODES + 1

    def __post_init__(self):
        if not self.eps >= 0.0:
            raise InvalidInputError("eps must be non-negative")
        if self.dioph_gamma <= 0.0 or self.dioph_tau < 1.0:
            raise InvalidInputError("need dioph_gamma > 0 and dioph_tau >= 1")
        rep = diophantine_report(self.alpha, self.dioph_gamma, self.dioph_tau, self.audit_modes)
        if not rep.passed:
            raise InvalidInputError(
                f"alpha={self.alpha!r} fails the Diophantine audit at k={rep.argmin_k} "
                f"(min {rep.min_value:.3g} < gamma {self.dioph_gamma})")

    def replace(self, **kw):
        d = dict(eta=self.eta, nu=self.nu, eps=self.eps, alpha=self.alpha,
                 dioph_gamma=self.dioph_gamma, dioph_tau=self.dioph_tau,
                 potential=self.potential, audit_modes=self.audit_modes)
        d.update(kw)
        return SpinOrbitParams(**d)

    @property
    def detuning(self):
        return self.nu - self.alpha

    @property
    def twist(self):
        return twist_factor(self.eta)

    @property
    def contraction(self):
        return contraction(self.eta)

    @property
    def r_alpha(self):
        """Velocity of the circle of P rotated by exactly 2 pi alpha."""
        return self.detuning * (1.0 - TWO_PI / self.twist)

    @property
    def tau_alpha(self):
        """Vertical translation of that circle."""
        return TWO_PI * self.eta * self.detuning


@dataclass(frozen=True)
class IntegratorOpts:
    n_steps: int = 512


def spin_orbit_vector_field(p, theta, r, t):
    dth = p.alpha + r
    dr = -p.eta * r + p.eta * p.detuning - p.eps * p.potential.d_theta(theta, t)
    return dth, dr


# ---------------------------------------------------------------------------
# maps

class CylinderMap:
    """(theta, r) -> (theta', r') on T x R, theta' a lift (degree one)."""

    kind = "abstract"

    def __init__(self, params):
        self.params = params

    def __call__(self, theta, r, strict=True):
        raise NotImplementedError

    def jacobian(self, theta, r):
        raise NotImplementedError

    def taylor_in_r(self, theta, r, degree):
        raise NotImplementedError

    def inverse(self):
        raise NotImplementedError

    @property
    def eta(self):
        return self.params.eta

    @property
    def det(self):
        return contraction(self.params.eta)


def _bcast(theta, r):
    theta, r = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(r, dtype=float))
    return theta, r


class ClosedFormMap(CylinderMap):
    """The unperturbed map P, or its inverse when ``backward``."""

    kind = "closed-form-P"

    def __init__(self, params, backward=False):
        super().__init__(params)
        self.backward = backward

    def __call__(self, theta, r, strict=True):
        p = self.params
        theta, r = _bcast(theta, r)
        d = p.detuning
        e = p.contraction
        c = p.twist
        if not self.backward:
            return theta + TWO_PI * p.nu + c * (r - d), d + e * (r - d)
        rho = (r - d) / e
        return theta - TWO_PI * p.nu - c * rho, d + rho

    def _jac(self, shape):
        p = self.params
        e, c = p.contraction, p.twist
        m = np.array([[1.0, c], [0.0, e]]) if not self.backward else np.array([[1.0, -c / e], [0.0, 1.0 / e]])
        return np.broadcast_to(m, shape + (2, 2)).copy()

    def jacobian(self, theta, r):
        th, rr = self(theta, r)
        return th, rr, self._jac(th.shape)

    def taylor_in_r(self, theta, r, degree):
        theta, r = _bcast(theta, r)
        th, rr, j = self.jacobian(theta.ravel(), r.ravel())
        out = np.zeros((th.size, 2, degree + 1))
        out[:, 0, 0] = th
        out[:, 1, 0] = rr
        if degree >= 1:
            out[:, 0, 1] = j[:, 0, 1]
            out[:, 1, 1] = j[:, 1, 1]
        return out

    def inverse(self):
        return ClosedFormMap(self.params, not self.backward)


class IntegratedMap(CylinderMap):
    """Time-2pi flow of the full field (backward flow for the inverse)."""

    kind = "integrated-Q"

    def __init__(self, params, integ=None, backward=False):
        super().__init__(params)
        self.integ = integ or IntegratorOpts()
        self.backward = backward
        self._pot = params.potential.arrays()

    def _span(self):
        return (TWO_PI, 0.0) if self.backward else (0.0, TWO_PI)

    def _run(self, theta, r, jac, strict):
        p = self.params
        theta, r = _bcast(theta, r)
        shape = theta.shape
        th0 = np.ascontiguousarray(theta.ravel())
        r0 = np.ascontiguousarray(r.ravel())
        out = np.empty((th0.size, 2))
        jout = np.empty((th0.size, 4)) if jac else np.empty((1, 4))
        t0, t1 = self._span()
        bad = _kernels.flow(th0, r0, p.alpha, p.eta, p.eta * p.detuning, p.eps, *self._pot,
                            t0, t1, int(self.integ.n_steps), jac, out, jout)
        if bad >= 0 and strict:
            raise DivergenceError("non-finite state during integration", step=int(bad))
        th, rr = out[:, 0].reshape(shape), out[:, 1].reshape(shape)
        if jac:
            return th, rr, jout.reshape(shape + (2, 2))
        return th, rr

    def __call__(self, theta, r, strict=True):
        return self._run(theta, r, False, strict)

    def jacobian(self, theta, r):
        return self._run(theta, r, True, True)

    def taylor_in_r(self, theta, r, degree):
        p = self.params
        theta, r = _bcast(theta, r)
        th0 = np.ascontiguousarray(theta.ravel())
        r0 = np.ascontiguousarray(r.ravel())
        out = np.empty((th0.size, 2, degree + 1))
        t0, t1 = self._span()
        bad = _kernels.flow_jet(th0, r0, int(degree), p.alpha, p.eta, p.eta * p.detuning, p.eps,
                                *self._pot, t0, t1, int(self.integ.n_steps), out)
        if bad >= 0:
            raise DivergenceError("non-finite jet during integration", step=int(bad))
        return out

    def inverse(self):
        return IntegratedMap(self.params, self.integ, not self.backward)


class VerticalShift:
    """(theta, r) -> (theta, r - s)."""

    jet_shift = True

    def __init__(self, s):
        self.s = float(s)

    def forward(self, theta, r):
        return theta, r - self.s

    def inverse(self, theta, y):
        return theta, y + self.s

    def jacobian(self, theta, r):
        theta, r = _bcast(theta, r)
        return np.broadcast_to(np.eye(2), theta.shape + (2, 2)).copy()


class TransformedMap(CylinderMap):
    """T o base o T^{-1} for a chain T = changes[-1] o ... o changes[0]."""

    kind = "transformed"

    def __init__(self, base, changes):
        super().__init__(base.params)
        self.base = base
        self.changes = list(changes)

    def to_base(self, theta, y):
        pts = [(theta, y)]
        for ch in reversed(self.changes):
            theta, y = ch.inverse(theta, y)
            pts.append((theta, y))
        return theta, y, pts[::-1]

    def from_base(self, theta, r):
        for ch in self.changes:
            theta, r = ch.forward(theta, r)
        return theta, r

    def __call__(self, theta, y, strict=True):
        theta, y = _bcast(theta, y)
        th, r, _ = self.to_base(theta, y)
        th, r = self.base(th, r, strict=strict)
        return self.from_base(th, r)

    def jacobian(self, theta, y):
        theta, y = _bcast(theta, y)
        th, r, pts = self.to_base(theta, y)
        # pts[0] is the base point, pts[i] the image under the first i changes
        jin = np.broadcast_to(np.eye(2), theta.shape + (2, 2)).copy()
        for ch, (a, b) in zip(self.changes, pts[:-1]):
            jin = ch.jacobian(a, b) @ jin
        jin = np.linalg.inv(jin)
        th1, r1, jb = self.base.jacobian(th, r)
        jout = np.broadcast_to(np.eye(2), theta.shape + (2, 2)).copy()
        a, b = th1, r1
        for ch in self.changes:
            jout = ch.jacobian(a, b) @ jout
            a, b = ch.forward(a, b)
        return a, b, jout @ jb @ jin

    def taylor_in_r(self, theta, y, degree):
        if not all(getattr(ch, "jet_shift", False) for ch in self.changes):
            raise NotImplementedError("jets only pass through vertical shifts")
        s = sum(ch.s for ch in self.changes)
        out = self.base.taylor_in_r(theta, np.asarray(y) + s, degree).copy()
        out[:, 1, 0] -= s
        return out

    def inverse(self):
        return TransformedMap(self.base.inverse(), self.changes)


def unperturbed_map(p):
    return ClosedFormMap(p)


def perturbed_map(p, integ=None):
    return IntegratedMap(p, integ)


def rho_coordinates(m):
    """The map in rho = r - (nu - alpha)."""
    return TransformedMap(m, [VerticalShift(m.params.detuning)])


def rho_tilde_coordinates(m):
    """The map in rho~ = r - r_alpha, where P reads (theta + 2 pi alpha + C rho~, e rho~ + tau)."""
    return TransformedMap(m, [VerticalShift(m.params.r_alpha)])


def unperturbed_time2pi_map(p, point):
    th, r = ClosedFormMap(p)(point[0], point[1])
    return float(th), float(r)


def perturbed_time2pi_map(p, point, integ=None):
    th, r = IntegratedMap(p, integ)(point[0], point[1])
    return float(th), float(r)


def map_jacobian(m, point):
    return m.jacobian(point[0], point[1])[2]
