"""Band-limited real periodic functions on T = R/2piZ.

A function with cutoff N is sampled on M = 2N + 2 uniform nodes
theta_j = 2 pi j / M.  We keep the non-negative half c_0, ..., c_{N+1} of
its Fourier coefficients; c_{-k} = conj(c_k).  The top index N + 1 is the
Nyquist mode of the grid and is always real.
"""

from dataclasses import dataclass

import numpy as np
from scipy import fft

from .errors import ConvergenceError, InvalidInputError, NotAContractionError

TWO_PI = 2.0 * np.pi
DEFAULT_MODES = 128
_CHUNK = 4096


def grid_points(n_modes):
    m = 2 * n_modes + 2
    return TWO_PI * np.arange(m) / m


class PeriodicFn:
    """Real trigonometric polynomial sum_{|k| <= N+1} c_k e^{ik theta}."""

    __slots__ = ("_c", "_values")

    def __init__(self, coeffs, values=None):
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 1 or c.size < 3:
            raise InvalidInputError("need at least coefficients c_0, c_1, c_2")
        c[0] = c[0].real
        c[-1] = c[-1].real
        c.setflags(write=False)
        self._c = c
        if values is None:
            m = 2 * (c.size - 1)
            x = c * m
            x[-1] = 2.0 * m * c[-1].real
            values = fft.irfft(x, m)
        values = np.array(values, dtype=float)
        values.setflags(write=False)
        self._values = values

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, n_modes=DEFAULT_MODES):
        return cls(np.zeros(n_modes + 2))

    @classmethod
    def constant(cls, value, n_modes=DEFAULT_MODES):
        c = np.zeros(n_modes + 2, dtype=complex)
        c[0] = value
        return cls(c)

    @classmethod
    def from_function(cls, func, n_modes=DEFAULT_MODES):
        return fit_periodic(func(grid_points(n_modes)))

    # basic attributes ---------------------------------------------------
    @property
    def n_modes(self):
        return self._c.size - 2

    @property
    def grid_size(self):
        return self._values.size

    @property
    def grid(self):
        return grid_points(self.n_modes)

    @property
    def values(self):
        return self._values

    @property
    def half_coeffs(self):
        return self._c

    @property
    def coeffs(self):
        """Two-sided coefficients ordered k = -(N+1), ..., N+1."""
        c = self._c
        return np.concatenate([np.conj(c[:0:-1]), c])

    def coeff(self, k):
        k = int(k)
        if abs(k) >= self._c.size:
            return 0j
        return self._c[k] if k >= 0 else np.conj(self._c[-k])

    @property
    def mean(self):
        return float(self._c[0].real)

    def sup_norm_estimate(self):
        return float(abs(self._c[0]) + 2.0 * np.abs(self._c[1:]).sum())

    def weighted_norm(self, s):
        k = np.arange(self._c.size)
        w = np.abs(self._c) * np.exp(k * s)
        return float(w[0] + 2.0 * w[1:].sum())

    def tail_mass(self):
        k0 = self.n_modes // 2
        return float(2.0 * np.abs(self._c[k0 + 1:]).sum())

    def max_abs(self):
        return float(np.abs(self._values).max())

    # evaluation ---------------------------------------------------------
    def __call__(self, theta, order=0):
        theta = np.asarray(theta)
        flat = theta.reshape(-1)
        cplx = np.iscomplexobj(flat)
        k = np.arange(1, self._c.size)
        cp = self._c[1:] * (1j * k) ** order
        cm = np.conj(self._c[1:]) * (-1j * k) ** order
        c0 = self._c[0] if order == 0 else 0.0
        out = np.empty(flat.shape, dtype=complex if cplx else float)
        for i in range(0, flat.size, _CHUNK):
            e = np.exp(1j * np.outer(flat[i:i + _CHUNK], k))
            if cplx:
                em = np.exp(-1j * np.outer(flat[i:i + _CHUNK], k))
                out[i:i + _CHUNK] = c0 + e @ cp + em @ cm
            else:
                out[i:i + _CHUNK] = (c0 + 2.0 * (e @ cp)).real
        return out.reshape(theta.shape)

    def dense_values(self, factor):
        """Values on the grid refined ``factor`` times (zero-padded inverse FFT)."""
        m = factor * self.grid_size
        if factor < 2:
            return self.values
        x = np.zeros(m // 2 + 1, dtype=complex)
        x[: self._c.size] = self._c * m
        return fft.irfft(x, m)

    def derivative(self, order=1):
        k = np.arange(self._c.size)
        c = self._c * (1j * k) ** order
        if order % 2:
            c[-1] = 0.0     # odd derivative of the real Nyquist mode is not representable
        return PeriodicFn(c)

    def shift(self, delta):
        k = np.arange(self._c.size)
        c = self._c * np.exp(1j * k * delta)
        return PeriodicFn(c)

    def resample(self, n_modes):
        c = np.zeros(n_modes + 2, dtype=complex)
        n = min(n_modes + 2, self._c.size)
        c[:n] = self._c[:n]
        return PeriodicFn(c)

    def map_values(self, func):
        return fit_periodic(func(self._values))

    # arithmetic ---------------------------------------------------------
    def _other(self, other):
        if isinstance(other, PeriodicFn):
            if other.n_modes != self.n_modes:
                other = other.resample(self.n_modes)
            return other
        return None

    def __add__(self, other):
        o = self._other(other)
        if o is None:
            c = self._c.copy()
            c[0] += other
            return PeriodicFn(c)
        return PeriodicFn(self._c + o._c)

    __radd__ = __add__

    def __neg__(self):
        return PeriodicFn(-self._c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._other(other)
        if o is None:
            return PeriodicFn(self._c * other)
        return fit_periodic(self._values * o._values)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return PeriodicFn(self._c / scalar)

    def __repr__(self):
        return f"PeriodicFn(n_modes={self.n_modes}, mean={self.mean:.6g}, sup~{self.max_abs():.3g})"


def fit_periodic(samples):
    """Trigonometric interpolant of samples on the uniform grid (even count >= 4)."""
    v = np.asarray(samples, dtype=float)
    m = v.size
    if v.ndim != 1 or m < 4 or m % 2:
        raise InvalidInputError(f"need an even number >= 4 of samples, got {m}")
    x = fft.rfft(v) / m
    x[-1] = x[-1].real / 2.0
    return PeriodicFn(x, values=v)


def eval_periodic(f, theta, order=0):
    if not 0 <= order <= 4:
        raise InvalidInputError("derivative order must lie in 0..4")
    return f(theta, order)


def shift_periodic(f, delta):
    return f.shift(delta)


@dataclass(frozen=True)
class CircleMap:
    """Degree one lift theta -> theta + u(theta)."""

    displacement: PeriodicFn

    def __call__(self, theta):
        return theta + self.displacement(theta)

    @property
    def lipschitz(self):
        return float(np.abs(self.displacement.derivative().values).max())

    def is_orientation_preserving(self):
        return bool(np.all(1.0 + self.displacement.derivative().values > 0.0))


def invert_circle_map(m, tol=1e-13, max_iter=200):
    """Inverse of id + u by the per-node fixed point v <- -u(theta + v)."""
    u = m.displacement
    lip = m.lipschitz
    if lip >= 1.0:
        raise NotAContractionError(lip)
    th = u.grid
    v = -u.values.copy()
    res = np.inf
    for _ in range(max_iter):
        v_new = -u(th + v)
        res = float(np.abs(v_new - v).max())
        v = v_new
        if res * (1.0 if lip < 0.5 else 1.0 / (1.0 - lip)) <= tol:
            break
    else:
        raise ConvergenceError("circle map inversion did not converge", residual=res)
    return CircleMap(fit_periodic(v))
