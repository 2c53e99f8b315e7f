"""Spectral solver for  mu + a f(theta + 2 pi alpha) - b f(theta) = g(theta).

Mode k of f is g_k / (a e^{i 2 pi k alpha} - b); mu is the average of g.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, PrecisionError, SmallDivisorError
from .fourier import TWO_PI, PeriodicFn

log = logging.getLogger(__name__)

DIVISOR_FLOOR = 1e-13
DUST = 1e-15


@dataclass(frozen=True)
class DifferenceSolution:
    f: PeriodicFn
    mu: float
    min_divisor: float
    bound_ratio: float
    residual: float


def divisors(a, b, alpha, n):
    k = np.arange(n)
    return a * np.exp(1j * TWO_PI * k * alpha) - b


def solve_difference_equation(g, a, b, alpha, tol=1e-10, s=0.1, sigma=0.05,
                              dioph_gamma=0.38, dioph_tau=1.0, verify=True):
    if a == 0.0 or b == 0.0:
        raise InvalidInputError("a and b must be non-zero")
    if abs(a + b) < 1e-8 * (abs(a) + abs(b)):
        warnings.warn("a close to -b: the lemma's lower bound degenerates here", RuntimeWarning)
    c = g.half_coeffs
    d = divisors(a, b, alpha, c.size)
    fk = np.zeros_like(c)
    active = np.abs(c) >= DUST
    active[0] = False
    small = np.abs(d) < DIVISOR_FLOOR
    small[0] = False
    bad = np.nonzero(small & active)[0]
    if bad.size:
        k = int(bad[0])
        raise SmallDivisorError(k, float(abs(d[k])))
    dropped = np.nonzero(small & ~active & (np.abs(c) > 0))[0]
    if dropped.size:
        log.warning("dropping %d resonant dust modes", dropped.size)
    ok = ~small
    ok[0] = False
    fk[ok] = c[ok] / d[ok]
    # a shifted Nyquist mode is not representable on the grid; whatever g
    # carries there is left in the residual
    fk[-1] = 0.0
    f = PeriodicFn(fk)
    mu = float(c[0].real)
    act = np.nonzero(active)[0]
    min_div = float(np.abs(d[act]).min()) if act.size else np.inf
    gnorm = g.weighted_norm(s + sigma) - abs(c[0])
    fnorm = f.weighted_norm(s)
    scale = gnorm / (dioph_gamma * sigma ** (dioph_tau + 1.0))
    ratio = fnorm / scale if scale > 0 else 0.0
    res = 0.0
    if verify:
        lhs = mu + a * f.shift(TWO_PI * alpha).dense_values(4) - b * f.dense_values(4)
        res = float(np.abs(lhs - g.dense_values(4)).max())
        if res > tol:
            raise PrecisionError(res, tol)
    return DifferenceSolution(f, mu, min_div, ratio, res)


@dataclass(frozen=True)
class DiophantineReport:
    min_value: float
    argmin_k: int
    passed: bool
    worst: list


def diophantine_report(alpha, gamma, tau, K):
    if K > 10 ** 6 or K < 1:
        raise InvalidInputError("K must lie in 1..10^6")
    k = np.arange(1, int(K) + 1, dtype=float)
    x = k * alpha
    dist = np.abs(x - np.rint(x))
    val = k ** tau * dist
    order = np.argsort(val, kind="stable")[:3]
    i = int(order[0])
    return DiophantineReport(float(val[i]), i + 1, bool(val[i] >= gamma),
                             [(int(j + 1), float(val[j])) for j in order])
