"""Special functions and closed-form integrals behind the rate expansion.

Small self-contained numerics: the exponential integral Ei on the negative
axis (power series / Lentz continued fraction, no external special-function
dependency), the Gaussian-weighted integral of the dilation mode Z0 with its
Ei closed form, the cubic-moment primitive of Z0, the 6D heat-kernel mass
factor, and the cutoff constant beta = integral (1-chi0)/s^3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .profiles import Cutoff, Z0

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "expint_Ei",
    "gaussian_Z0_integral",
    "gaussian_Z0_closed_form",
    "cubic_moment_Z0",
    "heat6_factor",
    "one_minus_exp_kernel",
    "beta_const",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and budget for the adaptive panel integrations."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200
    scheme: str = "gk21"

    def __post_init__(self):
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureSpec()


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge; carries the achieved error estimate."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (achieved error estimate {estimate:.3e})")
        self.estimate = estimate


def _quad(fn, lo, hi, spec: QuadratureSpec, points=None) -> float:
    kwargs = dict(epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions)
    if points is not None and np.isfinite(hi):
        kwargs["points"] = [p for p in points if lo < p < hi]
    val, err = integrate.quad(fn, lo, hi, **kwargs)
    if err > max(spec.abs_tol, abs(val) * spec.rel_tol) * 50.0:
        raise QuadratureError("quadrature did not reach the requested tolerance", err)
    return val


def _ei_series(x: float) -> float:
    # Ei(x) = gamma + ln|x| + sum x^k/(k k!), fine for |x| <= 5
    from .profiles import EULER_GAMMA

    total = EULER_GAMMA + math.log(abs(x))
    term = 1.0
    for k in range(1, 200):
        term *= x / k
        incr = term / k
        total += incr
        if abs(incr) < 1e-17 * max(1.0, abs(total)):
            return total
    raise RuntimeError("Ei series did not converge")


def _e1_lentz(z: float) -> float:
    # E1(z) via the modified Lentz continued fraction, z > 0 and large-ish:
    # E1(z) = e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - 9/(...))))
    tiny = 1e-300
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 300):
        a = -(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        if c == 0.0:
            c = tiny
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h * math.exp(-z)
    raise RuntimeError("E1 continued fraction did not converge")


def expint_Ei(x) -> float:
    """Exponential integral Ei(x) for x < 0.

    Ei(x) = -integral_{-x}^inf e^{-t}/t dt.  Power series below |x| = 5,
    continued fraction beyond; both branches hit ~1e-15 relative error.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs >= 0.0):
        raise ValueError("expint_Ei is defined here for negative arguments only")
    if xs.ndim == 0:
        xv = float(xs)
        return _ei_series(xv) if xv > -5.0 else -_e1_lentz(-xv)
    return np.array([_ei_series(v) if v > -5.0 else -_e1_lentz(-v) for v in xs.ravel()]).reshape(xs.shape)


def gaussian_Z0_closed_form(a: float) -> float:
    """Leading closed form of the Gaussian-weighted Z0 integral: -(2/a^4)[Ei(-1/(4a^2)) + 1]."""
    return -2.0 / a**4 * (expint_Ei(-1.0 / (4.0 * a**2)) + 1.0)


def gaussian_Z0_integral(a: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """integral_0^inf e^{-u^2/4} Z0(u a) u du by adaptive quadrature, a > 1.

    Matches gaussian_Z0_closed_form within O(ln(a)/a^6).  The integrand has a
    sign change at u = 1/a and cancellation against the Gaussian; since Z0 has
    zero planar mass the Gaussian weight is replaced by (e^{-u^2/4} - 1),
    which kills the slowly-decaying tail analytically.
    """
    if a <= 1.0:
        raise ValueError("gaussian_Z0_integral requires a > 1")
    u_max = 2.0 * math.sqrt(math.log(100.0 / spec.abs_tol))

    def integrand(u):
        return np.expm1(-u * u / 4.0) * Z0(u * a) * u

    pts = [1.0 / a, 2.0 / a, min(1.0, u_max / 2)]
    val = _quad(integrand, 0.0, u_max, spec, points=pts)
    # Gaussian tail beyond u_max was dropped from e^{-u^2/4}*Z0*u; (−1)*Z0*u tail remains
    def tail(u):
        return -Z0(u * a) * u

    val += _quad(tail, u_max, np.inf, spec)
    return val


def cubic_moment_Z0(z1: float) -> float:
    """integral_0^{z1} z^3 Z0(z) dz via the primitive -8[(2+3z^2)/(1+z^2)^2 + ln(1+z^2)]."""
    if z1 < 0.0:
        raise ValueError("z1 must be non-negative")

    def primitive(z):
        q = 1.0 + z * z
        return -8.0 * ((2.0 + 3.0 * z * z) / q**2 + math.log(q))

    return primitive(z1) - primitive(0.0)


def one_minus_exp_kernel(x):
    """f(x) = 1 - e^{-x}(1+x), the 6D heat-kernel mass kernel, stable near 0.

    Taylor branch x^2/2 - x^3/3 + x^4/8 - x^5/30 below x = 1e-4 avoids the
    catastrophic cancellation of the direct expression.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, x, 0.0)
    taylor = xs**2 * (0.5 + xs * (-1.0 / 3.0 + xs * (0.125 - xs / 30.0)))
    xb = np.where(small, 1.0, x)
    direct = 1.0 - np.exp(-xb) * (1.0 + xb)
    out = np.where(small, taylor, direct)
    return out if out.ndim else float(out)


def heat6_factor(w):
    """(1/w^4)[1 - e^{-w^2/4}(1 + w^2/4)] with the removable w=0 singularity.

    Monotone decreasing from 1/32 at w=0, ~1/w^4 at infinity.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("w must be non-negative")
    x = w * w / 4.0
    small = w < 1e-2
    xs = np.where(small, x, 0.0)
    taylor = (0.5 + xs * (-1.0 / 3.0 + xs * (0.125 - xs / 30.0))) / 16.0
    wb = np.where(small, 1.0, w)
    direct = one_minus_exp_kernel(np.where(small, 1.0, x)) / wb**4
    out = np.where(small, taylor, direct)
    return out if out.ndim else float(out)


def beta_const(cutoff, spec: QuadratureSpec = DEFAULT_QUAD, support=None) -> float:
    """Cutoff constant beta = integral_0^inf (1 - chi0(s))/s^3 ds.

    ``support`` is the (lo, hi) bridge interval of the cutoff; beyond hi the
    integrand is exactly 1/s^3 and the tail is added in closed form as
    1/(2 hi^2).  For any admissible profile beta lies in (1/8, 5/8).
    """
    if support is None:
        if isinstance(cutoff, Cutoff):
            support = (cutoff.lo, cutoff.hi)
        else:
            raise ValueError("support interval required for a bare callable cutoff")
    lo, hi = support
    if not (0.0 < lo <= hi):
        raise ValueError("invalid cutoff support")
    tail = 1.0 / (2.0 * hi * hi)
    if hi == lo:
        return tail
    bridge = _quad(lambda s: (1.0 - cutoff(s)) / s**3, lo, hi, spec)
    return bridge + tail
