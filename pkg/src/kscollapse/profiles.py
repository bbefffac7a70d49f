"""Closed-form radial profiles, kernel functions, cutoffs and the blow-up rate law.

Everything downstream builds on the stationary aggregation bubble

    U(rho) = 8 / (1 + rho^2)^2,

its logarithm Gamma0 = ln U, the dilation mode Z0 = 2U + rho U', the
Liouville-kernel pair (z0, zbar0), and the asymptotic collapse scale
lambda_star(t) ~ 2 e^{-(gamma+2)/2} sqrt(T-t) e^{-sqrt(|ln(T-t)|/2)} with
gamma the Euler-Mascheroni constant.  All functions here are pure and accept
scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EULER_GAMMA = 0.5772156649015328606

__all__ = [
    "EULER_GAMMA",
    "RadialGrid",
    "RadialField",
    "Cutoff",
    "RateConstants",
    "bubble_U",
    "bubble_U_prime",
    "gamma0",
    "gamma0_prime",
    "Z0",
    "z0_kernel",
    "zbar0_kernel",
    "lambda_star",
    "p_star",
]


def bubble_U(rho):
    """Steady bubble density 8/(1+rho^2)^2; total planar mass 8*pi."""
    rho = np.asarray(rho, dtype=float)
    return 8.0 / (1.0 + rho**2) ** 2


def bubble_U_prime(rho):
    """Radial derivative U'(rho) = -32 rho / (1+rho^2)^3."""
    rho = np.asarray(rho, dtype=float)
    return -32.0 * rho / (1.0 + rho**2) ** 3


def gamma0(rho):
    """Log-density Gamma0 = ln U = ln 8 - 2 ln(1+rho^2).

    Satisfies -Laplacian(Gamma0) = U, so Gamma0 doubles as the chemical
    potential generated by the bubble.
    """
    rho = np.asarray(rho, dtype=float)
    return math.log(8.0) - 2.0 * np.log1p(rho**2)


def gamma0_prime(rho):
    """d(Gamma0)/drho = -4 rho/(1+rho^2)."""
    rho = np.asarray(rho, dtype=float)
    return -4.0 * rho / (1.0 + rho**2)


def Z0(rho):
    """Dilation mode 2U + rho U' = (16 - 16 rho^2)/(1+rho^2)^3.

    Zero total planar mass: Z0 = div(y U) integrates to zero.
    """
    rho = np.asarray(rho, dtype=float)
    return (16.0 - 16.0 * rho**2) / (1.0 + rho**2) ** 3


def z0_kernel(rho):
    """Bounded kernel element of Delta + U: z0 = rho*Gamma0' + 2 = 2(1-rho^2)/(1+rho^2)."""
    rho = np.asarray(rho, dtype=float)
    return 2.0 * (1.0 - rho**2) / (1.0 + rho**2)


def zbar0_kernel(rho, derivative: bool = False):
    """Second kernel element of Delta + U, log-growing at both ends.

    Obtained from z0 by reduction of order; the quadrature
    integral(1/(rho z0^2)) evaluates in closed form, giving

        zbar0 = (1/4) z0(rho) ln(rho) + 1/(1+rho^2),

    normalized so the Wronskian satisfies rho*(z0 zbar0' - z0' zbar0) = 1.
    The apparent pole of the reduced integral at rho = 1 cancels.
    """
    rho = np.asarray(rho, dtype=float)
    one_p = 1.0 + rho**2
    with np.errstate(divide="ignore"):
        logr = np.where(rho > 0.0, np.log(np.where(rho > 0.0, rho, 1.0)), -np.inf)
    if not derivative:
        return 0.25 * z0_kernel(rho) * logr + 1.0 / one_p
    # zbar0' = (1/4) z0' ln(rho) + z0/(4 rho) - 2 rho/(1+rho^2)^2
    z0p = -8.0 * rho / one_p**2
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(rho > 0.0, z0_kernel(rho) / (4.0 * rho), np.inf)
    return 0.25 * z0p * logr + term - 2.0 * rho / one_p**2


def _check_time(t, T):
    dt = T - np.asarray(t, dtype=float)
    if np.any(dt <= 0.0):
        raise ValueError("lambda_star/p_star need t < T")
    if np.any(dt >= 1.0):
        raise ValueError("lambda_star/p_star need T - t < 1 (log factor undefined)")
    return dt


def lambda_star(t, T):
    """Leading-order collapse scale 2 e^{-(gamma+2)/2} sqrt(T-t) e^{-sqrt(|ln(T-t)|/2)}."""
    dt = _check_time(t, T)
    v = -np.log(dt)
    return 2.0 * math.exp(-(EULER_GAMMA + 2.0) / 2.0) * np.sqrt(dt) * np.exp(-np.sqrt(v / 2.0))


def p_star(t, T):
    """Leading rate variable p = lambda*lambda_dot: -(c_star/2) e^{-sqrt(2|ln(T-t)|)}.

    Negative on the whole window (the scale is shrinking); c_star = 4 e^{-(gamma+2)}.
    """
    dt = _check_time(t, T)
    c_star = 4.0 * math.exp(-(EULER_GAMMA + 2.0))
    v = -np.log(dt)
    return -0.5 * c_star * np.exp(-np.sqrt(2.0 * v))


@dataclass(frozen=True)
class RateConstants:
    """The constants of the rate law, all derived from the Euler-Mascheroni gamma.

    The defining identity gamma + 2 + ln(c_star/4) = 0 holds to machine
    precision by construction and is re-checked here.
    """

    euler_gamma: float = EULER_GAMMA
    a: float = math.sqrt(2.0) / 2.0
    c_star: float = 4.0 * math.exp(-(EULER_GAMMA + 2.0))
    kappa: float = EULER_GAMMA + 1.0 - math.log(4.0)

    def __post_init__(self):
        ident = self.euler_gamma + 2.0 + math.log(self.c_star / 4.0)
        if abs(ident) > 1e-14:
            raise ValueError(f"rate-constant identity violated: {ident:.3e}")


def _smoothstep_c2(x):
    """Quintic smoothstep on [0,1]: 6x^5 - 15x^4 + 10x^3, C^2 at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 + x * (-15.0 + 6.0 * x))


def _smoothstep_c2_d1(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xx = np.where(inside, x, 0.0)
    return np.where(inside, 30.0 * xx**2 * (1.0 - xx) ** 2, 0.0)


def _smoothstep_c2_d2(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xx = np.where(inside, x, 0.0)
    return np.where(inside, 60.0 * xx * (1.0 - xx) * (1.0 - 2.0 * xx), 0.0)


@dataclass(frozen=True)
class Cutoff:
    """Smooth radial cutoff: 1 on [0, lo], 0 on [hi, inf), quintic C^2 bridge between.

    Default support edges (1, 2) follow the convention chi0(s)=1 for s<=1,
    chi0(s)=0 for s>=2 used by every field construction here.  The concrete
    bridge polynomial is part of the artifact contract: downstream constants
    (beta, the source E) depend on it.
    """

    lo: float = 1.0
    hi: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.lo < self.hi):
            raise ValueError("cutoff needs 0 < lo < hi")

    def __call__(self, s):
        x = (np.asarray(s, dtype=float) - self.lo) / (self.hi - self.lo)
        return 1.0 - _smoothstep_c2(x)

    def d1(self, s):
        w = self.hi - self.lo
        x = (np.asarray(s, dtype=float) - self.lo) / w
        return -_smoothstep_c2_d1(x) / w

    def d2(self, s):
        w = self.hi - self.lo
        x = (np.asarray(s, dtype=float) - self.lo) / w
        return -_smoothstep_c2_d2(x) / w**2


class RadialGrid:
    """Strictly increasing radii with trapezoidal weights for the planar measure 2*pi*r*dr.

    sum(weights) reproduces pi*(R^2 - r0^2) exactly because the weight density
    2*pi*r is linear; the constructor still asserts the identity to 1e-10 as a
    guard against broken subclassing or editing.
    """

    __slots__ = ("radii", "weights")

    def __init__(self, radii):
        radii = np.asarray(radii, dtype=float)
        if radii.ndim != 1 or radii.size < 2:
            raise ValueError("need at least two radii")
        if radii[0] < 0.0 or np.any(np.diff(radii) <= 0.0):
            raise ValueError("radii must be non-negative and strictly increasing")
        self.radii = radii
        w = np.zeros_like(radii)
        dr = np.diff(radii)
        two_pi_r = 2.0 * math.pi * radii
        w[:-1] += 0.5 * dr * two_pi_r[:-1]
        w[1:] += 0.5 * dr * two_pi_r[1:]
        self.weights = w
        area = math.pi * (radii[-1] ** 2 - radii[0] ** 2)
        if abs(w.sum() - area) > 1e-10 * max(1.0, area):
            raise ValueError("quadrature weights do not reproduce the annulus area")

    @classmethod
    def geometric(cls, r_min: float, r_max: float, n: int, include_zero: bool = True) -> "RadialGrid":
        """Graded radii with geometrically growing steps, first step r_min.

        Node k sits at r_min (q^k - 1)/(q - 1), so consecutive panel ratios are
        a constant q >= 1 all the way through the origin (no skewed stencil at
        the first interior node).  Choose r_min ~ lambda/8 to resolve a bubble
        core of scale lambda.
        """
        if not (0.0 < r_min < r_max):
            raise ValueError("need 0 < r_min < r_max")
        if n < 2:
            raise ValueError("need n >= 2 positive nodes")
        if r_min * n >= r_max:
            r = np.linspace(0.0, r_max, n + 1)
            return cls(r if include_zero else r[1:])

        def span(q):
            t = n * np.log(q)
            if t > 700.0:
                return np.inf
            return r_min * np.expm1(t) / (q - 1.0)

        lo, hi = 1.0 + 1e-14, 2.0
        while span(hi) < r_max:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if span(mid) < r_max:
                lo = mid
            else:
                hi = mid
        q = 0.5 * (lo + hi)
        steps = r_min * q ** np.arange(n)
        r = np.concatenate(([0.0], np.cumsum(steps)))
        r *= r_max / r[-1]
        return cls(r if include_zero else r[1:])

    @classmethod
    def uniform(cls, r_max: float, n: int) -> "RadialGrid":
        return cls(np.linspace(0.0, r_max, n))

    @property
    def n(self) -> int:
        return self.radii.size

    def integrate(self, values) -> float:
        """Planar integral of a sampled radial function: sum(w_i f_i) ~ integral(f dA)."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    def __repr__(self):
        return f"RadialGrid(n={self.n}, r=[{self.radii[0]:g}..{self.radii[-1]:g}])"


@dataclass
class RadialField:
    """A radial function sampled on a RadialGrid at one time instant."""

    grid: RadialGrid
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.radii.shape:
            raise ValueError("values must match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    @classmethod
    def from_function(cls, grid: RadialGrid, fn) -> "RadialField":
        return cls(grid, fn(grid.radii))

    def mass(self) -> float:
        """Total planar mass 2*pi*integral(f r dr)."""
        return self.grid.integrate(self.values)

    def second_moment(self) -> float:
        """Planar second moment 2*pi*integral(f r^3 dr)."""
        return self.grid.integrate(self.values * self.grid.radii**2)

    def __add__(self, other):
        if isinstance(other, RadialField):
            if other.grid is not self.grid:
                raise ValueError("fields live on different grids")
            return RadialField(self.grid, self.values + other.values)
        return RadialField(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, RadialField):
            if other.grid is not self.grid:
                raise ValueError("fields live on different grids")
            return RadialField(self.grid, self.values - other.values)
        return RadialField(self.grid, self.values - other)

    def __mul__(self, c):
        return RadialField(self.grid, self.values * c)

    __rmul__ = __mul__
