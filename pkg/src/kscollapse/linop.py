"""The radial linearized operator L around the bubble and its zero-mass inverse.

L[phi] = div(U grad g) with g = phi/U - (-Delta)^{-1} phi.  The kernel is
spanned by the dilation mode Z0 = U z0.  The inverse runs the construction
backwards: integrate the flux once to get g', then recover the potential psi
from -Delta psi - U psi = U g by variation of parameters with the Liouville
kernel pair (z0, zbar0), and return phi = U (g + psi).

Moment bookkeeping: a zero-mass right-hand side h always yields a solution;
its planar mass comes out proportional to the second moment of h (it vanishes
when the second moment does, which is the content of the zero-mass output
property used by the rate construction).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .profiles import (
    RadialField,
    RadialGrid,
    Z0,
    bubble_U,
    gamma0,
    z0_kernel,
    zbar0_kernel,
)

__all__ = [
    "Decomposition",
    "MomentConditionError",
    "inv_laplacian_gradient",
    "inv_laplacian_value",
    "apply_L",
    "decompose",
    "solve_L",
]


class MomentConditionError(ValueError):
    """A moment precondition failed; carries the measured moment."""

    def __init__(self, which: str, measured: float, scale: float):
        super().__init__(
            f"{which} must vanish: measured {measured:.6e} against scale {scale:.3e}"
        )
        self.which = which
        self.measured = measured


def _cumtrapz0(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid of y dx starting at 0."""
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * np.diff(x) * (y[1:] + y[:-1]))
    return out


def _d1_nonuniform(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second-order first derivative on a nonuniform grid (3-point stencils)."""
    n = x.size
    d = np.empty_like(f)
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    d[1:-1] = (
        -hp / (hm * (hm + hp)) * f[:-2]
        + (hp - hm) / (hm * hp) * f[1:-1]
        + hm / (hp * (hm + hp)) * f[2:]
    )
    h0, h1 = x[1] - x[0], x[2] - x[1]
    d[0] = (
        -(2 * h0 + h1) / (h0 * (h0 + h1)) * f[0]
        + (h0 + h1) / (h0 * h1) * f[1]
        - h0 / (h1 * (h0 + h1)) * f[2]
    )
    hn, hn1 = x[-1] - x[-2], x[-2] - x[-3]
    d[-1] = (
        hn / (hn1 * (hn + hn1)) * f[-3]
        - (hn + hn1) / (hn1 * hn) * f[-2]
        + (2 * hn + hn1) / (hn * (hn + hn1)) * f[-1]
    )
    return d


def _power_tail(x_last: float, f_last: float, x_prev: float, f_prev: float) -> float:
    """Tail integral_{x_last}^inf of a function matched to a local power law."""
    if f_last == 0.0 or f_prev == 0.0 or f_last * f_prev < 0.0:
        return 0.0
    k = math.log(abs(f_prev / f_last)) / math.log(x_last / x_prev)
    k = min(max(k, 1.5), 12.0)
    return f_last * x_last / (k - 1.0)


def inv_laplacian_gradient(phi: RadialField) -> RadialField:
    """Radial gradient of psi = (-Delta)^{-1} phi: psi'(rho) = -(1/rho) integral_0^rho phi s ds."""
    r = phi.grid.radii
    cum = _cumtrapz0(r, phi.values * r)
    out = np.zeros_like(cum)
    np.divide(-cum, r, out=out, where=r > 0.0)
    return RadialField(phi.grid, out)


def inv_laplacian_value(phi: RadialField) -> RadialField:
    """psi = (-Delta)^{-1} phi normalized to psi -> 0 at the outer edge.

    Only meaningful for (numerically) zero-mass phi, for which psi has a
    finite limit at infinity; the outer-edge value stands in for that limit.
    """
    r = phi.grid.radii
    dpsi = inv_laplacian_gradient(phi).values
    psi = _cumtrapz0(r, dpsi)
    return RadialField(phi.grid, psi - psi[-1])


def apply_L(phi: RadialField) -> RadialField:
    """L[phi] = (1/rho) d/drho [rho U g'], g' = (phi/U)' - psi', at the grid nodes."""
    grid = phi.grid
    if grid.n < 16:
        raise ValueError("grid too coarse for apply_L (need >= 16 nodes)")
    r = grid.radii
    U = bubble_U(r)
    q = phi.values / U
    dq = _d1_nonuniform(r, q)
    if r[0] == 0.0:
        dq[0] = 0.0  # even symmetry at the origin
    dpsi = inv_laplacian_gradient(phi).values
    w = r * U * (dq - dpsi)
    dw = _d1_nonuniform(r, w)
    out = np.zeros_like(w)
    np.divide(dw, r, out=out, where=r > 0.0)
    if r[0] == 0.0:
        # w ~ c rho^2 near the axis, so (1/rho) w' -> 2c
        out[0] = 2.0 * w[1] / r[1] ** 2
    return RadialField(grid, out)


@dataclass
class Decomposition:
    """Split of a zero-mass radial perturbation into kernel and orthogonal parts.

    phi = phi_perp + (a/2) Z0 with a = (1/8pi) integral Gamma0 phi dA and
    g_perp = g + a normalized so integral U g_perp dA = 0.
    """

    a: float
    phi_perp: RadialField
    g_perp: RadialField


_MASS_RTOL = 1e-6


def decompose(phi: RadialField, mass_rtol: float = _MASS_RTOL) -> Decomposition:
    grid = phi.grid
    r = grid.radii
    scale = grid.integrate(np.abs(phi.values)) + 1e-300
    mass = phi.mass()
    if abs(mass) > mass_rtol * scale:
        raise MomentConditionError("input mass", mass, scale)
    # Simpson beats the trapezoid weights by two orders here and the kernel
    # amplitude test (phi_perp for phi = Z0) needs every digit of a.
    a = simpson(gamma0(r) * phi.values * 2.0 * math.pi * r, x=r) / (8.0 * math.pi)
    phi_perp = RadialField(grid, phi.values - 0.5 * a * Z0(r))
    U = bubble_U(r)
    g = phi.values / U - inv_laplacian_value(phi).values
    return Decomposition(a=a, phi_perp=phi_perp, g_perp=RadialField(grid, g + a))


def solve_L(h: RadialField, enforce_moments: bool = False, mass_rtol: float = _MASS_RTOL) -> RadialField:
    """Radial solution of L[phi] = h for zero-mass h.

    With ``enforce_moments`` the zero-second-moment precondition is also
    checked, which is exactly the case in which the returned phi has zero
    planar mass.  Violated preconditions raise MomentConditionError with the
    measured value.
    """
    grid = h.grid
    if grid.n < 16:
        raise ValueError("grid too coarse for solve_L (need >= 16 nodes)")
    r = grid.radii
    scale = grid.integrate(np.abs(h.values)) + 1e-300
    mass = h.mass()
    if abs(mass) > mass_rtol * scale:
        raise MomentConditionError("right-hand side mass", mass, scale)
    if enforce_moments:
        m2 = h.second_moment()
        m2_scale = grid.integrate(np.abs(h.values) * r**2) + 1e-300
        if abs(m2) > mass_rtol * m2_scale:
            raise MomentConditionError("right-hand side second moment", m2, m2_scale)

    U = bubble_U(r)
    # flux integration: rho U g' = integral_0^rho h s ds.  The quadrature
    # residue of the (zero) total mass is redistributed proportionally to |h|,
    # which pins H to exactly zero outside the support of h; any leftover
    # there would be amplified by rho^4 through g' = H/(rho U).
    C = _cumtrapz0(r, h.values * r)
    A = _cumtrapz0(r, np.abs(h.values) * r)
    H = C - C[-1] * (A / A[-1]) if A[-1] > 0.0 else C
    dg = np.zeros_like(H)
    np.divide(H, r * U, out=dg, where=r > 0.0)
    g = _cumtrapz0(r, dg)

    # psi from -Delta psi - U psi = U g, variation of parameters with (z0, zbar0)
    z0 = z0_kernel(r)
    pos = r > 0.0
    zb = np.zeros_like(r)
    zb[pos] = zbar0_kernel(r[pos])  # log pole at the axis; the flux w vanishes there
    w = U * g * r
    P = _cumtrapz0(r, w * z0)
    Qfull = _cumtrapz0(r, w * zb)
    tail = _power_tail(r[-1], w[-1] * zb[-1], r[-8], w[-8] * zb[-8])
    Q = (Qfull[-1] - Qfull) + tail
    psi = -(z0 * Q + zb * P)
    return RadialField(grid, U * (g + psi))
