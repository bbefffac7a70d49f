"""The radial correction field phi_lambda and the mass bookkeeping around it.

phi_lambda solves a radial 6D-Laplacian heat equation

    d/dt phi = phi_rr + (5/r) phi_r + E(r, t),    phi(., -epsT) = 0,

whose source E is built from the collapsing bubble: a dilation-mode term
(lambda_dot/lambda^3) Z0(r/lambda) chi0(w), a cutoff-drift term, and the
cutoff-commutator remainder fed by the bubble's chemical gradient.  The mass
of phi_lambda is what couples the collapse rate p = lambda*lambda_dot to the
nonlocal equation solved in the rate module; this module provides both the
exact Duhamel quadrature for that mass and the logarithmic expansion it obeys.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded
from scipy.special import erfc, erfcx

from .profiles import (
    EULER_GAMMA,
    Cutoff,
    RadialField,
    RadialGrid,
    Z0,
    bubble_U,
    bubble_U_prime,
)
from .specialfn import DEFAULT_QUAD, QuadratureSpec, one_minus_exp_kernel

__all__ = [
    "TimeWindow",
    "RateFunction",
    "eval_E",
    "chemical_gradient_bubble",
    "PhiLambdaStepper",
    "run_phi_lambda",
    "mass_phi1_duhamel",
    "expansion_rhs",
    "expansion_phi1_rhs",
    "mass_at_T_formula",
]

_A = math.sqrt(2.0) / 2.0
_CSTAR = 4.0 * math.exp(-(EULER_GAMMA + 2.0))
_KAPPA = EULER_GAMMA + 1.0 - math.log(4.0)


@dataclass(frozen=True)
class TimeWindow:
    """Blow-up time T, window start offset epsT, and the cutoff scale delta.

    The field problem lives on (-epsT, T).  Construction enforces the window
    ordering T < epsT < 1 and the smallness relation

        e^{-4a sqrt|ln T|} sqrt|ln T| / T  >=  e^{-2a sqrt|ln epsT|} / epsT,

    which is what makes the mass expansion's constants negligible.
    """

    T: float
    epsT: float
    delta: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.T < self.epsT < 1.0):
            raise ValueError(f"need 0 < T < epsT < 1, got T={self.T:g}, epsT={self.epsT:g}")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError("delta must lie in (0, 1]")
        lhs = math.exp(-4.0 * _A * math.sqrt(-math.log(self.T))) * math.sqrt(-math.log(self.T)) / self.T
        rhs = math.exp(-2.0 * _A * math.sqrt(-math.log(self.epsT))) / self.epsT
        if lhs < rhs:
            raise ValueError(
                f"window violates the T << epsT smallness relation (lhs={lhs:.3e} < rhs={rhs:.3e})"
            )

    @property
    def t_start(self) -> float:
        return -self.epsT


def _pstar_lambda_sq_v(v):
    """Closed form of -2 integral_t^T p_star ds at depth v = |ln(T-t)|, via erfc."""
    w0 = np.sqrt(np.asarray(v, dtype=float))
    return _CSTAR * math.exp(_A * _A) * (
        np.exp(-((w0 + _A) ** 2)) - _A * math.sqrt(math.pi) * erfc(w0 + _A)
    )


def _pstar_lambda_sq(t, T):
    return _pstar_lambda_sq_v(-np.log(T - np.asarray(t, dtype=float)))


def _pstar(t, T, scale=1.0):
    v = -np.log(T - np.asarray(t, dtype=float))
    return -0.5 * _CSTAR * scale * np.exp(-np.sqrt(2.0 * v))


class RateFunction:
    """p(t) = lambda*lambda_dot sampled log-uniformly in (T - t), plus lambda(t).

    The induced scale is lambda^2(t) = -2 integral_t^T p ds, kept positive on
    the window.  Internally everything is parameterized by the log depth
    v = |ln(T - t)|, which stays finite in float64 arbitrarily close to the
    blow-up time; t-based accessors are thin wrappers.  A rate is an exact
    multiple of p_star (closed forms for p and lambda^2) plus an optional
    sampled correction interpolated monotone-cubically in v.
    """

    def __init__(self, window: TimeWindow, base_scale: float = 1.0,
                 vs=None, corr=None):
        self.window = window
        self.base_scale = float(base_scale)
        if vs is None:
            vs = self._default_vs(window)
        self._vs = np.asarray(vs, dtype=float)
        if np.any(np.diff(self._vs) <= 0.0):
            raise ValueError("sample depths must be strictly increasing")
        if corr is None:
            corr = np.zeros_like(self._vs)
        self._corr = np.asarray(corr, dtype=float)
        if self._corr.shape != self._vs.shape:
            raise ValueError("correction must match the sample nodes")
        self._has_corr = bool(np.any(self._corr != 0.0))
        if self._has_corr:
            self._corr_interp = PchipInterpolator(self._vs, self._corr, extrapolate=True)
            self._build_corr_integral()
        lam2 = self.lambda_sq_of_v(self._vs)
        if np.any(lam2 <= 0.0):
            raise ValueError("lambda^2 = -2 int p must stay positive on all sample depths")

    # -- constructors ------------------------------------------------------
    @staticmethod
    def _default_vs(window: TimeWindow, n: int = 400, t_min_frac: float = 1e-6) -> np.ndarray:
        v_min = -math.log(window.T + window.epsT)
        v_max = -math.log(t_min_frac * window.T)
        return np.linspace(v_min, v_max, n)

    @classmethod
    def pstar(cls, window: TimeWindow, n: int = 400, t_min_frac: float = 1e-6,
              scale: float = 1.0) -> "RateFunction":
        """The explicit leading rate p_star = -(c_star/2) e^{-sqrt(2|ln(T-t)|)}.

        ``scale`` multiplies p_star; scale=1/4 is the normalization without the
        factor 2 in lambda, under which the published limit-mass value holds.
        """
        return cls(window, base_scale=scale, vs=cls._default_vs(window, n, t_min_frac))

    @classmethod
    def from_samples(cls, window: TimeWindow, ts, ps) -> "RateFunction":
        """Purely sampled rate (no exact base): p interpolated in v = |ln(T-t)|."""
        ts = np.asarray(ts, dtype=float)
        ps = np.asarray(ps, dtype=float)
        vs = -np.log(window.T - ts)
        order = np.argsort(vs)
        return cls(window, base_scale=0.0, vs=vs[order], corr=ps[order])

    def plus_correction(self, dps) -> "RateFunction":
        """New RateFunction with p increased by the sampled correction (same nodes)."""
        dps = np.asarray(dps, dtype=float)
        if dps.shape != self._vs.shape:
            raise ValueError("correction must live on the sample nodes")
        return RateFunction(self.window, self.base_scale, self._vs, self._corr + dps)

    # -- sampled-node access -------------------------------------------------
    @property
    def sample_depths(self) -> np.ndarray:
        return self._vs

    @property
    def sample_times(self) -> np.ndarray:
        return self.window.T - np.exp(-self._vs)

    @property
    def correction_values(self) -> np.ndarray:
        return self._corr

    # -- v-space evaluation --------------------------------------------------
    def _corr_of_v(self, v):
        v = np.asarray(v, dtype=float)
        out = np.asarray(self._corr_interp(np.clip(v, self._vs[0], self._vs[-1])))
        deep = v > self._vs[-1]
        if np.any(deep):
            # decay continuation e^{-sqrt(2v)} relative to the deepest sample
            ve = self._vs[-1]
            fac = np.exp(-math.sqrt(2.0) * (np.sqrt(np.maximum(v, ve)) - math.sqrt(ve)))
            out = np.where(deep, self._corr[-1] * fac, out)
        return out

    def p_of_v(self, v):
        """p at log depth v = |ln(T - t)|."""
        v = np.asarray(v, dtype=float)
        base = -0.5 * _CSTAR * self.base_scale * np.exp(-np.sqrt(2.0 * v))
        if self._has_corr:
            base = base + self._corr_of_v(v)
        return base if base.ndim else float(base)

    def _build_corr_integral(self):
        # integral_v^inf corr(v') e^{-v'} dv' as a cumulative from the deep end
        vs, corr = self._vs, self._corr
        f = corr * np.exp(-vs)
        rev = np.zeros_like(f)
        rev[:-1] = np.cumsum((0.5 * np.diff(vs) * (f[1:] + f[:-1]))[::-1])[::-1]
        # deep tail with the decay continuation, integrated once
        u, w = np.polynomial.legendre.leggauss(40)
        ve = vs[-1]
        uu = 0.5 * 60.0 * (u + 1.0)
        ww = 0.5 * 60.0 * w
        tail = float(
            np.sum(ww * self._corr[-1]
                   * np.exp(-math.sqrt(2.0) * (np.sqrt(ve + uu) - math.sqrt(ve)))
                   * np.exp(-(ve + uu)))
        )
        self._int_corr_interp = PchipInterpolator(vs, rev + tail, extrapolate=False)
        self._int_corr_tail = tail

    def _int_corr_of_v(self, v):
        v = np.asarray(v, dtype=float)
        inner = np.asarray(self._int_corr_interp(np.clip(v, self._vs[0], self._vs[-1])))
        deep = v > self._vs[-1]
        if np.any(deep):
            # integrand corr(v') e^{-v'} is dominated by v' ~ v; match the seam
            ve = self._vs[-1]
            seam = self._corr[-1] * math.exp(-ve)
            scale = self._int_corr_tail / seam if seam != 0.0 else 1.0
            cont = self._corr_of_v(v) * np.exp(-np.minimum(v, 700.0)) * scale
            inner = np.where(deep, cont, inner)
        return inner

    def int_p_to_T_of_v(self, v):
        """integral_t^T p(s) ds at depth v (= -(1/2) lambda^2)."""
        v = np.asarray(v, dtype=float)
        base = -0.5 * self.base_scale * _pstar_lambda_sq_v(v)
        if self._has_corr:
            base = base + self._int_corr_of_v(v)
        return base if base.ndim else float(base)

    def lambda_sq_of_v(self, v):
        return -2.0 * self.int_p_to_T_of_v(v)

    def lambda_sq_ratio_of_v(self, v):
        """lambda^2(v)/(T - t), stable at arbitrary depth (scaled erfc)."""
        v = np.asarray(v, dtype=float)
        w = np.sqrt(v)
        base = self.base_scale * _CSTAR * np.exp(-2.0 * _A * w) * (
            1.0 - _A * math.sqrt(math.pi) * erfcx(w + _A)
        )
        if self._has_corr:
            base = base - 2.0 * self._int_corr_of_v(v) * np.exp(np.minimum(v, 700.0))
        return base if base.ndim else float(base)

    def memory_integral_T(self) -> float:
        """integral_{-epsT}^T p(s)/(T-s) ds = integral_{v_min}^inf p(v) dv."""
        v0 = -math.log(self.window.T + self.window.epsT)
        s2 = math.sqrt(2.0 * v0)
        total = -0.5 * _CSTAR * self.base_scale * (s2 + 1.0) * math.exp(-s2)
        if self._has_corr:
            vs = self._vs
            gx, gw = _gauss_panels(vs[0], vs[-1], max_width=0.25)
            total += float(np.sum(gw * self._corr_interp(gx)))
            ve = vs[-1]
            total += self._corr[-1] * (math.sqrt(2.0 * ve) + 1.0)  # decay-continuation tail
        return total

    # -- t-space wrappers ------------------------------------------------------
    def _v_of_t(self, t):
        dt = self.window.T - np.asarray(t, dtype=float)
        if np.any(dt <= 0.0):
            raise ValueError("rate evaluated at or beyond the blow-up time")
        return -np.log(dt)

    def p(self, t):
        return self.p_of_v(self._v_of_t(t))

    def int_p_to_T(self, t):
        return self.int_p_to_T_of_v(self._v_of_t(t))

    def lambda_sq(self, t):
        return self.lambda_sq_of_v(self._v_of_t(t))

    def lam(self, t):
        return np.sqrt(self.lambda_sq(t))


# ---------------------------------------------------------------------------
# the source E(r, t)


def chemical_gradient_bubble(r, lam: float, cut_scale: float, cutoff: Cutoff):
    """d/dr of the chemical potential of u0 = (1/lambda^2) U(r/lambda) chi0(r/cut_scale).

    Exact inside the cutoff (the bubble's cumulative mass is closed-form);
    the bridge region's partial mass is added by fixed Gauss panels.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    y = r / lam
    zc = cutoff.lo * cut_scale / lam  # below this the cutoff is exactly 1
    B = np.where(y <= zc, 4.0 * y**2 / (1.0 + y**2), 4.0 * zc**2 / (1.0 + zc**2))
    needs = y > zc
    if np.any(needs):
        nodes, wts = np.polynomial.legendre.leggauss(48)
        for i in np.nonzero(needs)[0]:
            hi = min(y[i], 2.0 * cut_scale / lam)
            if hi > zc:
                z = 0.5 * (hi - zc) * nodes + 0.5 * (hi + zc)
                w = 0.5 * (hi - zc) * wts
                B[i] += np.sum(w * bubble_U(z) * cutoff(z * lam / cut_scale) * z)
    out = np.zeros_like(r)
    np.divide(-B, r, out=out, where=r > 0.0)
    return out


def eval_E(r, t: float, rate: RateFunction, window: TimeWindow, cutoff: Cutoff | None = None,
           part: str = "full"):
    """Source E(r, t; lambda) of the phi_lambda equation, radial case.

    ``part`` selects "full" (all terms), "z0" (the dilation term
    (lambda_dot/lambda^3) Z0 chi0 only, the phi^(1) source), or "rest"
    (everything else, the phi^(2) source).
    """
    if cutoff is None:
        cutoff = Cutoff()
    T = window.T
    if not (window.t_start < t < T):
        raise ValueError("t outside the (-epsT, T) window")
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    lam2 = float(rate.lambda_sq(t))
    lam = math.sqrt(lam2)
    p = float(rate.p(t))
    c = math.sqrt(window.delta * (T - t))
    y = r / lam
    w = r / c
    chi_w = cutoff(w)
    dchi = cutoff.d1(w)
    z0_term = (p / lam2**2) * Z0(y) * chi_w
    if part == "z0":
        return float(z0_term[0]) if scalar else z0_term
    drift = -(1.0 / (2.0 * lam2 * (T - t))) * bubble_U(y) * dchi * w
    lap_chi = cutoff.d2(w) + np.where(w > 0.0, dchi / np.where(w > 0.0, w, 1.0), 0.0)
    tilde = (2.0 / (lam**3 * c)) * dchi * bubble_U_prime(y) \
        + (1.0 / (window.delta * (T - t) * lam2)) * lap_chi * bubble_U(y)
    mask = dchi != 0.0
    if np.any(mask):
        dv0 = chemical_gradient_bubble(r[mask], lam, c, cutoff)
        tilde[mask] -= (1.0 / (lam2 * c)) * bubble_U(y[mask]) * dchi[mask] * dv0
    out = drift + tilde
    if part == "full":
        out = out + z0_term
    elif part != "rest":
        raise ValueError("part must be one of 'full', 'z0', 'rest'")
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# direct Delta_6 time stepper


class PhiLambdaStepper:
    """Implicit-Euler integrator for d/dt phi = Delta_6 phi + S(r, t) on a radial grid.

    Delta_6 = d_rr + (5/r) d_r; even symmetry closes the axis (Delta_6 phi(0)
    = 6 phi''(0)) and the far field is pinned to zero on a domain chosen to
    contain the heat spread from the whole window.
    """

    def __init__(self, grid: RadialGrid):
        if grid.radii[0] != 0.0:
            raise ValueError("stepper grid must start at r = 0")
        self.grid = grid
        r = grid.radii
        n = r.size
        lo = np.zeros(n)
        di = np.zeros(n)
        up = np.zeros(n)
        hm = r[1:-1] - r[:-2]
        hp = r[2:] - r[1:-1]
        # second derivative + 5/r first derivative, 3-point nonuniform stencils
        c_mm = 2.0 / (hm * (hm + hp))
        c_pp = 2.0 / (hp * (hm + hp))
        c_mid = -2.0 / (hm * hp)
        d_mm = -hp / (hm * (hm + hp))
        d_pp = hm / (hp * (hm + hp))
        d_mid = (hp - hm) / (hm * hp)
        five_r = 5.0 / r[1:-1]
        lo[0:n - 2] = c_mm + five_r * d_mm  # sub-diagonal entries for rows 1..n-2
        di[1:-1] = c_mid + five_r * d_mid
        up[2:n] = c_pp + five_r * d_pp  # super-diagonal entries for rows 1..n-2
        # axis row: Delta_6 phi(0) = 6 * 2 (phi_1 - phi_0)/r_1^2
        di[0] = -12.0 / r[1] ** 2
        up[1] = 12.0 / r[1] ** 2
        # outer row: Dirichlet zero
        di[-1] = 0.0
        self._lo, self._di, self._up = lo, di, up

    def step(self, phi: np.ndarray, t_new: float, dt: float, source) -> np.ndarray:
        """One implicit-Euler step to t_new, source evaluated at the new time."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        n = phi.size
        ab = np.zeros((3, n))
        ab[0, 1:] = -dt * self._up[1:]
        ab[1, :] = 1.0 - dt * self._di
        ab[2, :-1] = -dt * self._lo[:-1]
        ab[1, -1] = 1.0
        rhs = phi + dt * source(self.grid.radii, t_new)
        rhs[-1] = 0.0
        try:
            out = solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise RuntimeError("singular tridiagonal system in phi_lambda step") from exc
        if not np.all(np.isfinite(out)):
            raise RuntimeError("non-finite phi_lambda after implicit step")
        return out


def step_phi_lambda(state: RadialField, t: float, dt: float, rate: RateFunction,
                    window: TimeWindow, cutoff: Cutoff | None = None,
                    part: str = "full") -> RadialField:
    """Advance phi_lambda one implicit-Euler step with the E source."""
    stepper = PhiLambdaStepper(state.grid)
    new = stepper.step(
        state.values, t + dt, dt,
        lambda r, tn: eval_E(r, tn, rate, window, cutoff, part=part),
    )
    return RadialField(state.grid, new)


def run_phi_lambda(rate: RateFunction, window: TimeWindow, t_end: float,
                   n_cells: int = 1200, part: str = "full",
                   checkpoints=(), steps_per_efold: float = 50.0,
                   cutoff: Cutoff | None = None, r_max: float | None = None):
    """Integrate phi_lambda from zero data at -epsT up to t_end.

    dt tracks the local time scale: dt = (T - t)/steps_per_efold, clipped to
    land exactly on each requested checkpoint.  Returns (field, mass_history)
    where mass_history maps checkpoint time -> total planar mass.
    """
    T = window.T
    if not (window.t_start < t_end < T):
        raise ValueError("t_end outside the window")
    lam_end = math.sqrt(float(rate.lambda_sq(t_end)))
    if r_max is None:
        r_max = 8.0 * math.sqrt(T + 2.0 * window.epsT)
    grid = RadialGrid.geometric(lam_end / 8.0, r_max, n_cells)
    stepper = PhiLambdaStepper(grid)
    src = lambda r, tn: eval_E(r, tn, rate, window, cutoff, part=part)
    phi = np.zeros(grid.n)
    t = window.t_start
    targets = sorted(set(list(checkpoints) + [t_end]))
    history = {}
    for target in targets:
        while t < target - 1e-300:
            dt = min((T - t) / steps_per_efold, target - t)
            phi = stepper.step(phi, t + dt, dt, src)
            t += dt
        field = RadialField(grid, phi)
        history[target] = field.mass()
    return RadialField(grid, phi), history


# ---------------------------------------------------------------------------
# Duhamel mass of phi^(1) and the expansion it satisfies


def _gauss_panels(a: float, b: float, n_per_panel: int = 16, max_width: float = 1.0):
    """Gauss-Legendre nodes/weights tiling [a, b] with panels of bounded width."""
    n_panels = max(1, int(math.ceil((b - a) / max_width)))
    edges = np.linspace(a, b, n_panels + 1)
    gx, gw = np.polynomial.legendre.leggauss(n_per_panel)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (hi - lo) * gx + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * gw)
    return np.concatenate(xs), np.concatenate(ws)


def _inner_duhamel_z(q: float, z_chi: float, cutoff: Cutoff, spec: QuadratureSpec) -> float:
    """integral_0^inf f(q z^2) Z0(z) chi0(z/z_chi) z dz, f = 1 - e^{-x}(1+x)."""

    def integrand(z):
        return one_minus_exp_kernel(q * z * z) * Z0(z) * cutoff(z / z_chi) * z

    hi = cutoff.hi * z_chi
    pts = sorted({1.0, min(1.0 / math.sqrt(q), hi), z_chi})
    val, err = integrate.quad(
        integrand, 0.0, hi, points=[p for p in pts if 0.0 < p < hi],
        epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions,
    )
    return val


def mass_phi1_duhamel(rate: RateFunction, window: TimeWindow, t: float,
                      spec: QuadratureSpec | None = None,
                      cutoff: Cutoff | None = None) -> float:
    """Exact Duhamel mass of phi^(1) at time t:

    2 pi integral_{-epsT}^t  p(s)/lambda^4(s)
        integral_0^inf [1 - e^{-r^2/(4(t-s))}(1 + r^2/(4(t-s)))]
                       Z0(r/lambda(s)) chi0(r/sqrt(delta (T-s))) r dr ds,

    with the s-integral log-spaced in (t - s) down to 1e-2 lambda^2(t).
    """
    if spec is None:
        spec = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-9)
    if cutoff is None:
        cutoff = Cutoff()
    T = window.T
    if not (-T / 2.0 < t < T):
        raise ValueError("mass expansion window requires t in (-T/2, T)")
    lam2_t = float(rate.lambda_sq(t))
    u_lo = math.log(lam2_t * 1e-2)
    u_hi = math.log(t + window.epsT)

    def s_integrand(u):
        s = t - math.exp(u)
        lam2 = float(rate.lambda_sq(s))
        q = lam2 / (4.0 * (t - s))
        z_chi = math.sqrt(window.delta * (T - s)) / math.sqrt(lam2)
        inner = _inner_duhamel_z(q, z_chi, cutoff, spec)
        # r = lambda z substitution contributes lambda^2; ds = e^u du
        return float(rate.p(s)) / lam2 * inner * math.exp(u)

    # panel edge at t - s = T - t separates the memory tail from the recent past
    edge = math.log(T - t) if u_lo < math.log(T - t) < u_hi else None
    us, ws = [], []
    if edge is None:
        xs, xw = _gauss_panels(u_lo, u_hi)
        us.append(xs), ws.append(xw)
    else:
        for a, b in ((u_lo, edge), (edge, u_hi)):
            xs, xw = _gauss_panels(a, b)
            us.append(xs), ws.append(xw)
    total = 0.0
    for xs, xw in zip(us, ws):
        total += sum(w * s_integrand(u) for u, w in zip(xs, xw))
    return 2.0 * math.pi * total


def _int_p_over_T_minus_s(rate: RateFunction, lo: float, hi: float) -> float:
    """integral_lo^hi p(s)/(T-s) ds via x = ln(T-s) (the measure becomes dx)."""
    T = rate.window.T
    x_lo, x_hi = math.log(T - hi), math.log(T - lo)
    xs, ws = _gauss_panels(x_lo, x_hi, max_width=0.5)
    return float(np.sum(ws * rate.p(T - np.exp(xs))))


def _int_p_over_t_minus_s(rate: RateFunction, t: float, lo: float, hi: float) -> float:
    """integral_lo^hi p(s)/(t-s) ds via u = ln(t-s), hi < t."""
    u_lo, u_hi = math.log(t - hi), math.log(t - lo)
    xs, ws = _gauss_panels(u_lo, u_hi, max_width=0.5)
    return float(np.sum(ws * rate.p(t - np.exp(xs))))


def expansion_rhs(rate: RateFunction, window: TimeWindow, t: float) -> float:
    """Logarithmic expansion of the (rescaled) mass of phi_lambda:

    4 pi [ integral_{-epsT}^T p/(T-s) ds - integral_{-epsT}^{t-lambda^2} p/(t-s) ds
           + (gamma + 1 - ln 4) p(t) ].
    """
    T = window.T
    if not (-T / 2.0 < t < T):
        raise ValueError("mass expansion window requires t in (-T/2, T)")
    lam2 = float(rate.lambda_sq(t))
    if t - lam2 <= window.t_start:
        raise ValueError("lambda^2 exceeds the available window")
    term_T = rate.memory_integral_T()
    term_t = _int_p_over_t_minus_s(rate, t, window.t_start, t - lam2)
    return 4.0 * math.pi * (term_T - term_t + _KAPPA * float(rate.p(t)))


def _cutoff_double_integral(ratio: float, cutoff: Cutoff, spec: QuadratureSpec) -> float:
    """D = integral_0^inf f((z^2/4) ratio) (1 - chi0(z))/z^3 dz."""

    def integrand(z):
        return one_minus_exp_kernel(0.25 * ratio * z * z) * (1.0 - cutoff(z)) / z**3

    val, _ = integrate.quad(
        integrand, cutoff.lo, np.inf, points=None,
        epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions,
    )
    return val


def expansion_phi1_rhs(rate: RateFunction, window: TimeWindow, t: float,
                       spec: QuadratureSpec | None = None,
                       cutoff: Cutoff | None = None) -> float:
    """The t-dependent part of the phi^(1) mass expansion (constants dropped):

    32 pi/delta integral_{-epsT}^t p(s)/(T-s) D(s,t) ds
      - 4 pi integral_{-epsT}^{t-lambda^2} p/(t-s) ds + 4 pi kappa p(t),

    with D the cutoff double integral; differencing two times cancels the
    unknown additive constant of the full expansion.
    """
    if spec is None:
        spec = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-9)
    if cutoff is None:
        cutoff = Cutoff()
    T = window.T
    lam2 = float(rate.lambda_sq(t))

    def chi_term_integrand(x):
        s = T - math.exp(x)
        ratio = window.delta * (T - s) / (t - s)
        return float(rate.p(s)) * _cutoff_double_integral(ratio, cutoff, spec)

    x_lo, x_hi = math.log(T - t), math.log(T + window.epsT)
    xs, ws = _gauss_panels(x_lo, x_hi, max_width=0.5)
    chi_term = sum(w * chi_term_integrand(x) for x, w in zip(xs, ws))
    term_t = _int_p_over_t_minus_s(rate, t, window.t_start, t - lam2)
    return (
        32.0 * math.pi / window.delta * chi_term
        - 4.0 * math.pi * term_t
        + 4.0 * math.pi * _KAPPA * float(rate.p(t))
    )


def mass_at_T_formula(epsT: float) -> float:
    """Leading limit mass 2 sqrt(2) pi e^{-(gamma+2)} e^{-sqrt(2|ln eps|)} sqrt(2|ln eps|)."""
    if not (0.0 < epsT < 1.0):
        raise ValueError("epsT must lie in (0, 1)")
    x = math.sqrt(2.0 * abs(math.log(epsT)))
    return 2.0 * math.sqrt(2.0) * math.pi * math.exp(-(EULER_GAMMA + 2.0)) * x * math.exp(-x)
