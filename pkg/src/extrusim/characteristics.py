"""Characteristic curves of the filling-ratio transport equation.

For a given coefficient trace (interface position l, screw speed N, die
ratio b) the transport speed alpha_p is affine in x, so the characteristic
through (t, x) solves a scalar linear ODE and has the closed form

    xi(s; t, x) = x * exp(P(t) - P(s)) - exp(-P(s)) * (Q(t) - Q(s)),

where P is the running integral of F/l and Q the running integral of
(zeta*N/l) * exp(P).  Both accumulations are computed once per context
with a Simpson-type rule on the trace grid and evaluated anywhere with a
C1 Hermite interpolant, which keeps the analytic derivative formulas for
the origin maps consistent with finite differences of the traced origins.

A classical Runge-Kutta integration of the same ODE is provided as an
independent route for cross-checking the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DivergenceError, DomainError, GridError
from .fields import SampledFunction
from .model import PhysicalParams, eval_F
from .quadrature import HermiteAntiderivative, cumulative_integral

ORIGIN_INITIAL = "initial"
ORIGIN_BOUNDARY = "boundary"

# residual tolerance for root-finding on characteristic positions
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class CharOrigin:
    """Origin of a characteristic: the initial axis or the inflow boundary."""

    kind: str
    value: float

    @property
    def is_initial(self) -> bool:
        return self.kind == ORIGIN_INITIAL

    @property
    def beta(self) -> float:
        if self.kind != ORIGIN_INITIAL:
            raise DomainError("origin is on the boundary, beta undefined")
        return self.value

    @property
    def tau(self) -> float:
        if self.kind != ORIGIN_BOUNDARY:
            raise DomainError("origin is on the initial axis, tau undefined")
        return self.value


@dataclass(frozen=True)
class TraceContext:
    """Coefficient traces that determine the characteristic field.

    l, N and b must share one uniform time grid; between samples they are
    the piecewise-linear interpolants from `fields`.  Construction checks
    the ranges that make the transport speed positive on the whole strip.
    """

    l: SampledFunction
    N: SampledFunction
    b: SampledFunction
    params: PhysicalParams

    def __post_init__(self):
        ref = self.l
        for other in (self.N, self.b):
            if (
                abs(other.t_start - ref.t_start) > 1e-12
                or abs(other.t_end - ref.t_end) > 1e-12
                or other.values.size != ref.values.size
            ):
                raise GridError("l, N, b must share one uniform grid")
        L = self.params.L
        if np.any(self.l.values <= 0.0) or np.any(self.l.values >= L):
            raise DomainError("interface trace must stay inside (0, L)")
        if np.any(self.b.values < 0.0) or np.any(self.b.values >= 1.0):
            raise DomainError("die ratio trace must stay inside [0, 1)")
        if np.any(self.N.values <= 0.0):
            raise DomainError("screw speed trace must stay positive")
        F = eval_F(self.l.values, self.N.values, self.b.values, self.params)
        # alpha_p is affine in x, so positivity on [0,1] reduces to x=0,1
        if np.any(self.params.zeta * self.N.values - F <= 0.0):
            raise DomainError("transport speed must stay positive up to x=1")

    @property
    def t_start(self) -> float:
        return self.l.t_start

    @property
    def t_end(self) -> float:
        return self.l.t_end

    @property
    def dt(self) -> float:
        return self.l.dt

    @cached_property
    def _F_nodes(self) -> np.ndarray:
        return np.asarray(
            eval_F(self.l.values, self.N.values, self.b.values, self.params), dtype=float
        )

    @cached_property
    def _P(self) -> HermiteAntiderivative:
        p = self._F_nodes / self.l.values
        return HermiteAntiderivative.from_samples(self.t_start, self.dt, p)

    @cached_property
    def _Q(self) -> HermiteAntiderivative:
        q = (self.params.zeta * self.N.values / self.l.values) * np.exp(self._P.nodes)
        return HermiteAntiderivative(self.t_start, self.dt, cumulative_integral(q, self.dt), q)

    def coefficients_at(self, sigma: float) -> tuple[float, float]:
        """(A, B) of the characteristic ODE dxi/ds = A(s) - B(s)*xi at time sigma."""
        l_s = self.l(sigma)
        n_s = self.N(sigma)
        b_s = self.b(sigma)
        F_s = eval_F(l_s, n_s, b_s, self.params)
        return self.params.zeta * n_s / l_s, F_s / l_s

    def _check_inside(self, *times: float) -> None:
        for t in times:
            if t < self.t_start - 1e-12 or t > self.t_end + 1e-12:
                raise DomainError(f"time {t} outside context interval [{self.t_start}, {self.t_end}]")


def _xi_closed(s, t, x, ctx: TraceContext):
    """Closed-form characteristic position, valid for any ordering of s, t."""
    P = ctx._P
    Q = ctx._Q
    Ps = P(s)
    Pt = P(t)
    return np.asarray(x, dtype=float) * np.exp(Pt - Ps) - np.exp(-Ps) * (Q(t) - Q(s))


def xi(s: float, t: float, x: float, ctx: TraceContext) -> float:
    """Position at time s of the characteristic passing through (t, x), s <= t."""
    if s > t:
        raise DomainError(f"need s <= t, got s={s} > t={t}")
    ctx._check_inside(s, t)
    if not (0.0 <= x <= 1.0):
        raise DomainError("x must lie in [0, 1]")
    return float(_xi_closed(s, t, x, ctx))


def xi_forward(s: float, t: float, x: float, ctx: TraceContext) -> float:
    """Forward landing point at time s >= t of the characteristic through (t, x)."""
    if s < t:
        raise DomainError(f"need s >= t, got s={s} < t={t}")
    ctx._check_inside(s, t)
    return float(_xi_closed(s, t, x, ctx))


def _rk4_span(ctx: TraceContext, t_from: float, x_from: float, t_to: float) -> float:
    """RK4 integration of the characteristic ODE from t_from to t_to (either direction)."""
    span = t_to - t_from
    if span == 0.0:
        return x_from
    n = max(1, int(np.ceil(abs(span) / ctx.dt - 1e-12)))
    h = span / n
    xi_v = x_from
    sigma = t_from
    for _ in range(n):
        a1, b1 = ctx.coefficients_at(sigma)
        a2, b2 = ctx.coefficients_at(sigma + 0.5 * h)
        a4, b4 = ctx.coefficients_at(sigma + h)
        k1 = a1 - b1 * xi_v
        k2 = a2 - b2 * (xi_v + 0.5 * h * k1)
        k3 = a2 - b2 * (xi_v + 0.5 * h * k2)
        k4 = a4 - b4 * (xi_v + h * k3)
        xi_v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        sigma += h
    return xi_v


def xi_rk4(s: float, t: float, x: float, ctx: TraceContext) -> float:
    """Runge-Kutta route to xi(s; t, x), stepping at the ctx grid step."""
    if s > t:
        raise DomainError(f"need s <= t, got s={s} > t={t}")
    ctx._check_inside(s, t)
    if not (0.0 <= x <= 1.0):
        raise DomainError("x must lie in [0, 1]")
    return _rk4_span(ctx, t, x, s)


def backtrace(t: float, x: float, ctx: TraceContext) -> CharOrigin:
    """Trace the characteristic through (t, x) back to its origin.

    Returns Initial(beta) when the curve reaches the start of the context
    interval inside [0,1], otherwise Boundary(tau) with the time it left
    through x = 0.  The position is monotone along the curve (alpha_p > 0),
    so bisection is safe.
    """
    ctx._check_inside(t)
    if not (0.0 <= x <= 1.0):
        raise DomainError("x must lie in [0, 1]")
    t0 = ctx.t_start
    xi0 = float(_xi_closed(t0, t, x, ctx))
    if xi0 >= 0.0:
        return CharOrigin(ORIGIN_INITIAL, xi0)
    lo, hi = t0, t
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = float(_xi_closed(mid, t, x, ctx))
        if abs(val) <= ROOT_TOL:
            return CharOrigin(ORIGIN_BOUNDARY, mid)
        if val < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    tau = 0.5 * (lo + hi)
    if abs(float(_xi_closed(tau, t, x, ctx))) > 1e-9:
        raise DivergenceError("bisection failed to pin the boundary crossing")
    return CharOrigin(ORIGIN_BOUNDARY, tau)


def backtrace_batch(t: float, xs: np.ndarray, ctx: TraceContext):
    """Vectorized backtrace for one time row.

    Returns (is_boundary: bool array, origin: float array) where origin
    holds beta for initial points and tau for boundary points.  Same
    bisection as the scalar version, run on all boundary points at once.
    """
    ctx._check_inside(t)
    xs = np.asarray(xs, dtype=float)
    t0 = ctx.t_start
    xi0 = np.asarray(_xi_closed(t0, t, xs, ctx), dtype=float)
    is_boundary = xi0 < 0.0
    origin = np.where(is_boundary, 0.0, np.maximum(xi0, 0.0))
    if np.any(is_boundary):
        xb = xs[is_boundary]
        lo = np.full(xb.shape, t0)
        hi = np.full(xb.shape, float(t))
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            val = np.asarray(_xi_closed(mid, t, xb, ctx), dtype=float)
            neg = val < 0.0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
            if np.max(hi - lo) <= 1e-15 * max(1.0, abs(t)):
                break
        tau = 0.5 * (lo + hi)
        res = np.max(np.abs(np.asarray(_xi_closed(tau, t, xb, ctx), dtype=float)))
        if res > 1e-9:
            raise DivergenceError("vectorized bisection failed to pin boundary crossings")
        origin[is_boundary] = tau
    return is_boundary, origin


def backtrace_times(ts: np.ndarray, x: float, ctx: TraceContext):
    """Vectorized backtrace of one foot point over many observation times.

    Counterpart of backtrace_batch with the roles swapped: fixed x, array
    of times.  Returns (is_boundary, origin) arrays in the same convention.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.size and (np.min(ts) < ctx.t_start - 1e-12 or np.max(ts) > ctx.t_end + 1e-12):
        raise DomainError("times outside context interval")
    if not (0.0 <= x <= 1.0):
        raise DomainError("x must lie in [0, 1]")
    t0 = ctx.t_start
    xi0 = np.asarray(_xi_closed(t0, ts, x, ctx), dtype=float)
    is_boundary = xi0 < 0.0
    origin = np.where(is_boundary, 0.0, np.maximum(xi0, 0.0))
    if np.any(is_boundary):
        tb = ts[is_boundary]
        lo = np.full(tb.shape, t0)
        hi = tb.copy()
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            val = np.asarray(_xi_closed(mid, tb, x, ctx), dtype=float)
            neg = val < 0.0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
            if np.max(hi - lo) <= 1e-15 * max(1.0, float(np.max(np.abs(tb)))):
                break
        tau = 0.5 * (lo + hi)
        res = np.max(np.abs(np.asarray(_xi_closed(tau, tb, x, ctx), dtype=float)))
        if res > 1e-9:
            raise DivergenceError("vectorized bisection failed to pin boundary crossings")
        origin[is_boundary] = tau
    return is_boundary, origin


def dtau_dx(t: float, x: float, ctx: TraceContext) -> float:
    """Sensitivity of the boundary crossing time to the spatial foot point.

    dtau/dx = -(l(tau)/(zeta*N(tau))) * exp(integral_tau^t F/l), negative
    because raising the foot point delays the crossing.  The speed factor is
    taken as the slope of the stored antiderivative, so the value is the
    exact derivative of the crossing time backtrace reports.
    """
    origin = backtrace(t, x, ctx)
    if origin.is_initial:
        raise DomainError("characteristic originates from the initial axis; tau undefined")
    tau = origin.value
    return float(-np.exp(ctx._P(t)) / ctx._Q.derivative(tau))


def dbeta_dx(t: float, x: float, ctx: TraceContext) -> float:
    """Sensitivity of the initial foot point: dbeta/dx = exp(integral_0^t F/l)."""
    origin = backtrace(t, x, ctx)
    if not origin.is_initial:
        raise DomainError("characteristic originates from the boundary; beta undefined")
    return float(np.exp(ctx._P(t) - ctx._P(ctx.t_start)))


def crossing_time(ctx: TraceContext):
    """First time the forward characteristic from the lower-left corner hits x=1.

    Marches the Runge-Kutta trajectory forward on the grid, then bisects
    inside the bracketing step until the position matches 1 within 1e-12.
    Returns None when the trajectory has not reached x=1 by the end of the
    context interval.
    """
    t0 = ctx.t_start
    n = ctx.l.values.size
    pos = 0.0
    t_prev = t0
    hit = False
    for k in range(1, n):
        t_next = t0 + k * ctx.dt
        pos_next = _rk4_span(ctx, t_prev, pos, t_next)
        if pos_next >= 1.0:
            hit = True
            break
        t_prev, pos = t_next, pos_next
    if not hit:
        return None
    lo, hi = t_prev, t_next
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = _rk4_span(ctx, t_prev, pos, mid)
        if abs(val - 1.0) <= ROOT_TOL:
            return mid
        if val < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)
