"""Piecewise solution of the value-function exponent and the resulting policies.

``solve_B`` stitches closed-form Riccati flows across zone boundaries: starting
from B(0) = 0 it follows the current zone's flow until rho * B hits B- or B+,
then restarts the neighbouring zone's flow from that boundary value.  Because
each zone flow is monotone and the right side is continuous across the
boundaries, a trajectory visits at most three segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    IntervalConstraint, MarketParams, ZoneSystem, check_assumptions, hjb_b_rhs,
    lambda_star, merton_ratio, mid_coeffs, require_valid, zone_system,
)
from .errors import AssumptionError, BlowupError, CoefficientError
from .riccati import (
    RiccatiFlow, ode_solve_numeric, riccati_integral_closed_form, transition_time,
)

DEFAULT_GRID = 2001


@dataclass(frozen=True)
class Segment:
    tau_start: float
    tau_end: float
    zone: str
    flow: RiccatiFlow


@dataclass(frozen=True)
class PiecewiseB:
    """B(tau) on [0, T] as consecutive closed-form Riccati segments."""

    segments: tuple[Segment, ...]
    T: float
    rho: float
    zones: ZoneSystem = field(repr=False)

    @property
    def transition_times(self) -> tuple[float, ...]:
        return tuple(s.tau_start for s in self.segments[1:])

    def _index(self, tau: np.ndarray) -> np.ndarray:
        starts = np.array([s.tau_start for s in self.segments])
        return np.clip(np.searchsorted(starts, tau, side="right") - 1, 0, len(starts) - 1)

    def _apply(self, tau, fn):
        t = np.asarray(tau, dtype=float)
        if np.any(t < 0) or np.any(t > self.T * (1 + 1e-12)):
            raise ValueError("tau outside [0, T]")
        idx = self._index(t)
        out = np.empty_like(t)
        for k, seg in enumerate(self.segments):
            m = idx == k
            if np.any(m):
                out[m] = fn(seg, t[m] - seg.tau_start)
        return float(out) if out.ndim == 0 else out

    def __call__(self, tau):
        return self._apply(tau, lambda seg, s: seg.flow(s))

    def derivative(self, tau):
        return self._apply(tau, lambda seg, s: seg.flow.derivative(s))

    def zone_at(self, tau):
        t = np.asarray(tau, dtype=float)
        names = np.array([s.zone for s in self.segments])
        out = names[self._index(t)]
        return str(out) if out.ndim == 0 else out

    def integral(self, tau):
        """Integral of B over [0, tau], segment by segment."""
        def seg_int(seg, s):
            return riccati_integral_closed_form(seg.flow, s)

        done = [0.0]
        for seg in self.segments[:-1]:
            done.append(done[-1] + seg_int(seg, seg.tau_end - seg.tau_start))
        offsets = dict(zip((id(s) for s in self.segments), done))
        return self._apply(tau, lambda seg, s: offsets[id(seg)] + seg_int(seg, s))


def _gate(p: MarketParams, K: IntervalConstraint, force: bool):
    if force:
        return
    rep = check_assumptions(p, K)
    if not rep.passed:
        raise AssumptionError("; ".join(rep.failures()), report=rep)


def _entry_zone(zs: ZoneSystem, rho: float, B0: float) -> str:
    """Zone the flow moves into from B0 (ties on a boundary broken by direction)."""
    zone = zs.zone_of(rho, B0)
    if zone != "mid" or rho == 0:
        return zone
    slope = zs.mid.rhs(B0)
    x = rho * B0
    if x == zs.b_minus and rho * slope < 0 and zs.minus is not None:
        return "minus"
    if x == zs.b_plus and rho * slope > 0 and zs.plus is not None:
        return "plus"
    return zone


def solve_B(p: MarketParams, K: IntervalConstraint, force: bool = False) -> PiecewiseB:
    """Closed-form piecewise B on [0, T] with B(0) = 0."""
    require_valid(p)
    _gate(p, K, force)
    zs = zone_system(p, K, strict=not force)
    rho, T = p.rho, p.T
    segments: list[Segment] = []
    tau0, B0 = 0.0, 0.0
    zone = _entry_zone(zs, rho, B0)
    entered_from = None
    for _ in range(6):
        flow = RiccatiFlow(zs.coeffs(zone), B0)
        exit_tau, next_zone = math.inf, None
        if rho != 0:
            # A monotone flow never returns to the boundary it just crossed.
            candidates = []
            if zone in ("mid", "minus") and math.isfinite(zs.b_minus) and entered_from != "minus":
                nxt = "minus" if zone == "mid" else "mid"
                candidates.append((transition_time(flow.coeffs, B0, zs.b_minus / rho), nxt, "minus"))
            if zone in ("mid", "plus") and math.isfinite(zs.b_plus) and entered_from != "plus":
                nxt = "plus" if zone == "mid" else "mid"
                candidates.append((transition_time(flow.coeffs, B0, zs.b_plus / rho), nxt, "plus"))
            finite = [c for c in candidates if math.isfinite(c[0]) and c[0] > 0]
            if finite:
                exit_tau, next_zone, crossed = min(finite, key=lambda c: c[0])
        span = T - tau0
        if exit_tau < span:
            if not flow.lifetime > exit_tau:
                raise BlowupError(f"{zone} segment explodes at tau={tau0 + flow.lifetime:.6g}")
            segments.append(Segment(tau0, tau0 + exit_tau, zone, flow))
            tau0 += exit_tau
            B0 = (zs.b_minus if crossed == "minus" else zs.b_plus) / rho
            entered_from = crossed
            zone = next_zone
            continue
        if not flow.lifetime > span:
            raise BlowupError(
                f"{zone} segment starting at tau={tau0:.6g} explodes at tau={tau0 + flow.lifetime:.6g} < T"
            )
        segments.append(Segment(tau0, T, zone, flow))
        return PiecewiseB(tuple(segments), T, rho, zs)
    raise RuntimeError("zone stitching did not terminate")


def solve_B_numeric(p: MarketParams, K: IntervalConstraint, steps: int = 20000,
                    method: str = "rk4") -> tuple[np.ndarray, np.ndarray]:
    """Oracle: integrate the B-equation with the infimum over lambda taken directly."""
    ys = ode_solve_numeric(lambda t, y: hjb_b_rhs(p, K, y), 0.0, p.T, steps, method)
    return np.linspace(0.0, p.T, steps + 1), ys


@dataclass(frozen=True)
class ACurve:
    """A(tau) = b r tau + kappa theta * integral_0^tau B."""

    p: MarketParams
    B: PiecewiseB

    def __call__(self, tau):
        t = np.asarray(tau, dtype=float)
        out = self.p.b * self.p.r * t + self.p.kappa * self.p.theta * np.asarray(self.B.integral(t))
        return float(out) if np.ndim(out) == 0 else out


def solve_A(p: MarketParams, K: IntervalConstraint, B: PiecewiseB) -> ACurve:
    return ACurve(p, B)


@dataclass(frozen=True)
class ValueSurface:
    p: MarketParams
    A: ACurve
    B: PiecewiseB

    def value(self, t, v, z):
        """G(t, v, z) = v^b / b * exp(A(T-t) + B(T-t) z)."""
        tau = self.p.T - np.asarray(t, dtype=float)
        b = self.p.b
        return np.asarray(v, dtype=float) ** b / b * np.exp(self.A(tau) + self.B(tau) * np.asarray(z))


def value_surface(p: MarketParams, K: IntervalConstraint, force: bool = False) -> ValueSurface:
    B = solve_B(p, K, force=force)
    return ValueSurface(p, solve_A(p, K, B), B)


def value_function(vs: ValueSurface, t, v, z):
    return vs.value(t, v, z)


def pi_hat(B: PiecewiseB, p: MarketParams, t):
    return (p.eta + p.sigma * p.rho * B(p.T - np.asarray(t, dtype=float))) / (1.0 - p.b)


def pi_star(B: PiecewiseB, p: MarketParams, K: IntervalConstraint, t):
    return K.cap(pi_hat(B, p, t))


def unconstrained_condition_holds(p: MarketParams) -> bool:
    k = p.b / (1.0 - p.b)
    return k * p.eta * (p.kappa * p.rho / p.sigma + 0.5 * p.eta) < p.kappa ** 2 / (2 * p.sigma ** 2)


def B_unconstrained(p: MarketParams, tau):
    """Unconstrained exponent 2 r0 (e^{r3 tau} - 1) / ((r1 - r3)(e^{r3 tau} - 1) - 2 r3), mid coefficients."""
    if not unconstrained_condition_holds(p):
        raise AssumptionError("unconstrained existence condition fails")
    co = mid_coeffs(p)
    r3 = co.require_r3()
    t = np.asarray(tau, dtype=float)
    flow = RiccatiFlow(co, 0.0)
    if np.any(t >= flow.lifetime):
        raise BlowupError(f"unconstrained exponent explodes at tau={flow.lifetime:.6g}")
    q = np.exp(-r3 * t)
    one_minus_q = -np.expm1(-r3 * t)
    out = 2.0 * co.r0 * one_minus_q / ((co.r1 - r3) * one_minus_q - 2.0 * r3 * q) + 0.0
    return float(out) if out.ndim == 0 else out


def pi_unconstrained(p: MarketParams, t):
    tau = p.T - np.asarray(t, dtype=float)
    return (p.eta + p.sigma * p.rho * B_unconstrained(p, tau)) / (1.0 - p.b)


@dataclass(frozen=True)
class PolicyCurve:
    t: np.ndarray
    pi_star: np.ndarray
    pi_hat: np.ndarray
    pi_u: np.ndarray
    cap_pi_u: np.ndarray
    B: np.ndarray
    B_u: np.ndarray
    zone: np.ndarray

    COLUMNS = ("t", "pi_star", "pi_hat", "pi_u", "cap_pi_u", "B", "B_u", "zone")

    def rows(self):
        for k in range(len(self.t)):
            yield tuple(getattr(self, c)[k] for c in self.COLUMNS)


def policy_curve(p: MarketParams, K: IntervalConstraint, grid: int = DEFAULT_GRID,
                 force: bool = False, B: PiecewiseB | None = None) -> PolicyCurve:
    if B is None:
        B = solve_B(p, K, force=force)
    t = np.linspace(0.0, p.T, grid)
    tau = p.T - t
    tau[-1] = 0.0
    Bv = B(tau)
    ph = (p.eta + p.sigma * p.rho * Bv) / (1.0 - p.b)
    try:
        Bu = np.asarray(B_unconstrained(p, tau))
    except (AssumptionError, BlowupError, CoefficientError):
        Bu = np.full_like(t, np.nan)
    pu = (p.eta + p.sigma * p.rho * Bu) / (1.0 - p.b)
    return PolicyCurve(t, K.cap(ph), ph, pu, K.cap(pu), Bv, Bu, B.zone_at(tau))


def crossing_times(f, T: float, levels, n: int = 4001) -> tuple[float, ...]:
    """Times in (0, T) where f crosses one of ``levels``, refined by bisection."""
    t = np.linspace(0.0, T, n)
    y = f(t)
    out = []
    for lev in levels:
        if not math.isfinite(lev):
            continue
        s = np.sign(y - lev)
        for k in np.nonzero(s[:-1] * s[1:] < 0)[0]:
            lo, hi = t[k], t[k + 1]
            slo = s[k]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if np.sign(float(f(np.array(mid))) - lev) == slo:
                    lo = mid
                else:
                    hi = mid
            out.append(0.5 * (lo + hi))
    return tuple(sorted(out))


@dataclass(frozen=True)
class ProjectionResult:
    differs: bool
    witness: float | None = None

    def __str__(self):
        return f"differs (t={self.witness:.6g})" if self.differs else "equal"


def projection_differs(p: MarketParams, K: IntervalConstraint, grid: int = DEFAULT_GRID,
                       force: bool = False, tol: float = 1e-10) -> ProjectionResult:
    """Decide whether the optimum differs from the capped unconstrained policy.

    Shortcut: equal whenever rho = 0 or the Merton ratio lies in K.  Otherwise
    look for a grid time where exactly one of pi_hat, pi_u lies strictly inside
    (alpha, beta); "strictly" means by more than ``tol``.  The set of such
    times can be narrower than the grid spacing, so midpoints between the
    bound-crossing times of the two curves are tested as well.
    """
    if p.rho == 0 or K.contains(merton_ratio(p)):
        return ProjectionResult(False)
    c = policy_curve(p, K, grid=grid, force=force)

    def inside(x):
        return (x > K.alpha + tol) & (x < K.beta - tol)

    def outside(x):
        return (x <= K.alpha) | (x >= K.beta)

    def one_inside(a, u):
        return (inside(a) & outside(u)) | (inside(u) & outside(a))

    hit = one_inside(c.pi_hat, c.pi_u)
    if np.any(hit):
        return ProjectionResult(True, float(c.t[np.argmax(hit)]))
    B = solve_B(p, K, force=force)
    levels = (K.alpha, K.beta)
    cuts = sorted(set(crossing_times(lambda t: np.asarray(pi_hat(B, p, t)), p.T, levels))
                  | set(crossing_times(lambda t: np.asarray(pi_unconstrained(p, t)), p.T, levels)))
    if len(cuts) > 1:
        mids = 0.5 * (np.array(cuts[:-1]) + np.array(cuts[1:]))
        hit = one_inside(np.asarray(pi_hat(B, p, mids)), np.asarray(pi_unconstrained(p, mids)))
        if np.any(hit):
            return ProjectionResult(True, float(mids[np.argmax(hit)]))
    return ProjectionResult(False)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Grid evaluation of the two verification inequalities.

    ``a1_max_excess`` is max_t(lhs - kappa/sigma^2) (<= 0 means it holds);
    ``a2_max_excess`` is max_t(lhs - kappa^2/(2 sigma^2)) (< 0 means it holds).
    """

    a1_max_excess: float
    a1_argmax_t: float
    a2_max_excess: float
    a2_argmax_t: float

    @property
    def a1_holds(self) -> bool:
        return self.a1_max_excess <= 0

    @property
    def a2_holds(self) -> bool:
        return self.a2_max_excess < 0


def diagnostics_A1_A2(p: MarketParams, K: IntervalConstraint, B: PiecewiseB,
                      grid: int = 10_001) -> DiagnosticsReport:
    t = np.linspace(0.0, p.T, grid)
    tau = p.T - t
    tau[-1] = 0.0
    Bv = B(tau)
    dB = B.derivative(tau)
    ps = pi_star(B, p, K, t)
    lam = lambda_star(B.zones, p, K, Bv)
    k = p.b / (1.0 - p.b)
    mid = np.asarray(B.zone_at(tau)) == "mid"
    bracket = np.where(mid, p.sigma * p.rho, 0.0)

    a1 = p.b * p.rho / p.sigma * ps + Bv - p.kappa / p.sigma ** 2
    a2 = (0.5 * k * p.eta ** 2 - 0.5 * k * (lam + p.sigma * p.rho * Bv) ** 2
          - 0.5 * p.b ** 2 * p.rho ** 2 * ps ** 2 + p.b * p.rho * p.kappa / p.sigma * ps
          + k * p.rho / p.sigma * bracket * dB) - p.kappa ** 2 / (2 * p.sigma ** 2)
    i1, i2 = int(np.argmax(a1)), int(np.argmax(a2))
    return DiagnosticsReport(float(a1[i1]), float(t[i1]), float(a2[i2]), float(t[i2]))
