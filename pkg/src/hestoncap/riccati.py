"""Constant-coefficient scalar Riccati ODEs.

All flows solve

    B'(tau) = -r0 + r1 B + 0.5 r2 B^2,    B(0) = B0,

which has the closed form (with r3 = sqrt(r1^2 + 2 r0 r2), c = r1 + r2 B0 - r3)

    B(tau) = (2 r2 r3 B0 + (e^{r3 tau} - 1)(r1 + r3) c) / (2 r2 r3 - r2 (e^{r3 tau} - 1) c)

on [0, t+), where t+ = log((c + 2 r3) / c) / r3 if c > 0 and +inf otherwise.
The numerical RK4/Euler integrator at the bottom is the independent oracle
for every closed form in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CoefficientError, LifetimeExceeded, NonFiniteState

#: |y| above this is treated as finite-time blow-up by the numeric integrator.
BLOWUP_THRESHOLD = 1e8


@dataclass(frozen=True)
class RiccatiCoeffs:
    r0: float
    r1: float
    r2: float

    @property
    def discriminant(self) -> float:
        return self.r1 * self.r1 + 2.0 * self.r0 * self.r2

    @property
    def r3(self) -> float | None:
        d = self.discriminant
        return math.sqrt(d) if d > 0 else None

    def require_r3(self) -> float:
        if self.r2 == 0:
            raise CoefficientError("degenerate Riccati ODE: r2 == 0")
        r3 = self.r3
        if r3 is None:
            raise CoefficientError(
                f"r1^2 + 2 r0 r2 = {self.discriminant:.6g} <= 0 for {self}"
            )
        return r3

    def rhs(self, B):
        return -self.r0 + self.r1 * B + 0.5 * self.r2 * B * B

    def equilibria(self) -> tuple[float, float]:
        """Stable and unstable stationary points (for r2 > 0, in that order)."""
        r3 = self.require_r3()
        return (-self.r1 - r3) / self.r2, (-self.r1 + r3) / self.r2


def riccati_lifetime(coeffs: RiccatiCoeffs, B0: float) -> float:
    r3 = coeffs.require_r3()
    c = coeffs.r1 + coeffs.r2 * B0 - r3
    if c <= 0:
        return math.inf
    return math.log1p(2.0 * r3 / c) / r3


@dataclass(frozen=True)
class RiccatiFlow:
    coeffs: RiccatiCoeffs
    B0: float
    lifetime: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "lifetime", riccati_lifetime(self.coeffs, self.B0))

    def __call__(self, tau):
        return riccati_eval(self, tau)

    def derivative(self, tau):
        return self.coeffs.rhs(riccati_eval(self, tau))


def riccati_eval(f: RiccatiFlow, tau):
    """Closed-form B(tau); accepts scalars or arrays."""
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise ValueError("tau must be non-negative")
    if np.any(t >= f.lifetime):
        raise LifetimeExceeded(f"tau={np.max(t):.6g} >= lifetime {f.lifetime:.6g}")
    co = f.coeffs
    r3 = co.require_r3()
    c = co.r1 + co.r2 * f.B0 - r3
    # Divided through by e^{r3 tau}: stable for large tau, exact at tau=0.
    q = np.exp(-r3 * t)
    one_minus_q = -np.expm1(-r3 * t)
    num = 2.0 * co.r2 * r3 * f.B0 * q + one_minus_q * (co.r1 + r3) * c
    den = 2.0 * co.r2 * r3 * q - co.r2 * one_minus_q * c
    out = num / den
    return float(out) if out.ndim == 0 else out


def transition_time(coeffs: RiccatiCoeffs, B0: float, B_target: float) -> float:
    """First tau with B(tau) = B_target, or +inf if the flow never gets there."""
    if B_target == B0:
        return 0.0
    r3 = coeffs.require_r3()
    slope = coeffs.rhs(B0)
    if slope == 0 or math.copysign(1.0, slope) != math.copysign(1.0, B_target - B0):
        return math.inf
    c = coeffs.r1 + coeffs.r2 * B0 - r3
    d = coeffs.r1 + coeffs.r2 * B_target + r3
    if c == 0 or d == 0:
        # B0 is stationary, or the target is the attracting equilibrium.
        return math.inf
    x = 2.0 * coeffs.r2 * r3 * (B_target - B0) / (c * d)
    if x <= -1.0:
        return math.inf
    tau = math.log1p(x) / r3
    if math.isnan(tau):
        tau = _bisect_transition(RiccatiFlow(coeffs, B0), B_target)
    if tau < 0:
        return math.inf
    if tau > riccati_lifetime(coeffs, B0):
        return math.inf
    return tau


def _bisect_transition(f: RiccatiFlow, target: float, tol: float = 1e-12) -> float:
    hi = f.lifetime if math.isfinite(f.lifetime) else 1.0
    # Grow the bracket until the target is crossed (bounded by the lifetime).
    sign0 = math.copysign(1.0, target - f.B0)
    while math.isinf(f.lifetime) and math.copysign(1.0, target - f(hi)) == sign0:
        hi *= 2.0
        if hi > 1e6:
            return math.inf
    lo = 0.0
    if math.isfinite(f.lifetime):
        hi = math.nextafter(hi, 0.0)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if math.copysign(1.0, target - f(mid)) == sign0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def adaptive_simpson(func: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = 50) -> float:
    if b == a:
        return 0.0
    fa, fm, fb = func(a), func(0.5 * (a + b)), func(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    return _simpson_rec(func, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_rec(func, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = func(lm), func(rm)
    left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_simpson_rec(func, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _simpson_rec(func, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


def riccati_integral(f: RiccatiFlow, T: float, tol: float = 1e-10) -> float:
    """Integral of B over [0, T] by adaptive Simpson on the closed form."""
    if T >= f.lifetime:
        raise LifetimeExceeded(f"T={T:.6g} >= lifetime {f.lifetime:.6g}")
    if T == 0:
        return 0.0
    return adaptive_simpson(lambda s: riccati_eval(f, s), 0.0, T, tol)


def riccati_integral_closed_form(f: RiccatiFlow, T):
    """(2/r2) log(2 r3 e^{(r3 - r1) T / 2} / D(T)) where D is the closed-form denominator / r2."""
    co = f.coeffs
    r3 = co.require_r3()
    T = np.asarray(T, dtype=float)
    if np.any(T >= f.lifetime):
        raise LifetimeExceeded("T beyond lifetime")
    c = co.r1 + co.r2 * f.B0 - r3
    # log D(T) - log(2 r3) computed as r3 T + log(q + (1 - q) * (-c) / (2 r3)), q = e^{-r3 T}
    q = np.exp(-r3 * T)
    inner = q - (-np.expm1(-r3 * T)) * c / (2.0 * r3)
    out = ((r3 - co.r1) * T - 2.0 * (r3 * T + np.log(inner))) / co.r2
    return float(out) if out.ndim == 0 else out


def riccati_integral_b0_exponent(f: RiccatiFlow, T: float) -> float:
    """Variant of the antiderivative with exponent (r3 - B0)/2 * T instead of (r3 - r1)/2 * T.

    Only used to report how far that variant is from the quadrature value.
    """
    co = f.coeffs
    r3 = co.require_r3()
    e = math.exp(r3 * T)
    den = r3 * (e + 1) - co.r1 * (e - 1) - co.r2 * (e - 1) * f.B0
    return 2.0 / co.r2 * math.log(2.0 * r3 * math.exp(0.5 * (r3 - f.B0) * T) / den)


def integral_report(f: RiccatiFlow, T: float) -> dict:
    quad = riccati_integral(f, T)
    closed = riccati_integral_closed_form(f, T)
    variant = riccati_integral_b0_exponent(f, T)
    return {
        "quadrature": quad,
        "closed_form": closed,
        "closed_form_error": abs(closed - quad),
        "b0_exponent_variant": variant,
        "b0_exponent_variant_error": abs(variant - quad),
    }


def ode_solve_numeric(rhs, y0, T: float, steps: int, method: str = "rk4",
                      breakpoints=()) -> np.ndarray:
    """Fixed-step integration of y' = rhs(t, y) on [0, T]; returns the grid values.

    With ``breakpoints`` the uniform grid is replaced by uniform sub-grids on
    the pieces between breakpoints (steps allotted proportionally), so kinks in
    a time-dependent right side fall on nodes.  Use :func:`solver_grid` to get
    the matching time nodes.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}")
    ts = solver_grid(T, steps, breakpoints)
    scalar = np.ndim(y0) == 0
    y = float(y0) if scalar else np.array(y0, dtype=float)
    out = np.empty((len(ts),) + np.shape(y0))
    out[0] = y
    rk4 = method == "rk4"
    for k in range(len(ts) - 1):
        t, h = ts[k], ts[k + 1] - ts[k]
        if rk4:
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            y = y + h * rhs(t, y)
        big = abs(y) if scalar else np.max(np.abs(y))
        if not big <= BLOWUP_THRESHOLD:  # also catches NaN
            raise NonFiniteState(f"solution left |y| <= {BLOWUP_THRESHOLD:g} at t={ts[k + 1]:.6g}",
                                 t=ts[k + 1])
        out[k + 1] = y
    return out


def solver_grid(T: float, steps: int, breakpoints=()) -> np.ndarray:
    cuts = sorted({float(b) for b in breakpoints if 0.0 < b < T})
    if not cuts:
        return np.linspace(0.0, T, steps + 1)
    edges = [0.0] + cuts + [T]
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, int(round(steps * (b - a) / T)))
        pieces.append(np.linspace(a, b, n + 1)[:-1])
    pieces.append(np.array([T]))
    return np.concatenate(pieces)
