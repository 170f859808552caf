"""Expected-utility exponents of deterministic strategies and wealth-equivalent loss.

For a deterministic weight path pi(t) the expected utility from (t, v, z) is
(1/b) v^b exp(A_pi(T-t) + B_pi(T-t) z) where, with tau = T - t,

    B_pi' = -(0.5 b (1-b) pi^2 - b eta pi) + (sigma rho b pi - kappa) B_pi + 0.5 sigma^2 B_pi^2
    A_pi' = r b + kappa theta B_pi,         A_pi(0) = B_pi(0) = 0.

The loss relative to the optimum is L = 1 - exp((A_pi - A + (B_pi - B) z) / b):
the fraction of wealth the optimal investor could give up and still match pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import IntervalConstraint, MarketParams, check_assumptions, merton_ratio
from .errors import HestonCapError, NonFiniteState
from .policy import (
    DEFAULT_GRID, PiecewiseB, crossing_times, pi_hat, pi_unconstrained, solve_A, solve_B,
)
from .riccati import BLOWUP_THRESHOLD, solver_grid

#: Default exponent solver step is T / STEPS_PER_UNIT_T.
STEPS_PER_UNIT_T = 20_000


@dataclass(frozen=True)
class DeterministicStrategy:
    """A weight path t -> pi(t) with known kink times (used to align solver nodes)."""

    values: Callable[[np.ndarray], np.ndarray]
    label: str
    breakpoints: tuple[float, ...] = ()

    def __call__(self, t):
        return self.values(np.asarray(t, dtype=float))

    @classmethod
    def constant(cls, value: float, label: str | None = None) -> "DeterministicStrategy":
        return cls(lambda t: np.full(np.shape(t), float(value)), label or f"const({value:g})")

    @classmethod
    def merton_capped(cls, p: MarketParams, K: IntervalConstraint) -> "DeterministicStrategy":
        return cls.constant(K.cap(merton_ratio(p)), "cap_merton")

    @classmethod
    def unconstrained_capped(cls, p: MarketParams, K: IntervalConstraint) -> "DeterministicStrategy":
        def f(t):
            return K.cap(np.asarray(pi_unconstrained(p, t), dtype=float))

        kinks = crossing_times(lambda t: np.asarray(pi_unconstrained(p, t)), p.T, (K.alpha, K.beta))
        return cls(f, "cap_pi_u", kinks)

    @classmethod
    def optimal(cls, p: MarketParams, K: IntervalConstraint, B: PiecewiseB) -> "DeterministicStrategy":
        kinks = tuple(p.T - s for s in B.transition_times)
        kinks += crossing_times(lambda t: np.asarray(pi_hat(B, p, t)), p.T, (K.alpha, K.beta))
        return cls(lambda t: K.cap(np.asarray(pi_hat(B, p, t), dtype=float)), "pi_star",
                   tuple(sorted(set(kinks))))


@dataclass(frozen=True)
class Exponents:
    tau: np.ndarray
    A: np.ndarray
    B: np.ndarray


def strategy_exponents(p: MarketParams, strat: DeterministicStrategy, steps: int | None = None,
                       method: str = "rk4") -> Exponents:
    """Integrate (A_pi, B_pi) in tau from 0 to T (RK4 by default, Euler on request)."""
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}")
    if steps is None:
        steps = max(1, int(math.ceil(p.T * STEPS_PER_UNIT_T)))
    tau = solver_grid(p.T, steps, tuple(p.T - t for t in strat.breakpoints))
    # pi at nodes and midpoints; kinks sit on nodes so each step sees a smooth pi
    mids = 0.5 * (tau[:-1] + tau[1:])
    eps = 1e-12 * p.T
    # evaluate pi just inside each step to pick the correct one-sided value at kinks
    pi_left = np.asarray(strat(p.T - np.minimum(tau[:-1] + eps, mids)), dtype=float)
    pi_mid = np.asarray(strat(p.T - mids), dtype=float)
    pi_right = np.asarray(strat(p.T - np.maximum(tau[1:] - eps, mids)), dtype=float)

    b, eta, kappa, sigma, rho = p.b, p.eta, p.kappa, p.sigma, p.rho
    half_s2 = 0.5 * sigma * sigma
    c0 = lambda x: -(0.5 * b * (1.0 - b) * x * x - b * eta * x)  # noqa: E731
    c1 = lambda x: sigma * rho * b * x - kappa  # noqa: E731
    c0l, c1l = c0(pi_left).tolist(), c1(pi_left).tolist()
    c0m, c1m = c0(pi_mid).tolist(), c1(pi_mid).tolist()
    c0r, c1r = c0(pi_right).tolist(), c1(pi_right).tolist()
    hs = np.diff(tau).tolist()

    Bs = [0.0] * len(tau)
    y = 0.0
    if method == "rk4":
        for k, h in enumerate(hs):
            k1 = c0l[k] + c1l[k] * y + half_s2 * y * y
            y2 = y + 0.5 * h * k1
            k2 = c0m[k] + c1m[k] * y2 + half_s2 * y2 * y2
            y3 = y + 0.5 * h * k2
            k3 = c0m[k] + c1m[k] * y3 + half_s2 * y3 * y3
            y4 = y + h * k3
            k4 = c0r[k] + c1r[k] * y4 + half_s2 * y4 * y4
            y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not abs(y) <= BLOWUP_THRESHOLD:
                raise NonFiniteState(f"B_pi blew up at tau={tau[k + 1]:.6g}", t=p.T - tau[k + 1])
            Bs[k + 1] = y
    else:
        for k, h in enumerate(hs):
            y = y + h * (c0l[k] + c1l[k] * y + half_s2 * y * y)
            if not abs(y) <= BLOWUP_THRESHOLD:
                raise NonFiniteState(f"B_pi blew up at tau={tau[k + 1]:.6g}", t=p.T - tau[k + 1])
            Bs[k + 1] = y
    B = np.array(Bs)
    # A' = rb + kappa theta B_pi: integrate with the same order as B
    if method == "rk4":
        # Simpson per step; B at the midpoint from cubic Hermite interpolation
        slope_l = np.array(c0l) + np.array(c1l) * B[:-1] + half_s2 * B[:-1] ** 2
        slope_r = np.array(c0r) + np.array(c1r) * B[1:] + half_s2 * B[1:] ** 2
        h = np.diff(tau)
        B_mid = 0.5 * (B[:-1] + B[1:]) + h / 8.0 * (slope_l - slope_r)
        incr = h / 6.0 * (B[:-1] + 4.0 * B_mid + B[1:])
    else:
        incr = np.diff(tau) * B[:-1]
    A = p.r * b * tau + p.kappa * p.theta * np.concatenate([[0.0], np.cumsum(incr)])
    return Exponents(tau, A, B)


@dataclass(frozen=True)
class WelReport:
    """Loss of a strategy against the optimum on the solver's tau grid."""

    p: MarketParams
    tau: np.ndarray
    A_pi: np.ndarray
    B_pi: np.ndarray
    A_star: np.ndarray
    B_star: np.ndarray
    L0: float
    delta_max: float
    label: str = ""

    def L(self, t, z):
        """Loss at time t (interpolated on the tau grid) and variance z."""
        tau = self.p.T - np.asarray(t, dtype=float)
        dA = np.interp(tau, self.tau, self.A_pi - self.A_star)
        dB = np.interp(tau, self.tau, self.B_pi - self.B_star)
        return -np.expm1((dA + dB * np.asarray(z, dtype=float)) / self.p.b)


def wel_from_exponents(p: MarketParams, dA: float, dB: float, z: float) -> float:
    return float(-math.expm1((dA + dB * z) / p.b))


def delta_max(curve_a, curve_b) -> float:
    """max_t |pi_a(t) - pi_b(t)| on a common grid."""
    a, b = np.asarray(curve_a, dtype=float), np.asarray(curve_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("curves must share a grid")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def wel_report(p: MarketParams, K: IntervalConstraint, strat: DeterministicStrategy,
               steps: int | None = None, method: str = "rk4", force: bool = False,
               grid: int = DEFAULT_GRID, B: PiecewiseB | None = None) -> WelReport:
    if B is None:
        B = solve_B(p, K, force=force)
    A = solve_A(p, K, B)
    ex = strategy_exponents(p, strat, steps=steps, method=method)
    A_star, B_star = np.asarray(A(ex.tau)), np.asarray(B(ex.tau))
    L0 = wel_from_exponents(p, ex.A[-1] - A_star[-1], ex.B[-1] - B_star[-1], p.z0)
    t = np.linspace(0.0, p.T, grid)
    dm = delta_max(strat(t), K.cap(pi_hat(B, p, t)))
    return WelReport(p, ex.tau, ex.A, ex.B, A_star, B_star, L0, dm, strat.label)


def wel(p: MarketParams, K: IntervalConstraint, strat: DeterministicStrategy, t: float, z: float,
        **kwargs) -> float:
    rep = wel_report(p, K, strat, **kwargs)
    return float(rep.L(t, z))


STRATEGY_KINDS = ("merton_capped", "unconstrained_capped")
SWEEP_AXES = ("b", "sigma", "kappa", "rho", "alpha")


def make_strategy(kind: str, p: MarketParams, K: IntervalConstraint) -> DeterministicStrategy:
    if kind == "merton_capped":
        return DeterministicStrategy.merton_capped(p, K)
    if kind == "unconstrained_capped":
        return DeterministicStrategy.unconstrained_capped(p, K)
    raise ValueError(f"unknown strategy kind {kind!r}; expected one of {STRATEGY_KINDS}")


@dataclass(frozen=True)
class SweepRow:
    axis: float
    L0: float
    delta_max: float
    assumption_flag: str


def sweep_point(p: MarketParams, K: IntervalConstraint, axis: str, value: float,
                kind: str = "merton_capped", alpha_relative: bool = False,
                steps: int | None = None, method: str = "rk4") -> tuple[MarketParams, IntervalConstraint]:
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if axis == "alpha":
        alpha = value * merton_ratio(p) if alpha_relative else value
        return p, IntervalConstraint(alpha, K.beta)
    return p.replace(**{axis: float(value)}), K


def sweep(p: MarketParams, K: IntervalConstraint, axis: str, values: Sequence[float],
          kind: str = "merton_capped", alpha_relative: bool = False,
          steps: int | None = None, method: str = "rk4") -> list[SweepRow]:
    """Loss at (0, z0) and max weight gap along one parameter axis.

    Points failing the solver assumptions are still computed (forced) and
    flagged; a point is NaN only if it cannot be computed at all.
    """
    rows = []
    for v in values:
        try:
            q, Kq = sweep_point(p, K, axis, v, kind, alpha_relative)
            rep = check_assumptions(q, Kq)
            flag = "ok" if rep.passed else "fail:" + "|".join(_short_failures(rep))
            r = wel_report(q, Kq, make_strategy(kind, q, Kq), steps=steps, method=method, force=True)
            rows.append(SweepRow(float(v), r.L0, r.delta_max, flag))
        except HestonCapError as e:
            rows.append(SweepRow(float(v), math.nan, math.nan, f"error:{type(e).__name__}"))
    return rows


def _short_failures(rep) -> list[str]:
    out = []
    if not rep.existence:
        out.append("existence")
    if not rep.no_blowup:
        out.append("blowup")
    if not rep.bounded_sigma:
        out.append("bound")
    return out
