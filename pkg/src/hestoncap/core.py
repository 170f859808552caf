"""Market parameters, interval constraints, zone coefficients and assumption checks.

The investor has CRRA utility U(v) = v^b / b and trades one risky asset whose
instantaneous variance z follows a CIR process

    dz = kappa (theta - z) dt + sigma sqrt(z) dW^z,

with excess return eta * z and stock/variance correlation rho.  The risky
fraction must stay in an interval K = [alpha, beta] whose bounds may be
infinite (plain Python ``float('inf')``).

The value function exponent B solves a scalar ODE whose right side switches
between three constant-coefficient Riccati forms depending on which side of
the boundaries B-/rho, B+/rho the current value lies.  Everything here is
pure: dataclasses are frozen and functions have no side effects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from .errors import CoefficientError, ValidationError
from .riccati import RiccatiCoeffs, riccati_lifetime

ZONES = ("minus", "mid", "plus")


@dataclass(frozen=True)
class MarketParams:
    """Heston market and preference constants.

    Attributes
    ----------
    r : riskless rate (may be zero)
    eta : excess-return loading on variance; the Sharpe ratio is eta * sqrt(z)
    kappa, theta, sigma : CIR speed, long-run level and vol-of-vol
    rho : correlation between stock and variance shocks, in (-1, 1)
    z0 : initial variance
    b : CRRA exponent, b < 1 and b != 0
    T : horizon in years
    v0 : initial wealth
    """

    r: float
    eta: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    z0: float
    b: float
    T: float
    v0: float = 1.0

    def replace(self, **changes) -> "MarketParams":
        return dc_replace(self, **changes)

    @property
    def merton(self) -> float:
        return merton_ratio(self)


#: Base crisis-calibrated market used throughout the numerical study.
TABLE1 = MarketParams(r=0.0, eta=3.0071, kappa=3.15, theta=0.35, sigma=0.76,
                      rho=-0.81, z0=0.35, b=-2.5, T=1.0, v0=1.0)

#: Stressed variant: higher vol-of-vol, slower reversion, stronger leverage, higher risk aversion.
CRISIS = TABLE1.replace(sigma=1.0, kappa=1.5, rho=-0.9, b=-15.0)


@dataclass(frozen=True)
class IntervalConstraint:
    """Allocation interval [alpha, beta]; either bound may be infinite."""

    alpha: float
    beta: float

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if math.isnan(a) or math.isnan(b):
            raise ValidationError("constraint bounds must not be NaN")
        if a == math.inf or b == -math.inf:
            raise ValidationError("alpha must be < +inf and beta > -inf")
        if not a < b:
            raise ValidationError(f"constraint needs alpha < beta, got [{a}, {b}]")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def whole_line(cls) -> "IntervalConstraint":
        return cls(-math.inf, math.inf)

    @property
    def is_unconstrained(self) -> bool:
        return self.alpha == -math.inf and self.beta == math.inf

    def contains(self, x) -> bool:
        return bool(self.alpha <= x <= self.beta)

    def cap(self, x):
        """Pointwise projection median(alpha, x, beta)."""
        out = np.minimum(np.maximum(x, self.alpha), self.beta)
        return float(out) if np.ndim(out) == 0 else out


def cap(x, alpha: float, beta: float):
    return IntervalConstraint(alpha, beta).cap(x)


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.problems

    def __bool__(self) -> bool:
        return self.ok


def validate_params(p: MarketParams) -> ValidationReport:
    problems = []
    for name in ("r", "eta", "kappa", "theta", "sigma", "rho", "z0", "b", "T", "v0"):
        if not math.isfinite(getattr(p, name)):
            problems.append(f"{name} must be finite")
    if problems:
        return ValidationReport(tuple(problems))
    if p.r < 0:
        problems.append("r must be >= 0")
    for name in ("eta", "kappa", "theta", "sigma", "z0", "T", "v0"):
        if getattr(p, name) <= 0:
            problems.append(f"{name} must be > 0")
    if p.b == 0:
        problems.append("b must be nonzero")
    elif p.b >= 1:
        problems.append("b must be < 1")
    if not -1 < p.rho < 1:
        problems.append("rho must lie in (-1, 1)")
    if p.kappa > 0 and p.theta > 0 and not 2 * p.kappa * p.theta > p.sigma ** 2:
        problems.append(
            f"Feller condition 2*kappa*theta > sigma^2 fails "
            f"({2 * p.kappa * p.theta:.6g} <= {p.sigma ** 2:.6g})"
        )
    return ValidationReport(tuple(problems))


def require_valid(p: MarketParams) -> None:
    rep = validate_params(p)
    if not rep.ok:
        raise ValidationError("; ".join(rep.problems))


def merton_ratio(p: MarketParams) -> float:
    return p.eta / (1.0 - p.b)


def support_function(K: IntervalConstraint, x: float) -> float:
    """delta_K(x) = -inf_{y in K} x*y."""
    if x > 0:
        return -K.alpha * x
    if x < 0:
        return -K.beta * x
    return 0.0


@dataclass(frozen=True)
class ZoneSystem:
    """Boundaries B-, B+ and the Riccati coefficients of each zone.

    A zone's coefficients are None when its bound is infinite (zone empty).
    Zone membership is decided on rho * B; the mid zone is closed.
    """

    b_minus: float
    b_plus: float
    minus: RiccatiCoeffs | None
    mid: RiccatiCoeffs
    plus: RiccatiCoeffs | None
    strict: bool = field(default=True, compare=False)

    def coeffs(self, zone: str) -> RiccatiCoeffs:
        c = getattr(self, zone)
        if c is None:
            raise CoefficientError(f"zone {zone!r} is empty (infinite bound)")
        return c

    def used_zones(self) -> tuple[str, ...]:
        return tuple(z for z in ZONES if getattr(self, z) is not None)

    def zone_of(self, rho: float, B: float) -> str:
        x = rho * B
        if x < self.b_minus:
            return "minus"
        if x > self.b_plus:
            return "plus"
        return "mid"

    def rhs(self, rho: float, B: float) -> float:
        return self.coeffs(self.zone_of(rho, B)).rhs(B)

    def boundary_B(self, rho: float, zone_side: str) -> float:
        """B value of the boundary B-/rho ('minus') or B+/rho ('plus')."""
        bound = self.b_minus if zone_side == "minus" else self.b_plus
        return bound / rho


def zone_boundaries(p: MarketParams, K: IntervalConstraint) -> tuple[float, float]:
    one_b = 1.0 - p.b
    bm = (one_b * K.alpha - p.eta) / p.sigma if math.isfinite(K.alpha) else -math.inf
    bp = (one_b * K.beta - p.eta) / p.sigma if math.isfinite(K.beta) else math.inf
    return bm, bp


def mid_coeffs(p: MarketParams) -> RiccatiCoeffs:
    k = p.b / (1.0 - p.b)
    return RiccatiCoeffs(
        r0=-0.5 * k * p.eta ** 2,
        r1=k * p.eta * p.sigma * p.rho - p.kappa,
        r2=p.sigma ** 2 * (1.0 + k * p.rho ** 2),
    )


def bound_coeffs(p: MarketParams, bound: float) -> RiccatiCoeffs:
    """Coefficients of the zone where the allocation is pinned at ``bound``."""
    return RiccatiCoeffs(
        r0=0.5 * p.b * bound * ((1.0 - p.b) * bound - 2.0 * p.eta),
        r1=p.b * p.sigma * p.rho * bound - p.kappa,
        r2=p.sigma ** 2,
    )


def zone_system(p: MarketParams, K: IntervalConstraint, strict: bool = True) -> ZoneSystem:
    """Build the three-zone system.

    With ``strict`` a CoefficientError is raised if any used zone has
    r1^2 + 2 r0 r2 <= 0.  Without it such zones are kept and the error is
    deferred until a trajectory actually needs that zone's closed form.
    """
    require_valid(p)
    bm, bp = zone_boundaries(p, K)
    minus = bound_coeffs(p, K.alpha) if math.isfinite(K.alpha) else None
    plus = bound_coeffs(p, K.beta) if math.isfinite(K.beta) else None
    zs = ZoneSystem(bm, bp, minus, mid_coeffs(p), plus, strict=strict)
    if strict:
        for z in zs.used_zones():
            zs.coeffs(z).require_r3()
    return zs


def lambda_star(zs: ZoneSystem, p: MarketParams, K: IntervalConstraint, B):
    """Minimiser of D(lambda, B) over lambda; zero in the (closed) mid zone."""
    one_b = 1.0 - p.b
    x = p.rho * np.asarray(B, dtype=float)
    drift = p.eta + p.sigma * p.rho * np.asarray(B, dtype=float)
    out = np.zeros_like(x)
    if math.isfinite(K.alpha):
        out = np.where(x < zs.b_minus, one_b * K.alpha - drift, out)
    if math.isfinite(K.beta):
        out = np.where(x > zs.b_plus, one_b * K.beta - drift, out)
    return float(out) if out.ndim == 0 else out


def dual_objective(p: MarketParams, K: IntervalConstraint, lam: float, B: float) -> float:
    """D(lambda, B) = 2(1-b) delta_K(lambda) + (eta + lambda + sigma rho B)^2."""
    d = support_function(K, lam)
    if math.isinf(d):
        return d
    return 2.0 * (1.0 - p.b) * d + (p.eta + lam + p.sigma * p.rho * B) ** 2


def hjb_b_rhs(p: MarketParams, K: IntervalConstraint, B: float) -> float:
    """Right side of the B-equation with the infimum over lambda taken directly.

    D is convex and piecewise quadratic in lambda, so its infimum is attained at
    one of: the unconstrained minimiser of the lambda>0 branch, of the
    lambda<0 branch, or lambda=0.  No zone bookkeeping is involved, which makes
    this an independent oracle for the zone-switching solver.
    """
    one_b = 1.0 - p.b
    drift = p.eta + p.sigma * p.rho * B
    best = dual_objective(p, K, 0.0, B)
    if math.isfinite(K.alpha):
        lam = one_b * K.alpha - drift
        if lam > 0:
            best = min(best, dual_objective(p, K, lam, B))
    if math.isfinite(K.beta):
        lam = one_b * K.beta - drift
        if lam < 0:
            best = min(best, dual_objective(p, K, lam, B))
    return -p.kappa * B + 0.5 * p.sigma ** 2 * B * B + 0.5 * p.b / one_b * best


def existence_terms(p: MarketParams, K: IntervalConstraint) -> dict[str, float]:
    """Left sides of the existence condition per zone (compare with kappa^2 / (2 sigma^2))."""
    krs = p.kappa * p.rho / p.sigma
    terms = {"mid": p.b / (1.0 - p.b) * p.eta * (krs + 0.5 * p.eta)}
    for name, bound in (("minus", K.alpha), ("plus", K.beta)):
        if math.isfinite(bound):
            terms[name] = p.b * bound * (
                p.eta - 0.5 * bound + krs + 0.5 * bound * p.b * (1.0 - p.rho ** 2)
            )
    return terms


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the existence, no-blow-up and near-maturity boundedness checks.

    ``bounded_sigma`` uses the denominator sigma (the form the diagnostic
    inequalities rely on) and gates the solver; ``bounded_kappa`` uses kappa
    and is reported only.
    """

    existence: bool
    no_blowup: bool
    bounded_sigma: bool
    bounded_kappa: bool
    existence_terms: dict = field(default_factory=dict)
    existence_limit: float = math.nan
    lifetimes: dict = field(default_factory=dict)
    bounded_lhs_sigma: float = math.nan
    bounded_lhs_kappa: float = math.nan
    bounded_limit: float = math.nan

    @property
    def passed(self) -> bool:
        return self.existence and self.no_blowup and self.bounded_sigma

    def failures(self) -> list[str]:
        out = []
        if not self.existence:
            bad = [k for k, v in self.existence_terms.items() if not v < self.existence_limit]
            out.append(f"(i) existence of solution fails in zone(s) {', '.join(bad)}")
        if not self.no_blowup:
            bad = [f"{z}@B0={b0:.6g}" for (z, b0), t in self.lifetimes.items()
                   if not (t is not None and t > self._T)]
            out.append(f"(ii) no blow-up fails for {', '.join(bad)}")
        if not self.bounded_sigma:
            out.append(
                f"near-maturity bound fails ({self.bounded_lhs_sigma:.6g} > {self.bounded_limit:.6g})"
            )
        return out

    # horizon stored for failure messages without adding a public field
    _T: float = field(default=math.nan, repr=False)

    def summary(self) -> str:
        lines = [
            f"existence (i): {'pass' if self.existence else 'FAIL'}",
            f"no blow-up (ii): {'pass' if self.no_blowup else 'FAIL'}",
            f"near-maturity bound, sigma form: {'pass' if self.bounded_sigma else 'FAIL'}",
            f"near-maturity bound, kappa form: {'pass' if self.bounded_kappa else 'FAIL'} (reported only)",
        ]
        return "\n".join(lines)


def _bounded_lhs(p: MarketParams, K: IntervalConstraint, denom: float) -> float:
    # extended reals: an infinite bound on the side where b*rho*x grows fails the check
    coef = p.b * p.rho / denom
    if coef == 0:
        return 0.0
    return max(coef * K.alpha, coef * K.beta)


def check_assumptions(p: MarketParams, K: IntervalConstraint) -> AssumptionReport:
    require_valid(p)
    limit = p.kappa ** 2 / (2.0 * p.sigma ** 2)
    terms = existence_terms(p, K)
    existence = all(v < limit for v in terms.values())

    zs = zone_system(p, K, strict=False)
    starts = [0.0]
    if p.rho != 0:
        starts += [x / p.rho for x in (zs.b_minus, zs.b_plus) if math.isfinite(x)]
    lifetimes = {}
    for z in zs.used_zones():
        co = zs.coeffs(z)
        for b0 in starts:
            lifetimes[(z, b0)] = riccati_lifetime(co, b0) if co.r3 is not None else None
    no_blowup = all(t is not None and t > p.T for t in lifetimes.values())

    bound_limit = p.kappa / p.sigma ** 2
    lhs_s = _bounded_lhs(p, K, p.sigma)
    lhs_k = _bounded_lhs(p, K, p.kappa)
    return AssumptionReport(
        existence=existence,
        no_blowup=no_blowup,
        bounded_sigma=lhs_s <= bound_limit,
        bounded_kappa=lhs_k <= bound_limit,
        existence_terms=terms,
        existence_limit=limit,
        lifetimes=lifetimes,
        bounded_lhs_sigma=lhs_s,
        bounded_lhs_kappa=lhs_k,
        bounded_limit=bound_limit,
        _T=p.T,
    )
