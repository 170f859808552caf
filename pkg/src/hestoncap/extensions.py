"""Multi-asset principal-component model and volatility-scaled constraints.

Principal-component stochastic volatility: d assets with covariance
A diag(z) A^T for an orthogonal A and independent CIR factors z_i.  Writing
the portfolio in factor coordinates pi_A = A^T pi decouples the problem into d
one-dimensional problems with excess-return loading (A^T eta)_i and exposure
limits (a_i^T pi)^2 <= beta_i, i.e. factor weights in [0, sqrt(beta_i)].

Volatility-scaled constraints: for a single asset with volatility Sigma(z),
constraints that scale like 1/Sigma(z) (constant market price of risk) or
like sqrt(z)/Sigma(z) (Heston market price of risk) reduce to the static
interval problem after a change of control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import IntervalConstraint, MarketParams, merton_ratio, require_valid
from .errors import AssumptionError, DomainError, ValidationError
from .policy import DEFAULT_GRID, PiecewiseB, pi_star, solve_B

ORTHOGONALITY_TOL = 1e-10


def orthonormalize(A: np.ndarray) -> np.ndarray:
    """Gram-Schmidt via QR, with column signs kept as in A."""
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))


@dataclass(frozen=True)
class PcsvParams:
    A: np.ndarray
    eta: np.ndarray
    kappa: np.ndarray
    theta: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    z0: np.ndarray
    beta_caps: np.ndarray
    r: float = 0.0
    b: float = -2.5
    T: float = 1.0
    v0: float = 1.0
    repair: bool = field(default=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        d = A.shape[0]
        if A.shape != (d, d):
            raise ValidationError(f"A must be square, got shape {A.shape}")
        if np.max(np.abs(A @ A.T - np.eye(d))) > ORTHOGONALITY_TOL:
            if not self.repair:
                raise ValidationError("A is not orthogonal (max |A A^T - I| > 1e-10)")
            A = orthonormalize(A)
        object.__setattr__(self, "A", A)
        for name in ("eta", "kappa", "theta", "sigma", "rho", "z0", "beta_caps"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if v.shape == (1,) and d > 1:
                v = np.full(d, v[0])
            if v.shape != (d,):
                raise ValidationError(f"{name} must have length {d}")
            object.__setattr__(self, name, v)
        if np.any(self.beta_caps <= 0):
            raise ValidationError("exposure caps beta_i must be > 0")
        bad = np.nonzero(~(2 * self.kappa * self.theta > self.sigma ** 2))[0]
        if bad.size:
            raise ValidationError(f"Feller condition fails for factor(s) {bad.tolist()}")

    @property
    def d(self) -> int:
        return self.A.shape[0]

    def factor_eta(self) -> np.ndarray:
        return self.A.T @ self.eta

    def factor_problem(self, i: int) -> tuple[MarketParams, IntervalConstraint]:
        p = MarketParams(r=self.r, eta=float(self.factor_eta()[i]), kappa=float(self.kappa[i]),
                         theta=float(self.theta[i]), sigma=float(self.sigma[i]),
                         rho=float(self.rho[i]), z0=float(self.z0[i]), b=self.b, T=self.T,
                         v0=self.v0)
        require_valid(p)
        return p, IntervalConstraint(0.0, math.sqrt(self.beta_caps[i]))


@dataclass(frozen=True)
class PcsvSolution:
    t: np.ndarray
    pi_factor: np.ndarray  # (grid, d): weights in factor coordinates
    pi: np.ndarray  # (grid, d): asset weights A @ pi_factor
    factors: tuple[PiecewiseB, ...]


def solve_pcsv(pp: PcsvParams, grid: int = DEFAULT_GRID, force: bool = False) -> PcsvSolution:
    t = np.linspace(0.0, pp.T, grid)
    cols, sols = [], []
    for i in range(pp.d):
        try:
            p, K = pp.factor_problem(i)
        except ValidationError as e:
            raise ValidationError(f"factor {i}: {e}") from e
        try:
            B = solve_B(p, K, force=force)
        except AssumptionError as e:
            raise AssumptionError(f"factor {i}: {e}", report=e.report) from e
        sols.append(B)
        cols.append(np.asarray(pi_star(B, p, K, t)))
    pi_A = np.column_stack(cols)
    return PcsvSolution(t, pi_A, pi_A @ pp.A.T, tuple(sols))


def exposure_report(pp: PcsvParams, sol: PcsvSolution) -> np.ndarray:
    """max_t (a_i^T pi(t))^2 / beta_i for each factor i."""
    exposures = sol.pi @ pp.A
    return np.max(exposures ** 2, axis=0) / pp.beta_caps


VOL_KINDS = ("constant", "sqrt", "power")


@dataclass(frozen=True)
class VolFunction:
    """Sigma(z): constant c, sqrt(z), or c * z^power."""

    kind: str
    c: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        if self.kind not in VOL_KINDS:
            raise ValidationError(f"unknown vol kind {self.kind!r}; expected one of {VOL_KINDS}")
        if self.c <= 0:
            raise ValidationError("vol scale c must be > 0")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0):
            raise DomainError("variance z must be > 0")
        if self.kind == "constant":
            out = np.full_like(z, self.c)
        elif self.kind == "sqrt":
            out = np.sqrt(z)
        else:
            out = self.c * z ** self.power
        return float(out) if out.ndim == 0 else out


CASES = ("constant-mpr", "heston-mpr")


def inverse_vol_policy(p: MarketParams, vol: VolFunction, K: IntervalConstraint, case: str,
                       t, z, B: PiecewiseB | None = None, force: bool = False):
    """Optimal weight under a constraint scaled by the inverse volatility.

    case "constant-mpr": Cap(pi_M, alpha, beta) / Sigma(z).
    case "heston-mpr":   sqrt(z) / Sigma(z) * pi_star(t) of the static problem.
    """
    if case not in CASES:
        raise ValidationError(f"unknown case {case!r}; expected one of {CASES}")
    s = vol(z)
    if case == "constant-mpr":
        return K.cap(merton_ratio(p)) / s
    if B is None:
        B = solve_B(p, K, force=force)
    out = np.sqrt(np.asarray(z, dtype=float)) / s * np.asarray(pi_star(B, p, K, t))
    return float(out) if np.ndim(out) == 0 else out
