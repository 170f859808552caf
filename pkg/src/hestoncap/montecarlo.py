"""Monte Carlo check of the analytic value function and strategy rankings.

Variance is simulated with a full-truncation Euler scheme: the negative part
of z is removed inside drift and diffusion, while the state itself may dip
below zero.  Paths are generated in blocks; block k draws from its own
substream derived from (seed, k), so results are reproducible and do not
depend on how blocks would be distributed.

For strongly risk-averse utilities (large negative b) the plain estimator of
E[V^b] is dominated by rare low-wealth paths and its standard error is not
trustworthy.  With ``importance_tilt`` the paths are drawn under the measure
that adds drift b * pi_ref * sqrt(z) to the stock shock (pi_ref being the
first strategy passed), and each path carries the likelihood ratio back to
the original measure.  For pi = pi_ref the weighted utility reduces to
exp(integral of a linear function of z), which has small variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .core import MarketParams, require_valid

SCHEMES = ("full-truncation-euler",)


@dataclass(frozen=True)
class SimConfig:
    paths: int = 100_000
    steps_per_year: int = 1000
    seed: int = 0
    antithetic: bool = True
    scheme: str = "full-truncation-euler"
    block_size: int = 5000
    importance_tilt: bool = False

    def __post_init__(self):
        if self.paths < 2:
            raise ValueError("paths must be >= 2")
        if self.steps_per_year < 100:
            raise ValueError("steps_per_year must be >= 100")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.antithetic and self.paths % 2:
            raise ValueError("antithetic sampling needs an even number of paths")
        if self.block_size < 2 or (self.antithetic and self.block_size % 2):
            raise ValueError("block_size must be >= 2 (and even with antithetic sampling)")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def steps(self, T: float) -> int:
        return max(1, int(round(self.steps_per_year * T)))


@dataclass(frozen=True)
class PathBlock:
    """One block of simulated paths.

    z has shape (n, steps + 1); dW_z and dW_perp have shape (n, steps).  With
    antithetic sampling row i + n/2 carries the negated shocks of row i.
    The increments are always those of the original measure; ``log_weight``
    is the log likelihood ratio of the original to the sampling measure
    (zero without a tilt).
    """

    t: np.ndarray
    z: np.ndarray
    dW_z: np.ndarray
    dW_perp: np.ndarray
    clipped: int
    log_weight: np.ndarray | None = None

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


def _block_sizes(cfg: SimConfig) -> list[int]:
    full, rest = divmod(cfg.paths, cfg.block_size)
    return [cfg.block_size] * full + ([rest] if rest else [])


def iter_blocks(p: MarketParams, cfg: SimConfig, tilt=None) -> Iterator[PathBlock]:
    """Yield path blocks; ``tilt`` is a deterministic strategy defining the sampling measure."""
    require_valid(p)
    n_steps = cfg.steps(p.T)
    dt = p.T / n_steps
    t = np.linspace(0.0, p.T, n_steps + 1)
    sq = math.sqrt(dt)
    rho_bar = math.sqrt(1.0 - p.rho ** 2)
    pull = None if tilt is None else p.b * _weights(tilt, t[:-1])
    for k, n in enumerate(_block_sizes(cfg)):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(k,)))
        m = n // 2 if cfg.antithetic else n
        shocks = rng.standard_normal((2, m, n_steps)) * sq
        if cfg.antithetic:
            shocks = np.concatenate([shocks, -shocks], axis=1)
        dWz, dWp = shocks[0], shocks[1]
        z = np.empty((n, n_steps + 1))
        z[:, 0] = p.z0
        clipped = 0
        log_w = np.zeros(n) if pull is not None else None
        for j in range(n_steps):
            zp = np.maximum(z[:, j], 0.0)
            sz = np.sqrt(zp)
            if pull is not None:
                # sampled shocks are Q-increments; shift to original-measure increments
                theta_j = pull[j] * sz
                log_w -= theta_j * (p.rho * dWz[:, j] + rho_bar * dWp[:, j]) + 0.5 * theta_j ** 2 * dt
                dWz[:, j] += p.rho * theta_j * dt
                dWp[:, j] += rho_bar * theta_j * dt
            z[:, j + 1] = z[:, j] + p.kappa * (p.theta - zp) * dt + p.sigma * sz * dWz[:, j]
            clipped += int(np.count_nonzero(z[:, j + 1] < 0))
        yield PathBlock(t, z, dWz, dWp, clipped, log_w)


def simulate_paths(p: MarketParams, cfg: SimConfig) -> PathBlock:
    """All paths in one block (for small ensembles and tests)."""
    blocks = list(iter_blocks(p, cfg))
    return PathBlock(
        blocks[0].t,
        np.concatenate([b.z for b in blocks]),
        np.concatenate([b.dW_z for b in blocks]),
        np.concatenate([b.dW_perp for b in blocks]),
        sum(b.clipped for b in blocks),
        None if blocks[0].log_weight is None else np.concatenate([b.log_weight for b in blocks]),
    )


def _weights(strat, t: np.ndarray) -> np.ndarray:
    if callable(strat):
        return np.asarray(strat(t), dtype=float) * np.ones_like(t)
    w = np.asarray(strat, dtype=float)
    return np.full_like(t, float(w)) if w.ndim == 0 else w


def terminal_wealth(block: PathBlock, strat, p: MarketParams) -> np.ndarray:
    """v0 exp(sum (r + eta z pi - z pi^2 / 2) dt + pi sqrt(z) dW), left-point rule."""
    pi = _weights(strat, block.t[:-1])
    zp = np.maximum(block.z[:, :-1], 0.0)
    dW = p.rho * block.dW_z + math.sqrt(1.0 - p.rho ** 2) * block.dW_perp
    dt = block.dt
    log_v = (p.r * p.T
             + ((p.eta * pi - 0.5 * pi * pi) * zp).sum(axis=1) * dt
             + (pi * np.sqrt(zp) * dW).sum(axis=1))
    return p.v0 * np.exp(log_v)


def utility(v: np.ndarray, b: float) -> np.ndarray:
    return v ** b / b


@dataclass
class RunningStats:
    """Mergeable mean / sum of squared deviations."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=float)
        nb = x.size
        if nb == 0:
            return
        mb = float(x.mean())
        m2b = float(((x - mb) ** 2).sum())
        n = self.n + nb
        d = mb - self.mean
        self.mean += d * nb / n
        self.m2 += m2b + d * d * self.n * nb / n
        self.n = n

    @property
    def std_error(self) -> float:
        if self.n < 2:
            return math.nan
        return math.sqrt(self.m2 / (self.n - 1) / self.n)


@dataclass(frozen=True)
class UtilityEstimate:
    mean: float
    std_error: float
    paths_used: int


@dataclass(frozen=True)
class PairedEstimate:
    """Utilities of several strategies on shared paths, plus differences to the first."""

    labels: tuple[str, ...]
    estimates: tuple[UtilityEstimate, ...]
    diff_mean: tuple[float, ...]
    diff_se: tuple[float, ...]
    clipped_fraction: float = field(default=math.nan)


def _per_sample(u: np.ndarray, antithetic: bool) -> np.ndarray:
    if antithetic:
        h = u.size // 2
        return 0.5 * (u[:h] + u[h:])
    return u


def estimate_utilities(p: MarketParams, strategies: Sequence, cfg: SimConfig,
                       labels: Sequence[str] | None = None) -> PairedEstimate:
    """Expected utility of each strategy on one shared path ensemble.

    With ``cfg.importance_tilt`` the first strategy defines the sampling measure.
    """
    labels = tuple(labels or (getattr(s, "label", f"s{i}") for i, s in enumerate(strategies)))
    stats = [RunningStats() for _ in strategies]
    diffs = [RunningStats() for _ in strategies]
    clipped, increments = 0, 0
    tilt = strategies[0] if cfg.importance_tilt else None
    for block in iter_blocks(p, cfg, tilt):
        us = []
        for s in strategies:
            u = utility(terminal_wealth(block, s, p), p.b)
            if block.log_weight is not None:
                u = u * np.exp(block.log_weight)
            us.append(_per_sample(u, cfg.antithetic))
        for k, u in enumerate(us):
            stats[k].add(u)
            diffs[k].add(us[0] - u)
        clipped += block.clipped
        increments += block.dW_z.size
    ests = tuple(UtilityEstimate(s.mean, s.std_error, cfg.paths) for s in stats)
    return PairedEstimate(labels, ests, tuple(d.mean for d in diffs),
                          tuple(0.0 if k == 0 else d.std_error for k, d in enumerate(diffs)),
                          clipped / increments)


def estimate_utility(p: MarketParams, strat, cfg: SimConfig) -> UtilityEstimate:
    return estimate_utilities(p, [strat], cfg).estimates[0]


def z_score(estimate: UtilityEstimate, target: float) -> float:
    return (estimate.mean - target) / estimate.std_error


def cir_mean(p: MarketParams, t: float) -> float:
    return p.theta + (p.z0 - p.theta) * math.exp(-p.kappa * t)


StrategyLike = Callable[[np.ndarray], np.ndarray]
