"""INI-style scenario files.

Example::

    [market]
    preset = table1        # optional: table1 | crisis; other keys override
    kappa = 1.5

    [constraint]
    alpha = 1.75*merton    # number, inf, -inf, merton or k*merton
    beta = 1

    [sweep]
    axis = kappa
    from = 1.5
    to = 5.0
    points = 50

Unknown sections or keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CRISIS, TABLE1, IntervalConstraint, MarketParams, merton_ratio, validate_params
from .errors import ValidationError
from .montecarlo import SimConfig
from .wel import STRATEGY_KINDS, SWEEP_AXES

PRESETS = {"table1": TABLE1, "crisis": CRISIS}
MARKET_KEYS = ("r", "eta", "kappa", "theta", "sigma", "rho", "z0", "b", "T", "v0")
MC_STRATEGIES = ("pi_star", "cap_merton", "cap_pi_u", "zero")

ALLOWED = {
    "market": {"preset", *MARKET_KEYS},
    "constraint": {"alpha", "beta"},
    "sweep": {"axis", "from", "to", "points", "values", "strategy", "alpha_relative"},
    "wel": {"strategy", "steps"},
    "mc": {"paths", "steps_per_year", "seed", "antithetic", "importance_tilt", "block_size",
           "strategies"},
    "pcsv": {"A", "eta", "kappa", "theta", "sigma", "rho", "z0", "beta_caps", "repair"},
    "output": {"grid", "force", "euler"},
}


class ScenarioError(ValidationError):
    """Scenario file could not be parsed or names an unknown key."""


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    strategy: str = "merton_capped"
    alpha_relative: bool = False


@dataclass(frozen=True)
class PcsvSpec:
    A: np.ndarray
    eta: np.ndarray
    kappa: np.ndarray
    theta: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    z0: np.ndarray
    beta_caps: np.ndarray
    repair: bool = False


@dataclass(frozen=True)
class Scenario:
    market: MarketParams
    constraint: IntervalConstraint
    sweep: SweepSpec | None = None
    wel_strategy: str = "merton_capped"
    wel_steps: int | None = None
    mc: SimConfig = field(default_factory=SimConfig)
    mc_strategies: tuple[str, ...] = ("pi_star", "cap_merton", "cap_pi_u")
    pcsv: PcsvSpec | None = None
    grid: int = 2001
    force: bool = False
    euler: bool = False


def _float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: not a number: {raw!r}") from None


def _bool(section: str, key: str, raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ScenarioError(f"[{section}] {key}: not a boolean: {raw!r}")


def _int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: not an integer: {raw!r}") from None


def _vector(section: str, key: str, raw: str) -> np.ndarray:
    return np.array([_float(section, key, x) for x in raw.split(",") if x.strip()])


def parse_bound(raw: str, merton: float) -> float:
    """Number, inf/-inf, 'merton' or 'k*merton'."""
    s = raw.strip().lower().replace(" ", "")
    if s in ("inf", "+inf"):
        return math.inf
    if s == "-inf":
        return -math.inf
    if s.endswith("merton"):
        k = s[: -len("merton")].rstrip("*")
        return (float(k) if k else 1.0) * merton
    return float(s)


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # keep key case (T)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ScenarioError(f"{source}: {e}") from None
    for sec in cp.sections():
        if sec not in ALLOWED:
            raise ScenarioError(f"unknown section [{sec}]")
        unknown = set(cp[sec]) - ALLOWED[sec]
        if unknown:
            raise ScenarioError(f"[{sec}] unknown key(s): {', '.join(sorted(unknown))}")
    if "market" not in cp:
        raise ScenarioError("missing [market] section")

    m = cp["market"]
    base = m.get("preset")
    if base is not None and base.lower() not in PRESETS:
        raise ScenarioError(f"[market] preset: unknown preset {base!r}")
    values = {} if base is None else {k: getattr(PRESETS[base.lower()], k) for k in MARKET_KEYS}
    for k in MARKET_KEYS:
        if k in m:
            values[k] = _float("market", k, m[k])
    missing = [k for k in MARKET_KEYS if k not in values and k != "v0"]
    if missing:
        raise ScenarioError(f"[market] missing key(s): {', '.join(missing)}")
    market = MarketParams(**values)
    rep = validate_params(market)
    if not rep.ok:
        raise ScenarioError("[market] " + "; ".join(rep.problems))

    pm = merton_ratio(market)
    c = cp["constraint"] if "constraint" in cp else {}
    try:
        constraint = IntervalConstraint(parse_bound(c.get("alpha", "-inf"), pm),
                                        parse_bound(c.get("beta", "inf"), pm))
    except ValueError as e:
        raise ScenarioError(f"[constraint] {e}") from None

    sweep = None
    if "sweep" in cp:
        s = cp["sweep"]
        if "axis" not in s:
            raise ScenarioError("[sweep] axis is required")
        axis = s["axis"].strip()
        if axis not in SWEEP_AXES:
            raise ScenarioError(f"[sweep] axis: expected one of {SWEEP_AXES}, got {axis!r}")
        if "values" in s:
            vals = tuple(_vector("sweep", "values", s["values"]).tolist())
        else:
            for k in ("from", "to", "points"):
                if k not in s:
                    raise ScenarioError(f"[sweep] needs 'values' or from/to/points (missing {k})")
            vals = tuple(np.linspace(_float("sweep", "from", s["from"]), _float("sweep", "to", s["to"]),
                                     _int("sweep", "points", s["points"])).tolist())
        strat = s.get("strategy", "merton_capped").strip()
        if strat not in STRATEGY_KINDS:
            raise ScenarioError(f"[sweep] strategy: expected one of {STRATEGY_KINDS}")
        sweep = SweepSpec(axis, vals, strat, _bool("sweep", "alpha_relative", s.get("alpha_relative", "no")))

    wel_strategy, wel_steps = "merton_capped", None
    if "wel" in cp:
        w = cp["wel"]
        wel_strategy = w.get("strategy", wel_strategy).strip()
        if wel_strategy not in STRATEGY_KINDS:
            raise ScenarioError(f"[wel] strategy: expected one of {STRATEGY_KINDS}")
        if "steps" in w:
            wel_steps = _int("wel", "steps", w["steps"])

    mc, mc_strats = SimConfig(), Scenario.__dataclass_fields__["mc_strategies"].default
    if "mc" in cp:
        s = cp["mc"]
        kw = {}
        for k in ("paths", "steps_per_year", "seed", "block_size"):
            if k in s:
                kw[k] = _int("mc", k, s[k])
        for k in ("antithetic", "importance_tilt"):
            if k in s:
                kw[k] = _bool("mc", k, s[k])
        try:
            mc = SimConfig(**kw)
        except ValueError as e:
            raise ScenarioError(f"[mc] {e}") from None
        if "strategies" in s:
            mc_strats = tuple(x.strip() for x in s["strategies"].split(",") if x.strip())
            bad = [x for x in mc_strats if x not in MC_STRATEGIES]
            if bad or not mc_strats or mc_strats[0] != "pi_star":
                raise ScenarioError(f"[mc] strategies: must start with pi_star and use {MC_STRATEGIES}")

    pcsv = None
    if "pcsv" in cp:
        s = cp["pcsv"]
        need = ALLOWED["pcsv"] - {"repair"}
        missing = sorted(need - set(s))
        if missing:
            raise ScenarioError(f"[pcsv] missing key(s): {', '.join(missing)}")
        rows = [r for r in s["A"].split(";") if r.strip()]
        A = np.array([_vector("pcsv", "A", r) for r in rows])
        pcsv = PcsvSpec(A, *(_vector("pcsv", k, s[k]) for k in
                             ("eta", "kappa", "theta", "sigma", "rho", "z0", "beta_caps")),
                        repair=_bool("pcsv", "repair", s.get("repair", "no")))

    grid, force, euler = 2001, False, False
    if "output" in cp:
        o = cp["output"]
        if "grid" in o:
            grid = _int("output", "grid", o["grid"])
        force = _bool("output", "force", o.get("force", "no"))
        euler = _bool("output", "euler", o.get("euler", "no"))
    if grid < 2:
        raise ScenarioError("[output] grid must be >= 2")

    return Scenario(market, constraint, sweep, wel_strategy, wel_steps, mc, mc_strats, pcsv,
                    grid, force, euler)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from None
    return parse_scenario(text, str(path))
