"""Scenario files: line-oriented ``key = value`` text with documented defaults."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .lattice import DENSITY_CONVENTIONS, MAX_STEPS

MODES = (
    "inner",
    "oracle-compare",
    "entropy",
    "max-principle",
    "optimize",
    "example-nc",
    "convergence",
)

# key -> (type, default, help); ``mode`` has no default
KEYS: dict[str, tuple[type, object, str]] = {
    "mode": (str, None, "one of " + ", ".join(MODES) + " (required)"),
    "T": (float, 1.0, "horizon, > 0"),
    "N": (int, 4, f"lattice steps, 1..{MAX_STEPS}"),
    "sigma": (float, 0.2, "volatility, > 0"),
    "b": (float, 0.05, "excess drift; |b/sigma| sqrt(T/N) < 1"),
    "q": (float, 2.0, "entropy index, != 1 (q < 1 needs experimental = true)"),
    "gamma": (float, 1.0, "ambiguity aversion, > 0"),
    "experimental": (bool, False, "allow q < 1"),
    "p0": (float, 0.5, "power-utility exponent in (0, 1)"),
    "x": (float, 1.0, "initial wealth, > 0"),
    "v": (float, -1.0, "multiplier for max-principle mode, < 0"),
    "eta": (float, 0.3, "constant drift for entropy mode"),
    "grid_size": (int, 2001, "drift grid points for the grid DP (odd)"),
    "grid_span": (float, 0.9, "grid half-width as a fraction of 1/sqrt(dt), in (0, 1)"),
    "instances": (int, 20, "random instances in oracle-compare mode"),
    "levels": (int, 3, "lattice doublings in convergence and entropy modes"),
    "tol": (float, 1e-10, "forward-backward fixed-point tolerance"),
    "max_iter": (int, 200, "forward-backward iteration cap"),
    "budget_rtol": (float, 1e-6, "relative budget tolerance for shooting"),
    "adjoint_density": (str, "theta", "pricing density: " + " or ".join(DENSITY_CONVENTIONS)),
    "seed": (int, 0, "seed for random instance generation (u64)"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    T: float = 1.0
    N: int = 4
    sigma: float = 0.2
    b: float = 0.05
    q: float = 2.0
    gamma: float = 1.0
    experimental: bool = False
    p0: float = 0.5
    x: float = 1.0
    v: float = -1.0
    eta: float = 0.3
    grid_size: int = 2001
    grid_span: float = 0.9
    instances: int = 20
    levels: int = 3
    tol: float = 1e-10
    max_iter: int = 200
    budget_rtol: float = 1e-6
    adjoint_density: str = "theta"
    seed: int = 0

    def __post_init__(self) -> None:
        validate(self)


def key_reference() -> str:
    width = max(len(k) for k in KEYS)
    lines = []
    for key, (_, default, text) in KEYS.items():
        shown = "(none)" if default is None else str(default).lower() if isinstance(default, bool) else default
        lines.append(f"  {key:<{width}}  default {shown}: {text}")
    return "\n".join(lines)


def _convert(key: str, raw: str, lineno: int):
    kind = KEYS[key][0]
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        if kind is int:
            return int(raw, 10)
        if kind is float:
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError
            return val
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} = {raw!r} is not a valid {kind.__name__}") from None


def parse_text(text: str) -> ScenarioConfig:
    """Parse scenario text; ``#`` starts a comment, blank lines are ignored."""
    values: dict[str, object] = {}
    where: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: missing value for {key}")
        values[key] = _convert(key, raw, lineno)
        where[key] = lineno
    if "mode" not in values:
        raise ConfigError("mode is required (one of " + ", ".join(MODES) + ")")
    try:
        return ScenarioConfig(**values)
    except ConfigError as exc:
        field = str(exc).split(":", 1)[0]
        if field in where:
            raise ConfigError(f"line {where[field]}: {exc}") from None
        raise


def parse_config(path: str | Path) -> ScenarioConfig:
    return parse_text(Path(path).read_text(encoding="utf-8"))


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    vals = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    vals["seed"] = seed
    return ScenarioConfig(**vals)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def validate(cfg: ScenarioConfig) -> None:
    """Check every field against the solver preconditions before anything runs."""
    _require(cfg.mode in MODES, f"mode: {cfg.mode!r} is not one of " + ", ".join(MODES))
    _require(cfg.T > 0, f"T: must be > 0, got {cfg.T}")
    _require(1 <= cfg.N <= MAX_STEPS, f"N: must lie in 1..{MAX_STEPS}, got {cfg.N}")
    _require(cfg.sigma > 0, f"sigma: must be > 0, got {cfg.sigma}")
    _require(cfg.q != 1.0, "q: q = 1 is excluded")
    _require(cfg.q > 1.0 or cfg.experimental, f"q: q = {cfg.q} < 1 needs experimental = true")
    _require(cfg.q > 0, f"q: must be > 0, got {cfg.q}")
    _require(cfg.gamma > 0, f"gamma: must be > 0, got {cfg.gamma}")
    _require(0 < cfg.p0 < 1, f"p0: must lie in (0, 1), got {cfg.p0}")
    _require(cfg.x > 0, f"x: must be > 0, got {cfg.x}")
    _require(cfg.v < 0, f"v: must be < 0, got {cfg.v}")
    _require(
        cfg.grid_size >= 3 and cfg.grid_size % 2 == 1,
        f"grid_size: must be odd and >= 3, got {cfg.grid_size}",
    )
    _require(0 < cfg.grid_span < 1, f"grid_span: must lie in (0, 1), got {cfg.grid_span}")
    _require(cfg.instances >= 1, f"instances: must be >= 1, got {cfg.instances}")
    _require(cfg.levels >= 2, f"levels: must be >= 2, got {cfg.levels}")
    _require(cfg.tol > 0, f"tol: must be > 0, got {cfg.tol}")
    _require(cfg.max_iter >= 1, f"max_iter: must be >= 1, got {cfg.max_iter}")
    _require(cfg.budget_rtol > 0, f"budget_rtol: must be > 0, got {cfg.budget_rtol}")
    _require(
        cfg.adjoint_density in DENSITY_CONVENTIONS,
        f"adjoint_density: {cfg.adjoint_density!r} is not one of {DENSITY_CONVENTIONS}",
    )
    _require(0 <= cfg.seed < 2**64, f"seed: must be an unsigned 64-bit integer, got {cfg.seed}")
    if cfg.mode == "convergence":
        top = cfg.N * 2 ** (cfg.levels - 1)
        _require(top <= MAX_STEPS, f"levels: finest lattice N = {top} exceeds {MAX_STEPS}")
    # the coarsest lattice has the largest step, so checking N covers every level
    drift = abs(cfg.b / cfg.sigma) * (cfg.sigma if cfg.adjoint_density == "sigma_theta" else 1.0)
    theta_step = abs(cfg.b / cfg.sigma) * math.sqrt(cfg.T / cfg.N)
    _require(theta_step < 1, f"b: |b/sigma| sqrt(dt) = {theta_step:.6g} must be < 1")
    _require(
        drift * math.sqrt(cfg.T / cfg.N) < 1,
        f"adjoint_density: |drift| sqrt(dt) = {drift * math.sqrt(cfg.T / cfg.N):.6g} must be < 1",
    )
    if cfg.mode == "entropy":
        _require(
            abs(cfg.eta) * math.sqrt(cfg.T / cfg.N) < 1,
            f"eta: |eta| sqrt(dt) must be < 1, got {abs(cfg.eta) * math.sqrt(cfg.T / cfg.N):.6g}",
        )
