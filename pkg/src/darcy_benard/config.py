"""Run-time parameters read from `key = value` files."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .assembly import CoefficientPoly

SCENARIOS = ("mms", "left_heated", "bottom_heated")
DARCY_SOLVERS = ("schur", "direct")
TEMPERATURE_SOLVERS = ("gmres", "direct")

# (chi coefficients, zeta coefficients) for the variable-property studies
CASES = {
    "I": ((1.0, 1.0, 0.0), (1.0, 1.0, 0.0)),
    "II": ((1.0, 1.0, 1.0), (1.0, 1.0, 1.0)),
    "III": ((1.0, 1.0, 0.0), (1.0, 1.0, 1.0)),
    "IV": ((1.0, 1.0, 1.0), (1.0, 1.0, 0.0)),
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class SimulationConfig:
    scenario: str
    ra: float = 100.0
    chi_c0: float = 1.0
    chi_c1: float = 0.0
    chi_c2: float = 0.0
    zeta_c0: float = 1.0
    zeta_c1: float = 0.0
    zeta_c2: float = 0.0
    n: int = 64
    dt: float = 1e-3
    t_final: float = math.inf
    steady_tol: float = 1e-6
    inner_tol: float = 1e-8
    max_inner: int = 5
    max_steps: int = 200000
    quad_points: int = 4
    perturb_amp: float = 0.1
    output_dir: str = "output"
    darcy_solver: str = "direct"
    temperature_solver: str = "gmres"
    levels: int = 6
    base_n: int = 4

    def __post_init__(self):
        validate(self)

    @property
    def chi(self) -> CoefficientPoly:
        return CoefficientPoly(self.chi_c0, self.chi_c1, self.chi_c2)

    @property
    def zeta(self) -> CoefficientPoly:
        return CoefficientPoly(self.zeta_c0, self.zeta_c1, self.zeta_c2)

    def with_(self, **changes) -> SimulationConfig:
        return replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())


_FIELDS = {f.name: f for f in fields(SimulationConfig)}


def validate(cfg: SimulationConfig, line_of: dict[str, int] | None = None) -> None:
    line_of = line_of or {}

    def fail(key, msg):
        raise ConfigError(msg, line_of.get(key))

    if cfg.scenario not in SCENARIOS:
        fail("scenario", f"scenario must be one of {', '.join(SCENARIOS)}, got {cfg.scenario!r}")
    if not cfg.ra >= 0.0:
        fail("ra", f"Rayleigh number must be positive (ra >= 0), got {cfg.ra}")
    for name in ("chi", "zeta"):
        try:
            getattr(cfg, name)
        except ValueError as exc:
            keys = [f"{name}_c{i}" for i in range(3) if f"{name}_c{i}" in line_of]
            fail(keys[-1] if keys else f"{name}_c0", f"{name} must be positive on [0, 1]: {exc}")
    if cfg.n < 2:
        fail("n", f"n must be at least 2, got {cfg.n}")
    for key in ("dt", "steady_tol", "inner_tol", "t_final"):
        if not getattr(cfg, key) > 0.0:
            fail(key, f"{key} must be positive, got {getattr(cfg, key)}")
    for key in ("max_inner", "max_steps", "levels", "base_n"):
        if getattr(cfg, key) < 1:
            fail(key, f"{key} must be at least 1, got {getattr(cfg, key)}")
    if cfg.scenario == "mms" and cfg.levels < 2:
        fail("levels", "mms needs at least 2 levels")
    if not 1 <= cfg.quad_points <= 6:
        fail("quad_points", f"quad_points must be in 1..6, got {cfg.quad_points}")
    if cfg.darcy_solver not in DARCY_SOLVERS:
        fail("darcy_solver", f"darcy_solver must be one of {DARCY_SOLVERS}")
    if cfg.temperature_solver not in TEMPERATURE_SOLVERS:
        fail("temperature_solver", f"temperature_solver must be one of {TEMPERATURE_SOLVERS}")


def _convert(key: str, raw: str, line: int):
    typ = _FIELDS[key].type
    try:
        if typ in ("int", int):
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if typ in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {typ}", line) from None
    return raw


def parse_config(text: str) -> SimulationConfig:
    """Parse `key = value` lines; `#` starts a comment.

    The optional key `case = I|II|III|IV` presets the chi/zeta coefficients;
    explicit coefficient keys override it.
    """
    values: dict[str, object] = {}
    line_of: dict[str, int] = {}
    case = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in values or (key == "case" and case is not None):
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if key == "case":
            if raw.upper() not in CASES:
                raise ConfigError(f"unknown case {raw!r}; expected one of {', '.join(CASES)}", lineno)
            case = raw.upper()
            line_of["chi_c0"] = line_of["zeta_c0"] = lineno
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if not raw:
            raise ConfigError(f"missing value for {key!r}", lineno)
        values[key] = _convert(key, raw, lineno)
        line_of[key] = lineno

    if "scenario" not in values:
        raise ConfigError("scenario missing")
    if case is not None:
        chi, zeta = CASES[case]
        for i in range(3):
            values.setdefault(f"chi_c{i}", chi[i])
            values.setdefault(f"zeta_c{i}", zeta[i])

    cfg = object.__new__(SimulationConfig)
    merged = {f.name: f.default for f in fields(SimulationConfig) if f.name != "scenario"}
    merged.update(values)
    for k, v in merged.items():
        object.__setattr__(cfg, k, v)
    validate(cfg, line_of)
    return cfg


def load_config(path) -> SimulationConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def case_config(case: str, **overrides) -> SimulationConfig:
    """Bottom-heated preset for one of the variable-property cases."""
    chi, zeta = CASES[case]
    base = dict(
        scenario="bottom_heated",
        chi_c0=chi[0], chi_c1=chi[1], chi_c2=chi[2],
        zeta_c0=zeta[0], zeta_c1=zeta[1], zeta_c2=zeta[2],
    )
    base.update(overrides)
    return SimulationConfig(**base)
