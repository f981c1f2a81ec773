"""Run configuration: a flat ``key = value`` file plus overrides.

Tuples are comma separated, booleans are ``true``/``false`` and an empty
value means "unset" for optional fields.  ``RCPROP_SEED`` in the environment
overrides the file's seed; command-line overrides win over both.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

from .covariance import GAMMA_MAX, CovForm

SEED_ENV = "RCPROP_SEED"

SUBCOMMANDS = ("gamma-moments", "scaling", "ks-scale", "kernel", "green-scan", "exponents")

# fields that affect how a run executes but never what it writes
EXECUTION_ONLY = ("threads", "out_path")


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


@dataclass(frozen=True)
class RunConfig:
    gamma: float = 0.25
    epsilon: float = 0.0
    amplitude: float = 1.0
    cov_form: str = "power"
    nu_max: float = 1e6
    tau: float = 1.0
    tau_grid: tuple = (0.25, 4.0, 5)
    n_steps: int = 512
    n_samples: int = 100_000
    n_boot: int = 1000
    seed: int = 1
    threads: int = 1
    orders: tuple = (1, 2)
    signature: tuple = (1,)
    n_det: int = 0
    even_mode: str = "integrated"
    delta: tuple = (1.0,)
    delta_scan: tuple = (0.1, 1.0, 6)
    regulator_eps: float = 0.005
    delta_floor: float = 1e-4
    deterministic: bool = False
    subtract_reference: bool = False
    rescale: bool = False
    ks_c: float = 4.0
    ks_exponent: float | None = None
    ns: tuple = (1, 2, 3, 4)
    out_path: str = "out"
    out_format: str = "csv"

    @property
    def n_pairs(self) -> int:
        return len(self.signature)

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self, exclude=()) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in exclude}

    def to_text(self, exclude=()) -> str:
        lines = [f"{k} = {_format(v)}" for k, v in self.to_dict(exclude).items()]
        return "\n".join(lines) + "\n"


def _format(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_format(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


_FLOAT = ("gamma", "epsilon", "amplitude", "nu_max", "tau", "regulator_eps", "delta_floor", "ks_c")
_INT = ("n_steps", "n_samples", "n_boot", "seed", "threads", "n_det")
_BOOL = ("deterministic", "subtract_reference", "rescale")
_STR = ("cov_form", "even_mode", "out_path", "out_format")
_TRIPLE = ("tau_grid", "delta_scan")


def _to_int(name, s):
    try:
        return int(s, 0) if isinstance(s, str) else int(s)
    except ValueError:
        raise ConfigError(name, f"expected an integer, got {s!r}") from None


def _to_float(name, s):
    try:
        return float(s)
    except ValueError:
        raise ConfigError(name, f"expected a number, got {s!r}") from None


def _convert(name: str, raw: str):
    raw = raw.strip()
    if name in _FLOAT:
        return _to_float(name, raw)
    if name in _INT:
        return _to_int(name, raw)
    if name in _BOOL:
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(name, f"expected true/false, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    if name in _STR:
        return raw
    if name == "ks_exponent":
        return None if raw == "" or raw.lower() == "none" else _to_float(name, raw)
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if name in _TRIPLE:
        if len(parts) != 3:
            raise ConfigError(name, f"expected min,max,count, got {raw!r}")
        return (_to_float(name, parts[0]), _to_float(name, parts[1]), _to_int(name, parts[2]))
    if name in ("orders", "signature", "ns"):
        return tuple(_to_int(name, p) for p in parts)
    if name == "delta":
        return tuple(_to_float(name, p) for p in parts)
    raise ConfigError(name, "unknown configuration key")


def parse_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


def build_config(file_text: str | None = None, overrides: dict | None = None,
                 env: dict | None = None) -> RunConfig:
    """Merge file, environment seed and overrides, then validate."""
    raw = parse_text(file_text) if file_text else {}
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        raw["seed"] = env[SEED_ENV]
    raw.update(overrides or {})
    names = {f.name for f in fields(RunConfig)}
    values = {}
    for key, val in raw.items():
        if key not in names:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _convert(key, val) if isinstance(val, str) else val
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def parse(text: str) -> RunConfig:
    return build_config(text, env={})


def validate(cfg: RunConfig, subcommand: str | None = None) -> None:
    if not (0.0 <= cfg.gamma < GAMMA_MAX):
        raise ConfigError("gamma", f"must satisfy 0 <= gamma < {GAMMA_MAX}, got {cfg.gamma}")
    if cfg.epsilon < 0:
        raise ConfigError("epsilon", "must be >= 0")
    if cfg.amplitude <= 0:
        raise ConfigError("amplitude", "must be > 0")
    if cfg.cov_form not in [f.value for f in CovForm]:
        raise ConfigError("cov_form", f"must be one of {[f.value for f in CovForm]}")
    if cfg.nu_max <= 0:
        raise ConfigError("nu_max", "must be > 0")
    if cfg.tau <= 0:
        raise ConfigError("tau", "must be > 0")
    lo, hi, n = cfg.tau_grid
    if not (0 < lo < hi) or n < 2:
        raise ConfigError("tau_grid", "need 0 < min < max and count >= 2")
    if cfg.n_steps < 1:
        raise ConfigError("n_steps", "must be >= 1")
    if cfg.n_samples < 2:
        raise ConfigError("n_samples", "must be >= 2")
    if cfg.n_boot < 1:
        raise ConfigError("n_boot", "must be >= 1")
    if not (0 <= cfg.seed < 2**64):
        raise ConfigError("seed", "must be in [0, 2**64)")
    if cfg.threads < 0:
        raise ConfigError("threads", "must be >= 0 (0 = one per CPU)")
    if not cfg.orders or min(cfg.orders) < 1:
        raise ConfigError("orders", "moment orders must be positive integers")
    if not cfg.signature or any(s not in (1, -1) for s in cfg.signature):
        raise ConfigError("signature", "entries must be +1 or -1")
    if cfg.n_det < 0:
        raise ConfigError("n_det", "must be >= 0")
    if cfg.even_mode not in ("integrated", "pointwise"):
        raise ConfigError("even_mode", "must be 'integrated' or 'pointwise'")
    if len(cfg.delta) not in (1, cfg.n_pairs):
        raise ConfigError("delta", f"need 1 or {cfg.n_pairs} entries (one per pair)")
    dlo, dhi, dn = cfg.delta_scan
    if not (0 < dlo < dhi) or dn < 2:
        raise ConfigError("delta_scan", "need 0 < min < max and count >= 2")
    if cfg.regulator_eps <= 0:
        raise ConfigError("regulator_eps", "must be > 0")
    if cfg.delta_floor < 0:
        raise ConfigError("delta_floor", "must be >= 0")
    if cfg.ks_c <= 0:
        raise ConfigError("ks_c", "must be > 0")
    if not cfg.ns or min(cfg.ns) < 1:
        raise ConfigError("ns", "pair counts must be positive")
    if cfg.out_format not in ("csv", "bin"):
        raise ConfigError("out_format", "must be 'csv' or 'bin'")
    if subcommand is None:
        return
    if subcommand not in SUBCOMMANDS:
        raise ConfigError("subcommand", f"must be one of {SUBCOMMANDS}")
    if cfg.out_format == "bin" and subcommand != "gamma-moments":
        raise ConfigError("out_format", "binary output exists only for gamma-moments ensembles")
    if subcommand in ("gamma-moments", "scaling", "ks-scale", "kernel", "green-scan"):
        if cfg.cov_form != "power":
            raise ConfigError("cov_form", "Monte Carlo runs use the power-law covariance")
    if subcommand == "ks-scale" and cfg.epsilon != 0:
        raise ConfigError("epsilon", "exact self-similarity needs epsilon = 0")
    if subcommand == "scaling" and n < 3:
        raise ConfigError("tau_grid", "a scaling fit needs at least 3 tau values")
    if subcommand == "green-scan" and dn < 4:
        raise ConfigError("delta_scan", "an exponent scan needs at least 4 displacements")
