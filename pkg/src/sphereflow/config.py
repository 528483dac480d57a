"""Experiment configuration: a flat TOML document with a few tables."""

import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import UnsupportedDimension


@dataclass(frozen=True)
class Perturbation:
    kind: str = "random"  # random | modes
    amplitude: float = 1e-4
    amplitudes: tuple = (1e-3, 1e-4)
    spectral_decay: float = 2.0
    modes: tuple = ()  # (k, m, weight) triples for kind = "modes"


@dataclass(frozen=True)
class Base:
    kind: str = "slow"  # round | slow | fast
    amplitude: float = 0.01


@dataclass(frozen=True)
class Design:
    time: float = 5.0
    max_degree: int = 4
    epsilon: float = 1e-4
    epsilons: tuple = (1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class Tolerances:
    rate: float = 0.05
    fit_residual: float = 1e-3
    centering: float = 1e-11
    hessian: float = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 2
    k_max: int = 16
    dt: float = 1e-3
    horizon: float = 12.0
    snapshot_every: float = 0.05
    seeds: tuple = tuple(range(32))
    output: str = "runs"
    clock: str = "rmcf"
    base: Base = field(default_factory=Base)
    perturbation: Perturbation = field(default_factory=Perturbation)
    design: Design = field(default_factory=Design)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n != 2:
            raise UnsupportedDimension("only n = 2 is implemented")
        if not (0 < self.dt <= 0.01):
            raise ValueError(f"dt must lie in (0, 0.01], got {self.dt}")
        if not (2 <= self.k_max <= 48):
            raise ValueError(f"k_max must lie in [2, 48], got {self.k_max}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.snapshot_every > 0:
            raise ValueError("snapshot_every must be positive")
        if self.clock not in ("rmcf", "mcf"):
            raise ValueError("clock must be 'rmcf' or 'mcf'")
        if any((not isinstance(s, int)) or s < 0 for s in self.seeds):
            raise ValueError("seeds must be non-negative integers")
        if self.base.kind not in ("round", "slow", "fast"):
            raise ValueError("base.kind must be round, slow or fast")
        if self.perturbation.kind not in ("random", "modes"):
            raise ValueError("perturbation.kind must be random or modes")
        if self.perturbation.amplitude < 0 or any(a <= 0 for a in self.perturbation.amplitudes):
            raise ValueError("perturbation amplitudes must be positive")

    def to_dict(self):
        return asdict(self)

    def to_toml(self):
        d = self.to_dict()
        lines = []
        tables = {}
        for k, v in d.items():
            if isinstance(v, dict):
                tables[k] = v
            else:
                lines.append(f"{k} = {_toml_value(v)}")
        for name, tab in tables.items():
            lines.append("")
            lines.append(f"[{name}]")
            for k, v in tab.items():
                lines.append(f"{k} = {_toml_value(v)}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **kw):
        return replace(self, **kw)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_TABLES = {"base": Base, "perturbation": Perturbation, "design": Design, "tolerances": Tolerances}


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def config_from_dict(d):
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - top
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    for k, v in d.items():
        if k in _TABLES:
            cls = _TABLES[k]
            allowed = {f.name for f in fields(cls)}
            bad = set(v) - allowed
            if bad:
                raise ValueError(f"unknown keys in [{k}]: {sorted(bad)}")
            kw[k] = cls(**{kk: _tuplify(vv) for kk, vv in v.items()})
        else:
            kw[k] = _tuplify(v)
    return ExperimentConfig(**kw)


def load_config(path=None):
    """Defaults, overridden by the TOML file at ``path`` if given."""
    if path is None:
        return ExperimentConfig()
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))
