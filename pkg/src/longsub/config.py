"""Run configuration and its flat ``dotted.key=value`` text form."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .bspline import SplineSpec
from .covariance import WorkingCovariance
from .errors import ConfigError


@dataclass
class SplineConfig:
    degree: int = 3
    interior_knots: int = 2
    knot_rule: str = "uniform"

    def spec(self, domain) -> SplineSpec:
        return SplineSpec(self.degree, self.interior_knots, tuple(domain), self.knot_rule)

    @property
    def k_basis(self) -> int:
        return self.interior_knots + self.degree + 1


@dataclass
class CovarianceConfig:
    structure: str = "independence"
    rho: float = 0.0
    variance: float = 1.0

    def working(self) -> WorkingCovariance:
        return WorkingCovariance(self.structure, self.rho, self.variance)


@dataclass
class KMeansConfig:
    restarts: int = 10
    seed: int = 0
    max_iter: int = 100


@dataclass
class BackfitConfig:
    max_sweeps: int = 50
    freeze_beta: bool = False
    ridge: float = 0.0
    # Ridge for the per-subject spline fits that feed k-means only.
    subject_ridge: float = 1.0
    # Fixed-partition refits after memberships settle; stop when fitted values move less than this.
    polish_tol: float = 1e-9
    polish_max_sweeps: int = 200


@dataclass
class SelectionConfig:
    m_max: int = 5
    # Fixed group counts per covariate; empty means select by BIC.
    m: tuple = ()
    confirm: bool = True


@dataclass
class DataConfig:
    path: Optional[str] = None
    id: str = "subject_id"
    y: str = "y"
    x: tuple = ()
    z: tuple = ()
    s: tuple = ()
    exclusion: str = "exclude"
    min_visits: int = 0
    transform: dict = field(default_factory=dict)


@dataclass
class OutputConfig:
    grid_size: int = 101


@dataclass
class RunConfig:
    spline: SplineConfig = field(default_factory=SplineConfig)
    covariance: CovarianceConfig = field(default_factory=CovarianceConfig)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    backfit: BackfitConfig = field(default_factory=BackfitConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    data: DataConfig = field(default_factory=DataConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        cfg = cls()
        for key, value in mapping.items():
            cfg.set(key, value)
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_mapping(parse_text(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    def set(self, key: str, value) -> None:
        parts = key.strip().split(".")
        if len(parts) < 2:
            raise ConfigError(f"config key {key!r} must be section.name")
        section = getattr(self, parts[0], None)
        if section is None or not dataclasses.is_dataclass(section):
            raise ConfigError(f"unknown config section {parts[0]!r}")
        name = parts[1]
        fields = {f.name: f for f in dataclasses.fields(section)}
        if name not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(section, name)
        if isinstance(current, dict):
            if len(parts) != 3:
                raise ConfigError(f"{key!r}: expected {parts[0]}.{name}.<column>")
            current[parts[2]] = str(value).strip()
            return
        if len(parts) != 2:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(section, name, _coerce(fields[name], current, value, key))

    def to_text(self) -> str:
        """Deterministic text form; ``from_text(to_text())`` round-trips."""
        lines = []
        for f in dataclasses.fields(self):
            section = getattr(self, f.name)
            for g in dataclasses.fields(section):
                value = getattr(section, g.name)
                if isinstance(value, dict):
                    for col in sorted(value):
                        lines.append(f"{f.name}.{g.name}.{col}={value[col]}")
                    continue
                lines.append(f"{f.name}.{g.name}={_format(value)}")
        return "\n".join(lines) + "\n"


def _format(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(fld, current, value, key):
    if not isinstance(value, str):
        return tuple(value) if isinstance(current, tuple) else value
    text = value.strip()
    try:
        if isinstance(current, bool):
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            if fld.name == "m":
                return tuple(int(t) for t in items)
            return tuple(items)
        if current is None or isinstance(current, str):
            return text or None if current is None else text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return text


def parse_text(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out
