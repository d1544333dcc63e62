"""JSON experiment configs and the tables the CLI writes."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional

import numpy as np

from .channel import BoundedUniform, ExpUnitMean, ParetoTail, PathLossLaw
from .simulator import BernoulliScaled, Constant, UniformDiscrete


class ConfigError(ValueError):
    pass


def _fading_from(d: dict):
    d = dict(d)
    law = d.pop("law", "exp")
    try:
        if law == "exp":
            out = ExpUnitMean(**d)
        elif law == "pareto":
            out = ParetoTail(**d)
        elif law == "uniform":
            out = BoundedUniform(**d)
        else:
            raise ConfigError(f"unknown fading law {law!r}")
    except TypeError as exc:
        raise ConfigError(f"fading: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"fading: {exc}") from None
    return out


def _arrival_from(d: dict):
    d = dict(d)
    law = d.pop("law", "constant")
    try:
        if law == "constant":
            if d:
                raise ConfigError(f"constant arrivals take no parameters, got {sorted(d)}")
            return Constant()
        if law == "bernoulli":
            return BernoulliScaled(**d)
        if law == "uniform":
            return UniformDiscrete(**d)
    except TypeError as exc:
        raise ConfigError(f"arrival: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"arrival: {exc}") from None
    raise ConfigError(f"unknown arrival law {law!r}")


@dataclass
class ExperimentConfig:
    """Every knob any subcommand reads; unknown keys are rejected.

    Spectral efficiencies are in nats per channel use unless ``rate_unit`` is
    ``"bits"``, in which case inputs and reported axes are in bits.
    """

    alpha: float = 2.0
    delta: float = 0.01
    fading: dict = field(default_factory=lambda: {"law": "exp", "bands": 10})
    spectral_efficiencies: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0, 8.0])
    delays: list = field(default_factory=lambda: [1, 1.5, 2, 2.5, 3, 4, 5, 6, 8, 10])
    kappas: list = field(default_factory=lambda: [0.0])
    pfs_users: int = 50
    snr_db: list = field(default_factory=lambda: [-10.0, 30.0, 60])  # start, stop, count
    users: list = field(default_factory=lambda: [8, 32, 128])
    convergence_loads: list = field(default_factory=lambda: [1.0])
    n_users: int = 50
    spectral_efficiency: float = 1.0
    horizon: int = 100_000
    ensemble_horizon: int = 2000
    systems: int = 100
    arrival: dict = field(default_factory=lambda: {"law": "constant"})
    kappa: Optional[float] = None
    delay: Optional[float] = 3.0
    class_delays: Optional[list] = None
    class_fractions: Optional[list] = None
    n0: float = 1.0
    seed: int = 0
    warmup: Optional[int] = None
    rate_unit: str = "nats"

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta must lie in (0, 1)")
        if not self.alpha >= 1.0:
            raise ConfigError("alpha must be >= 1")
        if any(not (g > 0) for g in [*self.spectral_efficiencies, *self.convergence_loads, self.spectral_efficiency]):
            raise ConfigError("spectral efficiencies must be positive")
        if self.rate_unit not in ("nats", "bits"):
            raise ConfigError("rate_unit must be 'nats' or 'bits'")
        if any(d < 1 for d in self.delays):
            raise ConfigError("delays must be >= 1 slot")
        if self.n_users < 1 or any(k < 1 for k in self.users) or self.pfs_users < 1:
            raise ConfigError("user counts must be >= 1")
        if self.horizon < 1 or self.ensemble_horizon < 1 or self.systems < 1:
            raise ConfigError("horizon and ensemble size must be >= 1")
        if not self.n0 > 0:
            raise ConfigError("n0 must be positive")
        if len(self.snr_db) != 3:
            raise ConfigError("snr_db is [start_dB, stop_dB, count]")
        if self.class_delays is not None and any(d < 1 for d in self.class_delays):
            raise ConfigError("class delays must be >= 1 slot")
        if self.class_fractions is not None and self.class_delays is None:
            raise ConfigError("class_fractions needs class_delays")
        if self.class_fractions is not None and len(self.class_fractions) != len(self.class_delays):
            raise ConfigError("one class fraction per class delay")
        if self.kappa is not None and self.kappa < 0:
            raise ConfigError("kappa must be non-negative")
        if any(k < 0 for k in self.kappas):
            raise ConfigError("kappas must be non-negative")
        if self.delay is not None and self.delay < 1:
            raise ConfigError("delay must be >= 1 slot")
        # build once to surface law errors early
        self.fading_law()
        self.arrival_law()
        if self.fading_law().bands < 1:
            raise ConfigError("bands must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_dict(self) -> dict:
        return asdict(self)

    def pathloss(self) -> PathLossLaw:
        return PathLossLaw(float(self.alpha), float(self.delta))

    def fading_law(self):
        return _fading_from(self.fading)

    def arrival_law(self):
        return _arrival_from(self.arrival)

    def to_nats(self, x: float) -> float:
        return x * math.log(2.0) if self.rate_unit == "bits" else x


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append(list(row))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"columns": self.columns, "rows": self.rows, "metadata": self.metadata}, indent=2, default=_jsonable)

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown format {fmt!r}")


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip form, locale independent
    return str(v)


def _jsonable(v):
    if hasattr(v, "item"):
        return v.item()
    if hasattr(v, "tolist"):
        return v.tolist()
    raise TypeError(f"not JSON serialisable: {type(v)}")
