"""Experiment configuration: TOML parsing, validation, and serialization.

One config file drives a whole method x seed matrix. Every omitted key
falls back to the defaults baked into the dataclasses (q=0.7, a=200,
halt_round=1000, alpha=0.5, lr=0.01, momentum=0.9, lr_decay=0.998, ...).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .client import ClientConfig
from .data import SyntheticSpec
from .errors import ConfigurationError, ParseError
from .schedule import WeightSchedule
from .scoring import Scorer
from .server import ServerConfig

KNOWN_METHODS = ("flood", "fedavg", "fedprox", "fedavgm")

# CLI method name -> (client-side method, server-side aggregation)
METHOD_TABLE = {
    "flood": ("flood", "flood"),
    "fedavg": ("fedavg", "data_volume"),
    "fedprox": ("fedprox", "data_volume"),
    "fedavgm": ("fedavg", "fedavgm"),
}


@dataclass
class DataConfig:
    source: str = "synthetic"  # "synthetic" | "csv"
    train_path: str = ""
    test_path: str = ""
    test_samples_per_class: int = 100
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)

    def __post_init__(self):
        if self.source not in ("synthetic", "csv"):
            raise ConfigurationError(f"data source must be 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "csv" and (not self.train_path or not self.test_path):
            raise ConfigurationError("csv data source requires train_path and test_path")
        if self.test_samples_per_class < 1:
            raise ConfigurationError("test_samples_per_class must be positive")


@dataclass
class PartitionConfig:
    protocol: str = "pathological"  # "dirichlet" | "pathological"
    beta: float = 0.3
    r: int = 2

    def __post_init__(self):
        if self.protocol not in ("dirichlet", "pathological"):
            raise ConfigurationError(f"unknown partition protocol {self.protocol!r}")
        if self.beta <= 0:
            raise ConfigurationError("partition beta must be > 0")
        if self.r < 1:
            raise ConfigurationError("partition r must be >= 1")


@dataclass
class ExperimentConfig:
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    methods: list[str] = field(default_factory=lambda: ["flood", "fedavg"])
    out_dir: str = "results"
    data: DataConfig = field(default_factory=DataConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    client: ClientConfig = field(default_factory=ClientConfig)

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        for m in self.methods:
            if m not in KNOWN_METHODS:
                raise ConfigurationError(
                    f"unknown method {m!r}; choose from {', '.join(KNOWN_METHODS)}"
                )


def _build(cls, section: str, table: dict, **extra):
    allowed = {f.name for f in fields(cls)} - set(extra)
    for key in table:
        if key not in allowed:
            raise ConfigurationError(f"unknown key '{key}' in [{section}]")
    return cls(**table, **extra)


def parse_config(path) -> ExperimentConfig:
    """Parse and fully validate a TOML experiment config."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    known_sections = {
        "experiment", "data", "partition", "server", "client", "schedule", "scorer",
    }
    for key in raw:
        if key not in known_sections:
            raise ConfigurationError(f"unknown section '{key}' in {path}")
    data_tbl = dict(raw.get("data", {}))
    synth_keys = {f.name for f in fields(SyntheticSpec)}
    synth_tbl = {k: data_tbl.pop(k) for k in list(data_tbl) if k in synth_keys}
    data_cfg = _build(
        DataConfig, "data", data_tbl, synthetic=_build(SyntheticSpec, "data", synth_tbl)
    )
    schedule = _build(WeightSchedule, "schedule", raw.get("schedule", {}))
    scorer = _build(Scorer, "scorer", raw.get("scorer", {}))
    client = _build(
        ClientConfig, "client", raw.get("client", {}), schedule=schedule, scorer=scorer
    )
    return _build(
        ExperimentConfig,
        "experiment",
        raw.get("experiment", {}),
        data=data_cfg,
        partition=_build(PartitionConfig, "partition", raw.get("partition", {})),
        server=_build(ServerConfig, "server", raw.get("server", {})),
        client=client,
    )


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"%s"' % v.replace("\\", "\\\\").replace('"', '\\"')
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigurationError(f"cannot serialize value of type {type(v).__name__}")


def _section(name: str, table: dict) -> str:
    lines = [f"[{name}]"]
    for k, v in table.items():
        if v is None:
            continue
        lines.append(f"{k} = {_toml_value(v)}")
    return "\n".join(lines)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Emit TOML that parse_config reads back to an equal config."""
    client_tbl = dataclasses.asdict(cfg.client)
    schedule_tbl = client_tbl.pop("schedule")
    scorer_tbl = client_tbl.pop("scorer")
    client_tbl.pop("method")  # per-cell, chosen by the methods list
    data_tbl = dataclasses.asdict(cfg.data)
    data_tbl.update(data_tbl.pop("synthetic"))
    sections = [
        _section("experiment", {"seeds": cfg.seeds, "methods": cfg.methods, "out_dir": cfg.out_dir}),
        _section("data", data_tbl),
        _section("partition", dataclasses.asdict(cfg.partition)),
        _section("server", dataclasses.asdict(cfg.server)),
        _section("client", client_tbl),
        _section("schedule", schedule_tbl),
        _section("scorer", scorer_tbl),
    ]
    return "\n\n".join(sections) + "\n"
