"""Run configuration: YAML loading, validation, defaults, round-trip dump.

Unknown keys are rejected so typos fail loudly; every omitted key falls
back to a documented default, logged at load time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .datasets import SyntheticSpec
from .drain import ParserConfig
from .federated import FedConfig
from .windows import WindowConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetConfig:
    format: str = "synthetic"
    path: str | None = None
    max_samples: int | None = None
    min_anomaly_rate_per_node: float | None = None
    synthetic: SyntheticSpec | None = None

    def __post_init__(self) -> None:
        if self.format not in ("thunderbird", "bgl", "synthetic"):
            raise ValueError(f"dataset.format must be thunderbird|bgl|synthetic, got {self.format!r}")
        if self.format == "synthetic":
            if self.synthetic is None:
                raise ValueError("dataset.synthetic section required for synthetic format")
        elif self.path is None:
            raise ValueError("dataset.path required for file-based formats")


@dataclass(frozen=True)
class ModelSection:
    hidden_dim: int = 16
    head_dim: int = 8
    n_heads: int = 2
    n_layers: int = 1
    lora_rank: int = 4
    lora_alpha: float = 32.0
    lora_dropout: float = 0.1
    ffn_dim: int = 32


@dataclass(frozen=True)
class PrivacyConfig:
    target_epsilon: float = 10.0
    delta: float = 1e-5

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 1.0):
            raise ValueError("privacy.delta must be in (0, 1)")


@dataclass(frozen=True)
class EvalConfig:
    test_fraction: float = 0.2

    def __post_init__(self) -> None:
        if not (0.0 < self.test_fraction < 1.0):
            raise ValueError("evaluation.test_fraction must be in (0, 1)")


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig
    parser: ParserConfig
    window: WindowConfig
    model: ModelSection
    federated: FedConfig
    privacy: PrivacyConfig
    evaluation: EvalConfig
    output_dir: str = "out"


def _build(cls, raw: dict, section: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"unknown key(s) in {section}: {sorted(unknown)}")
    for f in fields(cls):
        if f.name not in raw:
            log.debug("%s.%s omitted; using default", section, f.name)
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ValueError(f"missing required key in {section}: {exc}") from exc


_SECTIONS = {
    "dataset": DatasetConfig,
    "parser": ParserConfig,
    "window": WindowConfig,
    "model": ModelSection,
    "federated": FedConfig,
    "privacy": PrivacyConfig,
    "evaluation": EvalConfig,
}


def load_config(path) -> RunConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ValueError("config root must be a mapping")
    unknown = set(raw) - set(_SECTIONS) - {"output_dir"}
    if unknown:
        raise ValueError(f"unknown top-level key(s): {sorted(unknown)}")

    sections = {}
    for name, cls in _SECTIONS.items():
        sub = dict(raw.get(name) or {})
        if name == "dataset" and "synthetic" in sub and sub["synthetic"] is not None:
            synth = dict(sub["synthetic"])
            if "anomaly_template_ids" in synth:
                synth["anomaly_template_ids"] = frozenset(synth["anomaly_template_ids"])
            sub["synthetic"] = _build(SyntheticSpec, synth, "dataset.synthetic")
        try:
            sections[name] = _build(cls, sub, name)
        except ValueError:
            raise
    cfg = RunConfig(output_dir=str(raw.get("output_dir", "out")), **sections)
    if cfg.dataset.format != "synthetic" and not Path(cfg.dataset.path).exists():
        raise ValueError(f"dataset.path does not exist: {cfg.dataset.path}")
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """YAML text that load_config reads back to an equal RunConfig."""

    def as_dict(obj):
        out = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, SyntheticSpec):
                d = as_dict(v)
                d["anomaly_template_ids"] = sorted(v.anomaly_template_ids)
                v = d
            elif isinstance(v, frozenset):
                v = sorted(v)
            out[f.name] = v
        return out

    doc = {name: as_dict(getattr(cfg, name)) for name in _SECTIONS}
    doc["output_dir"] = cfg.output_dir
    return yaml.safe_dump(doc, sort_keys=False)
