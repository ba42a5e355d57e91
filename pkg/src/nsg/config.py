"""Run configuration: defaults, key=value config files, CLI overrides.

Config files are flat `key = value` lines with `#` comments; keys are
dotted (llm.endpoint, evolution.population_cap, ...).  Precedence is
command-line flags over file values over built-in defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

from .evolution import EvolutionConfig
from .gateway import SYSTEMS


class ConfigError(Exception):
    """Unusable configuration: unknown key, bad value, missing requirement."""


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "NSG_API_KEY"
    timeout_ms: int = 30_000
    retries: int = 2
    max_concurrency: int = 4
    mock: bool = False
    seed: int = 0
    max_tokens: int = 256
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ConfigError("llm.timeout_ms must be positive")
        if not 0 <= self.retries <= 5:
            raise ConfigError("llm.retries must lie in 0..5")
        if self.max_concurrency < 1:
            raise ConfigError("llm.max_concurrency must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: str = ""
    pens_mapping: bool = False
    out_dir: str = "out"
    seed: int = 0
    systems: tuple[str, ...] = SYSTEMS
    per_fragment_target: int = 8
    max_generations: int = 50
    parent_fraction: float = 0.5
    population_cap: int = 32
    alpha: float = 0.5
    beta: float = 0.5
    damping: float = 0.85
    max_sentences: int = 1
    overlap_comparand: str = "source"
    bleu_smoothing: bool = False
    workers: int = 4
    checkpoint_every: int = 0
    digest: bool = False
    llm: LlmConfig = field(default_factory=LlmConfig)

    def __post_init__(self) -> None:
        if not self.systems:
            raise ConfigError("systems must be nonempty")
        unknown = [s for s in self.systems if s not in SYSTEMS]
        if unknown:
            raise ConfigError(f"unknown system {unknown[0]!r}; choose from {', '.join(SYSTEMS)}")
        if len(set(self.systems)) != len(self.systems):
            raise ConfigError("systems must not repeat")
        if self.per_fragment_target < 1:
            raise ConfigError("extraction.per_fragment_target must be >= 1")
        if self.overlap_comparand not in ("source", "reference"):
            raise ConfigError("metrics.overlap_comparand must be source or reference")
        if self.workers < 1:
            raise ConfigError("pipeline.workers must be >= 1")
        if self.checkpoint_every < 0:
            raise ConfigError("pipeline.checkpoint_every must be >= 0")
        if self.max_sentences < 1:
            raise ConfigError("baselines.max_sentences must be >= 1")
        try:
            self.evolution_config()
        except ValueError as exc:
            raise ConfigError(f"evolution: {exc}")

    def evolution_config(self) -> EvolutionConfig:
        return EvolutionConfig(
            max_generations=self.max_generations,
            parent_fraction=self.parent_fraction,
            population_cap=self.population_cap,
            seed=self.seed,
            alpha=self.alpha,
            beta=self.beta,
            damping=self.damping,
        )


# Dotted config key -> (PipelineConfig/LlmConfig attribute, value type).
_KEYS: dict[str, tuple[str, type]] = {
    "corpus.path": ("corpus_path", str),
    "corpus.pens_mapping": ("pens_mapping", bool),
    "output.dir": ("out_dir", str),
    "seed": ("seed", int),
    "systems": ("systems", tuple),
    "extraction.per_fragment_target": ("per_fragment_target", int),
    "evolution.max_generations": ("max_generations", int),
    "evolution.parent_fraction": ("parent_fraction", float),
    "evolution.population_cap": ("population_cap", int),
    "evolution.alpha": ("alpha", float),
    "evolution.beta": ("beta", float),
    "evolution.damping": ("damping", float),
    "baselines.max_sentences": ("max_sentences", int),
    "metrics.overlap_comparand": ("overlap_comparand", str),
    "metrics.bleu_smoothing": ("bleu_smoothing", bool),
    "pipeline.workers": ("workers", int),
    "pipeline.checkpoint_every": ("checkpoint_every", int),
    "pipeline.digest": ("digest", bool),
    "llm.endpoint": ("llm.endpoint", str),
    "llm.model": ("llm.model", str),
    "llm.api_key_env": ("llm.api_key_env", str),
    "llm.timeout_ms": ("llm.timeout_ms", int),
    "llm.retries": ("llm.retries", int),
    "llm.max_concurrency": ("llm.max_concurrency", int),
    "llm.mock": ("llm.mock", bool),
    "llm.seed": ("llm.seed", int),
    "llm.max_tokens": ("llm.max_tokens", int),
    "llm.temperature": ("llm.temperature", float),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read `key = value` lines; later occurrences of a key win."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path} line {line_no}: expected key = value")
        key = key.strip()
        if key not in _KEYS:
            raise ConfigError(f"{path} line {line_no}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def _coerce(key: str, raw: object) -> object:
    attribute, kind = _KEYS[key]
    if isinstance(raw, str):
        text = raw.strip()
        try:
            if kind is bool:
                lowered = text.lower()
                if lowered in _TRUE:
                    return True
                if lowered in _FALSE:
                    return False
                raise ValueError(f"expected a boolean, got {text!r}")
            if kind is int:
                return int(text)
            if kind is float:
                return float(text)
            if kind is tuple:
                items = tuple(part.strip() for part in text.split(",") if part.strip())
                if not items:
                    raise ValueError("expected a comma-separated list")
                return items
            return text
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}")
    if kind is tuple and isinstance(raw, (list, tuple)):
        return tuple(raw)
    return raw


def build_config(
    file_values: Mapping[str, str] | None = None,
    overrides: Mapping[str, object] | None = None,
) -> PipelineConfig:
    """Merge defaults, file values, then overrides into a PipelineConfig.

    Both mappings use dotted config keys.  Unknown keys raise ConfigError;
    dataclass validation errors surface as ConfigError too.
    """
    merged: dict[str, object] = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if key not in _KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            if value is None:
                continue
            merged[key] = _coerce(key, value)
    top: dict[str, object] = {}
    llm: dict[str, object] = {}
    for key, value in merged.items():
        attribute, _ = _KEYS[key]
        if attribute.startswith("llm."):
            llm[attribute[4:]] = value
        else:
            top[attribute] = value
    try:
        return PipelineConfig(llm=LlmConfig(**llm), **top)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc))


def config_snapshot(config: PipelineConfig) -> dict[str, object]:
    """Flat dotted-key view of the effective configuration, for manifests.

    The output directory is omitted: the manifest lives inside it, and
    embedding the path would make otherwise identical runs differ.
    """
    inverse = {attribute: key for key, (attribute, _) in _KEYS.items()}
    snapshot: dict[str, object] = {}
    for f in fields(PipelineConfig):
        if f.name in ("llm", "out_dir"):
            continue
        value = getattr(config, f.name)
        snapshot[inverse[f.name]] = list(value) if isinstance(value, tuple) else value
    for f in fields(LlmConfig):
        snapshot[f"llm.{f.name}"] = getattr(config.llm, f.name)
    return snapshot
