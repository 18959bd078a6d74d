"""Pipeline configuration: one YAML/JSON file plus named preset overlays.

Credentials never live here; HTTP bindings read them from the environment.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .dataset import CategoryTaxonomy, default_taxonomy, load_taxonomy
from .errors import ConfigError
from .generation import DEFAULT_REFUSAL_PHRASES, REFUSAL_ANSWER

RETRIEVAL_MODES = ("sparse", "dense", "hybrid", "hybrid-rerank", "doc2query")

# One preset per system configuration compared in the ablation tables.
BUILTIN_PRESETS: dict[str, dict] = {
    "sparse": {"retrieval": "sparse"},
    "dense": {"retrieval": "dense"},
    "hybrid": {"retrieval": "hybrid"},
    "hybrid-rerank": {"retrieval": "hybrid-rerank"},
    "doc2query": {"retrieval": "doc2query"},
}


@dataclass
class ChunkingConfig:
    max_tokens: int = 512


@dataclass
class SparseConfig:
    k1: float = 1.2
    b: float = 0.75
    k: int = 30
    doc2query: bool = True
    n_questions: int = 3
    question_generator: str = "mock"  # mock | http


@dataclass
class DenseConfig:
    provider: str = "hashing"  # hashing | http
    dimension: int = 256
    k: int = 30
    query_prefix: str = ""
    passage_prefix: str = ""


@dataclass
class FusionSection:
    k_each: int = 30
    top_n: int = 10
    w_sparse: float = 1.0
    w_dense: float = 1.0


@dataclass
class RerankConfig:
    scorer: str = "oracle"  # oracle | constant | overlap | http
    pool: str = "union"  # union: both k_each lists deduplicated; fused: the fused top_n only
    top_n: int = 10
    constant: float = 0.0


@dataclass
class GenerationSection:
    client: str = "gold"  # gold | echo | fixed | http
    temperature: float = 0.6
    top_p: float = 0.9
    max_answer_tokens: int = 200
    context_size: int = 10
    prompt_strategy: str = "default"
    template_path: str | None = None
    fixed_text: str = REFUSAL_ANSWER
    refusal_phrases: list[str] = field(default_factory=lambda: list(DEFAULT_REFUSAL_PHRASES))
    timeout_seconds: float = 120.0


@dataclass
class EvaluationConfig:
    strat_dims: list[str] = field(
        default_factory=lambda: ["factuality", "premise", "phrasing", "linguistic-variation", "user-expertise"]
    )
    full_combination: bool = False
    similarity_provider: str = "hashing"  # hashing | http
    similarity_dimension: int = 384


_SECTIONS = {
    "chunking": ChunkingConfig,
    "sparse": SparseConfig,
    "dense": DenseConfig,
    "fusion": FusionSection,
    "rerank": RerankConfig,
    "generation": GenerationSection,
    "evaluation": EvaluationConfig,
}

# Settings that never change results; excluded from the config identity hash.
_NON_RESULT_KEYS = ("output_dir", "parallelism", "fail_fast", "presets", "config_dir")


@dataclass
class PipelineConfig:
    corpus_path: str = "corpus.jsonl"
    qa_path: str = "qa.jsonl"
    output_dir: str = "run"
    taxonomy_path: str | None = None
    taxonomy: dict | None = None
    preset: str = "hybrid"
    retrieval: str = "hybrid"
    seed: int = 0
    parallelism: int = 1
    fail_fast: bool = False
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    sparse: SparseConfig = field(default_factory=SparseConfig)
    dense: DenseConfig = field(default_factory=DenseConfig)
    fusion: FusionSection = field(default_factory=FusionSection)
    rerank: RerankConfig = field(default_factory=RerankConfig)
    generation: GenerationSection = field(default_factory=GenerationSection)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    presets: dict = field(default_factory=dict)
    config_dir: str = "."

    def __post_init__(self):
        if self.retrieval not in RETRIEVAL_MODES:
            raise ConfigError(f"unknown retrieval mode {self.retrieval!r}; expected one of {RETRIEVAL_MODES}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.config_dir) / p

    @property
    def corpus_file(self) -> Path:
        return self.resolve(self.corpus_path)

    @property
    def qa_file(self) -> Path:
        return self.resolve(self.qa_path)

    @property
    def output_path(self) -> Path:
        # outputs go relative to the working directory; inputs relative to the config file
        return Path(self.output_dir)

    def load_taxonomy(self) -> CategoryTaxonomy:
        if self.taxonomy is not None:
            return CategoryTaxonomy.from_dict(self.taxonomy)
        if self.taxonomy_path is not None:
            return load_taxonomy(self.resolve(self.taxonomy_path))
        return default_taxonomy()

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def config_id(self) -> str:
        snap = {k: v for k, v in self.to_dict().items() if k not in _NON_RESULT_KEYS}
        digest = hashlib.sha256(json.dumps(snap, sort_keys=True).encode()).hexdigest()[:12]
        return f"{self.preset}:{digest}"

    def preset_names(self) -> list[str]:
        return list(BUILTIN_PRESETS) + [p for p in self.presets if p not in BUILTIN_PRESETS]

    def with_preset(self, name: str, **overrides: Any) -> "PipelineConfig":
        """Return a copy with the named preset overlay (and explicit overrides) applied."""
        if name not in BUILTIN_PRESETS and name not in self.presets:
            raise ConfigError(f"unknown preset {name!r}; known: {', '.join(self.preset_names())}")
        data = self.to_dict()
        _deep_merge(data, BUILTIN_PRESETS.get(name, {}))
        _deep_merge(data, self.presets.get(name, {}))
        _deep_merge(data, overrides)
        data["preset"] = name
        return config_from_dict(data)


def _deep_merge(base: dict, overlay: Mapping) -> dict:
    for key, value in overlay.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict) and key in _SECTIONS:
            _deep_merge(base[key], value)
        else:
            base[key] = copy.deepcopy(value)
    return base


def _section(cls, data: Any, name: str):
    if isinstance(data, cls):
        return data
    if not isinstance(data, Mapping):
        raise ConfigError(f"config section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in section {name!r}: {', '.join(unknown)}")
    return cls(**data)


def config_from_dict(data: Mapping) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {', '.join(unknown)}")
    kwargs = dict(data)
    for name, cls in _SECTIONS.items():
        if name in kwargs:
            kwargs[name] = _section(cls, kwargs[name], name)
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, preset: str | None = None, **overrides: Any) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    data.setdefault("config_dir", str(path.parent.resolve()))
    cfg = config_from_dict(data)
    if preset is not None:
        return cfg.with_preset(preset, **overrides)
    if overrides:
        return config_from_dict(_deep_merge(cfg.to_dict(), overrides))
    return cfg
