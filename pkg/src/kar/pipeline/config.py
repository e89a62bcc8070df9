"""Run configuration and its plain-text ``key = value`` file format.

Lines starting with ``#`` are comments. List values are comma-separated.
Unknown keys are a config error.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..adaptor import VARIANTS, AdaptorConfig
from ..backbones import KINDS, MODES
from ..encoding import AGGREGATIONS
from ..errors import ConfigError


@dataclass
class RunConfig:
    # paths
    data_dir: str = "data/ml-1m"
    vocab_path: str = "work/vocab.json"
    prompts_path: str = "work/prompts.jsonl"
    knowledge_path: str = "work/knowledge.jsonl"
    train_path: str = "work/train.bin"
    test_path: str = "work/test.bin"
    reps_path: str = "work/reps.karv"
    aug_path: str = "work/aug.karv"
    checkpoint_path: str = "work/model.ckpt"
    base_checkpoint_path: str = "work/base.ckpt"
    report_dir: str = "work/report"
    # data and knowledge generation
    split_ratio: float = 0.9
    max_history: int = 30
    scenario: str = "movie"
    factors: str = ""  # ";"-separated override; empty = scenario preset
    llm: str = "stub"  # stub | http
    llm_url: str = "http://localhost:8000/v1"
    llm_model: str = "gpt-3.5-turbo"
    max_retries: int = 4
    workers: int = 4
    encoder: str = "hash"  # hash | precomputed
    encoder_dim: int = 64
    encoder_path: str = ""
    # model
    backbone: str = "din"
    mode: str = "none"
    embed_dim: int = 32
    mlp: tuple = (200, 80)
    cross_layers: int = 3
    attention: tuple = (80, 40)
    # adaptor
    adaptor: str = "hybrid"
    aug_dim: int = 32
    n_shared: int = 2
    n_pref: int = 5
    n_item: int = 5
    expert_hidden: tuple = (128, 32)
    aggregation: str = "avg"
    # optimisation
    lr: float = 1e-3
    batch_size: int = 256
    epochs: int = 5
    patience: int = 1
    seed: int = 0
    train_limit: int = 0  # 0 = use everything
    eval_batch_size: int = 2048
    figures: bool = True
    # benchmark
    bench_batches: int = 50
    bench_warmup: int = 5
    bench_repeats: int = 3

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.backbone not in KINDS:
            raise ConfigError(f"backbone must be one of {KINDS}, got {self.backbone!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.adaptor not in VARIANTS:
            raise ConfigError(f"adaptor must be one of {VARIANTS}, got {self.adaptor!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if self.llm not in ("stub", "http"):
            raise ConfigError(f"llm must be 'stub' or 'http', got {self.llm!r}")
        if self.encoder not in ("hash", "precomputed"):
            raise ConfigError(f"encoder must be 'hash' or 'precomputed', got {self.encoder!r}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.max_history < 0 or self.encoder_dim <= 0 or self.workers <= 0:
            raise ConfigError("max_history must be >= 0; encoder_dim and workers positive")
        if self.bench_batches <= 0 or self.bench_warmup < 0 or self.bench_repeats <= 0:
            raise ConfigError("bench_batches and bench_repeats must be positive")
        if self.batch_size <= 0 or self.epochs <= 0 or self.lr <= 0:
            raise ConfigError("batch_size, epochs and lr must be positive")
        self.mlp = tuple(int(x) for x in self.mlp)
        self.attention = tuple(int(x) for x in self.attention)
        self.expert_hidden = tuple(int(x) for x in self.expert_hidden)

    def adaptor_config(self, m):
        return AdaptorConfig(m=m, q=self.aug_dim, n_shared=self.n_shared, n_pref=self.n_pref,
                             n_item=self.n_item, hidden=self.expert_hidden, variant=self.adaptor)

    def factor_override(self):
        return [f.strip() for f in self.factors.split(";") if f.strip()] or None

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def dumps(self):
        lines = []
        for k, v in self.to_dict().items():
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def _convert(f, raw):
    typ = f.type if isinstance(f.type, str) else f.type.__name__
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "tuple":
            return tuple(int(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad value for {f.name}: {raw!r} (expected {typ})") from None
    return raw.strip()


def parse_config_text(text, base=None):
    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"config line {line_no}: unknown key {key!r}")
        values[key] = _convert(known[key], raw)
    base = base or RunConfig()
    return base.replace(**values)


def load_config(path, overrides=None):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = parse_config_text(path.read_text(encoding="utf-8"))
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def apply_overrides(cfg, overrides):
    """Apply ``{key: raw string or typed value}`` on top of ``cfg``."""
    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    for key, raw in overrides.items():
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _convert(known[key], raw) if isinstance(raw, str) else raw
    return cfg.replace(**values)
