"""Experiment configuration: the task/method matrix and its file format.

Config files are INI-style text: ``key = value`` lines grouped into
sections.  Recognized sections and keys (all optional unless noted)::

    [experiment]
    task = 1tuq | 2tuq | funq          (required)
    method = df | df_ls | df_ps | ft_l | ft_nn | ft_rf | ft_rf_j
    question_key = likes_partner       (required)
    bot_n = 1                          (1 means plain direct forecasting)
    include_demographics = false
    seeds = 1,2,3,4,5
    train_n = 100
    char_budget = 20000
    output_dir = runs
    r2_train_mean = split_local | global

    [corpus]
    path = corpus.jsonl                (required for live backends)
    tag = negotiation | social | task_oriented | synthetic

    [backend]
    kind = synthetic | openai          (required)
    # synthetic worlds:
    world_seed = 7
    n_dialogues = 400
    sigma = 0.1
    fun_std = 0.15
    embedding_dim = 768
    embedding_mode = side_signal | joint_only
    signal_sigma = 0.05
    # live backends:
    model = <chat model name>
    embedding_model = <embedding model name>

    [sampling]
    temperature = 1.0
    max_new_tokens = 256
    retry_limit = 3

    [gateway]
    cache_dir = <path>                 (default: $TOMUQ_CACHE_DIR)
    max_workers = 4
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from tomuq.errors import ConfigError

CACHE_DIR_ENV = "TOMUQ_CACHE_DIR"


class Task(str, Enum):
    ONE_TUQ = "1tuq"
    TWO_TUQ = "2tuq"
    FUNQ = "funq"


class Method(str, Enum):
    DF = "df"
    DF_LS = "df_ls"
    DF_PS = "df_ps"
    FT_L = "ft_l"
    FT_NN = "ft_nn"
    FT_RF = "ft_rf"
    FT_RF_J = "ft_rf_j"


FT_METHODS = (Method.FT_L, Method.FT_NN, Method.FT_RF, Method.FT_RF_J)
HEAD_KIND_BY_METHOD = {
    Method.FT_L: "linear",
    Method.FT_NN: "relu_net",
    Method.FT_RF: "random_forest",
}


@dataclass(frozen=True)
class ExperimentConfig:
    task: Task
    method: Method
    question_key: str
    backend: dict
    corpus_path: str | None = None
    corpus_tag: str | None = None
    bot_n: int = 1
    include_demographics: bool = False
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    train_n: int = 100
    char_budget: int = 20_000
    output_dir: str | None = None
    r2_train_mean: str = "split_local"
    temperature: float = 1.0
    max_new_tokens: int = 256
    retry_limit: int = 3
    cache_dir: str | None = None
    max_workers: int = 4

    def __post_init__(self) -> None:
        if self.method is Method.FT_RF_J and self.task is not Task.FUNQ:
            raise ConfigError("ft_rf_j is only valid with task = funq")
        if self.bot_n < 1:
            raise ConfigError("bot_n must be at least 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative")
        if self.train_n < 2:
            raise ConfigError("train_n must be at least 2")
        if self.r2_train_mean not in ("split_local", "global"):
            raise ConfigError(f"unknown r2_train_mean {self.r2_train_mean!r}")
        kind = self.backend.get("kind")
        if kind not in ("synthetic", "openai"):
            raise ConfigError(f"backend kind must be synthetic or openai, got {kind!r}")
        if kind == "openai":
            if not self.corpus_path:
                raise ConfigError("live backends require corpus.path")
            if not self.backend.get("model"):
                raise ConfigError("live backends require backend.model")
        if self.temperature < 0:
            raise ConfigError("temperature must be non-negative")
        if self.max_workers < 1:
            raise ConfigError("max_workers must be at least 1")

    def canonical(self) -> dict:
        """Snapshot used for run identity; paths and caches excluded."""
        return {
            "task": self.task.value,
            "method": self.method.value,
            "question_key": self.question_key,
            "backend": dict(sorted(self.backend.items())),
            "corpus_tag": self.corpus_tag,
            "bot_n": self.bot_n,
            "include_demographics": self.include_demographics,
            "seeds": list(self.seeds),
            "train_n": self.train_n,
            "char_budget": self.char_budget,
            "r2_train_mean": self.r2_train_mean,
            "temperature": self.temperature,
            "max_new_tokens": self.max_new_tokens,
            "retry_limit": self.retry_limit,
        }

    def with_overrides(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)


def _get(parser: configparser.ConfigParser, section: str, key: str, fallback=None):
    if parser.has_option(section, key):
        return parser.get(section, key)
    return fallback


def _parse_seeds(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in raw.replace(" ", "").split(",") if part)
    except ValueError as exc:
        raise ConfigError(f"bad seeds list {raw!r}: {exc}") from None


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean for {key}: {raw!r}")


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read an experiment config file, raising ConfigError on any problem."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None

    if not parser.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    try:
        task = Task(_get(parser, "experiment", "task", ""))
    except ValueError:
        raise ConfigError(
            f"unknown task {_get(parser, 'experiment', 'task')!r}"
        ) from None
    try:
        method = Method(_get(parser, "experiment", "method", "df"))
    except ValueError:
        raise ConfigError(
            f"unknown method {_get(parser, 'experiment', 'method')!r}"
        ) from None
    question_key = _get(parser, "experiment", "question_key")
    if not question_key:
        raise ConfigError("experiment.question_key is required")

    backend: dict = {}
    if parser.has_section("backend"):
        backend = dict(parser.items("backend"))
    for int_key in ("world_seed", "n_dialogues", "embedding_dim"):
        if int_key in backend:
            try:
                backend[int_key] = int(backend[int_key])
            except ValueError:
                raise ConfigError(f"backend.{int_key} must be an integer") from None
    for float_key in ("sigma", "fun_std", "signal_sigma"):
        if float_key in backend:
            try:
                backend[float_key] = float(backend[float_key])
            except ValueError:
                raise ConfigError(f"backend.{float_key} must be a number") from None

    try:
        config = ExperimentConfig(
            task=task,
            method=method,
            question_key=question_key,
            backend=backend,
            corpus_path=_get(parser, "corpus", "path"),
            corpus_tag=_get(parser, "corpus", "tag"),
            bot_n=int(_get(parser, "experiment", "bot_n", "1")),
            include_demographics=_parse_bool(
                _get(parser, "experiment", "include_demographics", "false"),
                "include_demographics",
            ),
            seeds=_parse_seeds(_get(parser, "experiment", "seeds", "1,2,3,4,5")),
            train_n=int(_get(parser, "experiment", "train_n", "100")),
            char_budget=int(_get(parser, "experiment", "char_budget", "20000")),
            output_dir=_get(parser, "experiment", "output_dir"),
            r2_train_mean=_get(parser, "experiment", "r2_train_mean", "split_local"),
            temperature=float(_get(parser, "sampling", "temperature", "1.0")),
            max_new_tokens=int(_get(parser, "sampling", "max_new_tokens", "256")),
            retry_limit=int(_get(parser, "sampling", "retry_limit", "3")),
            cache_dir=_get(parser, "gateway", "cache_dir", os.environ.get(CACHE_DIR_ENV)),
            max_workers=int(_get(parser, "gateway", "max_workers", "4")),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from None
    return config
