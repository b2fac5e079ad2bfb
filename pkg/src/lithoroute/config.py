"""Pipeline configuration: a sectioned ``key = value`` file, validated on load.

Unknown sections or keys are rejected so that an ablation typo cannot silently
fall back to a default. Relative paths resolve against the config file.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError

BUILTIN_PREFIX = "builtin:"
RESOURCES = Path(__file__).parent / "resources"


def _bool(v: str) -> bool:
    t = v.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _names(v: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in v.split(",") if x.strip())


@dataclass(frozen=True)
class DataSection:
    path: str = ""
    schema: str = BUILTIN_PREFIX + "facies_schema.ini"
    knowledge_base: str = BUILTIN_PREFIX + "facies_kb.txt"


@dataclass(frozen=True)
class SplitSection:
    train: tuple[str, ...] = ()
    val: tuple[str, ...] = ()
    test: tuple[str, ...] = ()


@dataclass(frozen=True)
class BaseSection:
    kind: str = "mlp"
    hidden: int = 128
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 64
    patience: int = 10
    window: int = 16


@dataclass(frozen=True)
class RoutingSection:
    threshold: str = "auto"
    epsilon: float = 0.01
    grid_points: int = 101


@dataclass(frozen=True)
class ToolsSection:
    knowledge: bool = True
    trend: bool = True
    neighbors: bool = True
    history: bool = True
    context: int = 8
    k: int = 5
    history_depth: int = 4


@dataclass(frozen=True)
class ReasoningSection:
    personas: tuple[str, ...] = ("analyst", "stratigrapher", "physicist")
    temperature: float = 0.6
    top_p: float = 0.7
    max_tokens: int = 8192
    votes: int = 3
    char_budget: int = 24000
    parallelism: int = 1


@dataclass(frozen=True)
class BackendSection:
    kind: str = "mock"
    url: str = ""
    model: str = ""
    attempts: int = 3
    backoff: float = 1.0
    timeout: float = 120.0


@dataclass(frozen=True)
class RefinementSection:
    enabled: bool = True
    method: str = "llm"
    min_run: int = 2
    window: int = 4


@dataclass(frozen=True)
class RunSection:
    root: str = "runs"
    seed: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    data: DataSection = field(default_factory=DataSection)
    split: SplitSection = field(default_factory=SplitSection)
    base: BaseSection = field(default_factory=BaseSection)
    routing: RoutingSection = field(default_factory=RoutingSection)
    tools: ToolsSection = field(default_factory=ToolsSection)
    reasoning: ReasoningSection = field(default_factory=ReasoningSection)
    backend: BackendSection = field(default_factory=BackendSection)
    refinement: RefinementSection = field(default_factory=RefinementSection)
    run: RunSection = field(default_factory=RunSection)
    base_dir: str = field(default=".", compare=False)

    # ---------------------------------------------------------------- helpers
    def resolve(self, value: str) -> Path:
        if value.startswith(BUILTIN_PREFIX):
            return RESOURCES / value[len(BUILTIN_PREFIX):]
        p = Path(value).expanduser()
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def fixed_threshold(self) -> float | None:
        return None if self.routing.threshold == "auto" else float(self.routing.threshold)

    def to_text(self, sections: tuple[str, ...] | None = None) -> str:
        """Canonical text: sections and keys in declaration order."""
        out = io.StringIO()
        for sec in _SECTIONS:
            if sections is not None and sec not in sections:
                continue
            out.write(f"[{sec}]\n")
            obj = getattr(self, sec)
            for f in fields(obj):
                v = getattr(obj, f.name)
                if isinstance(v, tuple):
                    v = ", ".join(v)
                elif isinstance(v, bool):
                    v = "true" if v else "false"
                out.write(f"{f.name} = {v}\n")
            out.write("\n")
        return out.getvalue()

    def digest(self, sections: tuple[str, ...] | None = None, extra: str = "") -> str:
        return hashlib.sha256((self.to_text(sections) + extra).encode()).hexdigest()[:12]

    def override(self, dotted: str, value: Any) -> "PipelineConfig":
        sec, _, key = dotted.partition(".")
        if sec not in _SECTIONS or not key:
            raise ConfigError(f"unknown parameter {dotted!r}")
        obj = getattr(self, sec)
        names = {f.name: f for f in fields(obj)}
        if key not in names:
            raise ConfigError(f"unknown parameter {dotted!r}")
        new = replace(self, **{sec: replace(obj, **{key: _coerce(sec, names[key], str(value))})})
        validate(new)
        return new


_SECTIONS = ("data", "split", "base", "routing", "tools", "reasoning", "backend", "refinement", "run")


def _coerce(section: str, f, raw: str):
    default = f.default
    try:
        if isinstance(default, bool):
            return _bool(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple) or section == "split":
            return _names(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {f.name}: {exc}") from None


def validate(cfg: PipelineConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg.base.kind in ("mlp", "centroid"), "[base] kind must be mlp or centroid")
    for name in ("hidden", "epochs", "batch_size", "patience", "window"):
        need(getattr(cfg.base, name) >= 1, f"[base] {name} must be >= 1")
    need(cfg.base.learning_rate > 0, "[base] learning_rate must be > 0")
    if cfg.routing.threshold != "auto":
        try:
            tau = float(cfg.routing.threshold)
        except ValueError:
            raise ConfigError("[routing] threshold must be 'auto' or a number") from None
        need(0.0 <= tau <= 1.0, "[routing] threshold must lie in [0, 1]")
    need(cfg.routing.epsilon >= 0, "[routing] epsilon must be >= 0")
    need(cfg.routing.grid_points >= 2, "[routing] grid_points must be >= 2")
    need(cfg.tools.context >= 0, "[tools] context must be >= 0")
    need(cfg.tools.k >= 1, "[tools] k must be >= 1")
    need(cfg.tools.history_depth >= 1, "[tools] history_depth must be >= 1")
    known = {"analyst", "stratigrapher", "physicist"}
    need(cfg.reasoning.personas and set(cfg.reasoning.personas) <= known,
         f"[reasoning] personas must be a non-empty subset of {sorted(known)}")
    need(cfg.reasoning.temperature >= 0, "[reasoning] temperature must be >= 0")
    need(0 < cfg.reasoning.top_p <= 1, "[reasoning] top_p must lie in (0, 1]")
    need(cfg.reasoning.max_tokens >= 1, "[reasoning] max_tokens must be >= 1")
    need(cfg.reasoning.votes >= 1 and cfg.reasoning.votes % 2 == 1, "[reasoning] votes must be odd")
    need(cfg.reasoning.char_budget >= 1, "[reasoning] char_budget must be >= 1")
    need(cfg.reasoning.parallelism >= 1, "[reasoning] parallelism must be >= 1")
    need(cfg.backend.kind in ("mock", "remote"), "[backend] kind must be mock or remote")
    need(cfg.backend.attempts >= 1, "[backend] attempts must be >= 1")
    need(cfg.refinement.method in ("llm", "deterministic"), "[refinement] method must be llm or deterministic")
    need(cfg.refinement.min_run >= 1, "[refinement] min_run must be >= 1")
    need(cfg.refinement.window >= 1, "[refinement] window must be >= 1")
    need(cfg.run.seed >= 0, "[run] seed must be >= 0")
    s = cfg.split
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        both = set(getattr(s, a)) & set(getattr(s, b))
        need(not both, f"[split] {a} and {b} share wells {sorted(both)}")


def parse_config(text: str, base_dir: str | Path = ".", source: str = "<config>") -> PipelineConfig:
    cp = configparser.ConfigParser(delimiters=("=",), interpolation=None, inline_comment_prefixes=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    kwargs = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        default_obj = getattr(PipelineConfig(), sec)
        names = {f.name: f for f in fields(default_obj)}
        values = {}
        for key, raw in cp[sec].items():
            if key not in names:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            values[key] = _coerce(sec, names[key], raw)
        kwargs[sec] = replace(default_obj, **values)
    cfg = PipelineConfig(**kwargs, base_dir=str(Path(base_dir).resolve()))
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text(), base_dir=path.parent, source=str(path))
