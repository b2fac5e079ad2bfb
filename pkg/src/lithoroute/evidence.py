"""Evidence tools for routed windows and the profile that bundles their output.

Four tools feed the reasoning panel: a knowledge-base lookup, a contextual
trend summary, exact nearest-neighbour retrieval over training samples, and
the labels already assigned just above the window.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import DepthWindow, LabelSchema, WellLogSequence
from .errors import DataError, LabelError, ProfileError, SequencingError

NO_ENTRY = "no entry"

# --------------------------------------------------------------------- knowledge

_HEADER = re.compile(r"^(FEATURE|LABEL|GUIDELINE)\s+(\S.*?)\s*$")


@dataclass(frozen=True)
class KnowledgeBase:
    feature_descriptions: Mapping[str, str]
    label_descriptions: Mapping[str, str]
    expert_guidelines: tuple[str, ...]

    def validate(self, channels: Sequence[str], schema: LabelSchema) -> list[str]:
        """Raise if a class lacks a description; return channels with no entry."""
        missing = [c for c in schema.class_names if c not in self.label_descriptions]
        if missing:
            raise LabelError(f"knowledge base has no LABEL entry for {missing}")
        return [c for c in channels if c not in self.feature_descriptions]


def parse_knowledge_base(text: str, source: str = "<kb>") -> KnowledgeBase:
    """Parse ``FEATURE <name>`` / ``LABEL <name>`` / ``GUIDELINE <n>`` sections.

    Lines starting with ``#`` are comments. Duplicate headers are rejected.
    """
    sections: dict[tuple[str, str], list[str]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if line.lstrip().startswith("#"):
            continue
        m = _HEADER.match(line)
        if m:
            current = (m.group(1), m.group(2))
            if current in sections:
                raise DataError(f"{source}:{lineno}: duplicate header {m.group(1)} {m.group(2)}")
            sections[current] = []
        elif line.strip():
            if current is None:
                raise DataError(f"{source}:{lineno}: text before the first section header")
            sections[current].append(line.strip())
    feats, labels, guides = {}, {}, []
    for (kind, name), body in sections.items():
        prose = " ".join(body)
        if kind == "FEATURE":
            feats[name] = prose
        elif kind == "LABEL":
            labels[name] = prose
        else:
            guides.append((name, prose))

    def guide_key(item):
        name = item[0]
        return (0, int(name), "") if name.isdigit() else (1, 0, name)

    return KnowledgeBase(feats, labels, tuple(p for _, p in sorted(guides, key=guide_key)))


def load_knowledge_base(path: str | Path) -> KnowledgeBase:
    path = Path(path)
    return parse_knowledge_base(path.read_text(), str(path))


@dataclass(frozen=True)
class KnowledgeExcerpt:
    features: tuple[tuple[str, str], ...]
    labels: tuple[tuple[str, str], ...]
    guidelines: tuple[str, ...]


def kb_lookup(
    kb: KnowledgeBase,
    schema: LabelSchema,
    channels: Sequence[str],
    candidate_classes: Sequence[int],
    active_channels: Sequence[str] | None = None,
) -> KnowledgeExcerpt:
    """Descriptions for exactly the requested channels and classes, plus every guideline.

    ``active_channels`` is the schema's channel list; a requested channel
    outside it is an error, while a known channel without a KB entry maps to
    ``"no entry"``.
    """
    if active_channels is not None:
        unknown = [c for c in channels if c not in active_channels]
        if unknown:
            raise DataError(f"unknown channel(s) {unknown}")
    feats = tuple((c, kb.feature_descriptions.get(c, NO_ENTRY)) for c in channels)
    labels = []
    for k in sorted(set(candidate_classes)):
        name = schema.name(k)
        if name not in kb.label_descriptions:
            raise LabelError(f"knowledge base has no entry for class {name!r}")
        labels.append((name, kb.label_descriptions[name]))
    return KnowledgeExcerpt(feats, tuple(labels), tuple(kb.expert_guidelines))


def confusable_classes(base_probs, top: int = 2) -> list[int]:
    """Union of each depth's ``top`` most probable classes."""
    p = np.asarray(base_probs)
    ranked = np.argsort(-p, axis=1, kind="stable")[:, :top]
    return sorted({int(k) for k in ranked.ravel()})


# ------------------------------------------------------------------------- trend

STABLE, GRADUAL, BOUNDARY = "stable", "gradual-transition", "boundary"


@dataclass(frozen=True)
class ChannelTrend:
    channel: str
    slope: float
    mean: float
    std: float
    max_step: float
    regime: str


@dataclass(frozen=True)
class TrendSummary:
    delta: int
    segment_start: int
    segment_end: int
    channels: tuple[ChannelTrend, ...]


def ols_slope(y: np.ndarray) -> float:
    """Least-squares slope of ``y`` against its step index."""
    n = len(y)
    if n < 2:
        return 0.0
    x = np.arange(n, dtype=float)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def regime_tag(slope: float, std: float, max_step: float, n: int) -> str:
    if std > 0 and max_step > 3 * std:
        return BOUNDARY
    if abs(slope) * n > std:
        return GRADUAL
    return STABLE


def analyze_trend(seq: WellLogSequence, s: int, e: int, delta: int) -> TrendSummary:
    """Summarise ``[s-delta, e+delta]`` (clamped to the well) channel by channel."""
    if not 0 <= s <= e < seq.L:
        raise DataError(f"invalid window [{s}, {e}] for well of length {seq.L}")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    lo, hi = max(0, s - delta), min(seq.L - 1, e + delta)
    seg = seq.values[lo:hi + 1]
    out = []
    for j, name in enumerate(seq.channel_names):
        y = seg[:, j]
        slope = ols_slope(y)
        std = float(y.std())
        max_step = float(np.abs(np.diff(y)).max()) if len(y) > 1 else 0.0
        out.append(ChannelTrend(name, slope, float(y.mean()), std, max_step,
                                regime_tag(slope, std, max_step, len(y))))
    return TrendSummary(delta, lo, hi, tuple(out))


# --------------------------------------------------------------------- neighbours


@dataclass(frozen=True)
class Neighbor:
    index: int
    features: tuple[float, ...]
    label: int
    distance: float


NeighborSet = tuple[Neighbor, ...]


class NeighborIndex:
    """Exact Euclidean k-NN over a labelled reference set (ties: insertion order)."""

    def __init__(self, features, labels):
        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise DataError("reference set must be a non-empty 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("reference labels do not match reference rows")
        self._order = np.arange(self.features.shape[0])

    @classmethod
    def from_sequences(cls, seqs: Sequence[WellLogSequence]) -> "NeighborIndex":
        return cls(
            np.concatenate([s.values for s in seqs]),
            np.concatenate([s.labels for s in seqs]),
        )

    def distances(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=float)
        if q.shape != (self.features.shape[1],):
            raise DataError(f"query dimension {q.shape} != reference dimension {self.features.shape[1]}")
        return np.sqrt(((self.features - q) ** 2).sum(axis=1))

    def query(self, query, k: int) -> NeighborSet:
        if k < 1:
            raise ValueError("k must be positive")
        d = self.distances(query)
        n = d.size
        if k < n:
            kth = np.partition(d, k - 1)[k - 1]
            cand = np.flatnonzero(d <= kth)
        else:
            cand = self._order
        chosen = cand[np.lexsort((cand, d[cand]))][:k]
        return tuple(
            Neighbor(int(i), tuple(float(x) for x in self.features[i]), int(self.labels[i]), float(d[i]))
            for i in chosen
        )


def retrieve_neighbors(query, reference: NeighborIndex, k: int) -> NeighborSet:
    return reference.query(query, k)


# ----------------------------------------------------------------------- history


@dataclass(frozen=True)
class HistoryWindow:
    labels: tuple[int, ...]  # nearest first
    h: int


def gather_history(predictions_so_far: Mapping[int, int] | Sequence[int | None], s: int, h: int) -> HistoryWindow:
    """Labels at depths ``s-1, s-2, ... s-h`` (fewer at the top of the well)."""
    if h < 1:
        raise ValueError("h must be positive")
    out = []
    for t in range(s - 1, max(-1, s - h - 1), -1):
        try:
            lab = predictions_so_far[t]
        except (KeyError, IndexError):
            lab = None
        if lab is None:
            raise SequencingError(f"depth {t} has no prediction yet; windows must run top-down")
        out.append(int(lab))
    return HistoryWindow(tuple(out), h)


# ----------------------------------------------------------------------- profile

TOOLS = ("knowledge", "trend", "neighbors", "history")


@dataclass(frozen=True)
class ToolFlags:
    knowledge: bool = True
    trend: bool = True
    neighbors: bool = True
    history: bool = True

    @classmethod
    def none(cls) -> "ToolFlags":
        return cls(False, False, False, False)


@dataclass(frozen=True)
class EvidenceProfile:
    well_id: str
    start: int
    end: int
    depths: tuple[float, ...]
    channel_names: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]
    base_probs: tuple[tuple[float, ...], ...]
    flags: ToolFlags
    knowledge: KnowledgeExcerpt | None = None
    trend: TrendSummary | None = None
    neighbors: tuple[NeighborSet, ...] | None = None
    history: HistoryWindow | None = None

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    @property
    def indices(self) -> range:
        return range(self.start, self.end + 1)

    def base_argmax(self) -> list[int]:
        return [int(np.argmax(p)) for p in self.base_probs]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceProfile":
        def tup(x):
            return tuple(tup(v) for v in x) if isinstance(x, list) else x

        kn = d.get("knowledge")
        tr = d.get("trend")
        nb = d.get("neighbors")
        hi = d.get("history")
        return cls(
            well_id=d["well_id"], start=d["start"], end=d["end"],
            depths=tup(d["depths"]), channel_names=tup(d["channel_names"]),
            values=tup(d["values"]), base_probs=tup(d["base_probs"]),
            flags=ToolFlags(**d["flags"]),
            knowledge=None if kn is None else KnowledgeExcerpt(
                tup(kn["features"]), tup(kn["labels"]), tup(kn["guidelines"])),
            trend=None if tr is None else TrendSummary(
                tr["delta"], tr["segment_start"], tr["segment_end"],
                tuple(ChannelTrend(**c) for c in tr["channels"])),
            neighbors=None if nb is None else tuple(
                tuple(Neighbor(n["index"], tup(n["features"]), n["label"], n["distance"]) for n in ns)
                for ns in nb),
            history=None if hi is None else HistoryWindow(tup(hi["labels"]), hi["h"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "EvidenceProfile":
        return cls.from_dict(json.loads(text))


def build_evidence_profile(
    window: DepthWindow,
    base_probs,
    kb: KnowledgeExcerpt | None,
    trend: TrendSummary | None,
    neighbors: Sequence[NeighborSet] | None,
    history: HistoryWindow | None,
    flags: ToolFlags,
    raw_values=None,
) -> EvidenceProfile:
    """Assemble the profile; every enabled tool must be present and every disabled one absent."""
    given = {"knowledge": kb, "trend": trend, "neighbors": neighbors, "history": history}
    for tool in TOOLS:
        on, value = getattr(flags, tool), given[tool]
        if on and value is None:
            raise ProfileError(f"{tool} tool enabled but its evidence is missing")
        if not on and value is not None:
            raise ProfileError(f"{tool} tool disabled but evidence was supplied")
    probs = np.asarray(base_probs, dtype=float)
    if probs.shape[0] != window.width:
        raise ProfileError(f"{probs.shape[0]} probability rows for a window of {window.width}")
    if neighbors is not None and len(neighbors) != window.width:
        raise ProfileError("need one neighbour set per depth")
    src = window.source
    depths = tuple(float(x) for x in src.depths[window.start:window.end + 1]) if src is not None \
        else tuple(float(t) for t in window.indices)
    vals = np.asarray(window.features if raw_values is None else raw_values, dtype=float)
    names = src.channel_names if src is not None else tuple(f"ch{j}" for j in range(vals.shape[1]))
    return EvidenceProfile(
        well_id=window.well_id, start=window.start, end=window.end,
        depths=depths, channel_names=tuple(names),
        values=tuple(tuple(float(x) for x in row) for row in vals),
        base_probs=tuple(tuple(float(x) for x in row) for row in probs),
        flags=flags, knowledge=kb, trend=trend,
        neighbors=None if neighbors is None else tuple(tuple(ns) for ns in neighbors),
        history=history,
    )

