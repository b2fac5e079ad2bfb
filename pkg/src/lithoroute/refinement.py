"""Geological refinement of panel candidates, plus the run-length smoother and
flying-point metric it is checked against."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .backends import Backend, SamplingParams
from .data import LabelSchema
from .evidence import EvidenceProfile
from .reasoning import CandidatePrediction, Prompt, answer_instructions, parse_answer, sample_votes

LLM, DETERMINISTIC, BASE_PASSTHROUGH = "llm", "deterministic", "base-passthrough"

DEFAULT_GUIDELINES = (
    "Stratigraphic continuity: lithology changes in coherent beds; a single depth that "
    "differs from both neighbours is usually noise unless the logs jump sharply there.",
    "Transitions should be gradual between related facies; abrupt changes between very "
    "different lithologies need a matching step in the logs.",
    "When candidates disagree, prefer the label that agrees with the depths above and "
    "below and with the log values, not the one with the most isolated support.",
)


@dataclass(frozen=True)
class GeologyGuidelines:
    rules: tuple[str, ...] = DEFAULT_GUIDELINES
    min_run: int = 2

    def __post_init__(self):
        if self.min_run < 1:
            raise ValueError("min_run must be >= 1")


@dataclass(frozen=True)
class RefinedWindow:
    labels: tuple[int, ...]
    method: str
    rationale: str = ""
    raw: tuple[str, ...] = ()


def runs(labels: Sequence[int]) -> list[list[int]]:
    """Maximal runs as ``[label, length]`` pairs, top to bottom."""
    out: list[list[int]] = []
    for lab in labels:
        if out and out[-1][0] == lab:
            out[-1][1] += 1
        else:
            out.append([lab, 1])
    return out


def refine_deterministic(labels: Sequence[int], min_run: int = 2) -> list[int]:
    """Merge runs shorter than ``min_run`` into their longer neighbour until none remain.

    The shortest offending run is merged first (topmost on ties); when both
    neighbours are equally long the shallower one wins.
    """
    rs = runs(labels)
    while len(rs) > 1:
        short = [i for i, (_, n) in enumerate(rs) if n < min_run]
        if not short:
            break
        i = min(short, key=lambda j: (rs[j][1], j))
        above = rs[i - 1][1] if i > 0 else -1
        below = rs[i + 1][1] if i + 1 < len(rs) else -1
        target = i - 1 if above >= below else i + 1
        rs[target][1] += rs[i][1]
        del rs[i]
        # re-merge neighbours that now carry the same label
        merged: list[list[int]] = []
        for lab, n in rs:
            if merged and merged[-1][0] == lab:
                merged[-1][1] += n
            else:
                merged.append([lab, n])
        rs = merged
    return [lab for lab, n in rs for _ in range(n)]


def flying_point_ratio(labels: Sequence[int]) -> float:
    """Fraction of depths whose label differs from every neighbour (runs of length 1).

    A one-sample sequence has no neighbour and scores 0.
    """
    y = list(labels)
    n = len(y)
    if n == 0:
        raise ValueError("empty label sequence")
    if n == 1:
        return 0.0
    isolated = 0
    for i in range(n):
        up = i == 0 or y[i - 1] != y[i]
        down = i == n - 1 or y[i + 1] != y[i]
        isolated += up and down
    return isolated / n


def plurality(candidates: Sequence[CandidatePrediction], base_probs) -> list[int]:
    """Per-depth most common candidate label; ties go to the higher base probability."""
    width = len(base_probs)
    out = []
    for i in range(width):
        counts: dict[int, int] = {}
        for c in candidates:
            counts[c.labels[i]] = counts.get(c.labels[i], 0) + 1
        top = max(counts.values())
        tied = [lab for lab, n in counts.items() if n == top]
        out.append(max(tied, key=lambda lab: (base_probs[i][lab], -lab)))
    return out


def render_refinement_prompt(
    profile: EvidenceProfile,
    candidates: Sequence[CandidatePrediction],
    guidelines: GeologyGuidelines,
    schema: LabelSchema,
) -> Prompt:
    system = (
        "You are the geological refinement stage of a lithology interpretation workflow. "
        "Several analysts proposed labels for the same depth window. Resolve their "
        "disagreements so the final sequence respects the logs and the geological "
        "principles listed, then give the machine-readable answer block."
    )
    rows = [f"## WINDOW well={profile.well_id} depth_indices={profile.start}..{profile.end}"]
    for i, t in enumerate(profile.indices):
        vals = " ".join(f"{c}={v:.4g}" for c, v in zip(profile.channel_names, profile.values[i]))
        rows.append(f"t={t} depth={profile.depths[i]:.4g} | {vals}")
    rows.append("")
    rows.append("## CANDIDATES")
    for i, t in enumerate(profile.indices):
        rows.append(f"t={t}: " + "; ".join(f"{c.persona}={schema.name(c.labels[i])}" for c in candidates))
    rows.append("")
    rows.append("## GUIDELINES")
    rows += [f"{i}. {g}" for i, g in enumerate(guidelines.rules, start=1)]
    rows.append("")
    rows.append(answer_instructions(list(profile.indices), schema))
    return Prompt(system, "\n".join(rows) + "\n")


def refine_llm(
    backend: Backend,
    profile: EvidenceProfile,
    candidates: Sequence[CandidatePrediction],
    guidelines: GeologyGuidelines,
    params: SamplingParams,
    schema: LabelSchema,
) -> RefinedWindow:
    """Resolve persona candidates through the backend.

    Unanimous candidates skip the call. An unparseable answer falls back to
    smoothing the candidate plurality; with no parseable candidate at all the
    base argmax is smoothed instead.
    """
    usable = [c for c in candidates if c.parsed]
    if not usable:
        labels = refine_deterministic(profile.base_argmax(), guidelines.min_run)
        return RefinedWindow(tuple(labels), DETERMINISTIC, "no parseable candidate; smoothed base argmax")
    if all(c.labels == usable[0].labels for c in usable):
        return RefinedWindow(tuple(usable[0].labels), DETERMINISTIC, "candidates unanimous; no call made")
    prompt = render_refinement_prompt(profile, usable, guidelines, schema)
    indices = list(profile.indices)
    votes = sample_votes(
        backend, prompt, params, lambda txt: parse_answer(txt, indices, schema), profile.base_probs
    )
    if votes.labels is None:
        labels = refine_deterministic(plurality(usable, profile.base_probs), guidelines.min_run)
        return RefinedWindow(tuple(labels), DETERMINISTIC,
                             "refinement answer unparseable; smoothed candidate plurality", tuple(votes.raw))
    return RefinedWindow(tuple(votes.labels), LLM, votes.rationale, tuple(votes.raw))

