"""Three-persona reasoning panel over an evidence profile."""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .backends import Backend, SamplingParams
from .data import LabelSchema
from .evidence import EvidenceProfile

# section identifiers, also the order used when nothing is emphasised
WINDOW, KNOWLEDGE, TREND, NEIGHBORS, HISTORY = "WINDOW", "KNOWLEDGE", "TREND", "NEIGHBORS", "HISTORY"
DEFAULT_ORDER = (WINDOW, KNOWLEDGE, TREND, NEIGHBORS, HISTORY)
# first dropped first; WINDOW (raw values) is never dropped
DROP_ORDER = (NEIGHBORS, KNOWLEDGE, TREND, HISTORY)

FORMAT_REMINDER = (
    "\n\nREMINDER: your reply MUST end with a fenced block opened by ```answer "
    "containing exactly one line `depth_index: LABEL_NAME` for every depth index listed, "
    "using only the allowed label names."
)


@dataclass(frozen=True)
class Persona:
    name: str
    key: str
    emphasis: str
    primary_sections: tuple[str, ...]
    template: str


PERSONAS: tuple[Persona, ...] = (
    Persona(
        "DataCentricAnalyst", "analyst",
        "Weigh the statistical evidence first: the base classifier's probabilities and the "
        "labels of the most similar reference samples. Prefer the label those numbers support.",
        (WINDOW, NEIGHBORS), "panel/analyst",
    ),
    Persona(
        "ContextAwareStratigrapher", "stratigrapher",
        "Reason from vertical context: how each log evolves across and around the window, "
        "and which lithologies were assigned immediately above. Keep the sequence continuous "
        "unless the logs show a clear boundary.",
        (TREND, HISTORY), "panel/stratigrapher",
    ),
    Persona(
        "RuleBasedPhysicist", "physicist",
        "Apply petrophysical rules: check every candidate label against the physical meaning "
        "of each log and the expert guidelines, and reject labels whose log response is "
        "physically implausible.",
        (KNOWLEDGE,), "panel/physicist",
    ),
)
PERSONA_BY_KEY = {p.key: p for p in PERSONAS}


@dataclass(frozen=True)
class Prompt:
    system: str
    user: str
    dropped: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def answer_instructions(indices: Sequence[int], schema: LabelSchema) -> str:
    lines = "\n".join(f"{t}: <LABEL>" for t in indices)
    return (
        "Allowed labels: " + ", ".join(schema.class_names) + ".\n"
        "Finish with one fenced block opened by ```answer that holds exactly one line "
        "`depth_index: LABEL_NAME` per depth, for these depth indices:\n"
        f"```answer\n{lines}\n```"
    )


def render_sections(profile: EvidenceProfile, schema: LabelSchema) -> dict[str, str]:
    """Text for every section the profile can supply."""
    out = {}
    rows = [f"## {WINDOW} well={profile.well_id} depth_indices={profile.start}..{profile.end}"]
    for i, t in enumerate(profile.indices):
        vals = " ".join(f"{c}={_fmt(v)}" for c, v in zip(profile.channel_names, profile.values[i]))
        probs = "; ".join(f"{n}={p:.4f}" for n, p in zip(schema.class_names, profile.base_probs[i]))
        rows.append(f"t={t} depth={_fmt(profile.depths[i])} | {vals} | probs {probs}")
    out[WINDOW] = "\n".join(rows)
    if profile.knowledge is not None:
        kn = profile.knowledge
        rows = [f"## {KNOWLEDGE}", "Logs:"]
        rows += [f"- {name}: {text}" for name, text in kn.features]
        rows.append("Candidate lithologies:")
        rows += [f"- {name}: {text}" for name, text in kn.labels]
        rows.append("Guidelines:")
        rows += [f"{i}. {g}" for i, g in enumerate(kn.guidelines, start=1)]
        out[KNOWLEDGE] = "\n".join(rows)
    if profile.trend is not None:
        tr = profile.trend
        rows = [f"## {TREND} context={tr.delta} segment={tr.segment_start}..{tr.segment_end}"]
        rows += [
            f"{c.channel}: regime={c.regime} slope={_fmt(c.slope)}/step mean={_fmt(c.mean)} "
            f"std={_fmt(c.std)} max_step={_fmt(c.max_step)}"
            for c in tr.channels
        ]
        out[TREND] = "\n".join(rows)
    if profile.neighbors is not None:
        rows = [f"## {NEIGHBORS} nearest training samples (z-scored distance)"]
        for t, ns in zip(profile.indices, profile.neighbors):
            rows.append(f"t={t}: " + "; ".join(f"{schema.name(n.label)}(d={n.distance:.3f})" for n in ns))
        out[NEIGHBORS] = "\n".join(rows)
    if profile.history is not None:
        labs = ", ".join(schema.name(k) for k in profile.history.labels) or "(top of well)"
        out[HISTORY] = f"## {HISTORY} labels directly above, nearest first\n{labs}"
    return out


def render_persona_prompt(
    persona: Persona,
    profile: EvidenceProfile,
    schema: LabelSchema,
    char_budget: int | None = None,
) -> Prompt:
    sections = render_sections(profile, schema)
    warnings = [
        f"{persona.name}: profile lacks its {s} section" for s in persona.primary_sections if s not in sections
    ]
    order = [s for s in persona.primary_sections if s in sections]
    order += [s for s in DEFAULT_ORDER if s in sections and s not in order]
    system = (
        f"You are the {persona.name}, one member of a lithology interpretation panel. "
        f"{persona.emphasis}\n"
        "Label every listed depth with exactly one lithology from the allowed list. "
        "Give a short rationale, then the machine-readable answer block."
    )
    tail = answer_instructions(list(profile.indices), schema)

    def assemble(keep: list[str]) -> str:
        return "\n\n".join([*(sections[s] for s in keep), tail]) + "\n"

    dropped = []
    user = assemble(order)
    if char_budget is not None:
        for s in DROP_ORDER:
            if len(system) + len(user) <= char_budget:
                break
            if s in order:
                order.remove(s)
                dropped.append(s)
                user = assemble(order)
        if len(system) + len(user) > char_budget:
            warnings.append("prompt exceeds character budget with only raw values left")
    return Prompt(system, user, tuple(dropped), tuple(warnings))


_BLOCK = re.compile(r"```answer[ \t]*\n(.*?)```", re.S)
_LINE = re.compile(r"^\s*(\d+)\s*:\s*(.+?)\s*$")


def parse_answer(text: str, indices: Sequence[int], schema: LabelSchema) -> list[int] | None:
    """Labels from the last ```answer block, or None unless it covers exactly ``indices``."""
    blocks = _BLOCK.findall(text or "")
    if not blocks:
        return None
    lookup = {n.lower(): i for i, n in enumerate(schema.class_names)}
    got: dict[int, int] = {}
    for line in blocks[-1].splitlines():
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            return None
        t, name = int(m.group(1)), m.group(2).lower()
        if name not in lookup or t in got:
            return None
        got[t] = lookup[name]
    if sorted(got) != sorted(indices):
        return None
    return [got[t] for t in indices]


def rationale_of(text: str) -> str:
    return _BLOCK.sub("", text or "").strip()


def majority(runs: Sequence[Sequence[int]], tie_scores) -> list[int]:
    """Per-depth majority across runs; ties go to the higher ``tie_scores[i][label]``."""
    out = []
    for i, column in enumerate(zip(*runs)):
        counts: dict[int, int] = {}
        for lab in column:
            counts[lab] = counts.get(lab, 0) + 1
        top = max(counts.values())
        tied = [lab for lab, c in counts.items() if c == top]
        out.append(max(tied, key=lambda lab: (tie_scores[i][lab], -lab)))
    return out


@dataclass
class VoteResult:
    labels: list[int] | None
    raw: list[str] = field(default_factory=list)
    failed_runs: int = 0
    rationale: str = ""


def sample_votes(
    backend: Backend,
    prompt: Prompt,
    params: SamplingParams,
    parse: Callable[[str], list[int] | None],
    tie_scores,
) -> VoteResult:
    """``params.votes`` completions (seed + run), each retried once with a format reminder."""
    res = VoteResult(None)
    parsed = []
    for run in range(params.votes):
        p = replace(params, seed=params.seed + run)
        text = backend.complete(prompt.system, prompt.user, p)
        res.raw.append(text)
        labels = parse(text)
        if labels is None:
            text = backend.complete(prompt.system, prompt.user + FORMAT_REMINDER, p)
            res.raw.append(text)
            labels = parse(text)
        if labels is None:
            res.failed_runs += 1
            continue
        if not parsed:
            res.rationale = rationale_of(text)
        parsed.append(labels)
    if parsed:
        res.labels = majority(parsed, tie_scores)
    return res


OK, PARTIAL, FAILED = "ok", "partial", "failed"


@dataclass(frozen=True)
class CandidatePrediction:
    persona: str
    labels: tuple[int, ...]
    rationale: str
    raw: tuple[str, ...]
    status: str
    warnings: tuple[str, ...] = ()
    dropped_sections: tuple[str, ...] = ()

    @property
    def parsed(self) -> bool:
        return self.status != FAILED


def infer_persona(
    backend: Backend,
    persona: Persona,
    profile: EvidenceProfile,
    params: SamplingParams,
    schema: LabelSchema,
    char_budget: int | None = None,
) -> CandidatePrediction:
    prompt = render_persona_prompt(persona, profile, schema, char_budget)
    indices = list(profile.indices)
    votes = sample_votes(
        backend, prompt, params, lambda txt: parse_answer(txt, indices, schema), profile.base_probs
    )
    if votes.labels is None:
        return CandidatePrediction(
            persona.name, tuple(profile.base_argmax()),
            "fallback: no parseable answer, base classifier argmax used",
            tuple(votes.raw), FAILED, prompt.warnings, prompt.dropped,
        )
    status = PARTIAL if votes.failed_runs else OK
    return CandidatePrediction(
        persona.name, tuple(votes.labels), votes.rationale, tuple(votes.raw), status,
        prompt.warnings, prompt.dropped,
    )


def select_personas(keys: Sequence[str] | None = None) -> tuple[Persona, ...]:
    if keys is None:
        return PERSONAS
    unknown = [k for k in keys if k not in PERSONA_BY_KEY]
    if unknown:
        raise ValueError(f"unknown persona(s) {unknown}; choose from {list(PERSONA_BY_KEY)}")
    return tuple(p for p in PERSONAS if p.key in keys)


def run_panel(
    backend: Backend,
    profile: EvidenceProfile,
    params: SamplingParams,
    schema: LabelSchema,
    personas: Sequence[Persona] = PERSONAS,
    char_budget: int | None = None,
    executor: ThreadPoolExecutor | None = None,
) -> list[CandidatePrediction]:
    """One candidate per persona, in panel order. Persona failures never abort the panel."""
    def one(p: Persona) -> CandidatePrediction:
        return infer_persona(backend, p, profile, params, schema, char_budget)

    if executor is None:
        return [one(p) for p in personas]
    return list(executor.map(one, personas))


def candidate_matrix(candidates: Sequence[CandidatePrediction]) -> np.ndarray:
    return np.array([c.labels for c in candidates], dtype=np.int64)
