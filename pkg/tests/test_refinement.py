import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ABC, make_seq
from lithoroute.backends import MockBackend, SamplingParams
from lithoroute.data import window
from lithoroute.evidence import ToolFlags, build_evidence_profile
from lithoroute.reasoning import FAILED, OK, CandidatePrediction
from lithoroute.refinement import (
    DETERMINISTIC,
    LLM,
    GeologyGuidelines,
    flying_point_ratio,
    plurality,
    refine_deterministic,
    refine_llm,
    render_refinement_prompt,
    runs,
)

PARAMS = SamplingParams(votes=3)
labels_st = st.lists(st.integers(0, 4), min_size=1, max_size=60)


def naive_fpr(y):
    if len(y) == 1:
        return 0.0
    iso = [i for i in range(len(y))
           if (i == 0 or y[i - 1] != y[i]) and (i == len(y) - 1 or y[i + 1] != y[i])]
    return len(iso) / len(y)


def test_isolated_point_is_absorbed():
    y = [0, 0, 1, 0, 0]
    assert flying_point_ratio(y) == 0.2
    assert refine_deterministic(y) == [0] * 5
    assert flying_point_ratio(refine_deterministic(y)) == 0.0


def test_alternating_and_trivial_sequences():
    assert flying_point_ratio([0, 1] * 5) == 1.0
    assert flying_point_ratio([2]) == 0.0
    assert refine_deterministic([2]) == [2]
    with pytest.raises(ValueError):
        flying_point_ratio([])


def test_runs():
    assert runs([1, 1, 0, 2, 2, 2]) == [[1, 2], [0, 1], [2, 3]]


def test_longer_neighbour_wins():
    assert refine_deterministic([0, 0, 0, 1, 2, 2]) == [0, 0, 0, 0, 2, 2]
    assert refine_deterministic([0, 1, 2, 2, 2]) == [1, 1, 2, 2, 2]  # topmost short run merges first


@settings(max_examples=200, deadline=None)
@given(labels_st)
def test_fpr_matches_naive(y):
    assert flying_point_ratio(y) == naive_fpr(y)


@settings(max_examples=200, deadline=None)
@given(labels_st, st.integers(1, 5))
def test_smoother_properties(y, r):
    out = refine_deterministic(y, r)
    assert len(out) == len(y)
    assert set(out) <= set(y)
    assert refine_deterministic(out, r) == out
    if len(y) >= r:
        assert all(n >= r for _, n in runs(out))
    if r >= 2:
        assert flying_point_ratio(out) == 0.0


@settings(max_examples=100, deadline=None)
@given(labels_st, st.permutations(range(5)))
def test_smoother_is_label_equivariant(y, perm):
    assert refine_deterministic([perm[v] for v in y]) == [perm[v] for v in refine_deterministic(y)]


# ------------------------------------------------------------------------ llm


def profile(probs=None):
    seq = make_seq(np.random.default_rng(0).normal(size=(12, 2)), labels=[0, 1, 2, 0] * 3)
    probs = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.1, 0.2, 0.7], [0.5, 0.3, 0.2]]) if probs is None else probs
    return build_evidence_profile(window(seq, 4, 7), probs, None, None, None, None, ToolFlags.none())


def cand(name, labels, status=OK):
    return CandidatePrediction(name, tuple(labels), "", (), status)


class Scripted:
    def __init__(self, *responses):
        self.responses = responses
        self.calls = 0

    def complete(self, system, user, params):
        self.calls += 1
        return self.responses[(self.calls - 1) % len(self.responses)]


def answer(labels):
    return "```answer\n" + "\n".join(f"{4 + i}: {lab}" for i, lab in enumerate(labels)) + "\n```"


def test_unanimous_candidates_skip_the_call():
    b = Scripted(answer("CCCC"))
    cands = [cand(n, [0, 0, 1, 1]) for n in "xyz"]
    r = refine_llm(b, profile(), cands, GeologyGuidelines(), PARAMS, ABC)
    assert r.labels == (0, 0, 1, 1) and r.method == DETERMINISTIC and b.calls == 0


def test_valid_refinement_is_tagged_llm():
    b = Scripted(answer("BBCC"))
    cands = [cand("x", [0, 1, 2, 2]), cand("y", [1, 1, 2, 2]), cand("z", [1, 1, 2, 0])]
    r = refine_llm(b, profile(), cands, GeologyGuidelines(), PARAMS, ABC)
    assert r.labels == (1, 1, 2, 2) and r.method == LLM and b.calls == 3


def test_malformed_refinement_falls_back_to_smoothed_plurality():
    b = Scripted("no block")
    cands = [cand("x", [0, 0, 2, 0]), cand("y", [0, 0, 1, 0]), cand("z", [0, 0, 1, 0])]
    r = refine_llm(b, profile(), cands, GeologyGuidelines(min_run=2), PARAMS, ABC)
    assert r.method == DETERMINISTIC and r.labels == (0, 0, 0, 0)
    assert b.calls == 6  # each vote retried once


def test_no_parseable_candidate_uses_base_argmax():
    cands = [cand(n, [0, 1, 2, 0], FAILED) for n in "xyz"]
    r = refine_llm(Scripted("unused"), profile(), cands, GeologyGuidelines(min_run=1), PARAMS, ABC)
    assert r.labels == (0, 1, 2, 0) and r.method == DETERMINISTIC


def test_plurality_ties_use_base_probability():
    cands = [cand("x", [0, 2, 2, 1]), cand("y", [1, 1, 2, 0])]
    assert plurality(cands, profile().base_probs) == [0, 1, 2, 0]


def test_mock_refinement_takes_candidate_plurality():
    cands = [cand("x", [0, 1, 2, 0]), cand("y", [0, 1, 1, 0]), cand("z", [1, 1, 1, 0])]
    r = refine_llm(MockBackend(), profile(), cands, GeologyGuidelines(), PARAMS, ABC)
    assert r.method == LLM and r.labels == (0, 1, 1, 0)
    prompt = render_refinement_prompt(profile(), cands, GeologyGuidelines(), ABC)
    assert "## CANDIDATES" in prompt.user and "t=6: x=C; y=B; z=B" in prompt.user
