import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ABC, make_seq
from lithoroute.config import RESOURCES
from lithoroute.data import LabelSchema, load_mapping, window
from lithoroute.errors import DataError, LabelError, ProfileError, SequencingError
from lithoroute.evidence import (
    BOUNDARY,
    GRADUAL,
    NO_ENTRY,
    STABLE,
    EvidenceProfile,
    NeighborIndex,
    ToolFlags,
    analyze_trend,
    build_evidence_profile,
    confusable_classes,
    gather_history,
    kb_lookup,
    load_knowledge_base,
    ols_slope,
    parse_knowledge_base,
    retrieve_neighbors,
)

KB_TEXT = """\
# comment
FEATURE GR
Gamma ray.
FEATURE RHOB
Bulk density.
LABEL A
Sand.
LABEL B
Shale.
LABEL C
Lime.
GUIDELINE 2
Second rule.
GUIDELINE 10
Tenth rule.
GUIDELINE 1
First rule,
continued.
"""


def oracle_slope(y):
    n = len(y)
    xbar = (n - 1) / 2
    ybar = sum(y) / n
    num = sum((i - xbar) * (v - ybar) for i, v in enumerate(y))
    den = sum((i - xbar) ** 2 for i in range(n))
    return num / den


# ------------------------------------------------------------------ knowledge


def test_parse_knowledge_base():
    kb = parse_knowledge_base(KB_TEXT)
    assert kb.feature_descriptions == {"GR": "Gamma ray.", "RHOB": "Bulk density."}
    assert kb.expert_guidelines == ("First rule, continued.", "Second rule.", "Tenth rule.")


def test_duplicate_header_rejected():
    with pytest.raises(DataError, match="duplicate"):
        parse_knowledge_base("LABEL A\nx\nLABEL A\ny\n")


def test_kb_lookup_selection():
    kb = parse_knowledge_base(KB_TEXT)
    ex = kb_lookup(kb, ABC, ["GR"], [])
    assert ex.features == (("GR", "Gamma ray."),) and ex.labels == ()
    assert len(ex.guidelines) == 3
    ex = kb_lookup(kb, ABC, ["GR", "RHOB", "NPHI"], [2, 0], active_channels=["GR", "RHOB", "NPHI"])
    assert [n for n, _ in ex.labels] == ["A", "C"]
    assert ex.features[2] == ("NPHI", NO_ENTRY)
    assert kb_lookup(kb, ABC, ["GR"], [1, 2]) == kb_lookup(kb, ABC, ["GR"], [1, 2])


def test_kb_lookup_errors():
    kb = parse_knowledge_base(KB_TEXT)
    with pytest.raises(DataError, match="DT"):
        kb_lookup(kb, ABC, ["DT"], [], active_channels=["GR"])
    with pytest.raises(LabelError):
        kb_lookup(kb, LabelSchema(("A", "Z")), ["GR"], [1])


def test_starter_kb_covers_facies_schema():
    kb = load_knowledge_base(RESOURCES / "facies_kb.txt")
    mapping = load_mapping(RESOURCES / "facies_schema.ini")
    assert kb.validate(list(mapping.channels), mapping.labels) == []
    ex = kb_lookup(kb, mapping.labels, ["GR"], [0, 8])
    assert [n for n, _ in ex.labels] == ["SS", "BS"]


def test_confusable_classes():
    p = [[0.5, 0.3, 0.2, 0.0], [0.1, 0.1, 0.2, 0.6]]
    assert confusable_classes(p) == [0, 1, 2, 3]
    assert confusable_classes(p, top=1) == [0, 3]


# ---------------------------------------------------------------------- trend


def test_constant_channel_is_stable():
    tr = analyze_trend(make_seq(np.full(20, 3.0)), 5, 8, 4)
    c = tr.channels[0]
    assert (c.slope, c.std, c.regime) == (0.0, 0.0, STABLE)
    assert (tr.segment_start, tr.segment_end) == (1, 12)


def test_linear_segment_slope_one():
    seq = make_seq(np.arange(1.0, 6.0))
    c = analyze_trend(seq, 1, 3, 1).channels[0]
    assert c.slope == pytest.approx(1.0, abs=1e-12)
    assert c.regime == GRADUAL


def test_step_at_e_plus_one_is_boundary():
    # window [0, 8], delta 1: the segment is 10 samples and the jump sits at e+1 = 9
    values = np.r_[np.zeros(9), 10.0, np.full(5, 10.0)]
    tr = analyze_trend(make_seq(values), 0, 8, 1)
    assert (tr.segment_start, tr.segment_end) == (0, 9)
    c = tr.channels[0]
    assert c.max_step == 10.0 and c.max_step > 3 * c.std
    assert c.regime == BOUNDARY


def test_context_clamped_at_edges():
    seq = make_seq(np.arange(10.0))
    tr = analyze_trend(seq, 0, 2, 5)
    assert (tr.segment_start, tr.segment_end) == (0, 7)
    tr = analyze_trend(seq, 8, 9, 5)
    assert (tr.segment_start, tr.segment_end) == (3, 9)


def test_trend_errors():
    seq = make_seq(np.arange(10.0))
    with pytest.raises(DataError):
        analyze_trend(seq, 5, 3, 1)
    with pytest.raises(DataError):
        analyze_trend(seq, 0, 10, 1)
    with pytest.raises(ValueError):
        analyze_trend(seq, 0, 2, -1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_ols_slope_matches_closed_form(y):
    assert math.isclose(ols_slope(np.array(y)), oracle_slope(y), rel_tol=1e-9, abs_tol=1e-9)


def test_delta_zero_ignores_context():
    rng = np.random.default_rng(0)
    values = rng.normal(size=(30, 3))
    a = analyze_trend(make_seq(values), 10, 17, 0)
    mutated = values.copy()
    mutated[:10] = rng.normal(size=(10, 3)) * 100
    mutated[18:] = -mutated[18:]
    assert analyze_trend(make_seq(mutated), 10, 17, 0) == a


# ------------------------------------------------------------------ neighbours


def brute_force(ref, q, k):
    d = [(math.dist(r, q), i) for i, r in enumerate(ref)]
    return [i for _, i in sorted(d)[:k]]


def test_neighbor_examples():
    ref = [(0.0, 0.0), (1.0, 0.0), (0.0, 2.0), (3.0, 3.0), (-1.0, -1.0)]
    index = NeighborIndex(ref, [0, 1, 2, 0, 1])
    hit = retrieve_neighbors((1.0, 0.0), index, 1)
    assert hit[0].index == 1 and hit[0].distance == 0.0
    got = retrieve_neighbors((0.2, 0.1), index, 3)
    assert [n.index for n in got] == brute_force(ref, (0.2, 0.1), 3)
    small = NeighborIndex(ref[:4], [0, 1, 2, 0])
    got = retrieve_neighbors((0.0, 0.0), small, 10)
    assert len(got) == 4 and [n.distance for n in got] == sorted(n.distance for n in got)


def test_neighbor_ties_follow_insertion_order():
    index = NeighborIndex([(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)], [0, 1, 2, 0])
    assert [n.index for n in retrieve_neighbors((0.0, 0.0), index, 3)] == [0, 1, 2]


def test_neighbor_errors():
    index = NeighborIndex([(0.0, 0.0)], [0])
    with pytest.raises(DataError):
        retrieve_neighbors((0.0, 0.0, 0.0), index, 1)
    with pytest.raises(DataError):
        NeighborIndex(np.zeros((0, 2)), [])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 6), st.integers(1, 12), st.integers(0, 2**31))
def test_neighbors_match_brute_force(n, dim, k, seed):
    rng = np.random.default_rng(seed)
    # coarse integer grid makes ties common
    ref = rng.integers(-3, 4, size=(n, dim)).astype(float)
    q = rng.integers(-3, 4, size=dim).astype(float)
    got = retrieve_neighbors(q, NeighborIndex(ref, np.zeros(n, dtype=int)), k)
    assert [g.index for g in got] == brute_force(ref.tolist(), q.tolist(), k)


# -------------------------------------------------------------------- history


def test_history_examples():
    assert gather_history({}, 0, 4).labels == ()
    assert gather_history([0, 1, 2], 3, 4).labels == (2, 1, 0)
    assert gather_history(list(range(3)) * 4, 10, 4).labels == (0, 2, 1, 0)


@given(st.integers(0, 30), st.integers(1, 10))
def test_history_length(s, h):
    assert len(gather_history([0] * s, s, h).labels) == min(s, h)


def test_history_missing_prediction_is_sequencing_error():
    with pytest.raises(SequencingError):
        gather_history([0, None, 1], 3, 4)
    with pytest.raises(SequencingError):
        gather_history({0: 1}, 3, 4)


# -------------------------------------------------------------------- profile


def full_profile():
    seq = make_seq(np.random.default_rng(1).normal(size=(12, 2)), labels=[0, 1, 2] * 4, channels=("GR", "RHOB"))
    w = window(seq, 4, 7)
    probs = np.full((4, 3), 1 / 3)
    kb = kb_lookup(parse_knowledge_base(KB_TEXT), ABC, seq.channel_names, [0, 1])
    tr = analyze_trend(seq, 4, 7, 2)
    index = NeighborIndex.from_sequences([seq])
    nb = [index.query(seq.values[t], 2) for t in w.indices]
    hist = gather_history([0, 1, 2, 0], 4, 4)
    return w, probs, kb, tr, nb, hist


def test_full_profile_round_trips():
    w, probs, kb, tr, nb, hist = full_profile()
    p = build_evidence_profile(w, probs, kb, tr, nb, hist, ToolFlags())
    assert EvidenceProfile.from_json(p.to_json()) == p
    assert p.width == 4 and list(p.indices) == [4, 5, 6, 7]


def test_ablated_profile_has_only_values_and_probs():
    w, probs, *_ = full_profile()
    p = build_evidence_profile(w, probs, None, None, None, None, ToolFlags.none())
    assert (p.knowledge, p.trend, p.neighbors, p.history) == (None, None, None, None)
    assert len(p.values) == 4 and len(p.base_probs) == 4
    assert EvidenceProfile.from_json(p.to_json()) == p


def test_flag_field_mismatch():
    w, probs, kb, tr, nb, hist = full_profile()
    with pytest.raises(ProfileError, match="history"):
        build_evidence_profile(w, probs, kb, tr, nb, None, ToolFlags())
    with pytest.raises(ProfileError, match="trend"):
        build_evidence_profile(w, probs, None, tr, None, None, ToolFlags.none())
    with pytest.raises(ProfileError):
        build_evidence_profile(w, probs[:2], None, None, None, None, ToolFlags.none())


def test_profile_uses_raw_values_when_given():
    w, probs, *_ = full_profile()
    raw = np.arange(8.0).reshape(4, 2)
    p = build_evidence_profile(w, probs, None, None, None, None, ToolFlags.none(), raw_values=raw)
    assert p.values[1] == (2.0, 3.0)
    assert p.depths == tuple(float(d) for d in w.source.depths[4:8])
