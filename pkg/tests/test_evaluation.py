import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lithoroute.errors import LabelError
from lithoroute.evaluation import (
    ConfusionStats,
    MetricsReport,
    accumulate,
    build_report,
    compare_runs,
    confusion_from_labels,
    parse_comparison,
    weighted_metrics,
    write_report,
)


def oracle(matrix):
    """Weighted P/R/F1 by direct formula evaluation over a list-of-lists matrix."""
    K = len(matrix)
    total = sum(sum(r) for r in matrix)
    P = R = F = 0.0
    for k in range(K):
        tp = matrix[k][k]
        col = sum(matrix[i][k] for i in range(K))
        row = sum(matrix[k])
        p = tp / col if col else 0.0
        r = tp / row if row else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        P += row / total * p
        R += row / total * r
        F += row / total * f
    return P, R, F


def test_accumulate():
    c = accumulate(ConfusionStats.empty(3), 0, 0)
    assert c.matrix[0, 0] == 1 and c.total == 1
    for _ in range(9):
        c = accumulate(c, 1, 2)
    assert c.total == 10
    with pytest.raises(LabelError):
        accumulate(c, 3, 0)


def test_accumulate_matches_tally():
    rng = np.random.default_rng(0)
    pairs = rng.integers(0, 4, size=(50, 2))
    c = ConfusionStats.empty(4)
    tally = [[0] * 4 for _ in range(4)]
    for t, p in pairs:
        c = accumulate(c, int(t), int(p))
        tally[t][p] += 1
    assert c.matrix.tolist() == tally
    assert confusion_from_labels(pairs[:, 0], pairs[:, 1], 4).matrix.tolist() == tally


def test_perfect_diagonal():
    w = weighted_metrics(ConfusionStats(np.diag([3, 5, 2])))
    assert (w.precision, w.recall, w.f1) == (1.0, 1.0, 1.0)


def test_two_class_hand_example():
    m = [[8, 2], [3, 7]]
    w = weighted_metrics(ConfusionStats(np.array(m)))
    # by hand: class 0 p=8/11 r=0.8, class 1 p=7/9 r=0.7, equal supports
    f0 = 2 * (8 / 11) * 0.8 / (8 / 11 + 0.8)
    f1 = 2 * (7 / 9) * 0.7 / (7 / 9 + 0.7)
    assert abs(w.f1 - (f0 + f1) / 2) < 1e-12
    assert all(abs(a - b) < 1e-9 for a, b in zip((w.precision, w.recall, w.f1), oracle(m)))


def test_zero_support_class_has_no_weight():
    m = np.array([[4, 1, 0], [2, 3, 0], [0, 0, 0]])
    w = weighted_metrics(ConfusionStats(m))
    assert w.per_class[2].support == 0
    assert abs(w.f1 - oracle(m.tolist())[2]) < 1e-12


def test_never_predicted_class_noted():
    w = weighted_metrics(ConfusionStats(np.array([[2, 0], [1, 0]])))
    assert w.per_class[1].precision == 0.0
    assert any("never predicted" in n for n in w.notes)


def test_empty_matrix_errors():
    with pytest.raises(ValueError):
        weighted_metrics(ConfusionStats.empty(3))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6).flatmap(
    lambda K: st.lists(st.lists(st.integers(0, 30), min_size=K, max_size=K), min_size=K, max_size=K)
).filter(lambda m: sum(map(sum, m)) > 0))
def test_metrics_match_oracle_and_recall_is_accuracy(m):
    w = weighted_metrics(ConfusionStats(np.array(m)))
    P, R, F = oracle(m)
    assert abs(w.precision - P) < 1e-9 and abs(w.recall - R) < 1e-9 and abs(w.f1 - F) < 1e-9
    acc = sum(m[k][k] for k in range(len(m))) / sum(map(sum, m))
    assert abs(w.recall - acc) < 1e-9
    for v in (w.precision, w.recall, w.f1):
        assert 0.0 <= v <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=40), st.permutations(range(4)))
def test_metrics_invariant_under_relabeling(pairs, perm):
    t = [a for a, _ in pairs]
    p = [b for _, b in pairs]
    a = weighted_metrics(confusion_from_labels(t, p, 4))
    b = weighted_metrics(confusion_from_labels([perm[x] for x in t], [perm[x] for x in p], 4))
    assert abs(a.f1 - b.f1) < 1e-12 and abs(a.precision - b.precision) < 1e-12


def report(f1, fpr=None):
    return MetricsReport(f1, f1, f1, {}, flying_point_ratio=fpr)


def test_compare_single_and_best_flag():
    one = parse_comparison(compare_runs([("only", report(0.5))]))
    assert len(one) == 1 and one[0]["f1"].endswith("*")
    rows = parse_comparison(compare_runs([("full", report(0.5254)), ("w/o refinement", report(0.5135))]))
    assert rows[0]["f1"] == "0.5254*" and rows[1]["f1"] == "0.5135"


def test_compare_ties_and_lower_is_better():
    rows = parse_comparison(compare_runs([("a", report(0.4, 0.2)), ("b", report(0.4, 0.1))]))
    assert rows[0]["f1"].endswith("*") and rows[1]["f1"].endswith("*")
    assert rows[1]["flying_point_ratio"].endswith("*") and not rows[0]["flying_point_ratio"].endswith("*")
    with pytest.raises(ValueError):
        compare_runs([])


def test_report_round_trip(tmp_path):
    rep = build_report([0, 1, 1, 2], [0, 1, 2, 2], ("A", "B", "C"), flying_point_ratio=0.25, coverage=0.5)
    write_report(rep, tmp_path)
    assert MetricsReport.from_json((tmp_path / "metrics.json").read_text()) == rep
    last = (tmp_path / "metrics.csv").read_text().splitlines()[-1]
    assert last.startswith("weighted,") and last.endswith(",4")
