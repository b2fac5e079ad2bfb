import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lithoroute.router import (
    CoverageCurve,
    Verdict,
    calibrate_threshold,
    coverage_curve,
    decide,
    default_grid,
    read_calibration,
    write_calibration,
)

FIXTURE = [(0.0, 1.0, 0.70), (0.5, 0.6, 0.90), (0.9, 0.2, 0.92)]


def test_decide_examples():
    assert decide(0.9, 0.5).verdict is Verdict.BASE
    assert decide(0.4, 0.5).verdict is Verdict.REASON
    assert decide(0.5, 0.5).verdict is Verdict.BASE  # inclusive boundary
    d = decide(0.3, 0.2)
    assert (d.confidence, d.threshold) == (0.3, 0.2)


@given(st.floats(0.0, 1.0))
def test_threshold_zero_accepts_everything(c):
    assert decide(c, 0.0).verdict is Verdict.BASE


def test_default_grid():
    g = default_grid()
    assert len(g) == 101 and g[0] == 0.0 and g[-1] == 1.0 and g[37] == 0.37


def test_coverage_examples():
    curve = coverage_curve([0.3, 0.6, 0.9], [True, False, True], [0.0, 0.5, 1.0])
    assert curve.coverage == (1.0, 2 / 3, 0.0)
    assert curve.accuracy[0] == pytest.approx(2 / 3)
    assert curve.accuracy[1] == 0.5
    assert curve.accuracy[2] == 1.0  # empty accepted set
    assert curve.accepted == (3, 2, 0)


def test_coverage_errors():
    with pytest.raises(ValueError):
        coverage_curve([0.1, 0.2], [True], [0.0])
    with pytest.raises(ValueError):
        coverage_curve([], [], [0.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 1.0), st.booleans()), min_size=1, max_size=60))
def test_coverage_matches_brute_force(pairs):
    conf = [c for c, _ in pairs]
    ok = [k for _, k in pairs]
    grid = default_grid()
    curve = coverage_curve(conf, ok, grid)
    for tau, cov, acc in curve.rows():
        accepted = [k for c, k in pairs if c >= tau]
        assert cov == len(accepted) / len(pairs)
        assert acc == (sum(accepted) / len(accepted) if accepted else 1.0)


def test_calibration_fixture():
    cal = calibrate_threshold(CoverageCurve.from_points(FIXTURE), 0.05)
    assert cal.tau == 0.5
    assert (cal.coverage, cal.accuracy) == (0.6, 0.90)
    assert cal.target_accuracy == 0.92


def test_calibration_trivial_cases():
    flat = CoverageCurve.from_points([(0.0, 1.0, 1.0), (0.5, 0.5, 1.0), (1.0, 0.0, 1.0)])
    assert calibrate_threshold(flat, 0.0).tau == 0.0
    assert calibrate_threshold(CoverageCurve.from_points(FIXTURE), 1.0).tau == 0.0
    with pytest.raises(ValueError):
        calibrate_threshold(CoverageCurve.from_points([]), 0.01)
    with pytest.raises(ValueError):
        calibrate_threshold(CoverageCurve.from_points(FIXTURE), -0.1)


def test_empty_set_convention_never_sets_target():
    # best non-empty accuracy is 0.8; the empty point's 1.0 must not become the target
    curve = coverage_curve([0.2, 0.5, 0.7, 0.9], [False, True, True, False], [0.0, 0.5, 0.95])
    cal = calibrate_threshold(curve, 0.01)
    assert cal.target_accuracy == pytest.approx(2 / 3)
    assert cal.tau == 0.5


def test_calibration_is_pure():
    curve = coverage_curve(np.linspace(0, 1, 50), np.arange(50) % 3 != 0)
    assert calibrate_threshold(curve, 0.02) == calibrate_threshold(curve, 0.02)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 1.0), st.booleans()), min_size=1, max_size=40),
       st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_larger_epsilon_never_raises_tau(pairs, e1, e2):
    curve = coverage_curve([c for c, _ in pairs], [k for _, k in pairs])
    lo, hi = sorted((e1, e2))
    assert calibrate_threshold(curve, hi).tau <= calibrate_threshold(curve, lo).tau
    assert calibrate_threshold(curve, lo).tau in curve.thresholds


def test_calibration_files_round_trip(tmp_path):
    curve = coverage_curve(np.random.default_rng(0).random(30), np.arange(30) % 2 == 0)
    cal = calibrate_threshold(curve, 0.01)
    write_calibration(cal, tmp_path)
    assert read_calibration(tmp_path) == cal
    header = (tmp_path / "coverage_curve.csv").read_text().splitlines()[0]
    assert header.startswith("tau,coverage,accuracy")
