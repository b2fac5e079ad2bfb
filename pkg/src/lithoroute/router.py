"""Confidence routing and threshold calibration on validation depths."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_EPSILON = 0.01


class Verdict(str, Enum):
    BASE = "Base"
    REASON = "Reason"


@dataclass(frozen=True)
class RoutingDecision:
    verdict: Verdict
    confidence: float
    threshold: float


def decide(confidence: float, tau: float) -> RoutingDecision:
    """Accept the base prediction iff ``confidence >= tau`` (boundary inclusive)."""
    verdict = Verdict.BASE if confidence >= tau else Verdict.REASON
    return RoutingDecision(verdict, float(confidence), float(tau))


def default_grid(points: int = 101) -> np.ndarray:
    return np.round(np.linspace(0.0, 1.0, points), 10)


@dataclass(frozen=True)
class CoverageCurve:
    thresholds: tuple[float, ...]
    coverage: tuple[float, ...]
    accuracy: tuple[float, ...]
    accepted: tuple[int, ...]
    n: int

    def __len__(self) -> int:
        return len(self.thresholds)

    def rows(self):
        return zip(self.thresholds, self.coverage, self.accuracy)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["tau", "coverage", "accuracy", "accepted"])
        for t, c, a, k in zip(self.thresholds, self.coverage, self.accuracy, self.accepted):
            wr.writerow([repr(t), repr(c), repr(a), k])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CoverageCurve":
        rows = list(csv.DictReader(io.StringIO(text)))
        accepted = tuple(int(r["accepted"]) for r in rows)
        cov = tuple(float(r["coverage"]) for r in rows)
        n = round(accepted[0] / cov[0]) if rows and cov[0] > 0 else 0
        return cls(
            tuple(float(r["tau"]) for r in rows), cov,
            tuple(float(r["accuracy"]) for r in rows), accepted, n,
        )

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float, float]]) -> "CoverageCurve":
        """Build a curve from (tau, coverage, accuracy) triples, e.g. hand-written fixtures."""
        pts = sorted(points)
        return cls(
            tuple(p[0] for p in pts), tuple(p[1] for p in pts), tuple(p[2] for p in pts),
            tuple(0 for _ in pts), 0,
        )


def coverage_curve(confidences, correct_flags, grid=None) -> CoverageCurve:
    """Coverage and accepted-set accuracy at every threshold of ``grid``.

    An empty accepted set has accuracy 1.0 by convention.
    """
    c = np.asarray(confidences, dtype=float)
    ok = np.asarray(correct_flags, dtype=bool)
    if c.shape != ok.shape:
        raise ValueError(f"{c.size} confidences but {ok.size} correctness flags")
    if c.size == 0:
        raise ValueError("need at least one sample")
    grid = default_grid() if grid is None else np.asarray(sorted(grid), dtype=float)
    order = np.argsort(c, kind="stable")
    c_sorted, ok_sorted = c[order], ok[order]
    # number of correct samples with confidence >= tau, via suffix sums
    correct_suffix = np.concatenate([np.cumsum(ok_sorted[::-1])[::-1], [0]])
    first = np.searchsorted(c_sorted, grid, side="left")
    accepted = c.size - first
    correct = correct_suffix[first]
    with np.errstate(invalid="ignore", divide="ignore"):
        acc = np.where(accepted > 0, correct / np.maximum(accepted, 1), 1.0)
    return CoverageCurve(
        tuple(float(t) for t in grid),
        tuple(float(a) / c.size for a in accepted),
        tuple(float(a) for a in acc),
        tuple(int(a) for a in accepted),
        int(c.size),
    )


@dataclass(frozen=True)
class ThresholdCalibration:
    tau: float
    epsilon: float
    coverage: float
    accuracy: float
    target_accuracy: float
    curve: CoverageCurve
    n_samples: int


def calibrate_threshold(curve: CoverageCurve, epsilon: float = DEFAULT_EPSILON) -> ThresholdCalibration:
    """Smallest grid threshold whose accepted accuracy is within ``epsilon`` of the best.

    The best accuracy is taken over thresholds that accept at least one sample
    (when the curve records counts), so the empty-set convention never sets
    the target.
    """
    if len(curve) == 0:
        raise ValueError("empty coverage curve")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    nonempty = [i for i, cov in enumerate(curve.coverage) if cov > 0]
    pool = nonempty or list(range(len(curve)))
    target = max(curve.accuracy[i] for i in pool)
    chosen = min(
        (i for i in range(len(curve)) if curve.accuracy[i] >= target - epsilon),
        key=lambda i: curve.thresholds[i],
    )
    return ThresholdCalibration(
        tau=curve.thresholds[chosen],
        epsilon=float(epsilon),
        coverage=curve.coverage[chosen],
        accuracy=curve.accuracy[chosen],
        target_accuracy=float(target),
        curve=curve,
        n_samples=curve.n,
    )


def write_calibration(cal: ThresholdCalibration, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "coverage_curve.csv").write_text(cal.curve.to_csv())
    (out / "threshold.ini").write_text(
        "[calibration]\n"
        f"tau = {cal.tau!r}\n"
        f"epsilon = {cal.epsilon!r}\n"
        f"coverage = {cal.coverage!r}\n"
        f"accuracy = {cal.accuracy!r}\n"
        f"target_accuracy = {cal.target_accuracy!r}\n"
        f"n_samples = {cal.n_samples}\n"
    )


def read_calibration(out_dir: str | Path) -> ThresholdCalibration:
    import configparser

    out = Path(out_dir)
    cp = configparser.ConfigParser()
    cp.read(out / "threshold.ini")
    sec = cp["calibration"]
    curve = CoverageCurve.from_csv((out / "coverage_curve.csv").read_text())
    return ThresholdCalibration(
        tau=float(sec["tau"]), epsilon=float(sec["epsilon"]),
        coverage=float(sec["coverage"]), accuracy=float(sec["accuracy"]),
        target_accuracy=float(sec["target_accuracy"]), curve=curve,
        n_samples=int(sec["n_samples"]),
    )
