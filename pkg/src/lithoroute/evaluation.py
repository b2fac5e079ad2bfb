"""Support-weighted precision/recall/F1, run reports and comparison tables."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LabelError


@dataclass(frozen=True, eq=False)
class ConfusionStats:
    """``matrix[true, predicted]`` counts."""

    matrix: np.ndarray

    @classmethod
    def empty(cls, K: int) -> "ConfusionStats":
        return cls(np.zeros((K, K), dtype=np.int64))

    @property
    def K(self) -> int:
        return self.matrix.shape[0]

    @property
    def support(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.matrix.sum())


def accumulate(confusion: ConfusionStats, true_label: int, predicted_label: int) -> ConfusionStats:
    K = confusion.K
    for lab in (true_label, predicted_label):
        if not 0 <= lab < K:
            raise LabelError(f"label index {lab} outside [0, {K})")
    m = confusion.matrix.copy()
    m[true_label, predicted_label] += 1
    return ConfusionStats(m)


def confusion_from_labels(y_true, y_pred, K: int) -> ConfusionStats:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError("true and predicted label arrays differ in length")
    if t.size and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= K):
        raise LabelError(f"label index outside [0, {K})")
    m = np.zeros((K, K), dtype=np.int64)
    np.add.at(m, (t, p), 1)
    return ConfusionStats(m)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class WeightedScores:
    precision: float
    recall: float
    f1: float
    per_class: tuple[ClassScores, ...]
    notes: tuple[str, ...] = ()


def weighted_metrics(confusion: ConfusionStats) -> WeightedScores:
    """Per-class P/R/F1 averaged with weights support/total.

    Zero denominators give 0 for that class and add a note.
    """
    m = confusion.matrix
    total = confusion.total
    if total == 0:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(m).astype(float)
    pred_count = m.sum(axis=0).astype(float)
    support = m.sum(axis=1).astype(float)
    notes = []
    per_class = []
    for k in range(confusion.K):
        if pred_count[k] == 0:
            prec = 0.0
            if support[k] > 0:
                notes.append(f"class {k}: never predicted, precision set to 0")
        else:
            prec = tp[k] / pred_count[k]
        rec = tp[k] / support[k] if support[k] > 0 else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        per_class.append(ClassScores(float(prec), float(rec), float(f1), int(support[k])))
    w = support / total
    return WeightedScores(
        precision=float(sum(wk * c.precision for wk, c in zip(w, per_class))),
        recall=float(sum(wk * c.recall for wk, c in zip(w, per_class))),
        f1=float(sum(wk * c.f1 for wk, c in zip(w, per_class))),
        per_class=tuple(per_class),
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    per_class: dict[str, ClassScores]
    flying_point_ratio: float | None = None
    coverage: float | None = None
    threshold: float | None = None
    routed_windows: int = 0
    accepted_windows: int = 0
    routed_depths: int = 0
    accepted_depths: int = 0
    n_samples: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_json(self) -> str:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        d = json.loads(text)
        d["per_class"] = {k: ClassScores(**v) for k, v in d["per_class"].items()}
        d["notes"] = tuple(d.get("notes", ()))
        return cls(**d)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["class", "precision", "recall", "f1", "support"])
        for name, c in self.per_class.items():
            wr.writerow([name, f"{c.precision:.6f}", f"{c.recall:.6f}", f"{c.f1:.6f}", c.support])
        wr.writerow(["weighted", f"{self.precision:.6f}", f"{self.recall:.6f}", f"{self.f1:.6f}",
                     self.n_samples])
        return buf.getvalue()


def build_report(
    y_true,
    y_pred,
    class_names: Sequence[str],
    **extra,
) -> MetricsReport:
    conf = confusion_from_labels(y_true, y_pred, len(class_names))
    w = weighted_metrics(conf)
    return MetricsReport(
        precision=w.precision, recall=w.recall, f1=w.f1,
        per_class=dict(zip(class_names, w.per_class)),
        n_samples=conf.total, notes=w.notes, **extra,
    )


COMPARE_COLUMNS = ("precision", "recall", "f1", "flying_point_ratio", "coverage")
_LOWER_IS_BETTER = {"flying_point_ratio"}


def compare_runs(reports: Sequence[tuple[str, MetricsReport]]) -> str:
    """Aligned CSV table, one row per run; ``*`` marks the best value per column (ties all marked)."""
    if not reports:
        raise ValueError("need at least one report")
    best = {}
    for col in COMPARE_COLUMNS:
        vals = [getattr(r, col) for _, r in reports if getattr(r, col) is not None]
        if vals:
            best[col] = min(vals) if col in _LOWER_IS_BETTER else max(vals)
    rows = [["run", *COMPARE_COLUMNS]]
    for name, r in reports:
        row = [name]
        for col in COMPARE_COLUMNS:
            v = getattr(r, col)
            if v is None:
                row.append("")
            else:
                row.append(f"{v:.4f}" + ("*" if v == best[col] else ""))
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "".join(
        ", ".join(cell.ljust(wd) for cell, wd in zip(r, widths)).rstrip() + "\n" for r in rows
    )


def parse_comparison(table: str) -> list[dict[str, str]]:
    lines = [ln for ln in table.splitlines() if ln.strip()]
    header = [c.strip() for c in lines[0].split(",")]
    return [dict(zip(header, (c.strip() for c in ln.split(",")))) for ln in lines[1:]]


def write_report(report: MetricsReport, out_dir: str | Path, stem: str = "metrics") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.json").write_text(report.to_json())
    (out / f"{stem}.csv").write_text(report.to_csv())
