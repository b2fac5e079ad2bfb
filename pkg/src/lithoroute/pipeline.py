"""Command implementations: ingest, train-base, calibrate, classify, evaluate, sweep.

Artifacts live under the configured run root::

    stages/ingest-<key>/      canonical dataset bundle + normalization stats
    stages/base-<key>/        model.txt, validation metrics, training summary
    stages/calibrate-<key>/   coverage_curve.csv, threshold.ini
    runs/<key>/               one classify run (manifest, audit trail, metrics)

Keys hash the config sections a stage depends on plus the hashes of its
inputs, so a changed config lands in a new directory instead of overwriting
an old one.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .backends import CompletionLog, HTTPBackend, LoggedBackend, MockBackend, SamplingParams
from .base import TrainConfig, load_model, predict_proba, save_model, train, train_centroid
from .config import PipelineConfig
from .data import (
    Dataset,
    DatasetSplit,
    LabelSchema,
    WellLogSequence,
    fit_normalization,
    load_bundle,
    load_dataset,
    load_mapping,
    make_windows,
    normalize,
    read_stats,
    window,
    write_bundle,
    write_stats,
)
from .errors import BackendError, ConfigError, DataError, MissingArtifactError
from .evaluation import MetricsReport, build_report, compare_runs, write_report
from .evidence import (
    KnowledgeBase,
    NeighborIndex,
    ToolFlags,
    analyze_trend,
    build_evidence_profile,
    confusable_classes,
    gather_history,
    kb_lookup,
    load_knowledge_base,
)
from .reasoning import CandidatePrediction, run_panel, select_personas
from .refinement import (
    BASE_PASSTHROUGH,
    DETERMINISTIC,
    GeologyGuidelines,
    RefinedWindow,
    flying_point_ratio,
    plurality,
    refine_deterministic,
    refine_llm,
)
from .router import Verdict, calibrate_threshold, coverage_curve, default_grid, read_calibration, write_calibration

log = logging.getLogger(__name__)

PANEL = "panel"  # refinement disabled: per-depth plurality of the persona labels
MANIFEST = "manifest.json"
RESUME = "RESUME"


# ------------------------------------------------------------------ locations


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_root(cfg: PipelineConfig) -> Path:
    return cfg.resolve(cfg.run.root)


def data_path(cfg: PipelineConfig) -> Path:
    if not cfg.data.path:
        raise ConfigError("[data] path is not set")
    p = cfg.resolve(cfg.data.path)
    if not p.exists():
        raise DataError(f"dataset file {p} not found")
    return p


def ingest_key(cfg: PipelineConfig) -> str:
    extra = file_sha256(data_path(cfg)) + file_sha256(cfg.resolve(cfg.data.schema))
    return cfg.digest(("data", "split"), extra)


def base_key(cfg: PipelineConfig) -> str:
    return cfg.digest(("base",), f"{ingest_key(cfg)}|seed={cfg.run.seed}")


def calibrate_key(cfg: PipelineConfig) -> str:
    return cfg.digest(("routing",), base_key(cfg))


def run_key(cfg: PipelineConfig) -> str:
    sections = ("routing", "tools", "reasoning", "backend", "refinement")
    kb = cfg.resolve(cfg.data.knowledge_base)
    extra = f"{base_key(cfg)}|seed={cfg.run.seed}|kb={file_sha256(kb) if kb.exists() else '-'}"
    return cfg.digest(sections, extra)


def stage_dir(cfg: PipelineConfig, stage: str) -> Path:
    key = {"ingest": ingest_key, "base": base_key, "calibrate": calibrate_key}[stage](cfg)
    return run_root(cfg) / "stages" / f"{stage}-{key}"


def default_run_dir(cfg: PipelineConfig) -> Path:
    return run_root(cfg) / "runs" / run_key(cfg)


_PRODUCER = {"ingest": "ingest", "base": "train-base", "calibrate": "calibrate"}


def require_stage(cfg: PipelineConfig, stage: str) -> Path:
    """Directory of a finished stage; a missing one names the earliest command still to run."""
    order = list(_PRODUCER)
    for s in order[:order.index(stage) + 1]:
        d = stage_dir(cfg, s)
        if not (d / "DONE").exists():
            raise MissingArtifactError(
                f"{s} artifacts for this config not found at {d}; run `lithoroute {_PRODUCER[s]}` first"
            )
    return d


def _publish(tmp: Path, final: Path) -> Path:
    """Move a finished staging directory into place (first writer wins)."""
    (tmp / "DONE").write_text("")
    final.parent.mkdir(parents=True, exist_ok=True)
    try:
        os.replace(tmp, final)
    except OSError:
        shutil.rmtree(tmp, ignore_errors=True)
    return final


def _staging(final: Path) -> Path:
    tmp = final.with_name(f".{final.name}.tmp-{os.getpid()}")
    shutil.rmtree(tmp, ignore_errors=True)
    tmp.mkdir(parents=True)
    return tmp


# --------------------------------------------------------------------- ingest


def split_of(cfg: PipelineConfig) -> DatasetSplit:
    s = cfg.split
    for name in ("train", "val", "test"):
        if not getattr(s, name):
            raise ConfigError(f"[split] {name} lists no wells")
    return DatasetSplit(s.train, s.val, s.test)


def cmd_ingest(cfg: PipelineConfig) -> Path:
    final = stage_dir(cfg, "ingest")
    if (final / "DONE").exists():
        return final
    dataset = load_dataset(data_path(cfg), load_mapping(cfg.resolve(cfg.data.schema)))
    split = split_of(cfg)
    parts = split.select(dataset)
    tmp = _staging(final)
    write_bundle(dataset, tmp / "bundle")
    write_stats(fit_normalization(parts["train"]), tmp / "stats.csv")
    summary = {
        "source": str(data_path(cfg)),
        "sha256": file_sha256(data_path(cfg)),
        "classes": list(dataset.schema.class_names),
        "channels": list(dataset.wells[0].channel_names),
        "wells": {w.well_id: {"samples": w.L, "imputed_cells": dataset.imputed_cells[w.well_id]}
                  for w in dataset.wells},
        "split": {k: [w.well_id for w in v] for k, v in parts.items()},
        "samples": dataset.n_samples,
    }
    (tmp / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    log.info("ingested %d wells, %d samples", len(dataset.wells), dataset.n_samples)
    return _publish(tmp, final)


@dataclass
class Prepared:
    """Normalized split plus the raw sequences they came from."""

    dataset: Dataset
    raw: dict[str, list[WellLogSequence]]
    norm: dict[str, list[WellLogSequence]]


def load_prepared(cfg: PipelineConfig) -> Prepared:
    d = require_stage(cfg, "ingest")
    dataset = load_bundle(d / "bundle")
    stats = read_stats(d / "stats.csv")
    raw = split_of(cfg).select(dataset)
    norm = {k: [normalize(w, stats) for w in v] for k, v in raw.items()}
    return Prepared(dataset, raw, norm)


# ----------------------------------------------------------------- base model


def train_config(cfg: PipelineConfig) -> TrainConfig:
    b = cfg.base
    return TrainConfig(b.hidden, b.learning_rate, b.epochs, b.batch_size, cfg.run.seed, b.patience, b.window)


def well_probs(model, seq: WellLogSequence) -> np.ndarray:
    return predict_proba(model, window(seq, 0, seq.L - 1))


def cmd_train_base(cfg: PipelineConfig) -> Path:
    final = stage_dir(cfg, "base")
    if (final / "DONE").exists():
        return final
    prep = load_prepared(cfg)
    schema = prep.dataset.schema
    tc = train_config(cfg)
    tw = [w for s in prep.norm["train"] for w in make_windows(s, tc.window, tc.window)]
    vw = [w for s in prep.norm["val"] for w in make_windows(s, tc.window, tc.window)]
    channels = prep.dataset.wells[0].channel_names
    t0 = time.perf_counter()
    if cfg.base.kind == "centroid":
        model = train_centroid(tw, tc.window, schema.class_names, channels)
    else:
        model = train(tw, vw, tc, schema.class_names, channels)
    elapsed = time.perf_counter() - t0
    tmp = _staging(final)
    save_model(model, tmp / "model.txt")
    y_true = np.concatenate([s.labels for s in prep.norm["val"]])
    y_pred = np.concatenate([well_probs(model, s).argmax(axis=1) for s in prep.norm["val"]])
    write_report(build_report(y_true, y_pred, schema.class_names), tmp, "val_metrics")
    (tmp / "train.json").write_text(json.dumps(
        {"kind": cfg.base.kind, "seconds": round(elapsed, 3), "train_windows": len(tw),
         "val_windows": len(vw), "config": asdict(tc)}, indent=2) + "\n")
    log.info("trained %s base model in %.1fs", cfg.base.kind, elapsed)
    return _publish(tmp, final)


def load_base(cfg: PipelineConfig):
    return load_model(require_stage(cfg, "base") / "model.txt")


# ---------------------------------------------------------------- calibration


def cmd_calibrate(cfg: PipelineConfig) -> Path:
    final = stage_dir(cfg, "calibrate")
    if (final / "DONE").exists():
        return final
    model = load_base(cfg)
    prep = load_prepared(cfg)
    conf, correct = [], []
    for s in prep.norm["val"]:
        p = well_probs(model, s)
        conf.append(p.max(axis=1))
        correct.append(p.argmax(axis=1) == s.labels)
    curve = coverage_curve(np.concatenate(conf), np.concatenate(correct), default_grid(cfg.routing.grid_points))
    cal = calibrate_threshold(curve, cfg.routing.epsilon)
    tmp = _staging(final)
    write_calibration(cal, tmp)
    log.info("calibrated tau=%s (coverage %.3f, accuracy %.3f)", cal.tau, cal.coverage, cal.accuracy)
    return _publish(tmp, final)


def resolve_threshold(cfg: PipelineConfig) -> tuple[float, str]:
    fixed = cfg.fixed_threshold
    if fixed is not None:
        return fixed, "fixed"
    return read_calibration(require_stage(cfg, "calibrate")).tau, "calibrated"


# ------------------------------------------------------------------- classify


def tool_flags(cfg: PipelineConfig) -> ToolFlags:
    t = cfg.tools
    return ToolFlags(t.knowledge, t.trend, t.neighbors, t.history)


def sampling_params(cfg: PipelineConfig) -> SamplingParams:
    r = cfg.reasoning
    return SamplingParams(r.temperature, r.top_p, r.max_tokens, cfg.run.seed, r.votes)


def make_backend(cfg: PipelineConfig):
    b = cfg.backend
    if b.kind == "mock":
        return MockBackend()
    return HTTPBackend(b.url or None, b.model or None, attempts=b.attempts, backoff=b.backoff, timeout=b.timeout)


@dataclass
class Context:
    """Everything a well needs for routing, evidence, reasoning and refinement."""

    cfg: PipelineConfig
    schema: LabelSchema
    model: object
    tau: float
    flags: ToolFlags
    kb: KnowledgeBase | None
    neighbors: NeighborIndex | None
    backend: object
    params: SamplingParams
    personas: tuple
    executor: ThreadPoolExecutor | None = None


@dataclass
class WellResult:
    well_id: str
    csv_text: str
    window_records: list[dict]
    counts: dict[str, int]
    final: list[int]
    base: list[int]


def route_well(ctx: Context, norm: WellLogSequence):
    probs = well_probs(ctx.model, norm)
    conf = probs.max(axis=1)
    verdicts = [Verdict.BASE if c >= ctx.tau else Verdict.REASON for c in conf]
    return probs, conf, verdicts


def _candidate_record(c: CandidatePrediction, schema: LabelSchema) -> dict:
    return {
        "persona": c.persona, "status": c.status, "labels": [schema.name(k) for k in c.labels],
        "rationale": c.rationale, "warnings": list(c.warnings), "dropped_sections": list(c.dropped_sections),
    }


def classify_well(ctx: Context, raw: WellLogSequence, norm: WellLogSequence) -> WellResult:
    cfg, schema = ctx.cfg, ctx.schema
    probs, conf, verdicts = route_well(ctx, norm)
    base = [int(k) for k in probs.argmax(axis=1)]
    L = norm.L
    final: list[int | None] = [None] * L
    method = [""] * L
    persona_cols = {p.key: [""] * L for p in ctx.personas}
    records = []
    counts = {"windows": 0, "routed_windows": 0, "accepted_windows": 0,
              "routed_depths": sum(v is Verdict.REASON for v in verdicts)}
    counts["accepted_depths"] = L - counts["routed_depths"]
    guidelines = GeologyGuidelines(min_run=cfg.refinement.min_run)
    for w in make_windows(norm, cfg.refinement.window, cfg.refinement.window):
        counts["windows"] += 1
        idx = list(w.indices)
        if all(verdicts[t] is Verdict.BASE for t in idx):
            counts["accepted_windows"] += 1
            for t in idx:
                final[t], method[t] = base[t], BASE_PASSTHROUGH
            continue
        counts["routed_windows"] += 1
        wp = probs[w.start:w.end + 1]
        kn = tr = nb = hist = None
        if ctx.flags.knowledge:
            kn = kb_lookup(ctx.kb, schema, norm.channel_names, confusable_classes(wp), norm.channel_names)
        if ctx.flags.trend:
            tr = analyze_trend(raw, w.start, w.end, cfg.tools.context)
        if ctx.flags.neighbors:
            nb = [ctx.neighbors.query(norm.values[t], cfg.tools.k) for t in idx]
        if ctx.flags.history:
            hist = gather_history(final, w.start, cfg.tools.history_depth)
        profile = build_evidence_profile(w, wp, kn, tr, nb, hist, ctx.flags,
                                         raw_values=raw.values[w.start:w.end + 1])
        cands = run_panel(ctx.backend, profile, ctx.params, schema, ctx.personas,
                          cfg.reasoning.char_budget, ctx.executor)
        if not cfg.refinement.enabled:
            refined = RefinedWindow(tuple(plurality(cands, wp)), PANEL, "refinement disabled")
        elif cfg.refinement.method == "llm":
            refined = refine_llm(ctx.backend, profile, cands, guidelines, ctx.params, schema)
        else:
            # whole-well smoothing runs once every window is final
            refined = RefinedWindow(tuple(plurality(cands, wp)), DETERMINISTIC, "candidate plurality")
        for i, t in enumerate(idx):
            for p, c in zip(ctx.personas, cands):
                persona_cols[p.key][t] = schema.name(c.labels[i])
            if verdicts[t] is Verdict.REASON:
                final[t], method[t] = refined.labels[i], refined.method
            else:
                final[t], method[t] = base[t], BASE_PASSTHROUGH
        records.append({
            "well_id": norm.well_id, "start": w.start, "end": w.end,
            "flags": asdict(ctx.flags), "refinement": cfg.refinement.enabled,
            "verdicts": [verdicts[t].value for t in idx],
            "profile": profile.to_dict(),
            "candidates": [_candidate_record(c, schema) for c in cands],
            "refined": {"labels": [schema.name(k) for k in refined.labels], "method": refined.method,
                        "rationale": refined.rationale},
        })
    if cfg.refinement.enabled and cfg.refinement.method == "deterministic":
        smoothed = refine_deterministic(final, cfg.refinement.min_run)
        for t in range(L):
            if smoothed[t] != final[t]:
                final[t], method[t] = smoothed[t], DETERMINISTIC

    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["depth_index", "depth", "true_label", "base_label", "base_confidence", "verdict",
                 *persona_cols, "final_label", "method"])
    for t in range(L):
        truth = "" if norm.labels is None else schema.name(int(norm.labels[t]))
        wr.writerow([t, repr(float(norm.depths[t])), truth, schema.name(base[t]), f"{conf[t]:.6f}",
                     verdicts[t].value, *(col[t] for col in persona_cols.values()),
                     schema.name(final[t]), method[t]])
    return WellResult(norm.well_id, buf.getvalue(), records, counts, list(final), base)


def _slug(i: int, well_id: str) -> str:
    return f"{i:03d}_" + "".join(ch if ch.isalnum() else "_" for ch in well_id).strip("_")


def _write_manifest(run_dir: Path, manifest: dict) -> None:
    path = run_dir / MANIFEST
    if path.exists():
        return
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_classify(cfg: PipelineConfig, run_dir: str | Path | None = None, backend=None) -> Path:
    """Run base -> route -> tools -> panel -> refine over the test wells.

    Re-running an existing run directory resumes it: logged completions are
    replayed, so finished windows are never sent to the backend again.
    ``backend`` overrides the configured one (used by tests).
    """
    tau, tau_source = resolve_threshold(cfg)
    model = load_base(cfg)
    prep = load_prepared(cfg)
    schema = prep.dataset.schema
    run_dir = Path(run_dir) if run_dir is not None else default_run_dir(cfg)
    config_hash = cfg.digest(extra=ingest_key(cfg))
    manifest_path = run_dir / MANIFEST
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text())
        if old.get("config_hash") != config_hash:
            raise ConfigError(f"{run_dir} holds a run with a different configuration; use a new --run-dir")
    run_dir.mkdir(parents=True, exist_ok=True)

    flags = tool_flags(cfg)
    kb = load_knowledge_base(cfg.resolve(cfg.data.knowledge_base)) if flags.knowledge else None
    neighbors = NeighborIndex.from_sequences(prep.norm["train"]) if flags.neighbors else None
    inner = backend if backend is not None else make_backend(cfg)
    logged = LoggedBackend(inner, CompletionLog(run_dir / "completions.jsonl"))
    personas = select_personas(cfg.reasoning.personas)
    executor = ThreadPoolExecutor(cfg.reasoning.parallelism) if cfg.reasoning.parallelism > 1 else None
    ctx = Context(cfg, schema, model, tau, flags, kb, neighbors, logged, sampling_params(cfg), personas, executor)

    # routing is cheap and known up front, so the manifest can carry it before any result exists
    verdict_counts = {"Base": 0, "Reason": 0}
    for s in prep.norm["test"]:
        for v in route_well(ctx, s)[2]:
            verdict_counts[v.value] += 1
    _write_manifest(run_dir, {
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_text(),
        "config_hash": config_hash,
        "dataset": {"path": str(data_path(cfg)), "sha256": file_sha256(data_path(cfg))},
        "artifacts": {
            "ingest": str(stage_dir(cfg, "ingest")),
            "base_model_sha256": file_sha256(stage_dir(cfg, "base") / "model.txt"),
        },
        "threshold": tau,
        "threshold_source": tau_source,
        "verdict_counts": verdict_counts,
        "test_wells": [w.well_id for w in prep.norm["test"]],
    })

    (run_dir / "predictions").mkdir(exist_ok=True)
    (run_dir / "windows").mkdir(exist_ok=True)
    routing = {"threshold": tau, "wells": {}}
    order = {w.well_id: i for i, w in enumerate(prep.dataset.wells)}
    try:
        for raw, norm in zip(prep.raw["test"], prep.norm["test"]):
            res = classify_well(ctx, raw, norm)
            name = _slug(order[raw.well_id], raw.well_id)
            (run_dir / "predictions" / f"{name}.csv").write_text(res.csv_text)
            (run_dir / "windows" / f"{name}.jsonl").write_text(
                "".join(json.dumps(r, sort_keys=True) + "\n" for r in res.window_records))
            routing["wells"][raw.well_id] = res.counts
    except BackendError as exc:
        (run_dir / RESUME).write_text(
            f"interrupted: {exc}\nfinished wells: {', '.join(routing['wells']) or '(none)'}\n"
            "re-run the same command to resume; logged completions are replayed\n")
        raise
    finally:
        if executor is not None:
            executor.shutdown()
    totals = {k: sum(c[k] for c in routing["wells"].values())
              for k in ("windows", "routed_windows", "accepted_windows", "routed_depths", "accepted_depths")}
    routing["totals"] = totals
    (run_dir / "routing.json").write_text(json.dumps(routing, indent=2, sort_keys=True) + "\n")
    (run_dir / RESUME).unlink(missing_ok=True)
    log.info("classified %d wells: %d/%d windows routed (%d live calls, %d replayed)",
             len(routing["wells"]), totals["routed_windows"], totals["windows"],
             logged.live_calls, logged.replayed)
    return run_dir


# ------------------------------------------------------------------- evaluate


def read_predictions(run_dir: str | Path) -> list[list[dict[str, str]]]:
    pred_dir = Path(run_dir) / "predictions"
    if not (Path(run_dir) / "routing.json").exists() or not pred_dir.is_dir():
        raise MissingArtifactError(f"{run_dir} has no finished classify output; run `lithoroute classify` first")
    out = []
    for p in sorted(pred_dir.glob("*.csv")):
        with p.open(newline="") as fh:
            out.append(list(csv.DictReader(fh)))
    return out


def evaluate_run(run_dir: str | Path, class_names: Sequence[str]) -> tuple[MetricsReport, MetricsReport]:
    """Reports for the final labels and for the base classifier alone."""
    wells = read_predictions(run_dir)
    routing = json.loads((Path(run_dir) / "routing.json").read_text())
    index = {n: i for i, n in enumerate(class_names)}
    y, final, base = [], [], []
    iso_final = iso_base = 0.0
    for rows in wells:
        if not rows:
            continue
        yt = [index[r["true_label"]] for r in rows]
        yf = [index[r["final_label"]] for r in rows]
        yb = [index[r["base_label"]] for r in rows]
        y += yt
        final += yf
        base += yb
        iso_final += flying_point_ratio(yf) * len(rows)
        iso_base += flying_point_ratio(yb) * len(rows)
    if not y:
        raise DataError(f"{run_dir}: no predictions to evaluate")
    n = len(y)
    tot = routing["totals"]
    common = dict(threshold=routing["threshold"], routed_windows=tot["routed_windows"],
                  accepted_windows=tot["accepted_windows"], routed_depths=tot["routed_depths"],
                  accepted_depths=tot["accepted_depths"], coverage=tot["accepted_depths"] / n)
    rep = build_report(y, final, class_names, flying_point_ratio=iso_final / n, **common)
    base_rep = build_report(y, base, class_names, flying_point_ratio=iso_base / n)
    return rep, base_rep


def cmd_evaluate(cfg: PipelineConfig, run_dirs: Sequence[str | Path] | None = None,
                 out_dir: str | Path | None = None) -> Path:
    """Write metrics into each run directory and a comparison table; returns the table path."""
    schema = load_mapping(cfg.resolve(cfg.data.schema)).labels
    dirs = [Path(d) for d in run_dirs] if run_dirs else [default_run_dir(cfg)]
    rows = []
    for d in dirs:
        rep, base_rep = evaluate_run(d, schema.class_names)
        write_report(rep, d, "metrics")
        write_report(base_rep, d, "base_metrics")
        rows += [(d.name, rep), (f"{d.name} (base only)", base_rep)]
    out = Path(out_dir) if out_dir is not None else dirs[0]
    out.mkdir(parents=True, exist_ok=True)
    table = out / "comparison.csv"
    table.write_text(compare_runs(rows))
    return table


# ---------------------------------------------------------------------- sweep

SWEEP_ALIASES = {"tau": "routing.threshold", "threshold": "routing.threshold",
                 "temperature": "reasoning.temperature"}


def ensure_upstream(cfg: PipelineConfig) -> None:
    cmd_ingest(cfg)
    cmd_train_base(cfg)
    if cfg.fixed_threshold is None:
        cmd_calibrate(cfg)


def cmd_sweep(cfg: PipelineConfig, parameter: str, values: Sequence[str], backend=None) -> Path:
    """One classify run per value; writes a (value, metrics...) table ready for plotting."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    param = SWEEP_ALIASES.get(parameter, parameter)
    schema = load_mapping(cfg.resolve(cfg.data.schema)).labels
    lines = ["value,f1,precision,recall,coverage,flying_point_ratio,routed_depths,run_dir"]
    for v in values:
        c = cfg.override(param, v)
        ensure_upstream(c)
        d = cmd_classify(c, backend=backend)
        rep, _ = evaluate_run(d, schema.class_names)
        write_report(rep, d, "metrics")
        lines.append(f"{v},{rep.f1:.6f},{rep.precision:.6f},{rep.recall:.6f},{rep.coverage:.6f},"
                     f"{rep.flying_point_ratio:.6f},{rep.routed_depths},{d.name}")
    key = cfg.digest(extra=f"{param}|{','.join(values)}|{ingest_key(cfg)}")
    out = run_root(cfg) / "sweeps" / f"{param}-{key}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    return out
