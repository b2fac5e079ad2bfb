"""Well-log datasets: loading, validation, normalization, windowing and splits."""

from __future__ import annotations

import configparser
import csv
import io
import math
import re
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, LabelError, SchemaError

CHANNEL_PREFIX = "channel:"
_MISSING_TOKENS = {"", "nan", "na", "n/a", "null", "none", "-999.25", "-999"}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LabelSchema:
    class_names: tuple[str, ...]
    aliases: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        names = tuple(self.class_names)
        object.__setattr__(self, "class_names", names)
        if len(names) < 2:
            raise SchemaError(f"need at least 2 classes, got {len(names)}")
        if any(not n.strip() for n in names):
            raise SchemaError("class names must be non-empty")
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate class names in {names}")
        for raw, target in self.aliases.items():
            if target not in names:
                raise SchemaError(f"alias {raw!r} points at unknown class {target!r}")
        object.__setattr__(self, "aliases", dict(self.aliases))

    @property
    def K(self) -> int:
        return len(self.class_names)

    def index(self, raw: str) -> int:
        """Map a label string (class name or alias) to its class index."""
        key = raw.strip()
        if key not in self.aliases and key not in self.class_names:
            # "3.0" style codes from float-typed label columns
            try:
                as_float = float(key)
            except ValueError:
                pass
            else:
                if as_float.is_integer():
                    key = str(int(as_float))
        if key in self.aliases:
            key = self.aliases[key]
        try:
            return self.class_names.index(key)
        except ValueError:
            raise LabelError(f"unknown label {raw!r}") from None

    def name(self, idx: int) -> str:
        if not 0 <= idx < self.K:
            raise LabelError(f"label index {idx} outside [0, {self.K})")
        return self.class_names[idx]

    def permuted(self, order: Sequence[int]) -> "LabelSchema":
        return LabelSchema(tuple(self.class_names[i] for i in order), self.aliases)


@dataclass(frozen=True)
class WellLogSequence:
    """One well: L depth samples of M named channels, optionally labelled."""

    well_id: str
    depths: np.ndarray
    channel_names: tuple[str, ...]
    values: np.ndarray  # shape (L, M)
    labels: np.ndarray | None = None
    sampling_interval: float = 1.0
    n_classes: int | None = None

    def __post_init__(self):
        depths = np.asarray(self.depths, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if depths.ndim != 1 or depths.size < 1:
            raise DataError(f"{self.well_id}: need at least one depth sample")
        if np.any(np.diff(depths) <= 0):
            raise DataError(f"{self.well_id}: depths must be strictly increasing")
        if values.ndim == 1 and len(self.channel_names) == 1:
            values = values[:, None]
        if values.shape != (depths.size, len(self.channel_names)):
            raise DataError(
                f"{self.well_id}: values shape {values.shape} does not match "
                f"{depths.size} depths x {len(self.channel_names)} channels"
            )
        if not self.sampling_interval > 0:
            raise DataError(f"{self.well_id}: sampling interval must be positive")
        object.__setattr__(self, "depths", _frozen(depths))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != depths.shape:
                raise DataError(f"{self.well_id}: labels length differs from depth count")
            if labels.size and labels.min() < 0:
                raise LabelError(f"{self.well_id}: negative label index")
            if self.n_classes is not None and labels.size and labels.max() >= self.n_classes:
                raise LabelError(
                    f"{self.well_id}: label index {labels.max()} outside [0, {self.n_classes})"
                )
            object.__setattr__(self, "labels", _frozen(labels))

    @property
    def L(self) -> int:
        return self.depths.size

    @property
    def M(self) -> int:
        return len(self.channel_names)

    def channel(self, name: str) -> np.ndarray:
        return self.values[:, self.channel_names.index(name)]

    def with_values(self, values: np.ndarray) -> "WellLogSequence":
        return WellLogSequence(
            self.well_id, self.depths, self.channel_names, values,
            self.labels, self.sampling_interval, self.n_classes,
        )

    def equals(self, other: "WellLogSequence") -> bool:
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None
            and other.labels is not None
            and np.array_equal(self.labels, other.labels)
        )
        return (
            self.well_id == other.well_id
            and self.channel_names == other.channel_names
            and np.array_equal(self.depths, other.depths)
            and np.array_equal(self.values, other.values)
            and same_labels
            and self.sampling_interval == other.sampling_interval
        )


@dataclass(frozen=True)
class ColumnMapping:
    well_id: str
    depth: str
    channels: Mapping[str, str]  # channel name -> source column
    label: str | None
    labels: LabelSchema
    sampling_interval: float | None = None

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(delimiters=("=",), interpolation=None)
        cp.optionxform = str
        cols = {"well_id": self.well_id, "depth": self.depth}
        if self.label is not None:
            cols["label"] = self.label
        for name, col in self.channels.items():
            cols[CHANNEL_PREFIX + name] = col
        if self.sampling_interval is not None:
            cols["sampling_interval"] = repr(self.sampling_interval)
        cp["columns"] = cols
        cp["labels"] = {"classes": ", ".join(self.labels.class_names)}
        if self.labels.aliases:
            cp["label_aliases"] = dict(self.labels.aliases)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def parse_mapping(text: str, source: str = "<mapping>") -> ColumnMapping:
    """Parse a column-mapping document (INI-style key = value sections)."""
    cp = configparser.ConfigParser(delimiters=("=",), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise SchemaError(f"{source}: {exc}") from None
    if "columns" not in cp:
        raise SchemaError(f"{source}: missing [columns] section")
    if "labels" not in cp or "classes" not in cp["labels"]:
        raise SchemaError(f"{source}: missing [labels] classes")
    cols = cp["columns"]
    for key in ("well_id", "depth"):
        if key not in cols:
            raise SchemaError(f"{source}: [columns] needs a {key} entry")
    channels: OrderedDict[str, str] = OrderedDict()
    interval = None
    for key, value in cols.items():
        if key.startswith(CHANNEL_PREFIX):
            channels[key[len(CHANNEL_PREFIX):].strip()] = value.strip()
        elif key == "sampling_interval":
            interval = float(value)
        elif key not in ("well_id", "depth", "label"):
            raise SchemaError(f"{source}: unknown column role {key!r}")
    if not channels:
        raise SchemaError(f"{source}: no channel:<name> entries")
    classes = tuple(c.strip() for c in cp["labels"]["classes"].split(","))
    aliases = dict(cp["label_aliases"]) if "label_aliases" in cp else {}
    return ColumnMapping(
        well_id=cols["well_id"].strip(),
        depth=cols["depth"].strip(),
        channels=channels,
        label=cols["label"].strip() if "label" in cols else None,
        labels=LabelSchema(classes, {k.strip(): v.strip() for k, v in aliases.items()}),
        sampling_interval=interval,
    )


def load_mapping(path: str | Path) -> ColumnMapping:
    path = Path(path)
    return parse_mapping(path.read_text(), source=str(path))


@dataclass(frozen=True)
class Dataset:
    wells: list[WellLogSequence]
    schema: LabelSchema
    imputed_cells: dict[str, int]

    def by_id(self) -> dict[str, WellLogSequence]:
        return {w.well_id: w for w in self.wells}

    @property
    def n_samples(self) -> int:
        return sum(w.L for w in self.wells)


def _parse_float(token: str) -> float | None:
    t = token.strip()
    if t.lower() in _MISSING_TOKENS:
        return None
    try:
        v = float(t)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _impute(column: list[float | None], fallback: float | None, well_id: str, channel: str) -> tuple[list[float], int]:
    # forward fill, then back-fill whatever leads the column; a channel the
    # well never recorded takes the mean of that channel over the other wells
    first = next((v for v in column if v is not None), fallback)
    if first is None:
        raise DataError(f"{well_id}: channel {channel!r} has no parseable values in any well")
    out, last, n = [], first, 0
    for v in column:
        if v is None:
            n += 1
            out.append(last)
        else:
            last = v
            out.append(v)
    return out, n


def load_dataset(path: str | Path, mapping: ColumnMapping) -> Dataset:
    """Read a comma-separated table into one sequence per well.

    Rows are grouped by the well-id column and sorted by depth. Unparseable
    channel cells are forward-filled within the well (back-filled at the top)
    and counted in ``Dataset.imputed_cells``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = [mapping.well_id, mapping.depth, *mapping.channels.values()]
        if mapping.label is not None:
            required.append(mapping.label)
        missing = [c for c in dict.fromkeys(required) if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(map(repr, missing))}")
        rows: OrderedDict[str, list[dict]] = OrderedDict()
        for lineno, row in enumerate(reader, start=2):
            wid = (row[mapping.well_id] or "").strip()
            if not wid:
                raise DataError(f"{path}:{lineno}: empty well id")
            depth = _parse_float(row[mapping.depth] or "")
            if depth is None:
                raise DataError(f"{path}:{lineno}: unparseable depth {row[mapping.depth]!r}")
            row["__depth"] = depth
            rows.setdefault(wid, []).append(row)

    schema = mapping.labels
    for group in rows.values():
        group.sort(key=lambda r: r["__depth"])
    parsed = {
        wid: {name: [_parse_float(r[col] or "") for r in group] for name, col in mapping.channels.items()}
        for wid, group in rows.items()
    }
    fallback = {}
    for name in mapping.channels:
        seen = [v for cols in parsed.values() for v in cols[name] if v is not None]
        fallback[name] = float(np.mean(seen)) if seen else None
    wells, imputed = [], {}
    for wid, group in rows.items():
        depths = [r["__depth"] for r in group]
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise DataError(f"{path}: well {wid!r} has repeated depth values")
        cols, n_imputed = [], 0
        for name in mapping.channels:
            filled, n = _impute(parsed[wid][name], fallback[name], wid, name)
            cols.append(filled)
            n_imputed += n
        labels = None
        if mapping.label is not None:
            labels = [schema.index(r[mapping.label] or "") for r in group]
        if mapping.sampling_interval is not None:
            interval = mapping.sampling_interval
        elif len(depths) > 1:
            interval = float(np.median(np.diff(depths)))
        else:
            interval = 1.0
        wells.append(
            WellLogSequence(
                wid, np.array(depths), tuple(mapping.channels),
                np.array(cols, dtype=float).T.reshape(len(depths), len(cols)),
                None if labels is None else np.array(labels),
                interval, schema.K,
            )
        )
        imputed[wid] = n_imputed
    if not wells:
        raise DataError(f"{path}: no data rows")
    return Dataset(wells, schema, imputed)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_") or "well"


def write_bundle(dataset: Dataset, out_dir: str | Path) -> list[Path]:
    """Write one canonical CSV per well plus ``schema.ini`` and ``wells.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    channels = dataset.wells[0].channel_names
    has_labels = dataset.wells[0].labels is not None
    mapping = ColumnMapping(
        well_id="well_id",
        depth="depth",
        channels=OrderedDict((c, c) for c in channels),
        label="label" if has_labels else None,
        labels=dataset.schema,
    )
    (out / "schema.ini").write_text(mapping.to_ini())
    paths = []
    for i, w in enumerate(dataset.wells):
        p = out / f"{i:03d}_{_slug(w.well_id)}.csv"
        with p.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["well_id", "depth", *channels, *(["label"] if has_labels else [])])
            for t in range(w.L):
                row = [w.well_id, repr(float(w.depths[t]))]
                row += [repr(float(v)) for v in w.values[t]]
                if has_labels:
                    row.append(dataset.schema.name(int(w.labels[t])))
                wr.writerow(row)
        paths.append(p)
    (out / "wells.txt").write_text("".join(p.name + "\n" for p in paths))
    return paths


def load_bundle(bundle_dir: str | Path) -> Dataset:
    bundle = Path(bundle_dir)
    index = bundle / "wells.txt"
    if not index.exists():
        raise DataError(f"{bundle}: not a dataset bundle (wells.txt missing)")
    mapping = load_mapping(bundle / "schema.ini")
    wells, imputed = [], {}
    for name in index.read_text().split():
        part = load_dataset(bundle / name, mapping)
        wells.extend(part.wells)
        imputed.update(part.imputed_cells)
    return Dataset(wells, mapping.labels, imputed)


@dataclass(frozen=True)
class NormalizationStats:
    channel_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "std", _frozen(np.asarray(self.std, dtype=float)))
        if np.any(self.std <= 0):
            raise DataError("normalization std must be positive")


def fit_normalization(train: Sequence[WellLogSequence]) -> NormalizationStats:
    """Per-channel mean and population std over every training sample.

    A constant channel gets std 1.0 so normalizing only removes its mean.
    """
    if not train:
        raise DataError("cannot fit normalization on an empty training set")
    names = train[0].channel_names
    for w in train:
        if w.channel_names != names:
            raise DataError(f"{w.well_id}: channel set {w.channel_names} differs from {names}")
    stacked = np.concatenate([w.values for w in train], axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return NormalizationStats(names, mean, std)


def _check_channels(seq: WellLogSequence, stats: NormalizationStats):
    if seq.channel_names != stats.channel_names:
        raise DataError(
            f"{seq.well_id}: channels {seq.channel_names} do not match stats {stats.channel_names}"
        )


def normalize(seq: WellLogSequence, stats: NormalizationStats) -> WellLogSequence:
    _check_channels(seq, stats)
    return seq.with_values((seq.values - stats.mean) / stats.std)


def denormalize(seq: WellLogSequence, stats: NormalizationStats) -> WellLogSequence:
    _check_channels(seq, stats)
    return seq.with_values(stats.mean + seq.values * stats.std)


def write_stats(stats: NormalizationStats, path: str | Path) -> None:
    lines = ["channel,mean,std"]
    for name, m, s in zip(stats.channel_names, stats.mean, stats.std):
        lines.append(f"{name},{float(m)!r},{float(s)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_stats(path: str | Path) -> NormalizationStats:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: empty stats file")
    return NormalizationStats(
        tuple(r["channel"] for r in rows),
        np.array([float(r["mean"]) for r in rows]),
        np.array([float(r["std"]) for r in rows]),
    )


@dataclass(frozen=True)
class DatasetSplit:
    train_wells: tuple[str, ...]
    val_wells: tuple[str, ...]
    test_wells: tuple[str, ...]

    def __post_init__(self):
        for name in ("train_wells", "val_wells", "test_wells"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        parts = [set(self.train_wells), set(self.val_wells), set(self.test_wells)]
        for i in range(3):
            for j in range(i + 1, 3):
                both = parts[i] & parts[j]
                if both:
                    raise DataError(f"split lists overlap on {sorted(both)}")

    def check(self, available: Iterable[str]) -> None:
        known = set(available)
        missing = [w for w in (*self.train_wells, *self.val_wells, *self.test_wells) if w not in known]
        if missing:
            raise DataError(f"split references unknown well(s): {missing}")

    def select(self, dataset: Dataset) -> dict[str, list[WellLogSequence]]:
        self.check(w.well_id for w in dataset.wells)
        ids = dataset.by_id()
        return {
            "train": [ids[w] for w in self.train_wells],
            "val": [ids[w] for w in self.val_wells],
            "test": [ids[w] for w in self.test_wells],
        }


@dataclass(frozen=True, eq=False)
class DepthWindow:
    """Depths ``start..end`` (inclusive) of one well.

    ``source`` keeps a reference to the full sequence so per-depth feature
    extraction can look past the window edges.
    """

    well_id: str
    start: int
    end: int
    features: np.ndarray
    labels: np.ndarray | None = None
    source: WellLogSequence | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid window [{self.start}, {self.end}]")
        if self.features.shape[0] != self.width:
            raise ValueError("feature block height differs from window width")

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    @property
    def indices(self) -> range:
        return range(self.start, self.end + 1)


def window(seq: WellLogSequence, start: int, end: int) -> DepthWindow:
    if not 0 <= start <= end < seq.L:
        raise ValueError(f"window [{start}, {end}] outside well of length {seq.L}")
    labels = None if seq.labels is None else seq.labels[start:end + 1]
    return DepthWindow(seq.well_id, start, end, seq.values[start:end + 1], labels, seq)


def make_windows(seq: WellLogSequence, width: int, stride: int) -> list[DepthWindow]:
    """Slide a ``width`` window with step ``stride``; the tail window is truncated, never dropped."""
    if width < 1 or stride < 1:
        raise ValueError("width and stride must be positive")
    if stride > width:
        raise ValueError("stride larger than width would leave depths uncovered")
    out = []
    for s in range(0, seq.L, stride):
        e = min(s + width - 1, seq.L - 1)
        out.append(window(seq, s, e))
        if e == seq.L - 1:
            break
    return out
