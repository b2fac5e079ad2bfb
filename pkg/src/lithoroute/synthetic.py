"""Synthetic well-log tables in the layout of the public facies benchmark.

Used for the demo command and for end-to-end tests when the real table is not
available. Facies follow a Markov chain of coherent runs; logs are class means
plus smoothed noise and a per-well offset, so neighbouring classes overlap and
the base classifier is usefully but not perfectly confident.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

FACIES = ("SS", "CSiS", "FSiS", "SiSh", "MS", "WS", "D", "PS", "BS")
NONMARINE = (0, 1, 2)
MARINE = (3, 4, 5, 6, 7, 8)
LOGS = ("GR", "ILD_log10", "DeltaPHI", "PHIND", "PE")

# class means for GR, ILD_log10, DeltaPHI, PHIND, PE
MEANS = np.array([
    [58.0, 0.55, 8.0, 12.5, 3.1],
    [66.0, 0.52, 6.0, 13.5, 3.2],
    [75.0, 0.50, 5.5, 14.0, 3.3],
    [85.0, 0.60, 3.5, 12.0, 3.4],
    [66.0, 0.75, 2.0, 11.0, 4.0],
    [58.0, 0.85, 1.5, 10.0, 4.4],
    [50.0, 0.95, 0.5, 7.0, 3.9],
    [48.0, 0.90, 0.5, 10.5, 4.7],
    [40.0, 1.00, 1.0, 12.0, 5.0],
])
NOISE = np.array([12.0, 0.15, 3.0, 4.0, 0.5])
HEADER = ("Facies", "Formation", "Well Name", "Depth", *LOGS, "NM_M", "RELPOS")


def facies_sequence(n: int, rng: np.random.Generator, mean_run: float = 8.0) -> np.ndarray:
    """Runs of geometric length (at least 2); moves mostly to an adjacent class of the same group."""
    out = np.empty(n, dtype=np.int64)
    k = int(rng.integers(len(FACIES)))
    t = 0
    while t < n:
        run = max(2, int(rng.geometric(1.0 / mean_run)))
        out[t:t + run] = k
        t += run
        group = NONMARINE if k in NONMARINE else MARINE
        if rng.random() < 0.15:
            group = MARINE if group is NONMARINE else NONMARINE
            k = int(rng.choice(group))
            continue
        pos = group.index(k)
        steps = [p for p in (pos - 1, pos + 1) if 0 <= p < len(group)]
        k = group[int(rng.choice(steps))]
    return out


def _ar1(n: int, phi: float, rng: np.random.Generator) -> np.ndarray:
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    scale = np.sqrt(1 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + scale * e[t]
    return x


def synthetic_rows(
    n_wells: int = 6,
    samples_per_well: int = 400,
    seed: int = 0,
    missing_fraction: float = 0.0,
    noise_scale: float = 1.0,
) -> list[dict[str, str]]:
    rng = np.random.default_rng(seed)
    rows = []
    for w in range(n_wells):
        name = f"SYN-{chr(ord('A') + w % 26)}{'' if w < 26 else w // 26}"
        n = int(samples_per_well)
        fac = facies_sequence(n, rng)
        offset = rng.normal(0.0, 0.3, size=len(LOGS)) * NOISE
        noise = np.stack([_ar1(n, 0.6, rng) for _ in LOGS], axis=1) * NOISE * noise_scale
        logs = MEANS[fac] + offset + noise
        top = 2700.0 + float(rng.integers(0, 400))
        depth = top + 0.5 * np.arange(n)
        nm = np.where(np.isin(fac, NONMARINE), 1, 2)
        # formations change with the depositional group; RELPOS falls 1 -> 0 inside each
        change = np.concatenate([[0], np.cumsum(nm[1:] != nm[:-1])])
        for t in range(n):
            members = np.flatnonzero(change == change[t])
            relpos = 1.0 - (t - members[0]) / max(1, len(members) - 1)
            row = {
                "Facies": str(int(fac[t]) + 1),
                "Formation": f"{'A' if nm[t] == 1 else 'B'}{int(change[t]) + 1} {'SH' if nm[t] == 2 else 'SS'}",
                "Well Name": name,
                "Depth": f"{depth[t]:.1f}",
                "NM_M": str(int(nm[t])),
                "RELPOS": f"{relpos:.3f}",
            }
            for j, log in enumerate(LOGS):
                v = logs[t, j]
                row[log] = "" if rng.random() < missing_fraction else f"{v:.4f}"
            rows.append(row)
    return rows


def write_facies_csv(path: str | Path, **kwargs) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = synthetic_rows(**kwargs)
    with path.open("w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=HEADER, lineterminator="\n")
        wr.writeheader()
        wr.writerows(rows)
    return path
