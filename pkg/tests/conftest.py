import numpy as np
import pytest

from lithoroute.data import LabelSchema, WellLogSequence
from lithoroute.synthetic import write_facies_csv

ABC = LabelSchema(("A", "B", "C"))

SMALL_CONFIG = """\
[data]
path = facies.csv

[split]
train = SYN-A, SYN-B
val = SYN-C
test = SYN-D, SYN-E

[base]
hidden = 32
epochs = 8
patience = 4

[backend]
kind = mock

[run]
root = runs
seed = 3
"""


def make_seq(values, labels=None, well_id="W", depths=None, channels=None, K=3):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    L, M = values.shape
    depths = np.arange(L, dtype=float) * 0.5 + 100.0 if depths is None else depths
    channels = channels or tuple(f"c{j}" for j in range(M))
    return WellLogSequence(well_id, depths, channels, values, labels, 0.5, K)


@pytest.fixture
def workspace(tmp_path):
    """A small synthetic facies table plus a config pointing at it."""
    write_facies_csv(tmp_path / "facies.csv", n_wells=5, samples_per_well=120, seed=11)
    cfg = tmp_path / "pipeline.ini"
    cfg.write_text(SMALL_CONFIG)
    return cfg


# acceptance verdict lines, echoed in the terminal summary so they survive output capture
ACCEPTANCE: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
