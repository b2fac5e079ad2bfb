from pathlib import Path

import pytest

from lithoroute.config import RESOURCES, PipelineConfig, load_config, parse_config
from lithoroute.errors import ConfigError


def test_defaults_and_sections():
    cfg = parse_config("[split]\ntrain = A, B\nval = C\ntest = D\n[tools]\ntrend = no\n")
    assert cfg.split.train == ("A", "B") and cfg.split.test == ("D",)
    assert cfg.tools.trend is False and cfg.tools.k == 5
    assert cfg.base.hidden == 128 and cfg.reasoning.votes == 3
    assert cfg.fixed_threshold is None


def test_unknown_section_and_key_rejected():
    with pytest.raises(ConfigError, match="section"):
        parse_config("[tool]\ntrend = no\n")
    with pytest.raises(ConfigError, match="trnd"):
        parse_config("[tools]\ntrnd = no\n")


@pytest.mark.parametrize("text", [
    "[reasoning]\nvotes = 2\n",
    "[reasoning]\npersonas = analyst, oracle\n",
    "[routing]\nthreshold = 1.5\n",
    "[routing]\nthreshold = sometimes\n",
    "[tools]\nk = 0\n",
    "[tools]\nneighbors = maybe\n",
    "[base]\nhidden = many\n",
    "[split]\ntrain = A\ntest = A\n",
    "[backend]\nkind = psychic\n",
])
def test_invalid_values_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_override_is_typed_and_validated():
    cfg = PipelineConfig()
    assert cfg.override("routing.threshold", 0.4).fixed_threshold == 0.4
    assert cfg.override("tools.history", "false").tools.history is False
    assert cfg.override("reasoning.temperature", "0.2").reasoning.temperature == 0.2
    with pytest.raises(ConfigError):
        cfg.override("tools.colour", "red")
    with pytest.raises(ConfigError):
        cfg.override("reasoning.votes", 4)


def test_digest_tracks_selected_sections():
    a = PipelineConfig()
    b = a.override("reasoning.temperature", 0.1)
    assert a.digest(("base",)) == b.digest(("base",))
    assert a.digest() != b.digest()
    assert a.digest(extra="x") != a.digest()
    assert parse_config(a.to_text()) == a


def test_paths_resolve(tmp_path):
    (tmp_path / "c.ini").write_text("[data]\npath = wells.csv\n")
    cfg = load_config(tmp_path / "c.ini")
    assert cfg.resolve(cfg.data.path) == tmp_path / "wells.csv"
    assert cfg.resolve(cfg.data.schema) == RESOURCES / "facies_schema.ini"
    assert cfg.resolve(cfg.data.schema).exists()
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


@pytest.mark.parametrize("name", ["facies.ini", "demo.ini"])
def test_shipped_configs_parse(name):
    cfg = load_config(Path(__file__).parent.parent / "configs" / name)
    assert cfg.split.test and cfg.backend.kind == "mock"
