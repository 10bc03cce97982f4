# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import os
import textwrap

import pytest

from swh.heavyhitters.config import (
    SEED_ENVVAR,
    ExperimentConfig,
    emit_config,
    get_config,
    load_config,
    parse_config,
    parse_data_kind,
    read_count_file,
    seed_from_environment,
)
from swh.heavyhitters.harness import Custom, Planted, UniformBits, Zipf
from swh.heavyhitters.privacy import PrivacyBudget


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv("SWH_CONFIG_FILENAME", raising=False)
    monkeypatch.delenv(SEED_ENVVAR, raising=False)


@pytest.fixture
def configfile_path(tmp_path):
    configfile_path = os.path.join(tmp_path, "heavy_hitters.yml")
    with open(configfile_path, "w") as configfile:
        configfile.write(textwrap.dedent("""
            heavy_hitters:
              mechanism: bucket
              n: 500
              N: 32
              epsilon: 2.0
              seeds: 3
            """))
    return configfile_path


def test_default_config():
    config = ExperimentConfig()
    assert config.mechanism == "jl"
    assert config.to_dict()["N"] == 256
    assert "universe_size" not in config.to_dict()
    assert config.budget == PrivacyBudget(epsilon=1.0, delta=1e-5)


def test_replacement_budget():
    assert ExperimentConfig(replacement_dp=True).budget.replacement


@pytest.mark.parametrize(
    "changes,message",
    [
        ({"mechanism": "rappor"}, "Invalid configuration mechanism"),
        ({"epsilon": 0}, "Invalid configuration epsilon"),
        ({"delta": 1.0}, "Invalid configuration delta"),
        ({"universe_size": 1}, "Invalid configuration N"),
        ({"repeats": 2}, "odd"),
        ({"k1_rule": "greedy"}, "Invalid configuration k1_rule"),
        ({"data": "gaussian"}, "Invalid configuration data"),
        ({"data": "uniformbits"}, "N = 2"),
        ({"data": "planted:300:10"}, "outside the universe"),
        ({"data": "planted:3:5000"}, "exceeds n"),
        (
            {"inverse_square_gamma": True, "n": 1, "data": "zipf:1"},
            "at least two clients",
        ),
    ],
)
def test_invalid_config(changes, message):
    with pytest.raises(ValueError, match=message):
        ExperimentConfig(**changes)


def test_count_file_must_match_universe(datadir):
    path = os.path.join(datadir, "counts.txt")
    assert ExperimentConfig(data=f"file:{path}", universe_size=8, n=20)
    with pytest.raises(ValueError, match="expected N=16"):
        ExperimentConfig(data=f"file:{path}", universe_size=16)


def test_from_dict_unknown_key():
    with pytest.raises(ValueError, match="Unknown configuration keys: foo"):
        ExperimentConfig.from_dict({"foo": 1})


def test_override():
    config = ExperimentConfig().override(n=42, universe_size=8)
    assert (config.n, config.universe_size) == (42, 8)
    with pytest.raises(ValueError):
        ExperimentConfig().override(seeds=0)


def test_parse_data_kind():
    assert parse_data_kind("planted:3:70") == Planted(hh_index=3, hh_count=70)
    assert parse_data_kind("zipf:1.5") == Zipf(exponent=1.5)
    assert parse_data_kind("uniformbits") == UniformBits()


@pytest.mark.parametrize(
    "text", ["planted:3", "planted:a:b", "zipf:x", "uniformbits:2", "file:", "other"]
)
def test_parse_data_kind_invalid(text):
    with pytest.raises(ValueError, match="Invalid data generator"):
        parse_data_kind(text)


def test_read_count_file(datadir):
    assert read_count_file(os.path.join(datadir, "counts.txt")) == Custom(
        counts=(4, 0, 9, 1, 2, 0, 0, 4)
    )


def test_read_count_file_invalid(tmp_path):
    path = tmp_path / "counts.txt"
    path.write_text("1 2 x")
    with pytest.raises(ValueError, match="only hold integers"):
        read_count_file(str(path))
    path.write_text("1 -2")
    with pytest.raises(ValueError, match="negative"):
        read_count_file(str(path))


def test_emit_config():
    config = ExperimentConfig(mechanism="glps", repeats=3, sparsity=4)
    text = emit_config(config)
    assert text.splitlines()[0] == "mechanism: glps"
    assert "N: 256" in text.splitlines()
    assert "sparsity: 4" in text.splitlines()
    assert parse_config(text) == config


def test_parse_config_not_a_mapping():
    with pytest.raises(ValueError, match="mapping"):
        parse_config("- jl\n- glps\n")


def test_get_config(configfile_path):
    assert get_config(configfile_path)["mechanism"] == "bucket"
    assert get_config(None) == {}


def test_get_config_envvar_precedence(monkeypatch, configfile_path, tmp_path):
    other = tmp_path / "other.yml"
    other.write_text("heavy_hitters:\n  mechanism: naive\n")
    monkeypatch.setenv("SWH_CONFIG_FILENAME", str(other))
    assert get_config(configfile_path) == {"mechanism": "naive"}


def test_load_config(configfile_path):
    config = load_config(configfile_path, {"n": 600, "beta": 0.05})
    assert config.mechanism == "bucket"
    assert config.n == 600
    assert config.universe_size == 32
    assert config.epsilon == 2.0
    assert config.beta == 0.05
    assert config.delta == ExperimentConfig().delta


def test_load_config_universe_override(configfile_path):
    assert load_config(configfile_path, {"universe_size": 64}).universe_size == 64


def test_seed_from_environment(monkeypatch, configfile_path):
    assert seed_from_environment() is None
    monkeypatch.setenv(SEED_ENVVAR, "17")
    assert seed_from_environment() == 17
    assert load_config(configfile_path, {"master_seed": 3}).master_seed == 17
    monkeypatch.setenv(SEED_ENVVAR, "seventeen")
    with pytest.raises(ValueError, match=SEED_ENVVAR):
        seed_from_environment()
