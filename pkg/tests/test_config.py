import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamtrack.config import (SECTIONS, ConfigError, dump_config, flatten, load_config,
                              parse_override, resolve_key)
from beamtrack.sim import FIELD_NAMES, ExperimentConfig


def test_defaults():
    cfg = load_config()
    assert cfg == ExperimentConfig()
    assert (cfg.n_antennas, cfg.n_bins, cfg.spacing_ratio, cfg.horizon) == (32, 64, 0.5, 500)
    assert (cfg.angle_min, cfg.angle_max) == (-180.0, 0.0)


def test_every_field_has_a_section():
    mapped = {f for keys in SECTIONS.values() for f in keys.values()}
    assert mapped == set(FIELD_NAMES)


def test_sectioned_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[mobility]\nkind = "gaussian"\nsigma_phi_sq = 0.75\n[policy]\ngamma = 0.03\n'
                 '[channel]\nsnr_db = 10\n[run]\nhorizon = 500\n')
    cfg = load_config(p)
    assert cfg.mobility == "gaussian" and cfg.gamma == 0.03 and cfg.snr_db == 10.0
    assert isinstance(cfg.snr_db, float)


def test_flat_keys_and_overrides(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("gamma = 0.1\nalgorithm = 'ekf'\n")
    cfg = load_config(p, ["policy.gamma=0.005", "tau_max=7", "exhaustive_perfect=false",
                          "init_min=-100"])
    assert cfg.gamma == 0.005 and cfg.algorithm == "ekf" and cfg.tau_max == 7
    assert cfg.exhaustive_perfect is False and cfg.init_min == -100.0


@pytest.mark.parametrize("key", ["foo", "policy.foo", "nosuch.gamma", "mobility.gamma"])
def test_unknown_keys_are_named(key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        resolve_key(key)


def test_unknown_key_in_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("[policy]\ngama = 0.1\n")
    with pytest.raises(ConfigError, match="policy.gama"):
        load_config(p)


def test_nested_table_rejected():
    with pytest.raises(ConfigError):
        flatten({"policy": {"inner": {"x": 1}}})


def test_missing_file_names_path(tmp_path):
    with pytest.raises(ConfigError, match="nope.toml"):
        load_config(tmp_path / "nope.toml")


def test_bad_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("gamma = = 1\n")
    with pytest.raises(ConfigError, match="bad.toml"):
        load_config(p)


@pytest.mark.parametrize("text,field", [("horizon=abc", "horizon"), ("gamma=x", "gamma"),
                                        ("exhaustive_perfect=maybe", "exhaustive_perfect"),
                                        ("horizon=0", "horizon"), ("algorithm=oracle", "algorithm")])
def test_invalid_values_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field):
        load_config(None, [text])


def test_override_syntax():
    with pytest.raises(ConfigError):
        parse_override("gamma")
    assert parse_override(" gamma = 0.2") == ("gamma", 0.2)


def test_type_checks_for_file_values():
    with pytest.raises(ConfigError, match="horizon"):
        flatten({"horizon": 1.5})
    with pytest.raises(ConfigError, match="algorithm"):
        flatten({"algorithm": 3})
    assert flatten({"horizon": 10.0}) == {"horizon": 10}


@given(st.floats(0, 5), st.integers(1, 1000), st.sampled_from(["proposed", "ekf", "scan5"]),
       st.booleans())
def test_dump_round_trip(tmp_path_factory, gamma, horizon, algorithm, perfect):
    cfg = ExperimentConfig(gamma=gamma, horizon=horizon, algorithm=algorithm,
                           exhaustive_perfect=perfect, init_min=-120.0)
    p = tmp_path_factory.mktemp("cfg") / "c.toml"
    p.write_text(dump_config(cfg))
    assert load_config(p) == cfg
