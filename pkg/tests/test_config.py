import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wrenchlink import (
    ConfigError,
    SimClock,
    apply_patch,
    config_schema,
    config_sha256,
    default_config,
    dumps_config,
    load_config,
    loads_config,
    save_config,
    sim_clock_advance,
)


def test_default_config_is_valid_and_runs_at_100hz(cfg):
    assert cfg.tick_rate_hz == 100.0
    assert cfg.tick_us == 10_000
    assert cfg.ma_window == 6


def test_bundled_default_file_matches_defaults():
    from importlib import resources

    text = resources.files("wrenchlink").joinpath("data/default.ini").read_text()
    assert loads_config(text) == default_config()


def test_round_trip_identity(tmp_path, cfg):
    path = tmp_path / "pipeline.ini"
    save_config(cfg, str(path))
    assert load_config(str(path)) == cfg
    # a second serialization is byte-identical too
    assert dumps_config(load_config(str(path))) == dumps_config(cfg)


def test_round_trip_of_non_default_values(tmp_path, cfg):
    tuned = dataclasses.replace(cfg, kappa_fy=17.25, delta=-0.031, tw_short=5, h_low=1500.5)
    path = tmp_path / "tuned.ini"
    save_config(tuned, str(path))
    assert load_config(str(path)) == tuned


def test_partial_file_falls_back_to_defaults(cfg):
    parsed = loads_config("[wrench]\nkappa_fy = 12.5\n")
    assert parsed.kappa_fy == 12.5
    assert parsed.kappa_fx == cfg.kappa_fx
    assert parsed.tick_rate_hz == 100.0


def test_equal_hall_thresholds_rejected():
    with pytest.raises(ConfigError, match="h_low < h_high"):
        loads_config("[hall]\nh_low = 3000\nh_high = 3000\n")


def test_ma_window_six_accepted():
    assert loads_config("[fusion]\nma_window = 6\n").ma_window == 6


@pytest.mark.parametrize(
    "snippet,invariant",
    [
        ("[loop]\ntick_rate_hz = 0\n", "tick_rate_hz > 0"),
        ("[servo]\nangle_min = 300\n", "angle_min < angle_max"),
        ("[wrench]\nc_min = 0\n", "c_min > 0"),
        ("[fusion]\nma_window = 0\n", "ma_window >= 1"),
        ("[hall]\nhall_lp_cutoff = 0\n", "0 < hall_lp_cutoff <= 1"),
        ("[hall]\nhall_lp_cutoff = 1.5\n", "0 < hall_lp_cutoff <= 1"),
        ("[wrench]\nsign_fy = 2, 1, -1, -1\n", "sign matrix"),
        ("[wrench]\nsigma_fy = 0, 1, -1, -1\n", "sigma entries"),
        ("[wrench]\ntw_short = 25\n", "tw_short <= tw_long"),
        ("[fusion]\nbend_min = 200\n", "bend_min < bend_max"),
    ],
)
def test_validation_names_first_violated_invariant(snippet, invariant):
    with pytest.raises(ConfigError, match=invariant):
        loads_config(snippet)


def test_unknown_key_and_section_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        loads_config("[wrench]\nkappa_bogus = 1\n")
    with pytest.raises(ConfigError, match="unknown config section"):
        loads_config("[bogus]\nx = 1\n")


def test_malformed_file_is_a_parse_error():
    with pytest.raises(ConfigError, match="cannot parse"):
        loads_config("kappa_fy = 1\n")  # key outside any section
    with pytest.raises(ConfigError, match="bad value"):
        loads_config("[wrench]\nkappa_fy = fast\n")


def test_missing_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "absent.ini"))


def test_config_hash_tracks_content(cfg):
    assert config_sha256(cfg) == config_sha256(default_config())
    assert config_sha256(cfg) != config_sha256(dataclasses.replace(cfg, kappa_fy=11.0))


# -- live patches ------------------------------------------------------------

def test_patch_applies_and_revalidates(cfg):
    patched = apply_patch(cfg, {"kappa_fy": 20.0, "delta": 0.05})
    assert patched.kappa_fy == 20.0
    assert patched.delta == 0.05
    assert cfg.kappa_fy == 10.0  # original untouched


def test_patch_rejects_unknown_field(cfg):
    with pytest.raises(ConfigError, match="unknown config field"):
        apply_patch(cfg, {"kappa_fy": 20.0, "warp_factor": 9})


def test_patch_rejects_unpatchable_field(cfg):
    with pytest.raises(ConfigError, match="not patchable"):
        apply_patch(cfg, {"tick_rate_hz": 200})


def test_patch_rejects_invariant_violation_atomically(cfg):
    with pytest.raises(ConfigError, match="h_low < h_high"):
        apply_patch(cfg, {"h_low": 3500.0})
    with pytest.raises(ConfigError, match="h_low < h_high"):
        apply_patch(cfg, {"kappa_fy": 99.0, "h_low": 3500.0})


def test_patch_rejects_non_numeric_values(cfg):
    with pytest.raises(ConfigError, match="requires a number"):
        apply_patch(cfg, {"kappa_fy": "big"})
    with pytest.raises(ConfigError, match="non-empty"):
        apply_patch(cfg, {})


def test_schema_covers_every_field_and_marks_patchable(cfg):
    schema = config_schema(cfg)
    names = {entry["name"] for entry in schema}
    assert len(schema) == len(dataclasses.fields(cfg))
    assert "kappa_fy" in names and "sign_fy" in names
    by_name = {e["name"]: e for e in schema}
    assert by_name["kappa_fy"]["patchable"] is True
    assert by_name["tick_rate_hz"]["patchable"] is False
    assert by_name["sign_fy"]["patchable"] is False
    assert by_name["kappa_fy"]["value"] == 10.0


# -- simulation clock --------------------------------------------------------

def test_clock_advance_examples():
    clock = SimClock.for_rate(100)
    assert clock.tick_us == 10_000
    assert sim_clock_advance(clock, 1).t_us == 10_000
    assert sim_clock_advance(clock.advance(1), 0).t_us == 10_000
    assert sim_clock_advance(clock, 100).t_us == 1_000_000


def test_clock_rejects_negative_ticks():
    with pytest.raises(ValueError):
        SimClock.for_rate(100).advance(-1)


@given(a=st.integers(min_value=0, max_value=10_000), b=st.integers(min_value=0, max_value=10_000))
def test_clock_advance_is_associative(a, b):
    clock = SimClock.for_rate(100)
    assert clock.advance(a).advance(b) == clock.advance(a + b)
