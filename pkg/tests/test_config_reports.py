from __future__ import annotations

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfiq.config import (
    DEFAULT_SEED,
    SCHEMA,
    ExperimentConfig,
    config_from_pairs,
    load_config,
    parse_config_text,
)
from mfiq.errors import MfiqError
from mfiq.reports import Check, RunReport


def parse_error(text):
    with pytest.raises(MfiqError) as exc:
        ExperimentConfig(parse_config_text(text))
    assert exc.value.code == "config_error"
    return str(exc.value)


# -- parsing -------------------------------------------------------------------


def test_parses_types_comments_and_dotted_keys():
    values = parse_config_text(
        "# header\n"
        "preset = custom   # trailing comment\n"
        "\n"
        "grid.n_points = 512\n"
        "grid.x_min = -4\n"
        "grid.x_max = 4.5e0\n"
        "custom.coefficients = 0, 0, 0.5\n"
        "propagate.refine_check = no\n"
        "seed = 18446744073709551615\n"
    )
    assert values == {
        "preset": "custom",
        "grid.n_points": 512,
        "grid.x_min": -4.0,
        "grid.x_max": 4.5,
        "custom.coefficients": [0.0, 0.0, 0.5],
        "propagate.refine_check": False,
        "seed": 2**64 - 1,
    }


@pytest.mark.parametrize("text,fragment", [
    ("grid.npoints = 10\n", "unknown key 'grid.npoints'"),
    ("preset = harmonic\npreset = harmonic\n", "duplicate key"),
    ("preset harmonic\n", "expected 'key = value'"),
    ("grid.n_points =\n", "empty value"),
    ("grid.n_points = 12.5\n", "not a valid int"),
    ("grid.n_points = 4\n", "out of range"),
    ("constants.hbar = 0\n", "out of range"),
    ("constants.mass = -1\n", "out of range"),
    ("harmonic.omega = nan\n", "not a valid float"),
    ("preset = lattice\n", "out of range"),
    ("seed = -1\n", "out of range"),
    ("fisher.accuracy = 3\n", "out of range"),
    ("propagate.refine_check = maybe\n", "not a valid bool"),
])
def test_rejects_bad_lines(text, fragment):
    assert fragment in parse_error(text)


def test_error_names_the_line():
    assert "line 3" in parse_error("preset = harmonic\n# ok\nbogus = 1\n")


def test_missing_required_key_is_named():
    cfg = ExperimentConfig(parse_config_text("preset = harmonic\n"))
    with pytest.raises(MfiqError) as exc:
        cfg.grid()
    assert exc.value.code == "config_error" and "grid.n_points" in str(exc.value)


def test_unreadable_file(tmp_path):
    with pytest.raises(MfiqError) as exc:
        load_config(tmp_path / "missing.conf")
    assert exc.value.code == "config_error"


def test_defaults_and_preset_defaults():
    cfg = config_from_pairs(preset="plane_wave", grid__n_points=64)
    assert cfg.seed == DEFAULT_SEED
    assert cfg.get("constants.hbar") == 1.0
    assert cfg.get("propagate.t_final") == 0.5
    assert config_from_pairs(preset="harmonic").get("propagate.t_final") == pytest.approx(2 * math.pi)
    assert config_from_pairs(preset="custom").get("propagate.dt") == 1e-3


def test_echo_includes_defaults_sorted():
    echo = config_from_pairs(preset="harmonic", grid__n_points=128).echo()
    assert list(echo) == sorted(echo)
    assert echo["grid.n_points"] == 128 and echo["seed"] == 42 and echo["harmonic.omega"] == 1.0


def test_overrides():
    cfg = config_from_pairs(preset="harmonic").with_overrides(seed=7, grid__n_points=64)
    assert cfg.seed == 7 and cfg.get("grid.n_points") == 64


@pytest.mark.parametrize("preset,domain", [
    ("harmonic", (-10.0, 10.0, "dirichlet")),
    ("infinite_well", (0.0, 1.0, "dirichlet")),
    ("plane_wave", (0.0, 2 * math.pi, "periodic")),
])
def test_preset_domains(preset, domain):
    lo, hi, boundary = config_from_pairs(preset=preset, grid__n_points=64).domain()
    assert (lo, hi) == pytest.approx(domain[:2]) and boundary == domain[2]


def test_free_gaussian_domain_covers_the_spread_packet():
    lo, hi, _ = config_from_pairs(preset="free_gaussian").domain()
    # sigma(2) = sqrt(2) for sigma0 = 1; eight widths either side
    assert hi == pytest.approx(8 * math.sqrt(2)) and lo == pytest.approx(-hi)


def test_custom_needs_an_interval():
    with pytest.raises(MfiqError) as exc:
        config_from_pairs(preset="custom", grid__n_points=64).grid()
    assert "grid.x_min" in str(exc.value)


def test_well_rejects_periodic():
    with pytest.raises(MfiqError):
        config_from_pairs(preset="infinite_well", grid__boundary="periodic").domain()


@given(n=st.integers(8, 10**6), hbar=st.floats(1e-3, 1e3), seed=st.integers(0, 2**64 - 1))
def test_roundtrip_through_text(n, hbar, seed):
    text = f"preset = harmonic\ngrid.n_points = {n}\nconstants.hbar = {hbar!r}\nseed = {seed}\n"
    values = parse_config_text(text)
    assert values == {"preset": "harmonic", "grid.n_points": n, "constants.hbar": hbar, "seed": seed}


def test_every_schema_key_has_a_kind():
    assert all(key_def.kind in (str, int, float, bool, list) for key_def in SCHEMA.values())


# -- checks and reports ------------------------------------------------------------


def test_check_kinds():
    assert Check.within("a", 1.0, 1.1, 0.2).passed
    assert not Check.within("a", 1.0, 1.5, 0.2).passed
    assert Check.at_most("b", 1e-9, 1e-8).passed and not Check.at_most("b", 1e-7, 1e-8).passed
    assert Check.at_least("c", 2.0, 1.8).passed and not Check.at_least("c", 1.0, 1.8).passed
    assert Check.between("d", 16.0, 14.0, 18.0).passed and not Check.between("d", 20.0, 14.0, 18.0).passed
    assert Check.flag("e", True).passed and not Check.flag("e", False).passed


def test_non_finite_values_fail():
    for check in (Check.at_most("x", math.nan, 1.0), Check.within("x", math.inf, 0.0, 1.0),
                  Check.at_least("x", math.nan, 0.0)):
        assert not check.passed


def test_check_dict_fields():
    d = Check.within("p2", 0.25, 0.25, 1e-6, "momentum-fisher").to_dict()
    assert d == {"value": 0.25, "expected": 0.25, "tolerance": 1e-6, "kind": "within",
                 "equation": "momentum-fisher", "pass": True}


def make_report():
    r = RunReport("fisher", {"preset": "harmonic", "seed": 42}, 42)
    r.add(Check.at_most("a", 1e-9, 1e-8, "eq-a"), Check.flag("b", True, equation="eq-b"),
          Check.at_most("c", 2.0, 1.0, "eq-a"))
    r.results["nan_value"] = math.nan
    return r


def test_report_pass_is_conjunction():
    r = make_report()
    assert not r.passed
    d = json.loads(r.to_json())
    assert d["pass"] is False and d["checks"]["a"]["pass"] is True
    assert d["equations"] == ["eq-a", "eq-b"]
    assert d["results"]["nan_value"] == "nan"
    assert {"command", "version", "backend", "seed", "config"} <= set(d)


def test_report_error_forces_failure():
    r = RunReport("mfi", {}, 1)
    r.add(Check.flag("ok", True))
    assert r.passed
    r.fail_with("potential_unbounded", "V falls off the edge")
    assert not r.passed and r.summary_lines()[-2].startswith("ERROR potential_unbounded")


def test_report_rejects_duplicate_names():
    r = RunReport("x", {}, 1)
    r.add(Check.flag("same", True), Check.flag("same", True))
    with pytest.raises(ValueError):
        r.to_dict()


def test_report_bytes_are_reproducible_and_timing_is_separate(tmp_path):
    a, b = make_report(), make_report()
    pa = a.write(tmp_path / "a", 1.234)
    pb = b.write(tmp_path / "b", 9.876)
    assert pa.read_bytes() == pb.read_bytes()
    timing = json.loads((tmp_path / "a" / "timing.json").read_text())
    assert timing["wall_clock_seconds"] == 1.234
    assert "wall_clock_seconds" not in pa.read_text()
