import math
import textwrap

import pytest
import yaml

from lpwa_geom import config as C
from lpwa_geom.errors import ConfigError

from conftest import SCENARIOS, golden


@pytest.mark.parametrize("parser,value,expect", [
    (C.parse_length, "20 km", 20e3),
    (C.parse_length, "150 m", 150.0),
    (C.parse_length, 7, 7.0),
    (C.parse_time, "300 s", 300.0),
    (C.parse_time, "100 ms", 0.1),
    (C.parse_time, "2 d", 172800.0),
    (C.parse_freq, "10 kHz", 1e4),
    (C.parse_freq, "1.5 MHz", 1.5e6),
    (C.parse_energy, "1000 J", 1000.0),
    (C.parse_energy, "5 mJ", 5e-3),
    (C.parse_density, "3.2 /km2", 3.2e-6),
    (C.parse_density, 3.2, 3.2e-6),
    (C.parse_density, "1e-6 /m2", 1e-6),
    (C.parse_power, "126 mW", 0.126),
    (C.parse_power, "30 dBm", 1.0),
    (C.parse_power, "0 dBW", 1.0),
    (C.parse_psd, "-174 dBm/Hz", 10 ** -20.4),
    (C.parse_ratio, "3 dB", 10 ** 0.3),
    (C.parse_ratio, 0.5, 0.5),
    (C.parse_db, "133 dB", 133.0),
])
def test_units(parser, value, expect):
    assert parser(value, "x") == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("parser,value", [
    (C.parse_length, "3 furlong"),
    (C.parse_time, "abc"),
    (C.parse_power, "3 parsec"),
    (C.parse_power, True),
    (C.parse_psd, "-174 dBm"),
    (C.parse_db, "3 W"),
    (C.parse_length, [1, 2]),
])
def test_bad_units(parser, value):
    with pytest.raises(ConfigError, match="x"):
        parser(value, "x")


def test_golden_scenarios_load():
    for name in ("fig1_validation", "fig2_sc1", "fig2_sc2", "fig4_scalability"):
        sc = golden(name)
        assert sc.name == name
    sc = golden("fig1_validation")
    assert sc.cls(1).tx_power == pytest.approx(10 ** -0.9, rel=1e-12)
    assert sc.cls(2).lambda_parent == pytest.approx(3.8e-6)
    assert sc.channel.alpha2 == pytest.approx(10 ** 13.3 / 1000.0 ** 3.83, rel=1e-12)
    assert sc.channel.delta == pytest.approx(3.83)


def test_fig2_density_difference():
    assert golden("fig2_sc1").cls(1).lambda_parent == pytest.approx(2.4e-6)
    assert golden("fig2_sc2").cls(1).lambda_parent == pytest.approx(1.2e-6)


def _edited(tmp_path, edit):
    doc = C.read_document(SCENARIOS / "fig2_sc1.yaml")
    edit(doc)
    p = tmp_path / "edited.yaml"
    p.write_text(yaml.safe_dump(doc))
    return C.load_scenario(p)


def test_override_equals_edited_file(tmp_path):
    def edit(doc):
        doc["classes"][0]["tx_power"] = "50 mW"
        doc["network"]["lambda_ap"] = "0.1 /km2"
        doc["classes"][1]["replicas"] = 3

    via_file = _edited(tmp_path, edit)
    via_set = C.load_scenario(SCENARIOS / "fig2_sc1.yaml", C.parse_set_args(
        ["class1.tx_power=50 mW", "network.lambda_ap=0.1 /km2", "classes.1.replicas=3"]))
    assert via_set == via_file
    assert C.scenario_hash(via_set) == C.scenario_hash(via_file)


def test_set_values_are_typed():
    out = C.parse_set_args(["a=3", "b=0.5", "c=true", "d=126 mW", "e=[1, 2]"])
    assert out == {"a": 3, "b": 0.5, "c": True, "d": "126 mW", "e": [1, 2]}
    with pytest.raises(ConfigError):
        C.parse_set_args(["novalue"])


def test_override_unknown_field_rejected():
    with pytest.raises(ConfigError, match="tx_powr"):
        C.load_scenario(SCENARIOS / "fig2_sc1.yaml", {"class1.tx_powr": 0.1})
    with pytest.raises(ConfigError, match="class9"):
        C.load_scenario(SCENARIOS / "fig2_sc1.yaml", {"class9.tx_power": 0.1})


def test_override_type_checked():
    with pytest.raises(ConfigError, match="replicas"):
        C.load_scenario(SCENARIOS / "fig2_sc1.yaml", {"class1.replicas": 1.5})


def test_yaml_error_has_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("schema_version: 1\nname: x\nnetwork: {total_bw: 100 kHz\n  lambda_ap: [\n")
    with pytest.raises(ConfigError, match=r"line \d+, column \d+"):
        C.load_scenario(p)


def test_missing_and_empty(tmp_path):
    with pytest.raises(ConfigError):
        C.load_scenario(tmp_path / "nope.yaml")
    p = tmp_path / "empty.yaml"
    p.write_text("")
    with pytest.raises(ConfigError, match="empty"):
        C.load_scenario(p)


def test_unknown_top_level_key(tmp_path):
    doc = C.read_document(SCENARIOS / "fig2_sc1.yaml")
    doc["bandwith"] = 3
    with pytest.raises(ConfigError, match="bandwith"):
        C.scenario_from_dict(doc)


def test_schema_version_checked():
    doc = C.read_document(SCENARIOS / "fig2_sc1.yaml")
    doc["schema_version"] = 99
    with pytest.raises(ConfigError, match="schema_version"):
        C.scenario_from_dict(doc)


def test_invalid_values_surface_as_config_errors():
    doc = C.read_document(SCENARIOS / "fig2_sc1.yaml")
    doc["classes"][0]["upsilon"] = -1
    with pytest.raises(ConfigError):
        C.scenario_from_dict(doc)


def test_pathloss_forms_agree():
    doc = C.read_document(SCENARIOS / "fig2_sc1.yaml")
    a = C.scenario_from_dict(doc)
    doc["channel"]["pathloss"] = {"alpha1": 0.0, "alpha2": a.channel.alpha2, "delta": 3.83}
    b = C.scenario_from_dict(doc)
    assert b.channel.alpha2 == a.channel.alpha2
    assert b.channel.delta == pytest.approx(a.channel.delta, rel=1e-15)


def test_hash_stable_and_sensitive():
    a = golden("fig2_sc1")
    assert C.scenario_hash(a) == C.scenario_hash(golden("fig2_sc1"))
    assert len(C.scenario_hash(a)) == 16
    assert C.scenario_hash(a) != C.scenario_hash(golden("fig2_sc1", **{"mc.seed": 2}))


def test_resolved_params_roundtrip():
    sc = golden("fig1_validation")
    res = C.resolved_params(sc)
    assert res["schema_version"] == C.SCHEMA_VERSION
    assert res["classes"][0]["tx_power"] == sc.cls(1).tx_power
    assert not any(isinstance(v, float) and math.isnan(v) for v in res["channel"].values())


def test_comment_free_minimal_document(tmp_path):
    text = textwrap.dedent("""
        schema_version: 1
        channel:
          pathloss: {alpha1: 0, alpha2: 1.0, delta: 4}
        network: {total_bw: 100 kHz, lambda_ap: 0.055}
        classes:
          - {id: 1, lambda_parent: 1, upsilon: 10, sigma_scatter: 50 m, report_period: 60 s,
             tx_time: 10 ms, signal_bw: 10 kHz,
             energy: {e0: 10 J, e_static: 0 J, e_listen: 0 J, p_circuit: 0 W, eta: 1}}
    """)
    p = tmp_path / "min.yaml"
    p.write_text(text)
    sc = C.load_scenario(p)
    assert sc.cls(1).replicas == 1 and sc.interest == 1
    assert sc.network.lambda_ap == pytest.approx(5.5e-8)
