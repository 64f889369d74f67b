"""Tests for parameter validation, unit parsing and experiment config loading."""

import math

import pytest

from rateadapt.config import DEFAULT_PACKETS, DEFAULT_PHYSICAL_PACKETS
from rateadapt.errors import ConfigurationError
from rateadapt.loader import (
    build_config,
    config_to_dict,
    default_settings,
    load_config,
    load_settings,
    parse_override,
)
from rateadapt.params import (
    RadioConfig,
    Scheme,
    detection_threshold,
    extra_copy_assignments,
    repetition_plan,
)
from rateadapt.units import parse_quantity


@pytest.fixture
def radio():
    return RadioConfig(packet_bits=2400.0, bandwidth=250e3, slot_duration=1e-3, deadline=15)


def test_detection_threshold_table_values(radio):
    # 2^(L / (n W T_s)) - 1 with L W T_s = 9.6 bits/s/Hz at n = 1
    assert detection_threshold(radio, 1) == pytest.approx(2**9.6 - 1, rel=1e-12)
    assert detection_threshold(radio, 2) == pytest.approx(2**4.8 - 1, rel=1e-12)
    assert detection_threshold(radio, 1) == pytest.approx(775.05, abs=0.01)


def test_detection_threshold_decreases_with_fragments(radio):
    values = [detection_threshold(radio, n) for n in range(1, 16)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert all(v > 0 for v in values)


def test_detection_threshold_rejects_n_beyond_deadline(radio):
    with pytest.raises(ConfigurationError) as excinfo:
        detection_threshold(radio, 16)
    assert excinfo.value.key_path == "radio.fragments"


def test_detection_threshold_overflow_is_configuration_error():
    radio = RadioConfig(packet_bits=1e9, bandwidth=1.0, slot_duration=1e-3, deadline=1)
    with pytest.raises(ConfigurationError):
        detection_threshold(radio, 1)


@pytest.mark.parametrize(
    "n,T,scheme,kappa,tau,copies",
    [
        (3, 11, Scheme.OLRA, 3, 2, (4, 4, 3)),
        (3, 11, Scheme.OLRA_ES, 3, 2, (3, 3, 3)),
        (4, 12, Scheme.OLRA, 3, 0, (3, 3, 3, 3)),
        (4, 12, Scheme.OLRA_ES, 3, 0, (3, 3, 3, 3)),
        (1, 5, Scheme.OLRA, 5, 0, (5,)),
        (5, 5, Scheme.OLRA, 1, 0, (1, 1, 1, 1, 1)),
    ],
)
def test_repetition_plan(n, T, scheme, kappa, tau, copies):
    plan = repetition_plan(n, T, scheme)
    assert plan.kappa == kappa
    assert plan.tau == tau
    assert plan.copies == copies
    expected_span = T if scheme is Scheme.OLRA else T - tau
    assert plan.span == expected_span
    assert plan.silent_slots == T - expected_span


def test_repetition_plan_custom_extra():
    assert repetition_plan(3, 11, Scheme.OLRA, extra=(0, 2)).copies == (4, 3, 4)


def test_repetition_plan_rejects_bad_extra():
    with pytest.raises(ConfigurationError):
        repetition_plan(3, 11, Scheme.OLRA, extra=(0, 0))


@pytest.mark.parametrize("n,T", [(0, 5), (6, 5)])
def test_repetition_plan_rejects_n_outside_deadline(n, T):
    with pytest.raises(ConfigurationError):
        repetition_plan(n, T)


def test_extra_copy_assignments_enumerates_all_choices():
    vectors = list(extra_copy_assignments(3, 11))
    assert sorted(vectors) == sorted([(4, 4, 3), (4, 3, 4), (3, 4, 4)])
    assert all(sum(v) == 11 for v in vectors)
    assert list(extra_copy_assignments(4, 12)) == [(3, 3, 3, 3)]


def test_scheme_parse():
    assert Scheme.parse("CLRA") is Scheme.CLRA
    assert Scheme.parse("olra_es") is Scheme.OLRA_ES
    assert Scheme.CLRA.has_feedback
    assert not Scheme.OLRA.has_feedback
    with pytest.raises(ConfigurationError) as excinfo:
        Scheme.parse("harq", "--scheme")
    assert excinfo.value.key_path == "--scheme"


@pytest.mark.parametrize(
    "value,kind,expected",
    [
        ("200/km2", "density", 2e-4),
        ("20m", "length", 20.0),
        ("2km", "length", 2000.0),
        ("10mW", "power", 0.01),
        ("10dBm", "power", 0.01),
        ("0.15ms", "time", 1.5e-4),
        ("300B", "bits", 2400.0),
        ("40 bits", "bits", 40.0),
        ("250kHz", "frequency", 250e3),
        (3, "length", 3.0),
        ("1e-3", "time", 1e-3),
    ],
)
def test_parse_quantity(value, kind, expected):
    assert parse_quantity(value, kind) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("value", ["10 furlongs", "abc", True, None])
def test_parse_quantity_rejects(value):
    with pytest.raises(ConfigurationError) as excinfo:
        parse_quantity(value, "length", "spatial.link_distance")
    assert excinfo.value.key_path == "spatial.link_distance"


def test_default_config_matches_reference_point():
    config = load_config()
    s, r, f, e = config.spatial, config.radio, config.feedback, config.energy
    assert s.density == pytest.approx(2e-4)
    assert s.path_loss_exponent == 4.0
    assert s.link_distance == 20.0
    assert s.type_pmf == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert s.activity == (0.1, 0.3, 0.5)
    assert s.interferer_power == pytest.approx((0.01, 0.007, 0.005))
    assert r.packet_bits == 2400.0
    assert r.deadline == 15
    assert f.ack_bits == 40.0
    assert f.bandwidth == r.bandwidth
    assert f.threshold == pytest.approx(2 ** (40 / 37.5) - 1, rel=1e-12)
    assert e.receive_energy(r.slot_duration) == pytest.approx(45e-6)
    assert e.ack_energy(f.ack_duration) == pytest.approx(11.7e-6)


def test_default_settings_are_a_copy():
    settings = default_settings()
    settings["radio"]["deadline"] = 99
    assert default_settings()["radio"]["deadline"] == 15


def test_load_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.yml"
    path.write_text("spatial:\n  density: 300/km2\nradio:\n  deadline: 20\n", encoding="utf-8")
    config = load_config(path, ["radio.deadline=12", ("analysis.class_count", 5)])
    assert config.spatial.density == pytest.approx(3e-4)
    assert config.radio.deadline == 12
    assert config.analysis.class_count == 5
    # untouched keys keep their defaults
    assert config.spatial.link_distance == 20.0


def test_unknown_key_reports_path(tmp_path):
    path = tmp_path / "exp.yml"
    path.write_text("spatial:\n  densty: 300/km2\n", encoding="utf-8")
    with pytest.raises(ConfigurationError) as excinfo:
        load_config(path)
    assert excinfo.value.key_path == "spatial.densty"


def test_unknown_override_reports_path():
    with pytest.raises(ConfigurationError) as excinfo:
        load_settings(None, ["radio.slots=3"])
    assert excinfo.value.key_path == "radio.slots"


def test_invalid_yaml_reports_file(tmp_path):
    path = tmp_path / "broken.yml"
    path.write_text("spatial: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigurationError) as excinfo:
        load_config(path)
    assert excinfo.value.key_path == str(path)


def test_missing_file_is_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.yml")


def test_parse_override_values():
    assert parse_override("radio.deadline=20") == ("radio.deadline", 20)
    assert parse_override("spatial.activity=[0.2, 0.4]") == ("spatial.activity", [0.2, 0.4])
    assert parse_override("spatial.density=300/km2") == ("spatial.density", "300/km2")
    with pytest.raises(ConfigurationError):
        parse_override("radio.deadline")


@pytest.mark.parametrize(
    "override,key_path",
    [
        ("spatial.path_loss_exponent=2", "spatial.path_loss_exponent"),
        ("spatial.density=-1", "spatial.density"),
        ("spatial.activity=[0.1, 0.3]", "spatial.activity"),
        ("spatial.type_pmf=[0.5, 0.2, 0.2]", "spatial.type_pmf"),
        ("radio.fragments=16", "radio.fragments"),
        ("radio.deadline=0", "radio.deadline"),
        ("feedback.p_ack=1.5", "feedback.p_ack"),
        ("analysis.class_count=0", "analysis.class_count"),
        ("analysis.latency=median", "analysis.latency"),
        ("analysis.window_radius=100m", "analysis.window_radius"),
        ("analysis.physical_packets=0", "analysis.physical_packets"),
    ],
)
def test_invalid_values_name_their_key(override, key_path):
    with pytest.raises(ConfigurationError) as excinfo:
        load_config(None, [override])
    assert excinfo.value.key_path == key_path
    assert key_path in str(excinfo.value)


def test_zero_density_is_accepted():
    config = load_config(None, ["spatial.density=0"])
    assert config.spatial.density == 0.0


def test_config_to_dict_is_si():
    data = config_to_dict(build_config(default_settings()))
    assert data["spatial"]["density"] == pytest.approx(2e-4)
    assert data["radio"]["packet_bits"] == 2400.0
    assert data["feedback"]["p_ack"] is None
    assert math.isclose(data["radio"]["slot_duration"], 1e-3)
    assert "workers" not in data["analysis"]


def test_physical_packets_default_is_separate_from_marginal():
    analysis = load_config().analysis
    assert analysis.packets == DEFAULT_PACKETS
    assert analysis.physical_packets == DEFAULT_PHYSICAL_PACKETS
    assert analysis.physical_packets < analysis.packets
    data = config_to_dict(build_config(default_settings()))
    assert data["analysis"]["physical_packets"] == DEFAULT_PHYSICAL_PACKETS
