import math
from fractions import Fraction

import pytest

from config import (CONFIG_HEADER, ExperimentConfig, RuntimeSettings, format_value, parse_bool, parse_float_list,
                    parse_fraction, parse_index, parse_int_list)
from errors import ConfigError


def test_settings_from_env(monkeypatch):
    monkeypatch.setenv('LATTICEWAVE_THREADS', '0')
    monkeypatch.setenv('LATTICEWAVE_BUDGET', '1e6')
    monkeypatch.delenv('LATTICEWAVE_RTOL', raising=False)
    settings = RuntimeSettings.from_env()
    assert settings.threads == 1
    assert settings.budget == 1e6
    assert settings.rtol == 1e-10


def test_bad_setting(monkeypatch):
    monkeypatch.setenv('LATTICEWAVE_THREADS', 'many')
    with pytest.raises(ConfigError):
        RuntimeSettings.from_env()


@pytest.mark.parametrize("value, text", [
    (None, "none"),
    (True, "true"),
    (Fraction(4, 3), "4/3"),
    (0.1, "0.1"),
    (math.inf, "inf"),
    ((1, -2, 3), "1,-2,3"),
    ("x1^2", "x1^2"),
])
def test_format_value(value, text):
    assert format_value(value) == text


def test_config_text_roundtrip():
    cfg = ExperimentConfig('jphase', {'poly': 'x1^2*x2 - x2^3', 't': '10.0,20.0', 'note': 'a "quoted" # value'})
    text = cfg.dumps()
    assert text.startswith(CONFIG_HEADER + "\nsubcommand=jphase\n")
    back = ExperimentConfig.loads(text)
    assert back == cfg
    assert back.as_dict()['subcommand'] == 'jphase'


def test_config_needs_a_subcommand():
    with pytest.raises(ConfigError):
        ExperimentConfig.loads("dim=3\n")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(str(tmp_path / "absent.env"))


def test_parsers():
    assert parse_fraction("4/3") == Fraction(4, 3)
    assert parse_index("inf") == math.inf
    assert parse_index("8/7") == Fraction(8, 7)
    assert parse_bool("Yes") is True
    assert parse_bool("0") is False
    assert parse_int_list("1, 2,3") == (1, 2, 3)
    assert parse_float_list("0.5,1e-3") == (0.5, 1e-3)


@pytest.mark.parametrize("parser, text", [
    (parse_fraction, "1/0"),
    (parse_fraction, "one"),
    (parse_index, "1/2"),
    (parse_bool, "maybe"),
    (parse_int_list, "1,x"),
    (parse_float_list, "1.0,,nope"),
])
def test_parser_errors(parser, text):
    with pytest.raises(ConfigError):
        parser(text)
