import pytest

from utils.config import env_number, parse_level


@pytest.mark.parametrize("raw, cast, expected", [
    ("abc", float, 90.0),
    ("", float, 90.0),
    ("0", float, 90.0),
    ("-3", float, 90.0),
    ("nan", float, 90.0),
    ("2.5", float, 2.5),
    ("12", int, 12),
    ("1.5", int, 90.0),
])
def test_env_number_falls_back_on_bad_values(monkeypatch, raw, cast, expected):
    monkeypatch.setenv("CARDSDP_TEST_NUMBER", raw)
    assert env_number("CARDSDP_TEST_NUMBER", 90.0, cast) == expected


def test_env_number_unset(monkeypatch):
    monkeypatch.delenv("CARDSDP_TEST_NUMBER", raising=False)
    assert env_number("CARDSDP_TEST_NUMBER", 4, int) == 4


@pytest.mark.parametrize("value, level", [("debug", 10), ("INFO", 20), ("30", 30), ("bogus", 30)])
def test_parse_level(value, level):
    assert parse_level(value) == level
