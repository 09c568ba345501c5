import pytest

from probkin.config import (
    SessionConfig,
    config_to_dict,
    load_config,
    load_stream,
    parse_config,
    parse_stream,
    serialize_config,
)
from probkin.demos import binomial_config, noncommutativity_config, survey_config
from probkin.dpk import DEFAULT_TOLERANCE
from probkin.errors import ConfigError
from probkin.measure import Event

GOOD = """{
  "atoms": ["a", "b", "c"],
  "model": {
    "symbols": ["x", "y"],
    "pmf": [0.25, 0.75],
    "preimages": [["a"], ["b", "c"]]
  },
  "prior": [0.2, 0.3, 0.5],
  "options": {
    "events": {"first": ["a"]},
    "budget": 5
  }
}
"""


def edited(old, new):
    assert old in GOOD
    return GOOD.replace(old, new)


@pytest.mark.parametrize("make", [binomial_config, noncommutativity_config, survey_config])
def test_demo_configs_round_trip(make):
    config = make()
    assert parse_config(serialize_config(config)) == config


def test_parse_good_config():
    config = parse_config(GOOD)
    assert config.atoms == ("a", "b", "c")
    assert config.tolerance == DEFAULT_TOLERANCE
    assert config.budget == 5
    assert config.stop_rule().budget == 5
    assert config.event_map() == {"first": Event((0,))}
    assert config.model().preimage("y") == Event((1, 2))
    assert config.credal_set().k == 1
    assert config_to_dict(config)["options"]["coarsening"] is None


def test_generators_without_prior():
    text = edited(
        "\"prior\": [0.2, 0.3, 0.5]",
        "\"generators\": [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]]",
    )
    config = parse_config(text)
    assert config.credal_set().k == 2
    with pytest.raises(ConfigError):
        config.prior_measure()


@pytest.mark.parametrize(
    "text, line",
    [
        ('{\n  "atoms": ["a",\n}', 3),
        (edited("[0.2, 0.3, 0.5]", "[0.2, 0.3]"), 8),
        (edited("[0.2, 0.3, 0.5]", "[0.5, 0.3, 0.5]"), 8),
        (edited("[0.25, 0.75]", "[0.5, 0.75]"), 3),
        (edited("[\"a\", \"b\", \"c\"]", "[\"a\", \"a\", \"c\"]"), 2),
        (edited("{\"first\": [\"a\"]}", "{\"first\": [\"zz\"]}"), 10),
        (edited("\"budget\": 5", "\"budget\": -1"), 11),
        (edited("[[\"a\"], [\"b\", \"c\"]]", "[[\"a\"], [\"zz\"]]"), 6),
    ],
)
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}: ")


def test_config_needs_prior_or_generators():
    with pytest.raises(ConfigError, match="prior or generators"):
        parse_config(edited("[0.2, 0.3, 0.5]", "null"))


def test_unknown_coarsening_symbol():
    with pytest.raises(ConfigError, match="unknown symbol"):
        parse_config(
            edited("\"budget\": 5", "\"budget\": 5,\n    \"coarsening\": [[[\"x\", \"q\"]]]")
        )


def test_load_config(tmp_path):
    path = tmp_path / "session.json"
    path.write_text(GOOD, encoding="utf-8")
    assert isinstance(load_config(path), SessionConfig)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


def test_parse_stream():
    text = "# survey answers\n3, 5 7\n\n0  # late\n"
    assert parse_stream(text) == [["3", "5", "7"], ["0"]]


def test_parse_stream_checks_symbols(tmp_path):
    model = binomial_config().model()
    with pytest.raises(ConfigError) as err:
        parse_stream("3\n12\n", model)
    assert err.value.line == 2
    with pytest.raises(ConfigError, match="already observed on line 1"):
        parse_stream("3 5\n5\n", model)
    assert parse_stream("3 3\n", model) == [["3", "3"]]
    path = tmp_path / "stream.txt"
    path.write_text("3 5 7\n", encoding="utf-8")
    assert load_stream(path, model) == [["3", "5", "7"]]


def test_parse_stream_rejects_tail():
    config = parse_config(edited("\"pmf\"", "\"tail\": \"y\",\n    \"pmf\""))
    with pytest.raises(ConfigError, match="tail symbol"):
        parse_stream("x\ny\n", config.model())
