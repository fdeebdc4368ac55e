from __future__ import annotations

import pytest

from proximity_sim.config import (
    ParseError,
    ValidationError,
    parse_config,
    parse_sweep_axis,
)
from proximity_sim.epidemic import AlertPolicy


class TestEpidemicConfig:
    def test_empty_text_gives_headline_defaults(self):
        run = parse_config("", command="epidemic")
        params = run.sim_params
        assert params.r0 == 3.0
        assert params.incubation_days == 14
        assert params.quarantine_factor == 10.0
        assert params.activation_day == 30
        assert params.ramp_days == 10
        assert params.replicates == 50
        assert params.efficiency == 1.0
        assert params.alert_policy is AlertPolicy.FROM_INFECTION

    def test_overrides_and_comments(self):
        text = """
        # scenario tweaks
        efficiency = 0.6   # partial adoption
        quarantine_factor = 5
        alert_policy = AtDetection
        """
        params = parse_config(text, command="epidemic").sim_params
        assert params.efficiency == 0.6
        assert params.quarantine_factor == 5.0
        assert params.alert_policy is AlertPolicy.AT_DETECTION

    def test_unknown_key_is_a_parse_error_with_line(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_config("r0=3\nunknown_key=1\n", command="epidemic")

    def test_out_of_range_value_is_a_validation_error(self):
        with pytest.raises(ValidationError, match="efficiency"):
            parse_config("efficiency=1.5\n", command="epidemic")

    def test_missing_equals_sign(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_config("just words\n", command="epidemic")

    def test_bad_number(self):
        with pytest.raises(ParseError, match="r0"):
            parse_config("r0=three\n", command="epidemic")

    def test_activation_beyond_horizon_is_legal(self):
        params = parse_config("activation_day=999\n", command="epidemic").sim_params
        assert params.activation_day == 999


class TestWorldConfigParsing:
    def test_defaults(self):
        run = parse_config("", command="world")
        assert run.world_config.agent_count == 200
        assert run.world_config.radio.max_radio_range == 10.0
        assert run.trace_file is None

    def test_radio_keys_route_to_the_model(self):
        text = "noise_sigma=0\nmax_radio_range=12\ntracking_threshold=4\n"
        config = parse_config(text, command="world").world_config
        assert config.radio.noise_sigma == 0.0
        assert config.radio.max_radio_range == 12.0

    def test_trace_file_key(self):
        run = parse_config("trace_file=contacts.csv\n", command="world")
        assert run.trace_file == "contacts.csv"

    def test_validation_error_names_the_invariant(self):
        with pytest.raises(ValidationError, match="app_user_fraction"):
            parse_config("app_user_fraction=2\n", command="world")


class TestSweepAxis:
    def test_parse_values(self):
        key, values = parse_sweep_axis("efficiency=0.2,0.4,0.6")
        assert key == "efficiency"
        assert values == [0.2, 0.4, 0.6]

    def test_integer_axis(self):
        key, values = parse_sweep_axis("ramp_days=0,5,10,20")
        assert key == "ramp_days"
        assert values == [0, 5, 10, 20]

    def test_unknown_axis_rejected(self):
        with pytest.raises(ValidationError):
            parse_sweep_axis("replicates=10,20")

    def test_malformed_axis(self):
        with pytest.raises(ParseError):
            parse_sweep_axis("efficiency")
        with pytest.raises(ParseError):
            parse_sweep_axis("efficiency=")


def test_unknown_command_rejected():
    with pytest.raises(ValidationError):
        parse_config("", command="mystery")
