"""Tests for config parsing and the run configurations."""

import pytest

from rnpsim.config.settings import ChoConfig, SolverConfig, default_time_step
from rnpsim.core.errors import ConfigError
from rnpsim.parser.config_parser import (
    coerce_value,
    config_from_mapping,
    load_config,
    parse_config,
    render_config,
)


class TestCoerceValue:
    """Tests for typed value coercion."""

    def test_float(self):
        assert coerce_value("1e-3", float) == 1e-3

    def test_int(self):
        assert coerce_value("64", int) == 64
        with pytest.raises(ValueError):
            coerce_value("6.5", int)

    def test_bool_words(self):
        assert coerce_value("on", bool) is True
        assert coerce_value("No", bool) is False
        with pytest.raises(ValueError):
            coerce_value("maybe", bool)

    def test_optional_none(self):
        from typing import Optional

        assert coerce_value("auto", Optional[float]) is None
        assert coerce_value("0.01", Optional[float]) == 0.01

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            coerce_value("nan", float)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            coerce_value("", float)


class TestParseConfig:
    """Tests for the key = value grammar."""

    def test_minimal_rnp_section(self):
        config = parse_config("[rnp]\nP0_const = 0.5\n")
        assert isinstance(config, SolverConfig)
        assert config == SolverConfig()
        assert config.tau == pytest.approx(default_time_step(64, 64, 1.0, 1.0))

    def test_cho_section(self):
        config = parse_config("[cho]\nm_rate = 2.0\nlambda = 0.01\n")
        assert isinstance(config, ChoConfig)
        assert config.m_rate == 2.0
        assert config.lam == 0.01

    def test_comments_and_blank_lines(self):
        text = "# header\n\n[rnp]\nnx = 32   # coarser\n\nny = 32\n"
        config = parse_config(text)
        assert (config.nx, config.ny) == (32, 32)

    def test_key_aliases(self):
        config = parse_config("[rnp]\nbigA = 2.0\nlambda = 0.002\nvariant = tilde\n")
        assert config.big_a == 2.0
        assert config.lam == 0.002
        assert config.variant == "tilde"

    def test_rate_condition_rejected_with_line(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("[rnp]\nc1 = 1.0\nc2 = 0.6\n")
        assert excinfo.value.line == 3
        assert "c2 + c4" in str(excinfo.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("[rnp]\nnx = 16\ngamma = 2\n")
        assert excinfo.value.line == 3
        assert "unknown key 'gamma'" in str(excinfo.value)

    def test_duplicate_key_names_both_lines(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("[rnp]\nnx = 16\nny = 16\nnx = 32\n")
        assert "lines 2 and 4" in str(excinfo.value)
        assert excinfo.value.line == 4

    def test_unparsable_value(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("[rnp]\nnx = many\n")
        assert excinfo.value.line == 2

    def test_missing_section(self):
        with pytest.raises(ConfigError):
            parse_config("nx = 16\n")
        with pytest.raises(ConfigError):
            parse_config("# only comments\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("[tumor]\n")
        assert "unknown section" in str(excinfo.value)

    def test_second_section_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[rnp]\n[cho]\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("[rnp]\nthis is not an assignment\n")
        assert excinfo.value.line == 2

    def test_bad_initial_data_rejected(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("[rnp]\nP0_const = 0.9\nP0_amp = 0.2\n")
        assert "P0" in str(excinfo.value)

    def test_tau_larger_than_final_time(self):
        with pytest.raises(ConfigError):
            parse_config("[rnp]\ntau = 0.1\nT_final = 0.05\n")


class TestManifestEcho:
    """Tests for reproducing a config from its manifest echo."""

    def test_to_dict_uses_file_keys(self):
        echo = SolverConfig().to_dict()
        assert "lambda" in echo and "bigA" in echo
        assert "lam" not in echo

    def test_mapping_round_trip(self):
        config = SolverConfig(nx=32, ny=16, variant="tilde", P0_amp=0.1)
        assert config_from_mapping("rnp", config.to_dict()) == config

    def test_rendered_text_round_trip(self):
        config = ChoConfig(nx=16, ny=16, phi0_const=0.0, phi0_noise=0.01, seed=9)
        assert parse_config(render_config(config)) == config

    def test_mapping_unknown_key(self):
        with pytest.raises(ConfigError):
            config_from_mapping("rnp", {"gamma": 1.0})

    def test_mapping_unknown_section(self):
        with pytest.raises(ConfigError):
            config_from_mapping("tumor", {})


class TestSettings:
    """Tests for the configuration dataclasses."""

    def test_default_tau(self):
        assert SolverConfig(nx=16, ny=32).tau == pytest.approx((1 / 32) ** 2 / 8)

    def test_step_count_does_not_round_up(self):
        config = SolverConfig(tau=0.001, T_final=0.01)
        assert config.n_steps == 10

    def test_replace_resolves_new_tau(self):
        config = SolverConfig().replace(nx=16, ny=16)
        assert config.tau == pytest.approx((1 / 16) ** 2 / 8)

    def test_replace_keeps_explicit_tau(self):
        config = SolverConfig().replace(nx=16, ny=16, tau=1e-4)
        assert config.tau == 1e-4

    def test_invalid_variant(self):
        errors = SolverConfig(variant="quartic").validate()
        assert errors and "variant" in errors[0]

    def test_cho_phase_range(self):
        errors = ChoConfig(phi0_const=-1.0, phi0_amp=0.5).validate()
        assert any("[-1, 1]" in e for e in errors)

    def test_cho_pure_phase_accepted(self):
        assert ChoConfig().validate() == []


class TestShippedConfigs:
    """The example configs must load."""

    @pytest.mark.parametrize("name", ["baseline.ini", "tilde.ini", "cho.ini"])
    def test_loads(self, configs_dir, name):
        config = load_config(configs_dir / name)
        assert config.validate() == []

    def test_baseline_matches_defaults(self, configs_dir):
        assert load_config(configs_dir / "baseline.ini") == SolverConfig(tau=1e-4)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.ini")
