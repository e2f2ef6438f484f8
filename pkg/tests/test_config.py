"""Tests for configuration module."""

import pytest
from pydantic import ValidationError

from elliptic_dedekind.config import (
    DEFAULT_EPS,
    FieldProfile,
    FieldProfiles,
    RunConfig,
    Settings,
    resolve_eps,
)
from elliptic_dedekind.errors import InadmissibleEpsilonError
from elliptic_dedekind.qfield import make_field


class TestFieldProfile:
    """Tests for FieldProfile class."""

    def test_empty_profile(self):
        """Test profile with no overrides."""
        profile = FieldProfile(D=2)
        assert profile.eps is None
        assert profile.B == []
        assert profile.admissible_elements(make_field(2)) is None

    def test_profile_parses_denominators(self):
        """Test that B entries are parsed in the field."""
        K = make_field(7)
        profile = FieldProfile(D=7, B=["1", "1+1*w"])
        assert profile.admissible_elements(K) == [K.one, K.elt(1, 1)]

    def test_profile_stringifies_entries(self):
        """Test that numeric YAML entries become strings."""
        profile = FieldProfile(D=2, B=[1, 2])  # type: ignore[list-item]
        assert profile.B == ["1", "2"]


class TestFieldProfiles:
    """Tests for FieldProfiles class."""

    def test_load_nonexistent_file(self, tmp_path):
        """Test loading from nonexistent file."""
        profiles = FieldProfiles(tmp_path / "nonexistent.yaml")
        assert profiles.profiles == {}
        assert profiles.get(5).D == 5
        assert profiles.get(5).eps is None

    def test_load_valid_config(self, tmp_path):
        """Test loading valid YAML config."""
        config_file = tmp_path / "fields.yaml"
        config_file.write_text("""
fields:
  sqrt_minus_5:
    D: 5
    eps: 0.95
    B: ["1", "2", "w"]
    description: "Class number 2"
  seven:
    D: 7
""")
        profiles = FieldProfiles(config_file)

        assert set(profiles.profiles) == {5, 7}
        assert profiles.get(5).eps == 0.95
        assert profiles.get(5).B == ["1", "2", "w"]
        assert profiles.get(5).description == "Class number 2"
        assert profiles.get(7).eps is None

    def test_key_as_discriminant(self, tmp_path):
        """Test that an integer key stands in for D."""
        config_file = tmp_path / "fields.yaml"
        config_file.write_text("fields:\n  11:\n    description: eleven\n")
        profiles = FieldProfiles(config_file)
        assert profiles.get(11).description == "eleven"

    def test_all_profiles_sorted(self, tmp_path):
        """Test profiles are sorted by D."""
        config_file = tmp_path / "fields.yaml"
        config_file.write_text("""
fields:
  b: {D: 7}
  a: {D: 2}
  c: {D: 5}
""")
        profiles = FieldProfiles(config_file)
        assert [p.D for p in profiles.all_profiles()] == [2, 5, 7]

    def test_empty_file(self, tmp_path):
        """Test an empty file loads no profiles."""
        config_file = tmp_path / "fields.yaml"
        config_file.write_text("")
        assert FieldProfiles(config_file).profiles == {}


class TestResolveEps:
    """Tests for resolve_eps."""

    def test_explicit_wins(self):
        """Test an explicit value is returned as given."""
        K = make_field(2)
        profile = FieldProfile(D=2, eps=0.95)
        assert resolve_eps(K, [K.one], Settings(), profile, explicit=0.97) == 0.97
        assert resolve_eps(K, [K.one], Settings(), profile) == 0.95

    def test_settings_default(self, monkeypatch):
        """Test DEFAULT_EPS from the environment."""
        monkeypatch.setenv("DEFAULT_EPS", "0.93")
        K = make_field(2)
        assert resolve_eps(K, [K.one], Settings()) == 0.93

    def test_default_when_covered(self, monkeypatch):
        """Test 0.9 is kept when it clears the threshold."""
        monkeypatch.delenv("DEFAULT_EPS", raising=False)
        K = make_field(2)
        assert resolve_eps(K, [K.one, K.elt(2)], Settings()) == DEFAULT_EPS

    def test_raised_above_threshold(self, monkeypatch):
        """Test eps moves into (threshold, 1) when 0.9 is too small."""
        monkeypatch.delenv("DEFAULT_EPS", raising=False)
        K = make_field(11)
        eps = resolve_eps(K, [K.one], Settings())
        assert 0.9 < eps < 1.0

    def test_uncoverable(self, monkeypatch):
        """Test a covering radius above 1 raises."""
        monkeypatch.delenv("DEFAULT_EPS", raising=False)
        K = make_field(5)
        with pytest.raises(InadmissibleEpsilonError):
            resolve_eps(K, [K.one], Settings())


class TestRunConfig:
    """Tests for RunConfig."""

    def test_defaults(self):
        """Test default values."""
        run = RunConfig(D=2)
        assert run.eps is None
        assert run.prec == 1e-10
        assert run.budget == 100_000
        assert run.output == "json"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"D": 4},
            {"D": 0},
            {"D": 2, "eps": 1.5},
            {"D": 2, "prec": 1e-14},
            {"D": 2, "output": "xml"},
        ],
    )
    def test_validation(self, kwargs):
        """Test invalid options raise."""
        with pytest.raises(ValidationError):
            RunConfig(**kwargs)


class TestSettings:
    """Tests for Settings class."""

    def test_settings_from_env(self, monkeypatch):
        """Test loading settings from environment."""
        monkeypatch.setenv("LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("DEDEKIND_BUDGET", "500")
        monkeypatch.setenv("MP_DPS", "80")

        settings = Settings()

        assert settings.log_level == "DEBUG"
        assert settings.dedekind_budget == 500
        assert settings.mp_dps == 80

    def test_settings_defaults(self, monkeypatch):
        """Test default values."""
        for name in ("LOG_LEVEL", "DEDEKIND_BUDGET", "MP_DPS", "DEFAULT_EPS", "U_SEARCH_NORM"):
            monkeypatch.delenv(name, raising=False)

        settings = Settings(_env_file=None)

        assert settings.log_level == "INFO"
        assert settings.dedekind_budget == 100_000
        assert settings.mp_dps == 60
        assert settings.default_eps is None
        assert settings.u_search_norm == 40_000_000
        assert settings.fields_config.name == "fields.yaml"

    def test_settings_reject_small_dps(self, monkeypatch):
        """Test the mpmath precision floor."""
        monkeypatch.setenv("MP_DPS", "5")
        with pytest.raises(ValidationError):
            Settings()
