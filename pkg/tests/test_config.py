import pytest

from diqkdsps.config import build_config, config_hash, load_config, locate_line
from diqkdsps.enums import RateMethod
from diqkdsps.exceptions import ConfigError
from diqkdsps.paths import get_at, normalize_path, set_at

SETTINGS = {"thetaA_rad": [0.0, 1.5], "thetaB_rad": [0.7, -0.7, 0.0], "q": 0.1}


class TestDefaults:
    """An empty config is complete."""

    def test_defaults(self):
        """Method, relaxation, key cell, seed and finite-key grid have defaults."""
        config = build_config({})
        assert config.method is RateMethod.SDP
        assert config.get("scenario.m") == 8
        assert config.key == (0, 2)
        assert config.rng_seed == 0
        assert config.get("finite_key.n_rounds") == [1e8, 1e9, 1e10]
        assert config.get("finite_key.distance_km")[-1] == 300.0

    def test_no_settings_without_angles(self):
        """Without angles the settings are left to the optimizer."""
        assert build_config({}).settings() is None

    def test_single_grid_point(self):
        """No grid section means one point at the source parameters."""
        grid = build_config({}).grid()
        assert len(grid) == 1
        assert grid[0][0].eta_l == pytest.approx(1.0)

    def test_default_series(self):
        """One series labelled default with the default round counts."""
        series = build_config({}).series()
        assert [s["label"] for s in series] == ["default"]
        assert series[0]["n_rounds"] == [1e8, 1e9, 1e10]


class TestValidation:
    """Every error names the offending key."""

    @pytest.mark.parametrize("raw, position", [
        ({"source": {"eta3": 1.0}}, "source.eta3"),
        ({"scenario": {"m": "eight"}}, "scenario.m"),
        ({"scenario": {"m": 1}}, "scenario.m"),
        ({"source": {"eta1": True}}, "source.eta1"),
        ({"source": {"g2": 0.7}}, "source.g2"),
        ({"settings": {"thetaA_rad": [0.0]}}, "settings.thetaA_rad"),
        ({"scenario": {"y_set": [0, 3]}}, "scenario.y_set"),
        ({"finite_key": {"rounds_semantics": "pulses"}}, "finite_key.rounds_semantics"),
        ({"scenario": {"method": "magic"}}, "scenario.method"),
    ])
    def test_bad_value(self, raw, position):
        """The error position is the dot-path of the bad key."""
        with pytest.raises(ConfigError) as exc_info:
            build_config(raw)
        assert exc_info.value.position == position

    def test_unknown_section(self):
        """An unknown top-level table is reported by its name."""
        with pytest.raises(ConfigError) as exc_info:
            build_config({"solver": {}})
        assert exc_info.value.position == "solver"

    def test_visibilities_come_in_pairs(self):
        """v_alpha without v_beta points at the missing key."""
        with pytest.raises(ConfigError) as exc_info:
            build_config({"source": {"v_alpha": 0.9}})
        assert exc_info.value.position == "source.v_beta"

    def test_angles_come_in_pairs(self):
        """Alice's angles without Bob's point at the missing key."""
        with pytest.raises(ConfigError) as exc_info:
            build_config({"settings": {"thetaA_rad": [0.0, 1.0]}})
        assert exc_info.value.position == "settings.thetaB_rad"

    def test_series_needs_label(self):
        """The list index is part of the position."""
        with pytest.raises(ConfigError) as exc_info:
            build_config({"finite_key": {"series": [{"n_rounds": [1e9]}]}})
        assert exc_info.value.position == "finite_key.series.0.label"

    def test_integer_accepted_as_float(self):
        """TOML integers are widened where a float is expected."""
        assert build_config({"source": {"eta1": 1}}).get("source.eta1") == 1.0


class TestOverridesAndHash:
    """Command-line overrides and the provenance hash."""

    def test_override_applied(self):
        """A None override keeps the default."""
        config = build_config({}, {"optimizer.rng_seed": 7, "optimizer.pool": None})
        assert config.rng_seed == 7
        assert config.get("optimizer.pool") == 1

    def test_override_is_validated(self):
        """Overrides go through the same schema as the file."""
        with pytest.raises(ConfigError):
            build_config({}, {"optimizer.pool": 0})

    def test_hash_tracks_content(self):
        """Equal configs hash alike, different ones do not."""
        assert build_config({}).sha256 == build_config({}).sha256
        assert build_config({}).sha256 != build_config({}, {"optimizer.rng_seed": 1}).sha256
        assert len(build_config({}).sha256) == 64

    def test_raw_tree_untouched(self):
        """Overrides are applied to a copy."""
        raw = {"optimizer": {"seeds": 3}}
        build_config(raw, {"optimizer.rng_seed": 5})
        assert raw == {"optimizer": {"seeds": 3}}

    def test_hash_ignores_key_order(self):
        """The hash is taken over a canonical dump."""
        a = {"x": 1, "y": [1.0, 2.0]}
        assert config_hash(a) == config_hash({"y": [1.0, 2.0], "x": 1})


class TestDerivedObjects:
    """Model and run objects built from a config."""

    def test_settings_vector(self):
        """t comes from the source table, q and the angles from settings."""
        config = build_config({"settings": SETTINGS, "source": {"small_t": 0.3}})
        settings = config.settings()
        assert settings.small_t == 0.3
        assert settings.q == 0.1
        assert settings.big_t is None

    def test_settings_override(self):
        """Per-call overrides replace single fields."""
        config = build_config({"settings": SETTINGS})
        assert config.settings({"small_t": 0.9, "q": None}).small_t == 0.9
        assert config.settings({"small_t": 0.9, "q": None}).q == 0.1

    def test_visibility_overlaps(self):
        """Explicit visibilities set the Gram entries to their square roots."""
        config = build_config({"source": {"v_alpha": 0.81, "v_beta": 0.64}})
        overlaps = config.overlaps(config.physical_params())
        assert overlaps.gram[0, 1] == pytest.approx(0.9)

    def test_grid_over_local_efficiency(self):
        """Every grid value becomes one point with that eta_l."""
        config = build_config({"source": {"eta1": 0.9}, "grid": {"eta_l": [0.81, 0.72]}})
        assert [p.eta_l for p, _ in config.grid()] == pytest.approx([0.81, 0.72])

    def test_series_override_source(self):
        """A series inherits the round counts and overrides the source."""
        config = build_config({"finite_key": {"series": [{"label": "g2", "source": {"g2": 0.01}}]}})
        series = config.series()[0]
        assert series["n_rounds"] == [1e8, 1e9, 1e10]
        params = config.physical_params(series["source"])
        assert params.g2 == 0.01
        assert config.overlaps(params, series["source"]).has_extra_photon

    def test_optimizer_and_finite_key(self):
        """Scenario and finite-key tables feed the run configs."""
        config = build_config({"scenario": {"method": "analytic", "key_y": 1},
                               "finite_key": {"rounds_semantics": "attempts"}})
        assert config.optimizer_config().method is RateMethod.ANALYTIC
        assert config.optimizer_config().key == (0, 1)
        cfg = config.finite_key_config(1e9)
        assert cfg.n == 1e9
        assert cfg.rounds_semantics == "attempts"


class TestLoadConfig:
    """TOML files."""

    def test_load(self, tmp_path):
        """A file plus an override."""
        path = tmp_path / "run.toml"
        path.write_text('[scenario]\nmethod = "analytic"\n\n[optimizer]\nseeds = 4\n')
        config = load_config(path, {"optimizer.rng_seed": 9})
        assert config.method is RateMethod.ANALYTIC
        assert config.get("optimizer.seeds") == 4
        assert config.rng_seed == 9
        assert config.path == path

    def test_invalid_toml(self, tmp_path):
        """A syntax error is wrapped as a ConfigError."""
        path = tmp_path / "bad.toml"
        path.write_text("[source\neta1 = 0.5\n")
        with pytest.raises(ConfigError, match="Invalid TOML"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        """An unreadable path is wrapped as a ConfigError."""
        with pytest.raises(ConfigError, match="Cannot read"):
            load_config(tmp_path / "missing.toml")

    def test_bad_value_reports_line(self, tmp_path):
        """A schema error in the file names the line of the key."""
        path = tmp_path / "run.toml"
        path.write_text('[scenario]\nmethod = "analytic"\n\n[source]\neta2 = 0.9\neta1 = 2.0\n')
        with pytest.raises(ConfigError) as exc_info:
            load_config(path)
        assert exc_info.value.position == "source.eta1"
        assert exc_info.value.line == 6
        assert "line 6" in str(exc_info.value)

    def test_syntax_error_reports_line(self, tmp_path):
        """The parser's line survives the wrap."""
        path = tmp_path / "bad.toml"
        path.write_text("[source]\neta1 = 0.5\neta2 = = 1\n")
        with pytest.raises(ConfigError) as exc_info:
            load_config(path)
        assert exc_info.value.line == 3

    def test_override_error_has_no_line(self, tmp_path):
        """A bad override is not blamed on the file."""
        path = tmp_path / "run.toml"
        path.write_text("[optimizer]\npool = 2\n")
        with pytest.raises(ConfigError) as exc_info:
            load_config(path, {"optimizer.pool": 0})
        assert exc_info.value.line is None


class TestPaths:
    """Dot-path access into config trees."""

    def test_normalize(self):
        """Dotted strings and lists give the same segments."""
        assert normalize_path("a.b.0") == ["a", "b", "0"]
        assert normalize_path(["a", 1]) == ["a", "1"]

    @pytest.mark.parametrize("path", ["", "a..b", 3])
    def test_normalize_invalid(self, path):
        """Empty paths, empty segments and non-strings are rejected."""
        with pytest.raises(ConfigError):
            normalize_path(path)

    def test_get_at_lists(self):
        """Numeric segments index into lists."""
        tree = {"finite_key": {"series": [{"label": "a"}, {"label": "b"}]}}
        assert get_at(tree, "finite_key.series.1.label") == "b"
        assert get_at(tree, "finite_key.series.5.label", default=None) is None

    def test_get_at_missing(self):
        """A missing key without default names its position."""
        with pytest.raises(ConfigError) as exc_info:
            get_at({"source": {}}, "source.eta1")
        assert exc_info.value.position == "source.eta1"

    def test_set_at(self):
        """Intermediate tables are created only on request."""
        tree = {}
        set_at(tree, "optimizer.rng_seed", 3, create=True)
        assert tree == {"optimizer": {"rng_seed": 3}}
        with pytest.raises(ConfigError):
            set_at(tree, "output.prefix", "x")


class TestLocateLine:
    """Dot paths mapped back to TOML lines."""

    TEXT = (
        "[source]\n"
        "eta1 = 0.9\n"
        "\n"
        "[finite_key]\n"
        "n_rounds = [1e8]\n"
        "\n"
        "[[finite_key.series]]\n"
        'label = "a"\n'
        "\n"
        "[[finite_key.series]]\n"
        "n_rounds = [1e9]\n"
    )

    @pytest.mark.parametrize("position, line", [
        ("source.eta1", 2),
        ("finite_key.n_rounds", 5),
        ("finite_key.series.0.label", 8),
        ("finite_key.series.1.n_rounds", 11),
        ("finite_key.series.1.label", 10),
        ("source.v_beta", 1),
        ("finite_key", 4),
    ])
    def test_found(self, position, line):
        """Keys resolve to their line; absent keys fall back to the table header."""
        assert locate_line(self.TEXT, position) == line

    @pytest.mark.parametrize("position", [None, "", "grid.eta_l", "output"])
    def test_not_found(self, position):
        """Tables that are not in the file have no line."""
        assert locate_line(self.TEXT, position) is None
