import pytest

from ptcyl.solver.config import (
    SolverConfig,
    canonical_payload,
    dump_config,
    environment_overrides,
    load_config,
    parse_config,
    with_overrides,
)
from ptcyl.solver.errors import ConfigError


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path, monkeypatch):
    # no stray .env from the working directory
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _write_config(path, text):
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------
class TestParseConfig:
    def test_defaults(self):
        config = parse_config({})
        assert config == SolverConfig()
        assert config.mhd is False
        assert config.basis_spec.K == 16

    def test_types_are_coerced(self):
        config = parse_config({"M": "4", "Re": "250.5", "mhd": "on", "output_dir": "runs/a"})
        assert config.M == 4
        assert config.Re == 250.5
        assert config.mhd is True
        assert config.output_dir == "runs/a"

    @pytest.mark.parametrize("raw,expected", [("yes", True), ("TRUE", True), ("0", False)])
    def test_bool_values(self, raw, expected):
        assert parse_config({"mhd": raw}).mhd is expected

    @pytest.mark.parametrize(
        "values",
        [
            {"unknown": "1"},
            {"M": "four"},
            {"mhd": "maybe"},
            {"dt": None},
            {"dt": "-1"},
            {"K": "2"},
            {"N": "2"},
            {"disk_smoothing": "-1"},
            {"N": "6", "disk_smoothing": "5"},
            {"condition_target": "0.5"},
            {"threads": "0"},
        ],
    )
    def test_invalid(self, values):
        with pytest.raises(ConfigError):
            parse_config(values)

    def test_modes_and_thresholds(self):
        config = parse_config({"M": "2"})
        assert list(config.modes()) == [(0, "s"), (0, "a"), (1, "s"), (1, "a")]
        assert set(config.thresholds) == {
            "threshold_zero",
            "threshold_gap",
            "condition_target",
            "image_tolerance",
        }


# ---------------------------------------------------------------------------
# Files and environment
# ---------------------------------------------------------------------------
class TestLoadConfig:
    def test_file_with_comments(self, isolated_cwd):
        path = _write_config(
            isolated_cwd / "run.cfg",
            "# rotor-stator\nM = 4\nK = 12\nN = 10\nomega_top = 0.5\nmhd = off\n",
        )
        config = load_config(path, environ={})
        assert (config.M, config.K, config.N) == (4, 12, 10)
        assert config.omega_top == 0.5

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("nowhere.cfg", environ={})

    def test_environment_wins(self, isolated_cwd):
        path = _write_config(isolated_cwd / "run.cfg", "Re = 100\n")
        config = load_config(path, environ={"PTCYL_Re": "400", "HOME": "/root"})
        assert config.Re == 400.0

    def test_dotenv_file(self, isolated_cwd):
        (isolated_cwd / ".env").write_text("PTCYL_steps=7\n")
        assert environment_overrides({}) == {"steps": "7"}
        assert environment_overrides({"PTCYL_steps": "9"}) == {"steps": "9"}

    def test_unknown_environment_key(self):
        with pytest.raises(ConfigError):
            environment_overrides({"PTCYL_bogus": "1"})

    def test_dump_and_reload(self, isolated_cwd):
        config = SolverConfig(M=2, dt=1.0 / 3.0, mhd=True, output_dir="out")
        text = dump_config(config)
        assert "mhd = on" in text
        assert "dt = 0.33333333333333331" in text
        path = _write_config(isolated_cwd / "config.resolved", text)
        assert load_config(path, environ={}) == config


# ---------------------------------------------------------------------------
# Overrides and cache payloads
# ---------------------------------------------------------------------------
class TestOverrides:
    def test_with_overrides(self):
        config = with_overrides(SolverConfig(), {"steps": "3", "mhd": "yes"})
        assert config.steps == 3
        assert config.mhd is True

    def test_override_unknown_key(self):
        with pytest.raises(ConfigError):
            with_overrides(SolverConfig(), {"stepz": "3"})

    def test_override_is_validated(self):
        with pytest.raises(ConfigError):
            with_overrides(SolverConfig(), {"N": "1"})

    def test_disk_smoothing(self):
        config = with_overrides(SolverConfig(N=6), {"disk_smoothing": "4"})
        assert config.disk_smoothing == 4
        with pytest.raises(ConfigError):
            with_overrides(config, {"N": "5"})

    def test_canonical_payload(self):
        payload = canonical_payload(SolverConfig(Re=100.0, mhd=False), ("Re", "mhd", "K"))
        assert payload == {"Re": "100", "mhd": "off", "K": "16"}
