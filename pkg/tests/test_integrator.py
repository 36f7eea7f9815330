import csv

import pytest

from ptcyl.solver import functions
from ptcyl.solver.config import SolverConfig
from ptcyl.solver.errors import DimensionError
from ptcyl.solver.hooks import DiagnosticsLog, HookBase, SnapshotWriter
from ptcyl.solver.integrator import Integrator
from ptcyl.solver.storage import ArtifactCache, read_snapshot
from ptcyl.solver.validation import CheckResult


def _make_config(tmp_path, **kwargs):
    defaults = {
        "M": 2,
        "K": 8,
        "N": 6,
        "h": 2.0,
        "Re": 10.0,
        "Rm": 10.0,
        "dt": 0.01,
        "steps": 2,
        "residual_tolerance": 1e-6,
        "output_dir": str(tmp_path / "out"),
        "cache_dir": str(tmp_path / "cache"),
    }
    defaults.update(kwargs)
    return SolverConfig(**defaults)


def _read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


# ---------------------------------------------------------------------------
# Precompute
# ---------------------------------------------------------------------------
class TestPrecompute:
    def test_one_record_per_block(self, tmp_path):
        records = Integrator(_make_config(tmp_path)).precompute()
        assert len(records) == 4
        assert {(r.m, r.parity) for r in records} == {(0, "s"), (0, "a"), (1, "s"), (1, "a")}
        assert all(r.kind == "influence-hydro" and not r.cached for r in records)

    def test_second_precompute_hits_cache(self, tmp_path):
        config = _make_config(tmp_path)
        Integrator(config).precompute()
        records = Integrator(config).precompute()
        assert all(r.cached for r in records)

    def test_cache_key_follows_parameters(self, tmp_path):
        Integrator(_make_config(tmp_path)).precompute()
        records = Integrator(_make_config(tmp_path, Re=20.0)).precompute()
        assert not any(r.cached for r in records)

    def test_precompute_report(self, tmp_path):
        config = _make_config(tmp_path)
        functions.precompute(config)
        rows = _read_rows(tmp_path / "out" / "precompute.csv")
        assert len(rows) == 4
        assert rows[0]["cached"] == "0"
        assert set(rows[0]) == set(functions.RECORD_COLUMNS)

    @pytest.mark.slow
    def test_magnetic_artefacts(self, tmp_path):
        records = Integrator(_make_config(tmp_path, mhd=True)).precompute()
        kinds = [r.kind for r in records]
        assert kinds.count("influence-hydro") == 4
        assert kinds.count("dtn") == 4
        assert kinds.count("influence-magnetic") == 4


# ---------------------------------------------------------------------------
# Run
# ---------------------------------------------------------------------------
class TestRun:
    def test_hooks_called_in_order(self, tmp_path, mocker):
        hook = mocker.Mock(spec=HookBase)
        context = Integrator(_make_config(tmp_path), hooks=[hook]).run()
        names = [call[0] for call in hook.method_calls]
        assert names == ["before_run", "after_step", "after_step", "after_run"]
        assert context.step == 2
        assert context.t == pytest.approx(0.02)

    def test_spinup_run_with_default_hooks(self, tmp_path):
        config = _make_config(tmp_path, snapshot_every=1, disk_smoothing=1)
        context = functions.run(config)
        output = tmp_path / "out"
        assert (output / "config.resolved").is_file()
        assert (output / "snapshot_000001.bin").is_file()
        assert (output / "snapshot_000002.bin").is_file()
        rows = _read_rows(output / "diagnostics.csv")
        assert [row["step"] for row in rows] == ["0", "1", "2"]
        assert float(rows[-1]["energy"]) > 0
        assert float(rows[-1]["maxBCresidual"]) <= 1e-6
        assert context.cache_hits == 0
        assert context.increment > 0

    def test_rigid_disks_report_corner_jump(self, tmp_path):
        config = _make_config(tmp_path, steps=1)
        functions.run(config, hooks=[DiagnosticsLog()])
        rows = _read_rows(tmp_path / "out" / "diagnostics.csv")
        # u_theta jumps from omega r on the lid to zero on the wall
        assert float(rows[-1]["maxBCresidual"]) > 0.1

    def test_restart_from_snapshot(self, tmp_path):
        config = _make_config(tmp_path, steps=1)
        first = functions.run(config)
        snapshot = tmp_path / "out" / "snapshot_000001.bin"
        assert snapshot in first.written
        restarted = functions.run(config, hooks=[DiagnosticsLog()], restart=snapshot)
        assert restarted.cache_hits == 4
        assert restarted.velocity.energy(restarted.basis) > 0

    def test_restart_resolution_mismatch(self, tmp_path):
        config = _make_config(tmp_path, steps=1)
        functions.run(config, hooks=[SnapshotWriter()])
        snapshot = tmp_path / "out" / "snapshot_000001.bin"
        with pytest.raises(DimensionError):
            functions.run(config.replace(K=10), restart=snapshot)

    @pytest.mark.slow
    def test_mhd_run(self, tmp_path):
        config = _make_config(tmp_path, mhd=True, steps=2)
        context = functions.run(config)
        assert context.magnetic is not None
        assert context.magnetic.step == 2
        spec, fields = read_snapshot(tmp_path / "out" / "snapshot_000002.bin")
        assert "psi_B" in fields
        rows = _read_rows(tmp_path / "out" / "diagnostics.csv")
        assert "magnetic_energy" in rows[0]


# ---------------------------------------------------------------------------
# Other subcommands
# ---------------------------------------------------------------------------
class TestFunctions:
    def test_export_csv(self, tmp_path):
        config = _make_config(tmp_path, steps=1)
        functions.run(config, hooks=[SnapshotWriter()])
        snapshot = tmp_path / "out" / "snapshot_000001.bin"
        output = functions.export_csv(snapshot, tmp_path / "psi.csv", "psi_u", 0, "s", points=5)
        rows = _read_rows(output)
        assert len(rows) == 25
        assert set(rows[0]) == {"r", "z", "value"}
        with pytest.raises(DimensionError):
            functions.export_csv(snapshot, tmp_path / "b.csv", "psi_B")
        with pytest.raises(DimensionError):
            functions.export_csv(snapshot, tmp_path / "m.csv", "psi_u", m=3)

    def test_diagnose_writes_reports(self, tmp_path):
        config = _make_config(tmp_path)
        paths = functions.diagnose(config, cache=ArtifactCache(str(tmp_path / "other")))
        names = sorted(path.name for path in paths)
        assert names == ["influence_blocks.csv", "influence_report.csv", "influence_spectra.csv"]
        assert len(_read_rows(paths[0])) == 4

    def test_validate_report(self, tmp_path, mocker):
        config = _make_config(tmp_path)
        mocker.patch.object(
            functions,
            "run_suites",
            return_value=[CheckResult("a", 1.0, 2.0, True), CheckResult("b", 3.0, 2.0, False)],
        )
        assert functions.validate(config, ["spectral"]) is False
        rows = _read_rows(tmp_path / "out" / "validation.csv")
        assert [row["pass"] for row in rows] == ["1", "0"]

    def test_spectral_validation_passes(self, tmp_path):
        assert functions.validate(_make_config(tmp_path), ["spectral"])
