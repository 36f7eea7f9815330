import shutil
import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ptcyl.solver.errors import CacheIntegrityError, DimensionError
from ptcyl.solver.hydro import MagneticState, PotentialState, VelocityState, zero_state
from ptcyl.solver.spectral import BasisSpec, SpectralBasis, SpectralField
from ptcyl.solver.storage import (
    MAGIC,
    ArtifactCache,
    export_mode_csv,
    read_snapshot,
    snapshot_size,
    states_from_snapshot,
    write_csv,
    write_snapshot,
)


def _make_basis(**kwargs):
    defaults = {"M": 2, "K": 8, "N": 5, "h": 1.5}
    defaults.update(kwargs)
    return SpectralBasis(BasisSpec(**defaults))


def _perturbed(field, values):
    return SpectralField(field.m, field.parity, field.coeffs + values)


def _make_state(basis, cls=VelocityState, seed=0):
    rng = np.random.default_rng(seed)
    blocks = {}
    for key, block in zero_state(basis, cls).blocks.items():
        psi = _perturbed(block.psi, rng.standard_normal(block.psi.coeffs.shape))
        phi = _perturbed(block.phi, 1j * rng.standard_normal(block.phi.coeffs.shape))
        blocks[key] = PotentialState(psi=psi, phi=phi, f_psi=block.f_psi, g_phi=block.g_phi)
    return cls(blocks=blocks, t=0.5, step=3)


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------
class TestSnapshots:
    def test_write_and_read(self, tmp_path):
        basis = _make_basis()
        velocity = _make_state(basis)
        path = tmp_path / "out" / "snapshot_000003.bin"
        write_snapshot(path, basis.spec, velocity)
        spec, fields = read_snapshot(path)
        assert spec == basis.spec
        assert sorted(fields) == ["phi_u", "psi_u"]
        for key, block in velocity.blocks.items():
            assert_allclose(fields["psi_u"][key].coeffs, block.psi.coeffs)
            assert fields["phi_u"][key].parity == block.phi.parity
            assert_allclose(fields["phi_u"][key].coeffs, block.phi.coeffs)

    def test_raw_layout(self, tmp_path):
        basis = _make_basis()
        velocity = _make_state(basis)
        path = tmp_path / "snapshot.bin"
        write_snapshot(path, basis.spec, velocity)
        data = path.read_bytes()
        assert data[:6] == b"PTCYL1"
        assert struct.unpack_from("<qqqd", data, 6) == (2, 8, 5, 1.5)

        # the header is followed directly by the first coefficient, n fastest
        first = velocity.blocks[(0, "s")].psi.coeffs
        assert struct.unpack_from("<dd", data, 38) == (first[0, 0].real, first[0, 0].imag)
        assert struct.unpack_from("<dd", data, 54) == (first[0, 1].real, first[0, 1].imag)

        offset = 38
        for m in (0, 1):
            for parity in ("s", "a"):
                block = velocity.blocks[(m, parity)]
                for field in (block.psi, block.phi):
                    count = field.coeffs.size
                    values = np.frombuffer(data, dtype="<c16", count=count, offset=offset)
                    assert_allclose(values.reshape(field.coeffs.shape), field.coeffs)
                    offset += 16 * count
        assert offset == len(data) == snapshot_size(basis.spec)

    def test_magnetic_potentials_follow_each_block(self, tmp_path):
        basis = _make_basis(M=0)
        velocity = _make_state(basis)
        magnetic = _make_state(basis, MagneticState, seed=1)
        path = tmp_path / "snapshot.bin"
        write_snapshot(path, basis.spec, velocity, magnetic)
        data = path.read_bytes()
        assert len(data) == snapshot_size(basis.spec, mhd=True)
        # K = 8: four Chebyshev functions per parity, N = 5
        offset = 38 + 2 * 16 * 4 * 5
        expected = magnetic.blocks[(0, "s")].psi.coeffs[0, 0]
        assert struct.unpack_from("<dd", data, offset) == (expected.real, expected.imag)

    def test_size_mismatch(self, tmp_path):
        basis = _make_basis()
        path = tmp_path / "snapshot.bin"
        write_snapshot(path, basis.spec, _make_state(basis))
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(DimensionError):
            read_snapshot(path)

    def test_magnetic_fields(self, tmp_path):
        basis = _make_basis(M=0)
        path = tmp_path / "snapshot.bin"
        magnetic = _make_state(basis, MagneticState, seed=1)
        write_snapshot(path, basis.spec, _make_state(basis), magnetic)
        _, fields = read_snapshot(path)
        assert sorted(fields) == ["phi_B", "phi_u", "psi_B", "psi_u"]
        restored = states_from_snapshot(basis, fields, magnetic=True)
        assert isinstance(restored, MagneticState)
        expected = magnetic.blocks[(0, "a")].phi.coeffs
        assert_allclose(restored.blocks[(0, "a")].phi.coeffs, expected)

    def test_states_recompute_intermediates(self, tmp_path):
        basis = _make_basis()
        path = tmp_path / "snapshot.bin"
        write_snapshot(path, basis.spec, _make_state(basis))
        _, fields = read_snapshot(path)
        state = states_from_snapshot(basis, fields)
        block = state.blocks[(1, "s")]
        assert_allclose(block.f_psi.coeffs, basis.apply_operator(block.psi, "lap_h").coeffs)
        assert block.f_phi is not None

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOTASNAPSHOT")
        with pytest.raises(DimensionError):
            read_snapshot(path)

    def test_trailing_bytes(self, tmp_path):
        basis = _make_basis()
        path = tmp_path / "snapshot.bin"
        write_snapshot(path, basis.spec, _make_state(basis))
        with open(path, "ab") as handle:
            handle.write(b"\0" * 16)
        assert path.read_bytes().startswith(MAGIC)
        with pytest.raises(DimensionError):
            read_snapshot(path)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------
class TestCsv:
    def test_floats_keep_full_precision(self, tmp_path):
        path = tmp_path / "nested" / "values.csv"
        write_csv(path, ("name", "value"), [("third", 1.0 / 3.0), ("count", 4)])
        lines = path.read_text().splitlines()
        assert lines == ["name,value", "third,0.33333333333333331", "count,4"]

    def test_export_mode(self, tmp_path):
        basis = _make_basis()
        field = _make_state(basis).blocks[(0, "s")].psi
        path = tmp_path / "mode.csv"
        r = np.linspace(0.0, 1.0, 3)
        z = np.linspace(-0.75, 0.75, 4)
        export_mode_csv(path, basis, field, r, z)
        lines = path.read_text().splitlines()
        assert lines[0] == "r,z,value"
        assert len(lines) == 1 + 12
        first = [float(v) for v in lines[1].split(",")]
        expected = basis.evaluate(field, r[:1], z[:1])[0, 0]
        assert first[:2] == [0.0, -0.75]
        assert first[2] == pytest.approx(expected.real)

    def test_export_mode_weights_conjugate_mode(self, tmp_path):
        basis = _make_basis()
        field = _make_state(basis).blocks[(1, "s")].phi
        path = tmp_path / "mode.csv"
        r = np.array([0.5])
        z = np.array([0.25])
        export_mode_csv(path, basis, field, r, z, theta=0.5 * np.pi)
        value = float(path.read_text().splitlines()[1].split(",")[2])
        expected = basis.evaluate(field, r, z)[0, 0]
        assert value == pytest.approx(-2.0 * expected.imag)


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------
class TestArtifactCache:
    def test_key_is_order_independent(self, tmp_path):
        cache = ArtifactCache(str(tmp_path))
        assert cache.key({"a": "1", "b": "2"}) == cache.key({"b": "2", "a": "1"})
        assert cache.key({"a": "1"}) != cache.key({"a": "2"})

    def test_get_or_build(self, tmp_path, mocker):
        cache = ArtifactCache(str(tmp_path / "cache"))
        build = mocker.Mock(return_value={"matrix": np.eye(3)})
        payload = {"kind": "dtn", "m": 1}

        arrays, hit = cache.get_or_build(payload, build)
        assert not hit
        arrays, hit = cache.get_or_build(payload, build)
        assert hit
        build.assert_called_once()
        assert_allclose(arrays["matrix"], np.eye(3))
        assert "__payload__" not in arrays

    def test_missing_entry(self, tmp_path):
        assert ArtifactCache(str(tmp_path)).load({"kind": "none"}) is None

    def test_integrity_error(self, tmp_path):
        cache = ArtifactCache(str(tmp_path))
        first = cache.store({"m": 0}, {"matrix": np.zeros(2)})
        shutil.copy(first, cache.path({"m": 1}))
        with pytest.raises(CacheIntegrityError):
            cache.load({"m": 1})
