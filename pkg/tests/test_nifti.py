import struct

import numpy as np
import pytest

from conftest import random_float32_affine
from tumorkit.nifti import (
    DT_UINT8,
    HEADER_SIZE,
    MAGIC_PAIR,
    NiftiError,
    _HEADER_FMT,
    load_intensity,
    load_label,
    load_nifti,
    save_nifti,
)
from tumorkit.volume import IntensityVolume, LabelCodeError, LabelVolume, VolumeGeometry


def _random_label_volume(rng):
    shape = tuple(int(rng.integers(2, 12)) for _ in range(3))
    geometry = VolumeGeometry.from_affine(shape, random_float32_affine(rng))
    codes = rng.integers(0, 4, size=shape, dtype=np.uint8)
    return LabelVolume(geometry, codes)


class TestRoundtrip:
    @pytest.mark.parametrize("suffix", [".nii.gz", ".nii"])
    def test_label_roundtrip_50_random_volumes(self, tmp_path, suffix):
        rng = np.random.default_rng(2024)
        for i in range(50):
            vol = _random_label_volume(rng)
            path = tmp_path / f"case{i}{suffix}"
            save_nifti(vol, path)
            loaded = load_nifti(path)
            assert isinstance(loaded, LabelVolume)
            assert np.array_equal(loaded.codes, vol.codes)
            assert np.allclose(loaded.geometry.affine, vol.geometry.affine, atol=1e-6)

    def test_save_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(5)
        vol = _random_label_volume(rng)
        save_nifti(vol, tmp_path / "a.nii.gz")
        save_nifti(vol, tmp_path / "b.nii.gz")
        assert (tmp_path / "a.nii.gz").read_bytes() == (tmp_path / "b.nii.gz").read_bytes()

    def test_save_load_save_idempotent(self, tmp_path):
        rng = np.random.default_rng(6)
        vol = _random_label_volume(rng)
        save_nifti(vol, tmp_path / "a.nii.gz")
        save_nifti(load_label(tmp_path / "a.nii.gz"), tmp_path / "b.nii.gz")
        assert (tmp_path / "a.nii.gz").read_bytes() == (tmp_path / "b.nii.gz").read_bytes()

    def test_label_uses_uint8_on_disk(self, tmp_path):
        g = VolumeGeometry.isotropic((3, 3, 3))
        save_nifti(LabelVolume(g, np.ones((3, 3, 3), dtype=np.uint8)), tmp_path / "x.nii")
        raw = (tmp_path / "x.nii").read_bytes()
        datatype = struct.unpack("<h", raw[70:72])[0]
        assert datatype == DT_UINT8
        assert raw[344:348] == b"n+1\x00"

    def test_intensity_roundtrip(self, tmp_path):
        g = VolumeGeometry.isotropic((4, 5, 6), 1.0)
        values = np.random.default_rng(0).normal(size=(4, 5, 6)).astype(np.float32)
        vol = IntensityVolume(g, values.astype(np.float64), "FLAIR")
        save_nifti(vol, tmp_path / "f.nii.gz")
        loaded = load_nifti(tmp_path / "f.nii.gz", kind="intensity", sequence_tag="FLAIR")
        assert np.array_equal(loaded.values, values.astype(np.float64))
        assert loaded.sequence_tag == "FLAIR"

    def test_per_voxel_volume_at_1mm(self, tmp_path):
        g = VolumeGeometry.isotropic((5, 5, 5), 1.0)
        save_nifti(LabelVolume(g, np.zeros((5, 5, 5), dtype=np.uint8)), tmp_path / "x.nii.gz")
        loaded = load_nifti(tmp_path / "x.nii.gz")
        assert loaded.geometry.voxel_volume_ml == 0.001


class TestValidation:
    def test_label_code_outside_set_rejected(self, tmp_path):
        g = VolumeGeometry.isotropic((3, 3, 3))
        save_nifti(LabelVolume(g, np.zeros((3, 3, 3), dtype=np.uint8)), tmp_path / "x.nii")
        raw = bytearray((tmp_path / "x.nii").read_bytes())
        raw[352] = 7
        (tmp_path / "x.nii").write_bytes(bytes(raw))
        with pytest.raises(LabelCodeError):
            load_label(tmp_path / "x.nii")

    def test_noninteger_label_file_rejected(self, tmp_path):
        g = VolumeGeometry.isotropic((3, 3, 3))
        values = np.full((3, 3, 3), 1.5)
        save_nifti(IntensityVolume(g, values, "T1"), tmp_path / "x.nii.gz")
        with pytest.raises(LabelCodeError, match="non-integer"):
            load_label(tmp_path / "x.nii.gz")

    def test_float_file_with_integral_codes_loads_as_label(self, tmp_path):
        g = VolumeGeometry.isotropic((3, 3, 3))
        values = np.zeros((3, 3, 3))
        values[0, 0, 0] = 2.0
        save_nifti(IntensityVolume(g, values, "T1"), tmp_path / "x.nii.gz")
        vol = load_label(tmp_path / "x.nii.gz")
        assert vol.codes[0, 0, 0] == 2

    def test_intensity_requires_tag(self, tmp_path):
        g = VolumeGeometry.isotropic((3, 3, 3))
        save_nifti(IntensityVolume(g, np.zeros((3, 3, 3)), "T1"), tmp_path / "x.nii.gz")
        with pytest.raises(ValueError, match="sequence_tag"):
            load_nifti(tmp_path / "x.nii.gz")

    def test_auto_kind_dispatch(self, tmp_path):
        g = VolumeGeometry.isotropic((3, 3, 3))
        save_nifti(LabelVolume(g, np.ones((3, 3, 3), dtype=np.uint8)), tmp_path / "l.nii.gz")
        save_nifti(IntensityVolume(g, np.ones((3, 3, 3)), "T2"), tmp_path / "i.nii.gz")
        assert isinstance(load_nifti(tmp_path / "l.nii.gz"), LabelVolume)
        assert isinstance(
            load_nifti(tmp_path / "i.nii.gz", sequence_tag="T2"), IntensityVolume
        )


class TestHeaderErrors:
    def _saved_bytes(self, tmp_path):
        g = VolumeGeometry.isotropic((3, 3, 3))
        save_nifti(LabelVolume(g, np.zeros((3, 3, 3), dtype=np.uint8)), tmp_path / "x.nii")
        return bytearray((tmp_path / "x.nii").read_bytes())

    def test_wrong_header_size(self, tmp_path):
        raw = self._saved_bytes(tmp_path)
        raw[0:4] = struct.pack("<i", 347)
        (tmp_path / "bad.nii").write_bytes(bytes(raw))
        with pytest.raises(NiftiError, match="348"):
            load_nifti(tmp_path / "bad.nii")

    def test_wrong_magic(self, tmp_path):
        raw = self._saved_bytes(tmp_path)
        raw[344:348] = b"abc\x00"
        (tmp_path / "bad.nii").write_bytes(bytes(raw))
        with pytest.raises(NiftiError, match="magic"):
            load_nifti(tmp_path / "bad.nii")

    def test_two_file_magic_rejected(self, tmp_path):
        raw = self._saved_bytes(tmp_path)
        raw[344:348] = MAGIC_PAIR
        (tmp_path / "bad.nii").write_bytes(bytes(raw))
        with pytest.raises(NiftiError, match="ni1"):
            load_nifti(tmp_path / "bad.nii")

    def test_unsupported_datatype(self, tmp_path):
        raw = self._saved_bytes(tmp_path)
        raw[70:72] = struct.pack("<h", 32)  # complex64
        (tmp_path / "bad.nii").write_bytes(bytes(raw))
        with pytest.raises(NiftiError, match="datatype"):
            load_nifti(tmp_path / "bad.nii")

    def test_truncated_data(self, tmp_path):
        raw = self._saved_bytes(tmp_path)
        (tmp_path / "bad.nii").write_bytes(bytes(raw[:-5]))
        with pytest.raises(NiftiError, match="truncated"):
            load_nifti(tmp_path / "bad.nii")

    def test_too_short_file(self, tmp_path):
        (tmp_path / "bad.nii").write_bytes(b"\x00" * 100)
        with pytest.raises(NiftiError, match="too short"):
            load_nifti(tmp_path / "bad.nii")


class TestOrientationFallbacks:
    def test_big_endian_file_loads(self, tmp_path):
        shape = (3, 4, 5)
        data = np.arange(60, dtype=np.uint8).reshape(shape) % 4
        header = struct.pack(
            ">" + _HEADER_FMT,
            HEADER_SIZE, b"", b"", 0, 0, b"r", 0,
            3, *shape, 1, 1, 1, 1,
            0.0, 0.0, 0.0, 0, DT_UINT8, 8, 0,
            1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0,
            352.0, 1.0, 0.0, 0, 0, 2,
            0.0, 0.0, 0.0, 0.0, 0, 0, b"", b"", 0, 1,
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            b"", b"n+1\x00",
        )
        payload = header + b"\x00" * 4 + data.tobytes(order="F")
        (tmp_path / "be.nii").write_bytes(payload)
        vol = load_nifti(tmp_path / "be.nii")
        assert np.array_equal(vol.codes, data)

    def test_qform_fallback(self, tmp_path):
        # sform off, identity quaternion: affine = diag(pixdim) + qoffset.
        shape = (3, 3, 3)
        header = struct.pack(
            "<" + _HEADER_FMT,
            HEADER_SIZE, b"", b"", 0, 0, b"r", 0,
            3, *shape, 1, 1, 1, 1,
            0.0, 0.0, 0.0, 0, DT_UINT8, 8, 0,
            1.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0,
            352.0, 1.0, 0.0, 0, 0, 2,
            0.0, 0.0, 0.0, 0.0, 0, 0, b"", b"", 1, 0,
            0.0, 0.0, 0.0, 10.0, 20.0, 30.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            b"", b"n+1\x00",
        )
        payload = header + b"\x00" * 4 + np.zeros(27, dtype=np.uint8).tobytes()
        (tmp_path / "q.nii").write_bytes(payload)
        vol = load_nifti(tmp_path / "q.nii")
        expected = np.array(
            [[2, 0, 0, 10], [0, 2, 0, 20], [0, 0, 2, 30], [0, 0, 0, 1]], dtype=float
        )
        assert np.allclose(vol.geometry.affine, expected, atol=1e-6)

    def test_pixdim_fallback_when_no_form(self, tmp_path):
        shape = (3, 3, 3)
        header = struct.pack(
            "<" + _HEADER_FMT,
            HEADER_SIZE, b"", b"", 0, 0, b"r", 0,
            3, *shape, 1, 1, 1, 1,
            0.0, 0.0, 0.0, 0, DT_UINT8, 8, 0,
            1.0, 1.5, 1.5, 3.0, 0.0, 0.0, 0.0, 0.0,
            352.0, 1.0, 0.0, 0, 0, 2,
            0.0, 0.0, 0.0, 0.0, 0, 0, b"", b"", 0, 0,
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            b"", b"n+1\x00",
        )
        payload = header + b"\x00" * 4 + np.zeros(27, dtype=np.uint8).tobytes()
        (tmp_path / "p.nii").write_bytes(payload)
        vol = load_nifti(tmp_path / "p.nii")
        assert vol.geometry.spacing == pytest.approx((1.5, 1.5, 3.0))

    def test_gzip_detected_by_prefix_not_suffix(self, tmp_path):
        g = VolumeGeometry.isotropic((3, 3, 3))
        save_nifti(LabelVolume(g, np.zeros((3, 3, 3), dtype=np.uint8)), tmp_path / "x.nii.gz")
        renamed = tmp_path / "x_plainname.nii"
        renamed.write_bytes((tmp_path / "x.nii.gz").read_bytes())
        assert isinstance(load_nifti(renamed), LabelVolume)

    def test_scaled_intensity_applies_slope(self, tmp_path):
        g = VolumeGeometry.isotropic((2, 2, 2))
        save_nifti(IntensityVolume(g, np.ones((2, 2, 2)), "T1"), tmp_path / "x.nii")
        raw = bytearray((tmp_path / "x.nii").read_bytes())
        raw[112:116] = struct.pack("<f", 2.0)  # scl_slope
        raw[116:120] = struct.pack("<f", 5.0)  # scl_inter
        (tmp_path / "x.nii").write_bytes(bytes(raw))
        vol = load_intensity(tmp_path / "x.nii", "T1")
        assert np.allclose(vol.values, 7.0)
