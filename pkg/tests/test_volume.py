import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tumorkit.volume import (
    BinaryMask,
    LabelCodeError,
    LabelVolume,
    IntensityVolume,
    VolumeGeometry,
    channel_mask,
    mask_volume_ml,
    whole_tumour_mask,
)


class TestVolumeGeometry:
    def test_isotropic(self):
        g = VolumeGeometry.isotropic((4, 5, 6), 2.0)
        assert g.shape == (4, 5, 6)
        assert g.spacing == (2.0, 2.0, 2.0)
        assert g.voxel_volume_ml == pytest.approx(0.008)

    @pytest.mark.parametrize("shape", [(0, 4, 4), (4, -1, 4), (4, 4)])
    def test_rejects_bad_shape(self, shape):
        with pytest.raises(ValueError):
            VolumeGeometry(shape, (1, 1, 1), np.eye(4))

    def test_rejects_nonpositive_spacing(self):
        with pytest.raises(ValueError):
            VolumeGeometry((4, 4, 4), (1, 0, 1), np.eye(4))

    def test_rejects_spacing_affine_mismatch(self):
        with pytest.raises(ValueError, match="column norms"):
            VolumeGeometry((4, 4, 4), (2, 2, 2), np.eye(4))

    def test_from_affine_derives_spacing(self):
        affine = np.diag([1.5, 2.0, 2.5, 1.0])
        g = VolumeGeometry.from_affine((3, 3, 3), affine)
        assert g.spacing == pytest.approx((1.5, 2.0, 2.5))

    def test_compatibility_tolerates_small_affine_noise(self):
        g1 = VolumeGeometry.isotropic((4, 4, 4))
        affine = np.array(g1.affine)
        affine[0, 3] += 5e-4
        g2 = VolumeGeometry.from_affine((4, 4, 4), affine)
        assert g1.compatible_with(g2)
        affine[0, 3] += 1.0
        g3 = VolumeGeometry.from_affine((4, 4, 4), affine)
        assert not g1.compatible_with(g3)
        assert not g1.compatible_with(VolumeGeometry.isotropic((4, 4, 5)))

    def test_immutable(self):
        g = VolumeGeometry.isotropic((4, 4, 4))
        with pytest.raises(ValueError):
            g.affine[0, 0] = 9.0


class TestLabelVolume:
    def test_rejects_code_outside_set(self, geometry_8):
        codes = np.zeros((8, 8, 8), dtype=np.uint8)
        codes[0, 0, 0] = 7
        with pytest.raises(LabelCodeError, match=r"\[7\]"):
            LabelVolume(geometry_8, codes)

    def test_rejects_float_codes(self, geometry_8):
        with pytest.raises(LabelCodeError):
            LabelVolume(geometry_8, np.zeros((8, 8, 8), dtype=np.float32))

    def test_rejects_shape_mismatch(self, geometry_8):
        with pytest.raises(ValueError):
            LabelVolume(geometry_8, np.zeros((8, 8, 7), dtype=np.uint8))


class TestIntensityVolume:
    def test_rejects_nonfinite(self, geometry_8):
        values = np.zeros((8, 8, 8))
        values[1, 1, 1] = np.nan
        with pytest.raises(ValueError, match="finite"):
            IntensityVolume(geometry_8, values, "T1")

    def test_rejects_unknown_tag(self, geometry_8):
        with pytest.raises(ValueError, match="sequence_tag"):
            IntensityVolume(geometry_8, np.zeros((8, 8, 8)), "DWI")


class TestChannelMasks:
    def test_empty_volume_gives_empty_masks(self, geometry_8):
        vol = LabelVolume(geometry_8, np.zeros((8, 8, 8), dtype=np.uint8))
        for channel in ("T2H", "ET", "CC"):
            assert channel_mask(vol, channel).population == 0
        assert whole_tumour_mask(vol).population == 0

    def test_population_matches_construction(self, geometry_8):
        codes = np.zeros((8, 8, 8), dtype=np.uint8)
        codes.ravel()[:100] = 1
        vol = LabelVolume(geometry_8, codes)
        assert channel_mask(vol, "T2H").population == 100

    def test_unknown_channel(self, geometry_8):
        vol = LabelVolume(geometry_8, np.zeros((8, 8, 8), dtype=np.uint8))
        with pytest.raises(ValueError, match="channel"):
            channel_mask(vol, "WT")

    def test_channels_pairwise_disjoint_and_partition_wt(self, geometry_8):
        rng = np.random.default_rng(0)
        codes = rng.integers(0, 4, size=(8, 8, 8), dtype=np.uint8)
        vol = LabelVolume(geometry_8, codes)
        masks = {c: channel_mask(vol, c) for c in ("T2H", "ET", "CC")}
        for a in masks:
            for b in masks:
                if a != b:
                    assert not np.any(masks[a].bits & masks[b].bits)
        assert sum(m.population for m in masks.values()) == whole_tumour_mask(vol).population

    def test_disjoint_region_populations_sum_in_wt(self, geometry_8):
        codes = np.zeros((8, 8, 8), dtype=np.uint8)
        flat = codes.ravel()
        flat[:100] = 1
        flat[100:150] = 2
        flat[150:175] = 3
        vol = LabelVolume(geometry_8, codes)
        assert whole_tumour_mask(vol).population == 175

    def test_t2h_only_wt_equals_t2h(self, geometry_8):
        codes = np.zeros((8, 8, 8), dtype=np.uint8)
        codes[2:6, 2:6, 2:6] = 1
        vol = LabelVolume(geometry_8, codes)
        assert np.array_equal(whole_tumour_mask(vol).bits, channel_mask(vol, "T2H").bits)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_partition_property(seed):
    rng = np.random.default_rng(seed)
    shape = tuple(int(rng.integers(1, 10)) for _ in range(3))
    codes = rng.integers(0, 4, size=shape, dtype=np.uint8)
    vol = LabelVolume(VolumeGeometry.isotropic(shape), codes)
    total = sum(channel_mask(vol, c).population for c in ("T2H", "ET", "CC"))
    assert total == whole_tumour_mask(vol).population


class TestMaskVolume:
    def test_125_voxels_at_1mm_is_exactly_0125(self):
        g = VolumeGeometry.isotropic((10, 10, 10), 1.0)
        bits = np.arange(1000).reshape(10, 10, 10) < 125
        assert mask_volume_ml(BinaryMask(g, bits)) == 0.125

    def test_125_voxels_at_2mm(self):
        g = VolumeGeometry.isotropic((10, 10, 10), 2.0)
        bits = np.arange(1000).reshape(10, 10, 10) < 125
        assert mask_volume_ml(BinaryMask(g, bits)) == 1.0

    def test_empty_mask(self, geometry_8):
        assert mask_volume_ml(BinaryMask(geometry_8, np.zeros((8, 8, 8), bool))) == 0.0

    def test_additive_over_disjoint_masks(self, geometry_8):
        rng = np.random.default_rng(1)
        bits = rng.random((8, 8, 8)) < 0.4
        half = np.zeros_like(bits)
        half[:4] = bits[:4]
        other = bits & ~half
        total = mask_volume_ml(BinaryMask(geometry_8, bits))
        parts = mask_volume_ml(BinaryMask(geometry_8, half)) + mask_volume_ml(
            BinaryMask(geometry_8, other)
        )
        assert total == pytest.approx(parts, rel=1e-12)

    def test_linear_in_voxel_volume(self):
        bits = np.ones((4, 4, 4), bool)
        v1 = mask_volume_ml(BinaryMask(VolumeGeometry.isotropic((4, 4, 4), 1.0), bits))
        v3 = mask_volume_ml(BinaryMask(VolumeGeometry.isotropic((4, 4, 4), 3.0), bits))
        assert v3 == pytest.approx(27 * v1, rel=1e-12)
