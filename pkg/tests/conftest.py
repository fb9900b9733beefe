import numpy as np
import pytest

from tumorkit.volume import BinaryMask, LabelVolume, VolumeGeometry


@pytest.fixture
def geometry_8():
    return VolumeGeometry.isotropic((8, 8, 8), 1.0)


def random_mask(rng: np.random.Generator, max_side: int = 20, density: float | None = None) -> BinaryMask:
    shape = tuple(int(rng.integers(1, max_side + 1)) for _ in range(3))
    if density is None:
        density = float(rng.uniform(0.05, 0.6))
    bits = rng.random(shape) < density
    return BinaryMask(VolumeGeometry.isotropic(shape, 1.0), bits)


def random_label_volume(rng: np.random.Generator, max_side: int = 16) -> LabelVolume:
    shape = tuple(int(rng.integers(2, max_side + 1)) for _ in range(3))
    codes = rng.integers(0, 4, size=shape, dtype=np.uint8)
    # Bias towards background so components stay small and numerous.
    codes[rng.random(shape) < 0.5] = 0
    return LabelVolume(VolumeGeometry.isotropic(shape, 1.0), codes)


def random_float32_affine(rng: np.random.Generator) -> np.ndarray:
    """Rotation x scale affine quantized to float32 so it survives the
    on-disk float32 srow fields exactly."""
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    spacing = rng.uniform(0.5, 3.0, size=3)
    affine = np.eye(4)
    affine[:3, :3] = q @ np.diag(spacing)
    affine[:3, 3] = rng.uniform(-50.0, 50.0, size=3)
    return affine.astype(np.float32).astype(np.float64)
