import numpy as np
import pytest

from splatgen import Stream, make_scene


def random_quaternions(rng, n):
    """Vectorized uniform orientation sampling (Shoemake)."""
    u = rng.uniform(size=(n, 3))
    a, b = np.sqrt(1.0 - u[:, 0]), np.sqrt(u[:, 0])
    return np.stack(
        [
            b * np.cos(2 * np.pi * u[:, 2]),
            a * np.sin(2 * np.pi * u[:, 1]),
            a * np.cos(2 * np.pi * u[:, 1]),
            b * np.sin(2 * np.pi * u[:, 2]),
        ],
        axis=1,
    )


def build_scene(
    n,
    seed=0,
    center=(0.0, 0.0, 0.0),
    extent=0.05,
    scale_range=(0.002, 0.008),
    sh_rest_amp=0.2,
):
    """Random but reproducible splat cloud centered at `center`."""
    rng = Stream(seed)
    positions = np.asarray(center) + rng.uniform(-extent, extent, size=(n, 3))
    quats = random_quaternions(rng, n)
    log_scales = np.log(rng.uniform(scale_range[0], scale_range[1], size=(n, 3)))
    opac = rng.uniform(1.0, 6.0, size=n)
    sh0 = rng.uniform(-1.0, 1.0, size=(n, 3))
    sh_rest = rng.uniform(-sh_rest_amp, sh_rest_amp, size=(n, 45))
    return make_scene(positions, quats, log_scales, opac, sh0, sh_rest)


@pytest.fixture
def small_scene():
    return build_scene(200, seed=11)
