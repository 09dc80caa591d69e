import math

import numpy as np
import pytest

from tissuesim.render import (
    NoiseParams,
    background_gain,
    mix,
    quantize_u16,
    render_gaussians,
    render_profiles,
    shot_noise,
)
from tissuesim.scene import covariance_of


def test_unit_gaussian_values():
    img = render_gaussians([[10.0, 12.0]], [1.0], [np.eye(2)], (21, 25))
    assert img.shape == (25, 21)
    assert img[12, 10] == pytest.approx(1.0)
    assert img[12, 11] == pytest.approx(math.exp(-0.5))
    assert img[13, 10] == pytest.approx(0.60653066, abs=1e-8)
    assert img[13, 11] == pytest.approx(math.exp(-1.0))


def test_anisotropic_rotated_profile():
    cov = covariance_of([1.0, 2.0], [math.pi / 2])  # long axis along x after rotation
    img = render_gaussians([[15.0, 15.0]], [0.5], [cov], (31, 31))
    assert img[15, 17] == pytest.approx(0.5 * math.exp(-0.5))
    assert img[16, 15] == pytest.approx(0.5 * math.exp(-0.5))


def test_off_grid_centre_against_formula():
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    x = np.array([7.3, 5.8])
    img = render_gaussians([x], [0.8], [cov], (16, 12), truncation=10)
    prec = np.linalg.inv(cov)
    for (yy, xx) in [(5, 7), (6, 8), (3, 9), (8, 4)]:
        dz = np.array([xx, yy]) - x
        assert img[yy, xx] == pytest.approx(0.8 * math.exp(-0.5 * dz @ prec @ dz), rel=1e-12)


def test_superposition():
    rng = np.random.default_rng(0)
    pos = rng.uniform(5, 45, (12, 2))
    w = rng.uniform(0.2, 1, 12)
    covs = np.array([covariance_of(rng.uniform(0.5, 3, 2), [rng.uniform(0, math.pi)]) for _ in range(12)])
    together = render_gaussians(pos, w, covs, (50, 50))
    apart = sum(render_gaussians(pos[i : i + 1], w[i : i + 1], covs[i : i + 1], (50, 50)) for i in range(12))
    assert np.max(np.abs(together - apart)) < 1e-6


def test_truncation_support():
    img = render_gaussians([[20.0, 20.0]], [1.0], [np.eye(2) * 4.0], (41, 41), truncation=4)
    assert img[20, 28] > 0  # exactly 4 sigma away
    assert img[20, 29] == 0 and img[20, 11] == 0
    # Truncation error is below exp(-8) relative to the peak.
    full = render_gaussians([[20.0, 20.0]], [1.0], [np.eye(2) * 4.0], (41, 41), truncation=10)
    assert np.max(np.abs(full - img)) < math.exp(-8) + 1e-15


def test_truncation_minimum():
    with pytest.raises(ValueError):
        render_gaussians([[1.0, 1.0]], [1.0], [np.eye(2)], (4, 4), truncation=2)


def test_profile_outside_image_is_skipped():
    img = render_gaussians([[-50.0, 5.0]], [1.0], [np.eye(2)], (10, 10))
    assert not img.any()


def test_singular_covariance_rejected():
    with pytest.raises(ValueError, match="positive definite"):
        render_gaussians([[1.0, 1.0]], [1.0], [np.diag([1.0, 0.0])], (4, 4))


def test_render_3d():
    img = render_gaussians([[3.0, 4.0, 5.0]], [1.0], [np.eye(3)], (8, 9, 10))
    assert img.shape == (10, 9, 8)
    assert img[5, 4, 3] == pytest.approx(1.0)
    assert img[6, 4, 3] == pytest.approx(math.exp(-0.5))  # one voxel along z
    assert img[5, 4, 4] == pytest.approx(math.exp(-0.5))  # one voxel along x


def test_render_profiles_accepts_list_and_set():
    from tests.test_scene import small_config
    from tissuesim.scene import init_scene

    scene = init_scene(small_config(particles=10, background_count=1), np.random.default_rng(0))
    a = render_profiles(scene.particles, (96, 96))
    b = render_profiles(list(scene.particles), (96, 96))
    np.testing.assert_allclose(a, b)


def test_background_gain_and_mix():
    background = np.array([[0.5, 2.0], [1.0, 0.0]])
    gain = background_gain(background)
    assert gain == 2.0
    params = NoiseParams(alpha=0.2, delta=50, gain=gain)
    particles = np.array([[1.0, 1.0], [0.0, 0.0]])
    out = mix(particles, background, params)
    np.testing.assert_allclose(out, [[0.2 + 0.2, 0.2 + 0.8], [0.4, 0.0]])
    # A particle peak on top of the brightest background reaches exactly 1.0.
    assert out[0, 1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        background_gain(np.zeros((2, 2)))


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(alpha=1.5)
    with pytest.raises(ValueError):
        NoiseParams(delta=0)


def test_shot_noise_moments():
    rng = np.random.default_rng(0)
    image = np.full(1_000_000, 0.5)
    noisy = shot_noise(image, 50.0, rng)
    assert abs(noisy.mean() - 0.5) / 0.5 < 0.01
    assert abs(noisy.var() - 0.01) / 0.01 < 0.03
    # Counts are integers divided by delta.
    np.testing.assert_allclose(noisy * 50, np.round(noisy * 50))


def test_shot_noise_vanishes_for_long_exposure():
    rng = np.random.default_rng(1)
    noisy = shot_noise(np.full(10_000, 0.3), 1e6, rng)
    # Relative std is 1/sqrt(delta * I) ~ 0.18 %.
    assert np.sqrt(np.mean((noisy - 0.3) ** 2)) / 0.3 < 0.005
    assert abs(noisy.mean() - 0.3) / 0.3 < 0.0005


def test_shot_noise_input_checks():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        shot_noise(np.array([-0.1]), 50, rng)
    with pytest.raises(ValueError):
        shot_noise(np.array([0.1]), 0, rng)
    assert shot_noise(np.zeros(5), 50, rng).sum() == 0


def test_quantize():
    out = quantize_u16(np.array([0.0, 0.5, 1.0, 1.7, -0.2, 1 / 65535]))
    assert out.dtype == np.uint16
    assert out.tolist() == [0, 32768, 65535, 65535, 0, 1]


def test_rendered_background_peaks_at_one_minus_alpha():
    from tests.test_scene import small_config
    from tissuesim.scene import init_scene

    scene = init_scene(small_config(background_count=4), np.random.default_rng(0))
    bg = render_profiles(scene.background, (96, 96))
    params = NoiseParams(alpha=0.2, gain=background_gain(bg))
    out = mix(np.zeros_like(bg), bg, params)
    assert out.max() == pytest.approx(0.8)
