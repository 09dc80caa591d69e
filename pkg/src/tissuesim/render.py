"""Image formation: Gaussian profiles, background normalisation and shot noise.

Images are numpy arrays indexed ``[(z,) y, x]``; profile positions are given
in ``(x, y[, z])`` pixels with voxel centres at integer coordinates. Pixel
values are normalised intensities where 1.0 is the nominal full scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_dims, check_fraction, check_positive

__all__ = [
    "NoiseParams",
    "render_profiles",
    "render_gaussians",
    "background_gain",
    "mix",
    "shot_noise",
    "quantize_u16",
    "DEFAULT_TRUNCATION",
]

DEFAULT_TRUNCATION = 4.0


@dataclass(frozen=True)
class NoiseParams:
    """Mixing proportion `alpha`, integration time `delta`, background `gain`."""

    alpha: float = 0.2
    delta: float = 50.0
    gain: float = 1.0

    def __post_init__(self):
        check_fraction(self.alpha, "alpha")
        check_positive(self.delta, "delta")
        check_positive(self.gain, "gain")


def render_gaussians(positions, weights, covariances, dims, truncation: float = DEFAULT_TRUNCATION) -> np.ndarray:
    """Sum of ``w * exp(-0.5 (z - x)^T C^-1 (z - x))`` over profiles.

    Each profile is evaluated only inside its box of half-width
    ``truncation * max_sigma`` and accumulated in index order.
    """
    dims = check_dims(dims)
    d = len(dims)
    if truncation < 3:
        raise ValueError(f"truncation must be >= 3 sigma, got {truncation}")
    positions = np.asarray(positions, dtype=float).reshape(-1, d)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    covariances = np.asarray(covariances, dtype=float).reshape(-1, d, d)
    image = np.zeros(dims[::-1])
    upper = np.array(dims) - 1
    for x, w, cov in zip(positions, weights, covariances):
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"covariance of profile at {x} is not positive definite") from exc
        precision = np.linalg.inv(cov)
        radius = truncation * np.sqrt(np.max(np.linalg.eigvalsh(cov)))
        lo = np.maximum(np.ceil(x - radius), 0).astype(int)
        hi = np.minimum(np.floor(x + radius), upper).astype(int)
        if np.any(hi < lo):
            continue
        # Offsets along each (x, y[, z]) axis, shaped to broadcast in array order.
        deltas = []
        for a in range(d):
            shape = [1] * d
            shape[d - 1 - a] = hi[a] - lo[a] + 1
            deltas.append((np.arange(lo[a], hi[a] + 1) - x[a]).reshape(shape))
        quad = 0.0
        for a in range(d):
            quad = quad + precision[a, a] * deltas[a] ** 2
            for b in range(a + 1, d):
                quad = quad + 2.0 * precision[a, b] * deltas[a] * deltas[b]
        window = tuple(slice(lo[a], hi[a] + 1) for a in reversed(range(d)))
        image[window] += w * np.exp(-0.5 * quad)
    return image


def render_profiles(profiles, dims, truncation: float = DEFAULT_TRUNCATION) -> np.ndarray:
    """Noise-free image of a `ProfileSet` or a sequence of `SceneProfile`."""
    if hasattr(profiles, "covariances"):
        return render_gaussians(profiles.positions, profiles.weights, profiles.covariances(), dims, truncation)
    profiles = list(profiles)
    d = len(dims)
    return render_gaussians(
        np.array([p.position for p in profiles]).reshape(-1, d),
        np.array([p.weight for p in profiles]),
        np.array([p.covariance for p in profiles]).reshape(-1, d, d),
        dims,
        truncation,
    )


def background_gain(first_background) -> float:
    """Normalisation constant: the maximum of the first background image."""
    first_background = np.asarray(first_background)
    if first_background.size == 0:
        raise ValueError("background image is empty")
    gain = float(first_background.max())
    if not gain > 0:
        raise ValueError("background image is zero everywhere; cannot normalise")
    return gain


def mix(particle_img, background_img, params: NoiseParams) -> np.ndarray:
    """``alpha * particles + (1 - alpha) / gain * background``."""
    particle_img = np.asarray(particle_img, dtype=float)
    background_img = np.asarray(background_img, dtype=float)
    if particle_img.shape != background_img.shape:
        raise ValueError(f"image shapes differ: {particle_img.shape} vs {background_img.shape}")
    return params.alpha * particle_img + ((1.0 - params.alpha) / params.gain) * background_img


def shot_noise(image, delta: float, rng) -> np.ndarray:
    """Poisson photon counting: ``Poisson(delta * image) / delta`` per voxel."""
    delta = check_positive(delta, "delta")
    image = np.asarray(image, dtype=float)
    if np.any(image < 0) or not np.all(np.isfinite(image)):
        raise ValueError("image must be finite and non-negative")
    return rng.poisson(delta * image) / delta


def quantize_u16(image) -> np.ndarray:
    """Round to 16 bits, saturating at 1.0."""
    image = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    return np.floor(image * 65535.0 + 0.5).astype(np.uint16)
