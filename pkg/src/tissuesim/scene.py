"""Animal mask, Gaussian profiles and their evolution over time."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._validation import check_dims, check_points
from .dynamics import OscillatorState, calibrate_force_std, oscillator_step
from .motion.flow import FlowField, advect_with_flow
from .motion.tps import ThinPlateSpline

__all__ = [
    "AnimalMask",
    "SceneProfile",
    "ProfileSet",
    "Scene",
    "PackingError",
    "sample_ellipse_mask",
    "load_mask",
    "sample_positions",
    "sample_profiles",
    "init_scene",
    "rotation_matrix",
    "covariance_of",
    "step_scene",
    "MIN_SIZE_RATIO",
]

# Floor on the normalised size so covariances stay positive definite.
MIN_SIZE_RATIO = 0.1
_COVERAGE_TOL = 0.10


class PackingError(RuntimeError):
    """Raised when dart throwing cannot place the requested points."""

    def __init__(self, placed: int, requested: int, min_dist: float):
        super().__init__(f"could only place {placed} of {requested} points at min_dist={min_dist}")
        self.placed = placed
        self.requested = requested


@dataclass(frozen=True)
class AnimalMask:
    """Boolean body mask. `grid` is indexed in array order ``[(z,) y, x]``."""

    grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=bool)
        if grid.ndim not in (2, 3):
            raise ValueError(f"mask must be 2D or 3D, got {grid.ndim} dimensions")
        if not grid.any():
            raise ValueError("mask is empty")
        object.__setattr__(self, "grid", grid)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.grid.shape[::-1])

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    @property
    def count(self) -> int:
        return int(self.grid.sum())

    @property
    def coverage(self) -> float:
        return self.count / self.grid.size

    def voxels(self) -> np.ndarray:
        """Coordinates ``(x, y[, z])`` of the voxels inside the mask."""
        return np.argwhere(self.grid)[:, ::-1].astype(float)

    def contains(self, points) -> np.ndarray:
        points = check_points(points, self.ndim)
        idx = np.floor(points + 0.5).astype(np.intp)
        inside = np.all((idx >= 0) & (idx < np.array(self.dims)), axis=1)
        out = np.zeros(len(points), dtype=bool)
        sel = idx[inside]
        out[inside] = self.grid[tuple(sel[:, a] for a in reversed(range(self.ndim)))]
        return out


def sample_ellipse_mask(dims, coverage: float = 0.3, rng=None, max_tries: int = 100) -> AnimalMask:
    """Random axis-aligned ellipse (ellipsoid) covering `coverage` of the domain.

    Semi-axes get a random aspect ratio, the centre is drawn so that the body
    stays inside the image, and the rasterised coverage is within 10 %
    (relative) of the request.
    """
    dims = check_dims(dims)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if not 0 < coverage <= 0.9:
        raise ValueError(f"coverage must be in (0, 0.9], got {coverage}")
    d = len(dims)
    unit_volume = math.pi / 4 if d == 2 else math.pi / 6
    # Ratio of each semi-axis to the half image size; their product fixes coverage.
    mean_ratio = (coverage / unit_volume) ** (1.0 / d)
    if mean_ratio > 0.98:
        raise ValueError(f"coverage {coverage} is infeasible for an ellipse in {d}D (max ~{unit_volume * 0.98**d:.2f})")

    sizes = np.array(dims, dtype=float)
    coords = np.meshgrid(*(np.arange(s, dtype=float) for s in dims[::-1]), indexing="ij", sparse=True)[::-1]
    for _ in range(max_tries):
        log_aspect = rng.uniform(-0.25, 0.25, size=d)
        ratios = mean_ratio * np.exp(log_aspect - log_aspect.mean())
        if np.any(ratios > 0.98):
            continue
        semi = ratios * sizes / 2
        low = semi - 0.5
        high = sizes - 0.5 - semi
        center = rng.uniform(low, np.maximum(high, low))
        inside = sum(((c - c0) / a) ** 2 for c, c0, a in zip(coords, center, semi)) <= 1.0
        frac = inside.mean()
        if inside.any() and abs(frac - coverage) <= _COVERAGE_TOL * coverage:
            return AnimalMask(inside)
    raise ValueError(f"could not rasterise an ellipse with coverage {coverage} in dims {dims}")


def load_mask(image, threshold: float) -> AnimalMask:
    """Mask of the voxels at or above `threshold`."""
    image = np.asarray(image)
    if image.size == 0:
        raise ValueError("image is empty")
    grid = image >= threshold
    if not grid.any():
        raise ValueError(f"no voxel reaches threshold {threshold} (max {image.max()})")
    return AnimalMask(grid)


class _SpatialHash:
    def __init__(self, cell: float, d: int):
        self.cell = cell
        self.d = d
        self.buckets: dict[tuple, list] = {}
        self.offsets = np.array(np.meshgrid(*([(-1, 0, 1)] * d), indexing="ij")).reshape(d, -1).T

    def _key(self, p):
        return tuple(np.floor(p / self.cell).astype(int))

    def far_enough(self, p, min_dist: float) -> bool:
        key = np.array(self._key(p))
        for off in self.offsets:
            for q in self.buckets.get(tuple(key + off), ()):
                if np.sum((p - q) ** 2) < min_dist * min_dist:
                    return False
        return True

    def add(self, p):
        self.buckets.setdefault(self._key(p), []).append(p)


def sample_positions(mask: AnimalMask, count: int, min_dist: float = 0.0, rng=None, max_attempts: int = 1000) -> np.ndarray:
    """Dart throwing inside `mask` with a minimal pairwise distance.

    Candidates are drawn uniformly over mask voxels plus a uniform sub-voxel
    offset. A point that is rejected `max_attempts` times in a row aborts the
    sampling with `PackingError`.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if min_dist < 0:
        raise ValueError(f"min_dist must be >= 0, got {min_dist}")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    voxels = mask.voxels()
    d = mask.ndim
    if min_dist == 0:
        picks = voxels[rng.integers(len(voxels), size=count)]
        return picks + rng.uniform(-0.5, 0.5, size=(count, d))

    grid = _SpatialHash(min_dist, d)
    placed = []
    for _ in range(count):
        for _ in range(max_attempts):
            p = voxels[rng.integers(len(voxels))] + rng.uniform(-0.5, 0.5, size=d)
            if grid.far_enough(p, min_dist):
                grid.add(p)
                placed.append(p)
                break
        else:
            raise PackingError(len(placed), count, min_dist)
    return np.array(placed)


def rotation_matrix(angles) -> np.ndarray:
    """2D rotation for one angle; ``Rz @ Ry @ Rx`` for three angles (radians)."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.shape == (1,):
        c, s = np.cos(angles[0]), np.sin(angles[0])
        return np.array([[c, -s], [s, c]])
    if angles.shape == (3,):
        cx, cy, cz = np.cos(angles)
        sx, sy, sz = np.sin(angles)
        rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
        ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
        return rz @ ry @ rx
    raise ValueError(f"expected 1 (2D) or 3 (3D) angles, got {angles.shape}")


def covariance_of(sizes, angles) -> np.ndarray:
    """Covariance ``R^T diag(sizes)**2 R`` of an elliptic profile."""
    sizes = np.asarray(sizes, dtype=float)
    if np.any(sizes <= 0):
        raise ValueError(f"sizes must be > 0, got {sizes}")
    rot = rotation_matrix(angles)
    if rot.shape[0] != sizes.shape[0]:
        raise ValueError(f"{sizes.shape[0]} sizes do not match a {rot.shape[0]}D rotation")
    cov = rot.T @ np.diag(sizes**2) @ rot
    return 0.5 * (cov + cov.T)


def _n_angles(d: int) -> int:
    return 1 if d == 2 else 3


@dataclass(frozen=True)
class SceneProfile:
    """One Gaussian profile (particle or background blob)."""

    position: np.ndarray
    weight: float
    base_sizes: np.ndarray
    size_osc: OscillatorState
    angle_osc: OscillatorState

    @property
    def sizes(self) -> np.ndarray:
        return self.base_sizes * np.maximum(self.size_osc.value, MIN_SIZE_RATIO)

    @property
    def angles(self) -> np.ndarray:
        return self.angle_osc.value

    @property
    def covariance(self) -> np.ndarray:
        return covariance_of(self.sizes, self.angles)


@dataclass(frozen=True)
class ProfileSet:
    """A population of Gaussian profiles stored column-wise.

    Normalised sizes and angles of the whole population are driven by two
    vector-valued oscillators, with i.i.d. random forces of std
    `size_force_std` and `angle_force_std`.
    """

    positions: np.ndarray
    initial_positions: np.ndarray
    weights: np.ndarray
    base_sizes: np.ndarray
    size_osc: OscillatorState
    angle_osc: OscillatorState
    size_force_std: float = 0.0
    angle_force_std: float = 0.0

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __getitem__(self, i: int) -> SceneProfile:
        def sub(osc):
            return OscillatorState(osc.value[i], osc.velocity[i], osc.equilibrium[i], osc.tau)

        return SceneProfile(self.positions[i], float(self.weights[i]), self.base_sizes[i], sub(self.size_osc), sub(self.angle_osc))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def ndim(self) -> int:
        return self.positions.shape[1]

    @property
    def sizes(self) -> np.ndarray:
        return self.base_sizes * np.maximum(self.size_osc.value, MIN_SIZE_RATIO)

    @property
    def angles(self) -> np.ndarray:
        return self.angle_osc.value

    def covariances(self) -> np.ndarray:
        sizes = self.sizes
        angles = self.angles
        return np.array([covariance_of(sizes[i], angles[i]) for i in range(len(self))]).reshape(len(self), self.ndim, self.ndim)


@dataclass(frozen=True)
class Scene:
    particles: ProfileSet
    background: ProfileSet
    mask: AnimalMask

    @property
    def ndim(self) -> int:
        return self.mask.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        return self.mask.dims


def sample_profiles(
    mask: AnimalMask,
    count: int,
    size_range: tuple[float, float],
    rng,
    *,
    min_dist: float = 0.0,
    tau: float = 10.0,
    size_std: float = 0.05,
    angle_std: float = math.pi / 30,
    max_attempts: int = 1000,
) -> ProfileSet:
    """Draw `count` profiles at rest: unit weights, random sizes and orientations."""
    lo, hi = size_range
    if not 0 < lo <= hi:
        raise ValueError(f"invalid size range {size_range}")
    d = mask.ndim
    positions = sample_positions(mask, count, min_dist, rng, max_attempts)
    base_sizes = rng.uniform(lo, hi, size=(count, d))
    angles = rng.uniform(0.0, math.pi, size=(count, _n_angles(d)))
    return ProfileSet(
        positions=positions,
        initial_positions=positions.copy(),
        weights=np.ones(count),
        base_sizes=base_sizes,
        size_osc=OscillatorState.at_rest(np.ones((count, d)), tau),
        angle_osc=OscillatorState.at_rest(angles, tau),
        size_force_std=calibrate_force_std(size_std, tau),
        angle_force_std=calibrate_force_std(angle_std, tau),
    )


def default_background_count(mask: AnimalMask, pitch: float = 40.0) -> int:
    """One background blob per ``pitch**d`` voxels of body."""
    return max(1, int(round(mask.count / pitch**mask.ndim)))


def init_scene(config, rng, mask: AnimalMask | None = None) -> Scene:
    """Initial scene from a `SimulationConfig`-like object.

    Reads ``dims, particles, min_dist, tau, particle_size, background_size,
    size_std, angle_std, coverage`` and optionally ``background_count`` and
    ``max_attempts``. When `mask` is omitted an ellipse is sampled.
    """
    if mask is None:
        mask = sample_ellipse_mask(config.dims, config.coverage, rng)
    common = dict(tau=config.tau, size_std=config.size_std, angle_std=config.angle_std)
    max_attempts = getattr(config, "max_attempts", 1000)
    particles = sample_profiles(
        mask, config.particles, config.particle_size, rng, min_dist=config.min_dist, max_attempts=max_attempts, **common
    )
    n_background = getattr(config, "background_count", None) or default_background_count(mask)
    background = sample_profiles(mask, n_background, config.background_size, rng, **common)
    return Scene(particles, background, mask)


def _step_profiles(profiles: ProfileSet, positions: np.ndarray, dt: float, rng) -> ProfileSet:
    size_force = rng.normal(0.0, profiles.size_force_std, size=profiles.size_osc.value.shape)
    angle_force = rng.normal(0.0, profiles.angle_force_std, size=profiles.angle_osc.value.shape)
    size_osc = oscillator_step(profiles.size_osc, size_force, dt)
    size_osc = replace(size_osc, value=np.maximum(size_osc.value, MIN_SIZE_RATIO))
    angle_osc = oscillator_step(profiles.angle_osc, angle_force, dt)
    return replace(profiles, positions=positions, size_osc=size_osc, angle_osc=angle_osc)


def _move(profiles: ProfileSet, deformation) -> np.ndarray:
    if deformation is None or len(profiles) == 0:
        return profiles.positions
    if isinstance(deformation, ThinPlateSpline):
        return deformation.transform(profiles.initial_positions)
    if isinstance(deformation, FlowField):
        return advect_with_flow(deformation, profiles.positions)
    raise TypeError(f"unsupported deformation {type(deformation).__name__}")


def step_scene(scene: Scene, deformation=None, dt: float = 1.0, rng=None) -> Scene:
    """Advance the scene one frame.

    A `ThinPlateSpline` maps the stored initial positions to the current
    ones; a `FlowField` advects the current positions; ``None`` leaves them
    in place. Sizes and angles then take one oscillator step with fresh
    random forces drawn from `rng`.
    """
    if deformation is not None and getattr(deformation, "ndim", getattr(deformation, "n_features_in_", scene.ndim)) != scene.ndim:
        raise ValueError("deformation dimensionality does not match the scene")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    particles = _step_profiles(scene.particles, _move(scene.particles, deformation), dt, rng)
    background = _step_profiles(scene.background, _move(scene.background, deformation), dt, rng)
    return replace(scene, particles=particles, background=background)
