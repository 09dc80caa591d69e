"""Spring lattice of invisible control points driven by random contraction forces."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .._validation import check_positive
from ..dynamics import critical_params

__all__ = [
    "ControlGrid",
    "ForceEvent",
    "build_control_grid",
    "spring_force",
    "spring_forces",
    "sample_force_event",
    "event_forces",
    "step_spring_system",
    "SpringMotion",
]


@dataclass(frozen=True)
class ControlGrid:
    """State of the control-point lattice.

    Coordinates are in pixels, ordered (x, y[, z]). Springs are stored once
    per undirected pair in `edges` (``i < j``), so stiffness and rest length
    are symmetric by construction.
    """

    positions: np.ndarray
    velocities: np.ndarray
    edges: np.ndarray
    stiffness: np.ndarray
    eq_length: np.ndarray
    initial_positions: np.ndarray
    tau: float = 10.0

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]

    @property
    def ndim(self) -> int:
        return self.positions.shape[1]

    @property
    def damping(self) -> float:
        return critical_params(self.tau)[0]

    @property
    def neighbors(self) -> list[np.ndarray]:
        adjacency = [[] for _ in range(self.n_points)]
        for i, j in self.edges:
            adjacency[i].append(j)
            adjacency[j].append(i)
        return [np.array(sorted(a), dtype=np.intp) for a in adjacency]

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.velocities**2))


def _lattice_axis(lo: int, hi: int, spacing: float) -> np.ndarray:
    # Lattice coordinates centred on the voxel extent [lo - .5, hi + .5].
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo + 1)
    k = math.ceil((half + 0.5 * spacing) / spacing)
    return center + spacing * np.arange(-k, k + 1)


def build_control_grid(mask, spacing: float, tau: float = 10.0) -> ControlGrid:
    """Regular lattice of control points covering `mask`.

    Points sit at pitch `spacing`, centred on the mask bounding box; a point
    is kept when its cell (the open cube of side `spacing` around it)
    overlaps a mask voxel. Each point is linked to its 8 (2D) or 26 (3D)
    lattice neighbours with stiffness ``1 / tau**2``.

    Parameters
    ----------
    mask : AnimalMask or ndarray of bool
        Body mask, array axes in (z,) y, x order.
    spacing : float
        Lattice pitch in pixels, at least 2.
    tau : float
        Critical time of the springs, in frames.
    """
    grid = np.asarray(getattr(mask, "grid", mask), dtype=bool)
    if grid.ndim not in (2, 3):
        raise ValueError(f"mask must be 2D or 3D, got {grid.ndim} dimensions")
    if not grid.any():
        raise ValueError("mask is empty")
    spacing = float(spacing)
    if spacing < 2:
        raise ValueError(f"spacing must be >= 2 pixels, got {spacing}")
    _, k = critical_params(tau)

    occupied = np.nonzero(grid)
    lows = [int(ax.min()) for ax in occupied]
    highs = [int(ax.max()) for ax in occupied]
    extent = max(h - l + 1 for l, h in zip(lows, highs))
    if spacing > extent:
        raise ValueError(f"spacing {spacing} exceeds mask extent {extent}")

    # Work in array-axis order, reverse to (x, y[, z]) at the end.
    axes = [_lattice_axis(l, h, spacing) for l, h in zip(lows, highs)]
    ranges = []
    for coords, size in zip(axes, grid.shape):
        lo = np.floor(coords - 0.5 * spacing - 0.5).astype(int) + 1
        hi = np.ceil(coords + 0.5 * spacing + 0.5).astype(int) - 1
        ranges.append((np.clip(lo, 0, size - 1), np.clip(hi, 0, size - 1), (lo <= size - 1) & (hi >= 0)))

    index = {}
    points = []
    for lattice_idx in itertools.product(*(range(len(a)) for a in axes)):
        if not all(r[2][i] for r, i in zip(ranges, lattice_idx)):
            continue
        window = tuple(slice(r[0][i], r[1][i] + 1) for r, i in zip(ranges, lattice_idx))
        if grid[window].any():
            index[lattice_idx] = len(points)
            points.append([a[i] for a, i in zip(axes, lattice_idx)])

    positions = np.array(points, dtype=float)[:, ::-1].copy()
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=grid.ndim) if o > (0,) * grid.ndim]
    edges = []
    for lattice_idx, i in index.items():
        for o in offsets:
            j = index.get(tuple(a + b for a, b in zip(lattice_idx, o)))
            if j is not None:
                edges.append((min(i, j), max(i, j)))
    edges = np.array(sorted(edges), dtype=np.intp).reshape(-1, 2)
    eq_length = np.linalg.norm(positions[edges[:, 0]] - positions[edges[:, 1]], axis=1)
    return ControlGrid(
        positions=positions,
        velocities=np.zeros_like(positions),
        edges=edges,
        stiffness=np.full(len(edges), k),
        eq_length=eq_length,
        initial_positions=positions.copy(),
        tau=float(tau),
    )


def _edge_forces(grid: ControlGrid) -> np.ndarray:
    # Force exerted on the first endpoint of each edge by its spring.
    diff = grid.positions[grid.edges[:, 0]] - grid.positions[grid.edges[:, 1]]
    length = np.linalg.norm(diff, axis=1)
    if np.any(length == 0):
        bad = grid.edges[np.argmax(length == 0)]
        raise ValueError(f"connected control points {bad[0]} and {bad[1]} coincide")
    scale = -grid.stiffness * (length - grid.eq_length) / length
    return scale[:, None] * diff


def spring_forces(grid: ControlGrid) -> np.ndarray:
    """Net spring force on every control point, shape ``(n, d)``."""
    forces = np.zeros_like(grid.positions)
    if len(grid.edges) == 0:
        return forces
    f = _edge_forces(grid)
    for axis in range(grid.ndim):
        forces[:, axis] += np.bincount(grid.edges[:, 0], weights=f[:, axis], minlength=grid.n_points)
        forces[:, axis] -= np.bincount(grid.edges[:, 1], weights=f[:, axis], minlength=grid.n_points)
    return forces


def spring_force(grid: ControlGrid, i: int) -> np.ndarray:
    """Spring force on control point `i`."""
    if not 0 <= i < grid.n_points:
        raise IndexError(f"control point {i} out of range [0, {grid.n_points})")
    involved = (grid.edges[:, 0] == i) | (grid.edges[:, 1] == i)
    sub = replace(grid, edges=grid.edges[involved], stiffness=grid.stiffness[involved], eq_length=grid.eq_length[involved])
    return spring_forces(sub)[i]


@dataclass(frozen=True)
class ForceEvent:
    """A transient contraction (``direction = -1``) or elongation (``+1``)."""

    subset: np.ndarray
    direction: int
    amplitudes: np.ndarray
    start_frame: int = 0
    duration: int = 1

    def __post_init__(self):
        subset = np.asarray(self.subset, dtype=np.intp)
        amplitudes = np.asarray(self.amplitudes, dtype=float)
        if subset.ndim != 1 or len(subset) < 2:
            raise ValueError("a force event needs at least 2 control points")
        if len(np.unique(subset)) != len(subset):
            raise ValueError("force event subset contains duplicates")
        if amplitudes.shape != subset.shape:
            raise ValueError("one amplitude per selected control point is required")
        if self.direction not in (-1, 1):
            raise ValueError(f"direction must be -1 or +1, got {self.direction}")
        if self.duration < 1:
            raise ValueError(f"duration must be >= 1, got {self.duration}")
        object.__setattr__(self, "subset", subset)
        object.__setattr__(self, "amplitudes", amplitudes)

    def is_active(self, frame: int) -> bool:
        return self.start_frame <= frame < self.start_frame + self.duration

    def forces(self, positions: np.ndarray) -> np.ndarray:
        """Per-point force, zero outside the subset."""
        out = np.zeros_like(positions, dtype=float)
        selected = positions[self.subset]
        radial = selected - selected.mean(axis=0)
        norm = np.linalg.norm(radial, axis=1, keepdims=True)
        # A point sitting on the barycenter has no defined direction.
        unit = np.divide(radial, norm, out=np.zeros_like(radial), where=norm > 0)
        out[self.subset] = self.direction * self.amplitudes[:, None] * unit
        return out


def sample_force_event(rng, grid: ControlGrid, a_max: float, m: int = 10, duration: int = 1, frame: int = 0) -> ForceEvent:
    """Draw a random contraction/elongation on 2 to `m` control points."""
    n = grid.n_points
    if n < 2:
        raise ValueError(f"force events need at least 2 control points, grid has {n}")
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    a_max = check_positive(a_max, "a_max")
    size = int(rng.integers(2, min(m, n), endpoint=True))
    subset = np.sort(rng.choice(n, size=size, replace=False))
    direction = int(rng.choice((-1, 1)))
    amplitudes = rng.uniform(0.5 * a_max, a_max, size=size)
    return ForceEvent(subset, direction, amplitudes, start_frame=int(frame), duration=int(duration))


def event_forces(grid: ControlGrid, events) -> np.ndarray:
    """Sum of the forces of `events`, evaluated at the current positions."""
    total = np.zeros_like(grid.positions)
    for event in events:
        total += event.forces(grid.positions)
    return total


def step_spring_system(grid: ControlGrid, active_events=(), dt: float = 1.0) -> ControlGrid:
    """One semi-implicit Euler step of the damped lattice."""
    check_positive(dt, "dt")
    acceleration = spring_forces(grid) - grid.damping * grid.velocities + event_forces(grid, active_events)
    velocities = grid.velocities + dt * acceleration
    positions = grid.positions + dt * velocities
    return replace(grid, positions=positions, velocities=velocities)


@dataclass
class SpringMotion:
    """Drives a `ControlGrid` with a stochastic schedule of force events.

    Each frame a new event starts with probability `p_event`; events last
    `duration` frames and overlapping events add up.
    """

    grid: ControlGrid
    a_max: float = 4.0
    p_event: float = 0.25
    duration: int = 3
    m: int = 10
    dt: float = 1.0
    events: list = field(default_factory=list)

    def step(self, rng, frame: int) -> ControlGrid:
        if rng.random() < self.p_event:
            self.events.append(sample_force_event(rng, self.grid, self.a_max, self.m, self.duration, frame))
        active = [e for e in self.events if e.is_active(frame)]
        self.events = [e for e in self.events if e.start_frame + e.duration > frame + 1]
        self.grid = step_spring_system(self.grid, active, self.dt)
        return self.grid
