import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tissuesim.motion.springs import (
    ControlGrid,
    ForceEvent,
    SpringMotion,
    build_control_grid,
    event_forces,
    sample_force_event,
    spring_force,
    spring_forces,
    step_spring_system,
)


def two_point_grid(delta, k=0.5, l_eq=3.0):
    initial = np.array([[0.0, 0.0], [l_eq, 0.0]])
    positions = np.array([[0.0, 0.0], [l_eq + delta, 0.0]])
    return ControlGrid(
        positions=positions,
        velocities=np.zeros_like(positions),
        edges=np.array([[0, 1]]),
        stiffness=np.array([k]),
        eq_length=np.array([l_eq]),
        initial_positions=initial,
        tau=10.0,
    )


@pytest.fixture
def grid2d():
    return build_control_grid(np.ones((100, 100), bool), 25)


def test_full_mask_lattice_count(grid2d):
    assert grid2d.n_points == 25
    degrees = np.array([len(n) for n in grid2d.neighbors])
    # 3x3 interior points of a 5x5 lattice have all 8 neighbours.
    assert np.sum(degrees == 8) == 9
    assert set(degrees) == {3, 5, 8}


def test_lattice_pitch_and_extent(grid2d):
    xs = np.unique(grid2d.positions[:, 0])
    np.testing.assert_allclose(np.diff(xs), 25.0)
    assert xs.min() <= 0 and xs.max() >= 99


def test_single_cell_mask():
    mask = np.zeros((40, 40), bool)
    mask[10:20, 10:20] = True
    grid = build_control_grid(mask, 10)
    assert grid.n_points == 1
    assert len(grid.edges) == 0
    np.testing.assert_allclose(grid.positions[0], [14.5, 14.5])


def test_diagonal_rest_length(grid2d):
    lengths = np.unique(np.round(grid2d.eq_length, 9))
    np.testing.assert_allclose(lengths, [25.0, 25.0 * math.sqrt(2)])


def test_3d_interior_has_26_neighbours():
    grid = build_control_grid(np.ones((30, 30, 30), bool), 10)
    degrees = np.array([len(n) for n in grid.neighbors])
    assert degrees.max() == 26
    assert grid.ndim == 3


def test_lattice_invariants(grid2d):
    np.testing.assert_array_equal(grid2d.positions, grid2d.initial_positions)
    i, j = grid2d.edges.T
    np.testing.assert_allclose(grid2d.eq_length, np.linalg.norm(grid2d.positions[i] - grid2d.positions[j], axis=1))
    assert np.all(grid2d.stiffness == pytest.approx(1 / 100))
    assert grid2d.damping == pytest.approx(0.2)
    for a, nbrs in enumerate(grid2d.neighbors):
        for b in nbrs:
            assert a in grid2d.neighbors[b]


def test_points_cover_only_masked_cells():
    mask = np.zeros((64, 64), bool)
    mask[20:44, 5:60] = True
    grid = build_control_grid(mask, 8)
    # Each point's cell must overlap the mask: its nearest mask voxel is within half a cell (+ half voxel).
    voxels = np.argwhere(mask)[:, ::-1]
    for p in grid.positions:
        gap = np.max(np.abs(voxels - p), axis=1).min()
        assert gap < 4 + 0.5


def test_grid_errors():
    with pytest.raises(ValueError, match="empty"):
        build_control_grid(np.zeros((10, 10), bool), 4)
    with pytest.raises(ValueError, match="exceeds"):
        build_control_grid(np.ones((10, 10), bool), 20)
    with pytest.raises(ValueError):
        build_control_grid(np.ones((10, 10), bool), 1)


def test_equilibrium_has_no_force(grid2d):
    np.testing.assert_array_equal(spring_forces(grid2d), 0.0)


def test_stretched_pair_by_hand():
    k, delta = 0.5, 0.4
    grid = two_point_grid(delta, k=k)
    np.testing.assert_allclose(spring_force(grid, 0), [k * delta, 0.0], atol=1e-15)
    np.testing.assert_allclose(spring_force(grid, 1), [-k * delta, 0.0], atol=1e-15)


def test_compressed_pair_pushes_apart():
    grid = two_point_grid(-0.5, k=0.2)
    assert spring_force(grid, 0)[0] < 0 < spring_force(grid, 1)[0]


def test_coincident_points_rejected():
    grid = two_point_grid(-3.0)
    with pytest.raises(ValueError, match="coincide"):
        spring_forces(grid)


@settings(max_examples=50)
@given(arrays(np.float64, (25, 2), elements=st.floats(-5, 5)))
def test_internal_forces_cancel(noise):
    grid = build_control_grid(np.ones((100, 100), bool), 25)
    from dataclasses import replace

    moved = replace(grid, positions=grid.positions + noise)
    forces = spring_forces(moved)
    np.testing.assert_allclose(forces.sum(axis=0), 0.0, atol=1e-10)
    for i in (0, 7, 12):
        np.testing.assert_allclose(spring_force(moved, i), forces[i], atol=1e-12)


def test_force_event_validation():
    with pytest.raises(ValueError):
        ForceEvent([3], 1, [1.0])
    with pytest.raises(ValueError):
        ForceEvent([1, 2], 0, [1.0, 1.0])
    with pytest.raises(ValueError):
        ForceEvent([1, 2], 1, [1.0])
    with pytest.raises(ValueError):
        ForceEvent([1, 1], 1, [1.0, 1.0])


def test_sample_force_event_distribution(grid2d):
    rng = np.random.default_rng(3)
    sizes, directions = [], []
    for _ in range(2000):
        event = sample_force_event(rng, grid2d, a_max=4.0, m=10, duration=3, frame=5)
        assert 2 <= len(event.subset) <= 10
        assert len(np.unique(event.subset)) == len(event.subset)
        assert np.all((event.amplitudes >= 2.0) & (event.amplitudes <= 4.0))
        assert event.start_frame == 5 and event.duration == 3
        sizes.append(len(event.subset))
        directions.append(event.direction)
    counts = np.bincount(sizes, minlength=11)[2:]
    assert counts.min() > 150  # ~222 expected per size
    assert set(directions) == {-1, 1}


def test_subset_size_capped_by_grid():
    rng = np.random.default_rng(0)
    grid = two_point_grid(0.0)
    for _ in range(20):
        assert len(sample_force_event(rng, grid, 1.0, m=10).subset) == 2
    single = build_control_grid(np.ones((10, 10), bool), 10)
    with pytest.raises(ValueError):
        sample_force_event(rng, single, 1.0)


def test_event_forces_zero_outside_subset_and_contracting(grid2d):
    event = ForceEvent([0, 6, 12, 18], -1, [1.0, 2.0, 3.0, 4.0])
    forces = event.forces(grid2d.positions)
    outside = np.setdiff1d(np.arange(grid2d.n_points), event.subset)
    np.testing.assert_array_equal(forces[outside], 0.0)
    selected = grid2d.positions[event.subset]
    radial = selected - selected.mean(axis=0)
    dots = np.sum(forces[event.subset] * radial, axis=1)
    nonzero = np.linalg.norm(radial, axis=1) > 0
    assert np.all(dots[nonzero] < 0)
    np.testing.assert_allclose(np.linalg.norm(forces[event.subset][nonzero], axis=1), event.amplitudes[nonzero])


def test_elongation_points_outward(grid2d):
    event = ForceEvent([0, 24], 1, [1.0, 1.0])
    forces = event.forces(grid2d.positions)
    radial = grid2d.positions[[0, 24]] - grid2d.positions[[0, 24]].mean(axis=0)
    assert np.all(np.sum(forces[[0, 24]] * radial, axis=1) > 0)


def test_overlapping_events_add(grid2d):
    a = ForceEvent([0, 1], -1, [1.0, 1.0])
    b = ForceEvent([1, 2], 1, [2.0, 2.0])
    np.testing.assert_allclose(event_forces(grid2d, [a, b]), a.forces(grid2d.positions) + b.forces(grid2d.positions))


def test_equilibrium_fixed_point(grid2d):
    stepped = step_spring_system(grid2d, [], 1.0)
    np.testing.assert_array_equal(stepped.positions, grid2d.positions)
    np.testing.assert_array_equal(stepped.velocities, 0.0)


def test_contraction_moves_pair_together(grid2d):
    event = ForceEvent([6, 8], -1, [1.0, 1.0], start_frame=0, duration=3)
    grid = grid2d
    gap0 = np.linalg.norm(grid.positions[6] - grid.positions[8])
    gaps = []
    for t in range(3):
        grid = step_spring_system(grid, [event] if event.is_active(t) else [], 1.0)
        gaps.append(np.linalg.norm(grid.positions[6] - grid.positions[8]))
    assert gaps[0] < gap0 and np.all(np.diff(gaps) < 0)


def test_kinetic_energy_relaxes_after_events(grid2d):
    rng = np.random.default_rng(11)
    grid = grid2d
    events = [sample_force_event(rng, grid, 4.0, 10, 3, frame=t) for t in range(0, 9, 2)]
    last = max(e.start_frame + e.duration for e in events)
    peak = 0.0
    t = 0
    for t in range(last):
        grid = step_spring_system(grid, [e for e in events if e.is_active(t)], 1.0)
    peak = grid.kinetic_energy()
    for t in range(last, last + 50):
        grid = step_spring_system(grid, [], 1.0)
        peak = max(peak, grid.kinetic_energy())
    assert grid.kinetic_energy() < 0.01 * peak


def test_spring_motion_is_deterministic():
    def run(seed):
        motion = SpringMotion(build_control_grid(np.ones((64, 64), bool), 8), a_max=4, p_event=0.5)
        rng = np.random.default_rng(seed)
        for t in range(1, 30):
            motion.step(rng, t)
        return motion.grid.positions

    np.testing.assert_array_equal(run(5), run(5))
    assert not np.array_equal(run(5), run(6))


def test_spring_motion_drops_finished_events():
    motion = SpringMotion(build_control_grid(np.ones((64, 64), bool), 8), a_max=1, p_event=1.0, duration=2)
    rng = np.random.default_rng(0)
    for t in range(1, 10):
        motion.step(rng, t)
        assert all(e.start_frame + e.duration > t + 1 for e in motion.events)
        assert len(motion.events) <= 2
