"""Dense displacement fields and the SINFLO1 flow file format.

A flow file holds a sequence of per-frame displacement fields::

    b"SINFLO1"                  7-byte magic
    u8  d                       2 or 3
    u32 size[d]                 grid sizes, x first
    u32 T                       number of frames
    f32 data[T, ..., d]         frame-major, x fastest, component last

All integers and floats are little-endian. Displacements are in pixels per
frame with components ordered (x, y[, z]).
"""
from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._validation import check_dims, check_points

__all__ = [
    "FlowField",
    "advect_with_flow",
    "read_flow",
    "write_flow",
    "contraction_flow",
    "MAGIC",
]

MAGIC = b"SINFLO1"


@dataclass(frozen=True)
class FlowField:
    """One frame of displacement, array shape ``(*dims[::-1], d)``."""

    displacement: np.ndarray

    def __post_init__(self):
        disp = np.asarray(self.displacement, dtype=float)
        if disp.ndim not in (3, 4) or disp.shape[-1] != disp.ndim - 1:
            raise ValueError(f"displacement must have shape (*grid, d) with d = grid ndim, got {disp.shape}")
        object.__setattr__(self, "displacement", disp)

    @property
    def ndim(self) -> int:
        return self.displacement.shape[-1]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.displacement.shape[:-1][::-1])

    @classmethod
    def constant(cls, dims, vector) -> "FlowField":
        dims = check_dims(dims)
        disp = np.broadcast_to(np.asarray(vector, dtype=float), (*dims[::-1], len(dims)))
        return cls(disp.copy())

    def sample(self, points) -> np.ndarray:
        """Multilinear interpolation of the displacement at `points` (x, y[, z]).

        Points outside the grid are clamped to its boundary.
        """
        points = check_points(points, self.ndim)
        sizes = np.array(self.dims, dtype=float)
        clamped = np.clip(points, 0.0, sizes - 1.0)
        base = np.minimum(np.floor(clamped).astype(np.intp), np.array(self.dims) - 2)
        base = np.maximum(base, 0)
        frac = clamped - base
        out = np.zeros_like(points)
        for corner in itertools.product((0, 1), repeat=self.ndim):
            corner = np.array(corner)
            idx = np.minimum(base + corner, np.array(self.dims) - 1)
            weight = np.prod(np.where(corner == 1, frac, 1.0 - frac), axis=1)
            # Array axes are reversed with respect to (x, y[, z]).
            values = self.displacement[tuple(idx[:, a] for a in reversed(range(self.ndim)))]
            out += weight[:, None] * values
        return out


def advect_with_flow(flow: FlowField, points) -> np.ndarray:
    """Move each point by the flow sampled at its current position."""
    points = check_points(points, flow.ndim)
    return points + flow.sample(points)


def write_flow(path, flows) -> None:
    """Write a sequence of `FlowField` (or an array ``(T, *grid, d)``)."""
    if isinstance(flows, np.ndarray):
        data = flows
    else:
        data = np.stack([f.displacement if isinstance(f, FlowField) else np.asarray(f) for f in flows])
    if data.ndim not in (4, 5) or data.shape[-1] != data.ndim - 2:
        raise ValueError(f"flow data must have shape (T, *grid, d), got {data.shape}")
    d = data.shape[-1]
    sizes = data.shape[1:-1][::-1]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", d))
        fh.write(struct.pack(f"<{d}I", *sizes))
        fh.write(struct.pack("<I", data.shape[0]))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_flow(path) -> list[FlowField]:
    """Read a SINFLO1 file into a list of per-frame `FlowField`."""
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a SINFLO1 flow file")
    pos = len(MAGIC)
    (d,) = struct.unpack_from("<B", raw, pos)
    pos += 1
    if d not in (2, 3):
        raise ValueError(f"{path}: unsupported dimensionality {d}")
    sizes = struct.unpack_from(f"<{d}I", raw, pos)
    pos += 4 * d
    (frames,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    shape = (frames, *sizes[::-1], d)
    expected = int(np.prod(shape)) * 4
    if len(raw) - pos != expected:
        raise ValueError(f"{path}: expected {expected} bytes of flow data, found {len(raw) - pos}")
    data = np.frombuffer(raw, dtype="<f4", offset=pos).reshape(shape).astype(float)
    return [FlowField(frame) for frame in data]


def contraction_flow(dims, frames: int, rate: float = 0.004, center=None) -> np.ndarray:
    """Synthetic global contraction toward `center`.

    The contraction rate ramps as ``rate * sin(pi * t / frames)**2``, so the
    motion starts and ends smoothly. Returns an array ``(frames, *grid, d)``.
    """
    dims = check_dims(dims)
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    center = np.array([(s - 1) / 2 for s in dims] if center is None else center, dtype=float)
    coords = np.meshgrid(*(np.arange(s, dtype=float) for s in dims), indexing="ij")
    # Stack to (*grid_xyz, d) then transpose spatial axes to array order.
    offset = np.stack([c - c0 for c, c0 in zip(coords, center)], axis=-1)
    offset = np.transpose(offset, (*reversed(range(len(dims))), len(dims)))
    ramp = rate * np.sin(np.pi * np.arange(frames) / frames) ** 2
    return -ramp.reshape(-1, *([1] * (len(dims) + 1))) * offset[None]
