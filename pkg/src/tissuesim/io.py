"""Track CSV, raw/PGM image frames and image-stack sidecars."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .evaluation import TrackSet

__all__ = [
    "track_header",
    "TrackWriter",
    "write_tracks",
    "read_tracks",
    "TrackFormatError",
    "write_raw",
    "read_raw",
    "write_sidecar",
    "read_sidecar",
    "read_raw_stack",
    "write_pgm",
    "read_pgm",
    "read_image",
]

_AXES = ("x", "y", "z")


class TrackFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def track_header(d: int, attributes: bool = True) -> list[str]:
    """Column names of the track CSV for dimension `d`."""
    cols = ["frame", "track_id", *_AXES[:d]]
    if attributes:
        cols += ["weight", *(f"s{a}" for a in _AXES[:d])]
        cols += ["theta"] if d == 2 else [f"theta_{a}" for a in _AXES]
    return cols


def _fmt(v: float) -> str:
    return f"{v:.6f}"


class TrackWriter:
    """Streams ground-truth rows frame by frame.

    Rows are written in ascending frame order and ascending track id within
    a frame; coordinates use 6 decimal places.
    """

    def __init__(self, path, d: int, attributes: bool = True):
        self.d = d
        self.attributes = attributes
        self._fh = open(path, "w", newline="", encoding="ascii")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(track_header(d, attributes))

    def write_frame(self, frame: int, ids, positions, weights=None, sizes=None, angles=None) -> None:
        order = np.argsort(np.asarray(ids), kind="stable")
        for k in order:
            row = [str(int(frame)), str(int(ids[k])), *(_fmt(v) for v in positions[k])]
            if self.attributes:
                row += [_fmt(weights[k]), *(_fmt(v) for v in sizes[k]), *(_fmt(v) for v in np.atleast_1d(angles[k]))]
            self._writer.writerow(row)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_tracks(path, tracks: TrackSet) -> None:
    """Write positions only (``frame,track_id,x,y[,z]``)."""
    d = tracks.ndim or 2
    with TrackWriter(path, d, attributes=False) as writer:
        for t in range(tracks.frame_count):
            ids, pos = tracks.frame(t)
            writer.write_frame(t, ids, pos)


def read_tracks(path, frame_count: int | None = None) -> TrackSet:
    """Parse a track CSV. Extra columns beyond the coordinates are ignored.

    Without `frame_count` the sequence length is the largest frame + 1.
    """
    tracks: dict[int, dict[int, np.ndarray]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TrackFormatError(path, 1, "empty file") from None
        if header[:2] != ["frame", "track_id"] or header[2:4] != ["x", "y"]:
            raise TrackFormatError(path, 1, f"expected header starting with frame,track_id,x,y, got {','.join(header)}")
        d = 3 if len(header) > 4 and header[4] == "z" else 2
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2 + d:
                raise TrackFormatError(path, line, f"expected at least {2 + d} columns, got {len(row)}")
            try:
                frame = int(row[0])
                tid = int(row[1])
                pos = np.array([float(v) for v in row[2 : 2 + d]])
            except ValueError as exc:
                raise TrackFormatError(path, line, str(exc)) from None
            if frame < 0:
                raise TrackFormatError(path, line, f"negative frame {frame}")
            if frame_count is not None and frame >= frame_count:
                raise TrackFormatError(path, line, f"frame {frame} outside [0, {frame_count})")
            if not np.all(np.isfinite(pos)):
                raise TrackFormatError(path, line, "non-finite coordinate")
            frames = tracks.setdefault(tid, {})
            if frame in frames:
                raise TrackFormatError(path, line, f"track {tid} has two positions in frame {frame}")
            frames[frame] = pos
    if frame_count is None:
        frame_count = 1 + max((t for frames in tracks.values() for t in frames), default=-1)
    return TrackSet(tracks, frame_count)


def write_raw(path, image: np.ndarray) -> None:
    """16-bit little-endian raw dump, x fastest."""
    np.ascontiguousarray(image, dtype="<u2").tofile(path)


def read_raw(path, dims) -> np.ndarray:
    data = np.fromfile(path, dtype="<u2")
    shape = tuple(dims)[::-1]
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} voxels, found {data.size}")
    return data.reshape(shape).astype(np.uint16)


def write_sidecar(path, dims, frames: int, pattern: str) -> None:
    lines = [
        f"dims = {' '.join(str(s) for s in dims)}",
        f"frames = {frames}",
        "bit_depth = 16",
        "byte_order = little",
        "axis_order = x fastest",
        f"pattern = {pattern}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_sidecar(path) -> dict:
    meta = {}
    for raw in Path(path).read_text(encoding="ascii").splitlines():
        if "=" in raw:
            key, _, value = raw.partition("=")
            meta[key.strip()] = value.strip()
    meta["dims"] = tuple(int(s) for s in meta["dims"].split())
    meta["frames"] = int(meta["frames"])
    return meta


def read_raw_stack(sidecar) -> np.ndarray:
    """Load every frame listed by a sidecar, shape ``(T, *dims[::-1])``."""
    sidecar = Path(sidecar)
    meta = read_sidecar(sidecar)
    base = sidecar.parent
    return np.stack([read_raw(base / meta["pattern"].format(t), meta["dims"]) for t in range(meta["frames"])])


def write_pgm(path, image: np.ndarray) -> None:
    """Binary PGM; 16-bit images are stored big-endian as the format requires."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM holds 2D images only")
    if image.dtype == np.uint8:
        maxval, data = 255, image.tobytes()
    else:
        maxval, data = 65535, np.ascontiguousarray(image, dtype=">u2").tobytes()
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + data)


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: only binary (P5) PGM is supported")
    width, height, maxval = (int(t) for t in tokens[1:])
    pos += 1
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    return np.frombuffer(raw, dtype=dtype, offset=pos, count=width * height).reshape(height, width).astype(
        np.uint8 if maxval < 256 else np.uint16
    )


def read_image(path) -> np.ndarray:
    """Grayscale image or stack from ``.pgm``, ``.npy`` or a raw-stack sidecar ``.txt``.

    A sidecar describing a single frame yields that frame; several frames
    are stacked into a 3D volume only when the sidecar dims are 2D.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".npy":
        return np.load(path)
    if suffix == ".txt":
        stack = read_raw_stack(path)
        return stack[0] if len(stack) == 1 or stack.ndim == 4 else stack
    raise ValueError(f"{path}: unsupported image format {suffix!r}")
