"""Frame-by-frame orchestration: motion, scene, ground truth, rendering, export."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import METADATA_SECTION, OUTPUT_FIELDS, SimulationConfig
from .evaluation import HotaScores, TrackSet, hota
from .io import TrackWriter, read_image, read_tracks, write_pgm, write_raw, write_sidecar
from .motion.flow import contraction_flow, read_flow, write_flow
from .motion.springs import SpringMotion, build_control_grid
from .motion.tps import fit_tps
from .render import NoiseParams, background_gain, mix, quantize_u16, render_profiles, shot_noise
from .scene import init_scene, load_mask, sample_ellipse_mask, step_scene
from .seeding import stream

__all__ = ["GenerationResult", "Simulation", "generate", "simulate_tracks", "evaluate", "make_flow", "FRAME_PATTERN"]

log = logging.getLogger(__name__)

FRAME_PATTERN = "frames/frame_{:05d}.raw"
PGM_PATTERN = "frames/frame_{:05d}.pgm"


@dataclass
class GenerationResult:
    out_dir: Path
    tracks: TrackSet
    manifest: Path
    tracks_path: Path
    elapsed: float


class Simulation:
    """Stateful frame generator for one configuration and seed.

    Iterating yields, per frame, the scene (after motion) and the quantised
    noisy image. Random draws come from streams keyed on
    ``(seed, subsystem, frame)``.

    Parameters
    ----------
    config : SimulationConfig
    intensity_hook : callable, optional
        ``hook(frame, weights) -> weights`` to modulate particle intensities
        before rendering. Weights are clipped to [0, 1].
    """

    def __init__(self, config: SimulationConfig, intensity_hook=None):
        self.config = config.resolved()
        self.intensity_hook = intensity_hook
        cfg = self.config
        self.motion = None
        self.flows = None
        if cfg.motion == "flow":
            if cfg.flow_path is None:
                raise ValueError("flow motion needs a flow file (motion.flow_path)")
            self.flows = read_flow(cfg.flow_path)
            if self.flows and self.flows[0].dims != cfg.dims:
                raise ValueError(f"flow grid {self.flows[0].dims} does not match image dims {cfg.dims}")
            if len(self.flows) < cfg.frames - 1:
                raise ValueError(f"flow file has {len(self.flows)} frames, {cfg.frames - 1} needed")
        self.mask = self._build_mask()
        self.scene = init_scene(cfg, stream(cfg.seed, "scene", 0), self.mask)
        if cfg.motion == "springs":
            grid = build_control_grid(self.mask, cfg.spacing, cfg.tau)
            self.motion = SpringMotion(
                grid, a_max=cfg.a_max, p_event=cfg.p_event, duration=cfg.event_duration, m=cfg.max_event_points
            )
        self.gain = background_gain(render_profiles(self.scene.background, cfg.dims, cfg.truncation))
        self.noise = NoiseParams(cfg.alpha, cfg.delta, self.gain)
        self.frame = 0

    def _build_mask(self):
        cfg = self.config
        if cfg.mask == "file":
            mask = load_mask(read_image(cfg.mask_path), cfg.mask_threshold)
            if mask.dims != cfg.dims:
                raise ValueError(f"mask dims {mask.dims} do not match image dims {cfg.dims}")
            return mask
        return sample_ellipse_mask(cfg.dims, cfg.coverage, stream(cfg.seed, "mask"))

    def advance(self) -> None:
        """Move the scene to the next frame."""
        cfg = self.config
        self.frame += 1
        t = self.frame
        if self.motion is not None:
            grid = self.motion.step(stream(cfg.seed, "motion", t), t)
            deformation = fit_tps(grid.initial_positions, grid.positions)
        else:
            deformation = self.flows[t - 1]
        self.scene = step_scene(self.scene, deformation, 1.0, stream(cfg.seed, "scene", t))

    def particle_weights(self) -> np.ndarray:
        weights = self.scene.particles.weights
        if self.intensity_hook is not None:
            weights = np.clip(np.asarray(self.intensity_hook(self.frame, weights.copy()), dtype=float), 0.0, 1.0)
        return weights

    def render(self) -> tuple[np.ndarray, np.ndarray]:
        """Noise-free mixed image and quantised noisy image of the current frame."""
        cfg = self.config
        particles = replace(self.scene.particles, weights=self.particle_weights())
        clean = mix(
            render_profiles(particles, cfg.dims, cfg.truncation),
            render_profiles(self.scene.background, cfg.dims, cfg.truncation),
            self.noise,
        )
        noisy = shot_noise(clean, cfg.delta, stream(cfg.seed, "noise", self.frame))
        return clean, quantize_u16(noisy)

    def __iter__(self):
        for t in range(self.config.frames):
            if t > 0:
                self.advance()
            yield self.scene, self.render()[1]

    def run_tracks(self) -> TrackSet:
        """Ground-truth particle tracks without rendering any image."""
        cfg = self.config
        positions = np.empty((cfg.frames, cfg.particles, cfg.ndim))
        positions[0] = self.scene.particles.positions
        for t in range(1, cfg.frames):
            self.advance()
            positions[t] = self.scene.particles.positions
        return TrackSet.from_positions(positions)


def simulate_tracks(config: SimulationConfig, seed: int | None = None) -> TrackSet:
    """Same trajectories as `generate` for this config and seed, without images."""
    if seed is not None:
        config = replace(config, seed=int(seed))
    return Simulation(config).run_tracks()


def _manifest_text(config: SimulationConfig) -> str:
    meta = (
        f"[{METADATA_SECTION}]\n"
        f"version = {__version__}\n"
        f"config_sha256 = {config.digest()}\n"
        f"seed = {config.seed}\n\n"
    )
    return meta + config.to_ini(skip=OUTPUT_FIELDS)


def generate(config: SimulationConfig, seed: int | None = None, out=None, intensity_hook=None) -> GenerationResult:
    """Simulate a sequence and write images, ground truth and a manifest to disk.

    Layout of the output directory::

        frames/frame_NNNNN.raw   16-bit little-endian frames (x fastest)
        frames/frame_NNNNN.pgm   same frames as PGM (2D, optional)
        images.txt               sidecar: dims, frames, bit depth
        tracks.csv               ground truth
        manifest.txt             resolved config, seed and version
    """
    start = time.perf_counter()
    if seed is not None:
        config = replace(config, seed=int(seed))
    if out is not None:
        config = replace(config, out=str(out))
    sim = Simulation(config, intensity_hook)
    cfg = sim.config
    out_dir = Path(cfg.out)
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)
    tracks_path = out_dir / "tracks.csv"
    d = cfg.ndim
    positions = np.empty((cfg.frames, cfg.particles, d))

    with TrackWriter(tracks_path, d) as writer:
        for t, (scene, image) in enumerate(sim):
            p = scene.particles
            positions[t] = p.positions
            writer.write_frame(t, np.arange(len(p)), p.positions, sim.particle_weights(), p.sizes, p.angles)
            write_raw(out_dir / FRAME_PATTERN.format(t), image)
            if cfg.write_pgm and d == 2:
                write_pgm(out_dir / PGM_PATTERN.format(t), image)
            log.debug("frame %d written", t)

    write_sidecar(out_dir / "images.txt", cfg.dims, cfg.frames, FRAME_PATTERN)
    manifest = out_dir / "manifest.txt"
    manifest.write_text(_manifest_text(cfg), encoding="utf-8")
    elapsed = time.perf_counter() - start
    log.info("generated %d frames in %.1f s into %s", cfg.frames, elapsed, out_dir)
    return GenerationResult(out_dir, TrackSet.from_positions(positions), manifest, tracks_path, elapsed)


def evaluate(gt_path, pred_path, eta: float = 2.0, out=None) -> HotaScores:
    """Score predicted tracks against ground truth; optionally write a JSON record."""
    if not eta > 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    gt = read_tracks(gt_path)
    pred = read_tracks(pred_path, frame_count=gt.frame_count)
    scores = hota(gt, pred, eta)
    if out is not None:
        record = {"gt": str(gt_path), "pred": str(pred_path), "eta": eta, **scores.as_dict()}
        Path(out).write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    return scores


def make_flow(dims, frames: int, out, rate: float = 0.004, center=None) -> Path:
    """Write a synthetic contraction flow usable by the ``hydra-flow`` preset."""
    write_flow(out, contraction_flow(dims, frames, rate, center))
    return Path(out)
