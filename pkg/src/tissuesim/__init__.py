"""Synthetic fluorescence time-lapse of particles in deforming tissue, with ground truth."""
__version__ = "0.1.0"

from .config import SimulationConfig, preset
from .dynamics import OscillatorState, calibrate_force_std, critical_params, oscillator_step
from .evaluation import HotaScores, NearestNeighborTracker, TrackSet, hota, match_frame
from .motion import FlowField, ThinPlateSpline, build_control_grid
from .pipeline import Simulation, evaluate, generate, simulate_tracks

__all__ = [
    "FlowField",
    "HotaScores",
    "NearestNeighborTracker",
    "OscillatorState",
    "Simulation",
    "SimulationConfig",
    "ThinPlateSpline",
    "TrackSet",
    "build_control_grid",
    "calibrate_force_std",
    "critical_params",
    "evaluate",
    "generate",
    "hota",
    "match_frame",
    "oscillator_step",
    "preset",
    "simulate_tracks",
]
