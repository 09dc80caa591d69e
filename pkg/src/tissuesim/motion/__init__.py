"""Tissue deformation: spring lattice, thin plate splines and ingested flow."""
from .flow import FlowField, advect_with_flow, contraction_flow, read_flow, write_flow
from .springs import (
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
from .tps import ThinPlateSpline, TpsWarp, apply_tps, fit_tps, tps_kernel

__all__ = [
    "ControlGrid",
    "FlowField",
    "ForceEvent",
    "SpringMotion",
    "ThinPlateSpline",
    "TpsWarp",
    "advect_with_flow",
    "apply_tps",
    "build_control_grid",
    "contraction_flow",
    "event_forces",
    "fit_tps",
    "read_flow",
    "sample_force_event",
    "spring_force",
    "spring_forces",
    "step_spring_system",
    "tps_kernel",
    "write_flow",
]
