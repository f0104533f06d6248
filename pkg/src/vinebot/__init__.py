"""Everting vine robot growth models, in-pipe growth simulation and pipe mapping.

Modules:
- core: growth/inversion force balances and calibration of C and F_eversion
- tipmount: constant force and passively adapting enclosed tip mounts
- mapping: accel/mag orientation, marker segmentation, centerline reconstruction
- pipesim: tail tension through pipes, growth marching, synthetic sensor logs
- io, cli: file formats and the ``vinebot`` command
"""

from .constants import G
from .core import (
    CalibrationError,
    CalibrationResult,
    CalibrationTrial,
    LoadState,
    VineBodySpec,
    cross_section_area,
    fit_calibration,
    growth_occurs,
    inversion_occurs,
    min_growth_pressure,
)
from .mapping import (
    PathSegment,
    Polyline3D,
    SensorLog,
    heading_and_depression,
    path_metrics,
    reconstruct_path,
    segment_path,
    world_rotation,
)
from .pipesim import GrowthTrace, NoiseSpec, PipeSpec, TetherSpec, simulate_growth, synth_logs, tail_tension
from .tipmount import (
    AdaptiveMount,
    ConstantForceMount,
    InteractionModel,
    MountEquilibrium,
    MountLeftBehind,
    adaptive_coupling_friction,
    adaptive_equilibrium,
    can_pull_forward,
    constant_required_fva,
    growth_pressure_with_mount,
    ideal_coupling_friction,
    interaction_loss,
)

__version__ = "0.1.0"
