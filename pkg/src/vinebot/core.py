"""Growth and inversion force balances for an everting body, plus calibration.

The propulsive force of a pressurised everting tube is ``C * P * A``. Growth
needs it to cover the eversion resistance, the tail tension and any load;
inversion happens when the tail tension beats half the pressure force plus the
inversion resistance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import DEFAULT_C, G


class CalibrationError(ValueError):
    """Calibration data cannot identify the geometric factor and eversion force."""


@dataclass(frozen=True)
class VineBodySpec:
    """Everting tube geometry and material resistances.

    Parameters
    ----------
    diameter : float
        Inflated body diameter in m.
    geometric_factor_C : float
        Ratio between ``P * A`` and the propulsive force, in (0, 1].
    f_eversion, f_inversion : float
        Material resistances to eversion and inversion in N.
    """

    diameter: float
    geometric_factor_C: float = DEFAULT_C
    f_eversion: float = 0.0
    f_inversion: float = 0.0

    def __post_init__(self):
        if not self.diameter > 0:
            raise ValueError(f"diameter must be > 0, got {self.diameter}")
        if not 0 < self.geometric_factor_C <= 1:
            raise ValueError(f"geometric_factor_C must be in (0, 1], got {self.geometric_factor_C}")
        if self.f_eversion < 0 or self.f_inversion < 0:
            raise ValueError("eversion/inversion resistances must be >= 0")

    @property
    def area(self) -> float:
        return cross_section_area(self)


@dataclass(frozen=True)
class LoadState:
    """Axial resistive forces acting on the body at one instant (all in N).

    ``w_axial`` and ``f_mount_ext`` only matter when a tip mount is installed.
    """

    t_tail: float = 0.0
    f_load: float = 0.0
    w_axial: float = 0.0
    f_mount_ext: float = 0.0

    def __post_init__(self):
        for name in ("t_tail", "f_load", "w_axial", "f_mount_ext"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class CalibrationTrial:
    applied_load: float
    observed_growth_pressure: float

    def __post_init__(self):
        if not self.observed_growth_pressure > 0:
            raise ValueError("observed_growth_pressure must be > 0")


@dataclass(frozen=True)
class CalibrationResult:
    geometric_factor_C: float
    f_eversion: float
    rms_residual: float

    def to_dict(self) -> dict:
        return {
            "C": self.geometric_factor_C,
            "f_eversion_N": self.f_eversion,
            "rms_residual_Pa": self.rms_residual,
        }


def tail_weight(mass: float) -> float:
    """Tension from a hanging tail of ``mass`` kg during vertical growth."""
    return mass * G


def cross_section_area(body: VineBodySpec) -> float:
    return math.pi * (body.diameter / 2.0) ** 2


def min_growth_pressure(body: VineBodySpec, load: LoadState) -> float:
    """Lowest internal pressure (Pa) at which the body grows with no tip mount."""
    resist = body.f_eversion + load.t_tail + load.f_load
    return resist / (body.geometric_factor_C * body.area)


def growth_occurs(body: VineBodySpec, pressure: float, load: LoadState) -> bool:
    # Compared in pressure space so the boundary case is exact.
    return pressure >= min_growth_pressure(body, load)


def inversion_occurs(body: VineBodySpec, pressure: float, t_tail: float) -> bool:
    return t_tail >= 0.5 * pressure * body.area + body.f_inversion


def fit_calibration(trials: Sequence[CalibrationTrial], area: float) -> CalibrationResult:
    """Fit ``C`` and ``F_eversion`` to growth-pressure-vs-load trials.

    The model ``P = (F_eversion + load) / (C * A)`` is affine in the load, so
    an ordinary least-squares line through ``(load, P * A)`` gives
    ``slope = 1 / C`` and ``intercept = F_eversion / C``. Because ``A`` is a
    constant factor this also minimises the squared pressure residuals.

    If the unconstrained intercept is negative the fit is redone with the
    intercept pinned at zero, which is the constrained optimum for
    ``F_eversion >= 0``.

    Raises
    ------
    CalibrationError
        Fewer than two trials, a single distinct load, or a fit implying
        ``C`` outside (0, 1].
    """
    if area <= 0:
        raise ValueError("area must be > 0")
    if len(trials) < 2:
        raise CalibrationError("need at least two trials")
    loads = np.array([t.applied_load for t in trials], dtype=float)
    pressures = np.array([t.observed_growth_pressure for t in trials], dtype=float)
    if np.ptp(loads) == 0:
        raise CalibrationError("all trials share one load; C and F_eversion are not identifiable")

    y = pressures * area
    design = np.column_stack([loads, np.ones_like(loads)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    if intercept < 0:
        slope = float(loads @ y / (loads @ loads))
        intercept = 0.0
    if slope <= 0:
        raise CalibrationError(f"pressure does not increase with load (slope {slope:.4g})")

    C = 1.0 / slope
    if C > 1.0:
        raise CalibrationError(f"fitted C = {C:.4g} is outside (0, 1]")
    f_ev = intercept / slope
    predicted = (slope * loads + intercept) / area
    rms = float(np.sqrt(np.mean((pressures - predicted) ** 2)))
    return CalibrationResult(float(C), float(f_ev), rms)


def synthetic_trials(
    C: float,
    f_eversion: float,
    area: float,
    loads: Sequence[float],
    repeats: int = 1,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> list[CalibrationTrial]:
    """Trials generated by the growth model with multiplicative Gaussian noise."""
    loads = np.repeat(np.asarray(loads, dtype=float), repeats)
    p = (f_eversion + loads) / (C * area)
    if noise > 0:
        if rng is None:
            rng = np.random.default_rng()
        p = p * (1.0 + noise * rng.standard_normal(p.size))
    return [CalibrationTrial(float(l), float(q)) for l, q in zip(loads, p)]
