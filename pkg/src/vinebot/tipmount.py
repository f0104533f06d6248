"""Enclosed tip mounts: coupling friction, slip and pull-forward conditions.

Two designs are modelled. A constant force mount grips the tail with a fixed
maximum friction. A passively adapting mount is a spring-closed scissor clamp;
the everting tip pushes on each arm (forces ``F_va``, ``F_vb``) and opens the
clamp, so its maximum coupling friction drops as the tip presses harder.

Sign conventions follow the force balances: ``f_load`` is the payload/tether
resistance, ``w_axial`` the axial weight of the mount and ``f_mount`` the
friction on the mount's exterior. All are non-negative magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .constants import BISECTION_MAX_ITER, BISECTION_TOL_N, G
from .core import LoadState, VineBodySpec, min_growth_pressure


class MountLeftBehind(ValueError):
    """The mount's coupling cannot drag the load forward; it would be left behind."""


class UnsatisfiableEquilibrium(ValueError):
    """No finite tip contact makes the adaptive mount slip."""


@dataclass(frozen=True)
class ConstantForceMount:
    f_coupling_max: float
    mass: float = 0.0
    f_mount_ext: float = 0.0

    kind = "constant"

    def __post_init__(self):
        if not self.f_coupling_max > 0:
            raise ValueError("f_coupling_max must be > 0")
        if self.mass < 0 or self.f_mount_ext < 0:
            raise ValueError("mass and f_mount_ext must be >= 0")

    def zero_contact_coupling(self) -> float:
        return self.f_coupling_max


@dataclass(frozen=True)
class AdaptiveMount:
    """Spring-closed scissor clamp whose grip relaxes under tip contact.

    The lever lengths are the perpendicular moment arms about the pivot of the
    spring force (``lever_ns``, ``lever_nm``) and of the tip contact forces
    (``lever_na``, ``lever_nb``) on arms A and B. ``arm_d`` and ``arm_w`` are
    the moment arms of the clamp's normal and friction forces.
    """

    spring_force_fs: float
    mu_s: float = 1.0
    arm_d: float = 0.010
    arm_w: float = 0.004
    lever_ns: float = 0.030
    lever_na: float = 0.050
    lever_nm: float = 0.030
    lever_nb: float = 0.050
    contact_angle: float = math.pi / 6
    mass: float = 0.0
    f_mount_ext: float = 0.0

    kind = "adaptive"

    def __post_init__(self):
        if not self.spring_force_fs > 0:
            raise ValueError("spring_force_fs must be > 0")
        if not self.mu_s > 0:
            raise ValueError("mu_s must be > 0")
        if not self.arm_d > self.mu_s * self.arm_w:
            raise ValueError("arm_d must exceed mu_s * arm_w so both effective arms are positive")
        if self.arm_w <= 0:
            raise ValueError("arm_w must be > 0")
        for name in ("lever_ns", "lever_na", "lever_nm", "lever_nb"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.contact_angle < math.pi / 2:
            raise ValueError("contact_angle must be in (0, pi/2)")
        if self.mass < 0 or self.f_mount_ext < 0:
            raise ValueError("mass and f_mount_ext must be >= 0")

    @property
    def arm_a_effective(self) -> float:
        return self.arm_d / self.mu_s - self.arm_w

    @property
    def arm_b_effective(self) -> float:
        return self.arm_d / self.mu_s + self.arm_w

    @classmethod
    def tuned_to(cls, target_n: float, **geometry) -> "AdaptiveMount":
        """Mount whose zero-contact coupling friction equals ``target_n``.

        The spring force is solved from the moment balances at zero contact;
        any other field may be passed through ``geometry``.
        """
        if not target_n > 0:
            raise ValueError("target coupling must be > 0")
        probe = cls(spring_force_fs=1.0, **geometry)
        per_newton = probe.lever_ns / probe.arm_a_effective + probe.lever_nm / probe.arm_b_effective
        return cls(spring_force_fs=target_n / per_newton, **geometry)

    def zero_contact_coupling(self) -> float:
        return adaptive_coupling_friction(self, 0.0, 0.0)


Mount = Union[ConstantForceMount, AdaptiveMount]


@dataclass(frozen=True)
class InteractionModel:
    """Propulsion force lost to pushing the mount off the tip: ``offset + gain * F``."""

    gain: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.gain < 0 or self.offset < 0:
            raise ValueError("gain and offset must be >= 0")

    def __call__(self, total_axial_contact: float) -> float:
        return interaction_loss(self, total_axial_contact)


@dataclass(frozen=True)
class MountEquilibrium:
    f_va: float
    f_vb: float
    f_coupling: float
    converged: bool
    residual: float
    f_arm_a: float = 0.0
    f_arm_b: float = 0.0
    axial_contact: float = 0.0


def mount_weight(mount: Mount, elevation: float = math.pi / 2) -> float:
    """Axial weight of the mount when the growth axis is raised by ``elevation`` rad."""
    return max(0.0, mount.mass * G * math.sin(elevation))


def ideal_coupling_friction(f_load: float, w_axial: float, f_mount_ext: float) -> float:
    return max(0.0, f_load + w_axial - f_mount_ext)


def can_pull_forward(mount: Mount, f_load: float, w_axial: float, f_mount: float | None = None) -> bool:
    if f_mount is None:
        f_mount = mount.f_mount_ext
    return mount.zero_contact_coupling() >= f_load + w_axial + f_mount


def constant_required_fva(
    mount: ConstantForceMount, f_load: float, w_axial: float, f_mount: float | None = None
) -> float:
    """Smallest axial tip push that makes a constant force mount slip."""
    if f_mount is None:
        f_mount = mount.f_mount_ext
    return max(0.0, mount.f_coupling_max - f_load - w_axial + f_mount)


def _arm_frictions(mount: AdaptiveMount, f_va: float, f_vb: float) -> tuple[float, float]:
    fs = mount.spring_force_fs
    fa = (mount.lever_ns * fs - mount.lever_na * f_va) / mount.arm_a_effective
    fb = (mount.lever_nm * fs - mount.lever_nb * f_vb) / mount.arm_b_effective
    return max(0.0, fa), max(0.0, fb)


def adaptive_coupling_friction(mount: AdaptiveMount, f_va: float, f_vb: float) -> float:
    """Maximum clamp friction of the adaptive mount under tip contact forces.

    Each arm's moment balance about the pivot gives that arm's friction; an
    arm whose balance would need negative friction has opened and contributes
    nothing. The clamp total is the sum over both arms.
    """
    if f_va < 0 or f_vb < 0:
        raise ValueError("contact forces must be >= 0")
    fa, fb = _arm_frictions(mount, f_va, f_vb)
    return fa + fb


def _slip_margin(mount: AdaptiveMount, x: float, drive: float) -> float:
    # drive = f_load + W - f_mount
    return 2.0 * x * math.cos(mount.contact_angle) + drive - adaptive_coupling_friction(mount, x, x)


def adaptive_equilibrium(
    mount: AdaptiveMount,
    f_load: float,
    w_axial: float,
    f_mount: float | None = None,
    tol: float = BISECTION_TOL_N,
    max_iter: int = BISECTION_MAX_ITER,
) -> MountEquilibrium:
    """Smallest symmetric tip contact that pushes the adaptive mount off the tip.

    With ``F_va = F_vb = x`` the slip margin
    ``2 x cos(angle) + f_load + W - f_mount - f_coupling_max(x, x)`` is
    strictly increasing in ``x``, so bisection finds its root. The bracket
    runs from zero to the larger of the force that fully opens both arms and
    the force that overcomes ``f_mount`` with the clamp open.

    Raises
    ------
    UnsatisfiableEquilibrium
        If no finite contact force satisfies the slip condition.
    """
    if f_mount is None:
        f_mount = mount.f_mount_ext
    if min(f_load, w_axial, f_mount) < 0:
        raise ValueError("loads must be >= 0")
    drive = f_load + w_axial - f_mount
    cos_a = math.cos(mount.contact_angle)

    def result(x, converged, residual):
        fa, fb = _arm_frictions(mount, x, x)
        return MountEquilibrium(x, x, fa + fb, converged, residual, fa, fb, 2.0 * x * cos_a)

    m0 = _slip_margin(mount, 0.0, drive)
    if m0 >= 0:
        return result(0.0, True, 0.0)

    fs = mount.spring_force_fs
    x_open = max(mount.lever_ns * fs / mount.lever_na, mount.lever_nm * fs / mount.lever_nb)
    # Past x_open the clamp grips nothing and the tip pushes the mount bodily.
    x_upper = max(x_open, -drive / (2.0 * cos_a))
    m_hi = _slip_margin(mount, x_upper, drive)
    for _ in range(64):
        if m_hi >= 0:
            break
        x_upper *= 2.0
        m_hi = _slip_margin(mount, x_upper, drive)
    if not (m_hi >= 0 and math.isfinite(x_upper)):
        raise UnsatisfiableEquilibrium(f"no contact force up to {x_upper:.4g} N satisfies slip")
    if m_hi == 0:
        return result(x_upper, True, 0.0)

    lo, hi = 0.0, x_upper
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        m_mid = _slip_margin(mount, mid, drive)
        if m_mid >= 0:
            hi, m_hi = mid, m_mid
        else:
            lo = mid
        # keep halving to the float limit; tol only decides convergence
        if m_hi == 0 or hi - lo <= 4 * math.ulp(hi):
            break
    return result(hi, m_hi < tol, m_hi)


def equilibrium_residuals(
    mount: AdaptiveMount, eq: MountEquilibrium, f_load: float, w_axial: float, f_mount: float | None = None
) -> tuple[float, float, float]:
    """Back-substitute an equilibrium into both arm balances and the slip condition.

    Returns absolute residuals in N for arm A, arm B and slip. An arm that has
    released (zero friction) is checked as the inequality it becomes; a
    contact-free equilibrium only has to satisfy slip as an inequality.
    """
    if f_mount is None:
        f_mount = mount.f_mount_ext
    fs = mount.spring_force_fs

    def arm_res(lever_s, lever_v, force, arm, friction):
        # residual expressed as a force on the clamp-friction scale
        free = (lever_s * fs - lever_v * force) / arm
        if friction > 0:
            return abs(free - friction)
        return max(0.0, free)

    ra = arm_res(mount.lever_ns, mount.lever_na, eq.f_va, mount.arm_a_effective, eq.f_arm_a)
    rb = arm_res(mount.lever_nm, mount.lever_nb, eq.f_vb, mount.arm_b_effective, eq.f_arm_b)
    margin = (
        (eq.f_va + eq.f_vb) * math.cos(mount.contact_angle)
        + f_load
        + w_axial
        - f_mount
        - (eq.f_arm_a + eq.f_arm_b)
    )
    rs = max(0.0, -margin) if eq.f_va == 0 and eq.f_vb == 0 else abs(margin)
    return ra, rb, rs


def interaction_loss(model: InteractionModel, total_axial_contact: float) -> float:
    if total_axial_contact < 0:
        raise ValueError("total_axial_contact must be >= 0")
    return model.offset + model.gain * total_axial_contact


def required_contact(mount: Mount, f_load: float, w_axial: float, f_mount: float | None = None) -> float:
    """Total axial force the tip must exert on the mount for growth to proceed."""
    if isinstance(mount, ConstantForceMount):
        return constant_required_fva(mount, f_load, w_axial, f_mount)
    return adaptive_equilibrium(mount, f_load, w_axial, f_mount).axial_contact


def growth_pressure_with_mount(
    body: VineBodySpec, mount: Mount, model: InteractionModel, load: LoadState
) -> float:
    """Pressure (Pa) needed to grow while dragging a tip mount.

    The resistive sum is eversion, tail tension, load, mount weight, mount
    exterior friction and the interaction loss of the contact force needed to
    push the mount off the tip. It is divided by ``C * A`` of the body, which
    is the usual half-area form when ``C = 0.5``.

    Raises
    ------
    MountLeftBehind
        If the mount's coupling cannot drag ``f_load + W + f_mount`` forward.
    """
    if not can_pull_forward(mount, load.f_load, load.w_axial, load.f_mount_ext):
        raise MountLeftBehind(
            f"coupling {mount.zero_contact_coupling():.4g} N < load {load.f_load:.4g} N "
            f"+ W {load.w_axial:.4g} N + f_mount {load.f_mount_ext:.4g} N"
        )
    contact = required_contact(mount, load.f_load, load.w_axial, load.f_mount_ext)
    resist = (
        body.f_eversion
        + load.t_tail
        + load.f_load
        + load.w_axial
        + load.f_mount_ext
        + interaction_loss(model, contact)
    )
    return resist / (body.geometric_factor_C * body.area)


def mount_from_dict(data: dict) -> Mount:
    """Build a mount from its JSON form (``kind`` is ``constant`` or ``adaptive``).

    An adaptive mount may give ``tuned_to_N`` instead of ``spring_force_fs``;
    angles are in degrees under ``contact_angle_deg``.
    """
    data = dict(data)
    kind = data.pop("kind", None)
    if kind == "constant":
        allowed = {"f_coupling_max", "mass", "f_mount_ext"}
        _reject_unknown(data, allowed, kind)
        return ConstantForceMount(**data)
    if kind == "adaptive":
        allowed = {
            "spring_force_fs", "tuned_to_N", "mu_s", "arm_d", "arm_w", "lever_ns", "lever_na",
            "lever_nm", "lever_nb", "contact_angle_deg", "mass", "f_mount_ext",
        }
        _reject_unknown(data, allowed, kind)
        if "contact_angle_deg" in data:
            data["contact_angle"] = math.radians(data.pop("contact_angle_deg"))
        tuned = data.pop("tuned_to_N", None)
        if tuned is not None:
            if "spring_force_fs" in data:
                raise ValueError("give either spring_force_fs or tuned_to_N, not both")
            return AdaptiveMount.tuned_to(tuned, **data)
        return AdaptiveMount(**data)
    raise ValueError(f"mount kind must be 'constant' or 'adaptive', got {kind!r}")


def mount_to_dict(mount: Mount) -> dict:
    if isinstance(mount, ConstantForceMount):
        return {"kind": "constant", "f_coupling_max": mount.f_coupling_max,
                "mass": mount.mass, "f_mount_ext": mount.f_mount_ext}
    return {
        "kind": "adaptive",
        "spring_force_fs": mount.spring_force_fs,
        "mu_s": mount.mu_s,
        "arm_d": mount.arm_d,
        "arm_w": mount.arm_w,
        "lever_ns": mount.lever_ns,
        "lever_na": mount.lever_na,
        "lever_nm": mount.lever_nm,
        "lever_nb": mount.lever_nb,
        "contact_angle_deg": math.degrees(mount.contact_angle),
        "mass": mount.mass,
        "f_mount_ext": mount.f_mount_ext,
    }


def _reject_unknown(data, allowed, kind):
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown keys for {kind} mount: {sorted(unknown)}")


def pressure_sweep(
    body: VineBodySpec,
    mounts: dict,
    model: InteractionModel,
    loads,
    t_tail: float = 0.0,
    w_axial: float = 0.0,
    f_mount: float = 0.0,
) -> list[tuple[float, float, str]]:
    """Growth pressure versus payload for no mount and each mount in ``mounts``.

    Rows are ``(load_N, pressure_Pa, mount_kind)`` with kind ``none`` for the
    payload tied directly to the tail. Loads a mount cannot drag forward are
    left out of that mount's curve.
    """
    rows = []
    for kind, mount in [("none", None), *mounts.items()]:
        for f_load in loads:
            if mount is None:
                p = min_growth_pressure(body, LoadState(t_tail=t_tail, f_load=f_load))
            else:
                state = LoadState(t_tail=t_tail, f_load=f_load, w_axial=w_axial, f_mount_ext=f_mount)
                try:
                    p = growth_pressure_with_mount(body, mount, model, state)
                except MountLeftBehind:
                    continue
            rows.append((float(f_load), p, kind))
    return rows
