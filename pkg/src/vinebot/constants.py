"""Physical constants and documented defaults shared across the package."""

import math

G = 9.80665  # m/s^2, used everywhere a weight is formed from a mass

# Body geometry and calibration values for the 88 mm LDPE body.
BODY_DIAMETER_M = 0.088
DEFAULT_C = 0.5
CALIBRATED_C = 0.503
CALIBRATED_F_EVERSION_N = 2.52
TAIL_TEST_MASS_KG = 0.009  # 25 cm of tail in the vertical growth rig
TAIL_TEST_LENGTH_M = 0.25

# Zero-contact coupling targets used in the mount comparison.
TUNED_COUPLINGS_N = (12.0, 24.0)

# Reference magnetic field: points north with 60 deg inclination (NWU world frame).
MAG_FIELD_STRENGTH = 50.0
MAG_INCLINATION_RAD = math.radians(60.0)

# Degenerate accel/mag separation threshold.
MIN_ACCEL_MAG_ANGLE_RAD = math.radians(1.0)

# Adaptive equilibrium solver.
BISECTION_TOL_N = 1e-9
BISECTION_MAX_ITER = 200


def reference_mag_field(strength=MAG_FIELD_STRENGTH, inclination=MAG_INCLINATION_RAD):
    """World-frame magnetic field vector (north, west, up components)."""
    return (strength * math.cos(inclination), 0.0, -strength * math.sin(inclination))


def defaults_dump():
    """Every physical default used by the library, for ``--show-defaults``."""
    return {
        "g_m_s2": G,
        "body_diameter_m": BODY_DIAMETER_M,
        "default_C": DEFAULT_C,
        "calibrated_C": CALIBRATED_C,
        "calibrated_f_eversion_N": CALIBRATED_F_EVERSION_N,
        "tail_test_mass_kg": TAIL_TEST_MASS_KG,
        "tail_test_length_m": TAIL_TEST_LENGTH_M,
        "tuned_couplings_N": list(TUNED_COUPLINGS_N),
        "mag_field_strength": MAG_FIELD_STRENGTH,
        "mag_inclination_deg": math.degrees(MAG_INCLINATION_RAD),
        "min_accel_mag_angle_deg": math.degrees(MIN_ACCEL_MAG_ANGLE_RAD),
        "bisection_tol_N": BISECTION_TOL_N,
        "bisection_max_iter": BISECTION_MAX_ITER,
    }
