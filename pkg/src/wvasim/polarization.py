"""Two-level polarization algebra: pre/post-selection and weak values.

States are Jones vectors in the (H, V) basis. All angles are radians.
"""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from .constants import SPEED_OF_LIGHT

SMALL_ANGLE_LIMIT = 0.5
DEGENERATE_TOL = 1e-15


class DegenerateWeakValueError(ValueError):
    """Pre- and post-selected states are orthogonal once the delay is applied."""


class Arm(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class PolarizationState:
    h: complex
    v: complex

    def __post_init__(self):
        norm = abs(self.h) ** 2 + abs(self.v) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"Jones vector is not normalized (|h|^2+|v|^2 = {norm!r})")

    def as_array(self):
        return np.array([self.h, self.v], dtype=complex)

    def inner(self, other):
        """Return <self|other>."""
        return self.h.conjugate() * other.h + self.v.conjugate() * other.v


@dataclass(frozen=True)
class WeakValue:
    value: complex
    arm: Arm = Arm.UPPER

    @property
    def real(self):
        return self.value.real


@dataclass(frozen=True)
class DelaySetting:
    tilt_theta: float
    tau: float
    n0: float
    omega: float

    @classmethod
    def from_tilt(cls, theta, n0, omega):
        return cls(tilt_theta=theta, tau=tilt_to_delay(theta, n0, omega), n0=n0, omega=omega)

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("delay must be non-negative")


def angular_frequency(wavelength):
    return 2.0 * math.pi * SPEED_OF_LIGHT / wavelength


def preselect():
    """Initial state sin(pi/4)|H> + cos(pi/4)|V>."""
    return PolarizationState(complex(math.sin(math.pi / 4)), complex(math.cos(math.pi / 4)))


def postselect(beta, tau, omega):
    """Post-selected state for one arm at post-selection angle ``beta``."""
    if abs(beta) > math.pi / 2:
        raise ValueError(f"|beta| must be <= pi/2, got {beta!r}")
    alpha = 3 * math.pi / 4 + beta
    half = 0.5 * omega * tau
    h = complex(math.cos(-half), math.sin(-half)) * math.sin(alpha)
    v = complex(math.cos(half), math.sin(half)) * math.cos(alpha)
    return PolarizationState(h, v)


def overlap(beta, tau, omega):
    """Amplitude <psi_f|psi_i> for one post-selection angle."""
    return postselect(beta, tau, omega).inner(preselect())


def postselection_probability(beta, tau=0.0, omega=0.0):
    """Fraction of pre-selected photons passing the post-selection."""
    return abs(overlap(beta, tau, omega)) ** 2


def weak_value(beta, tau, omega, arm=Arm.UPPER):
    """Weak value of the delay observable for post-selection angle ``beta``.

    Uses ``(sin a e^{iwt} - cos a) / (sin a e^{iwt} + cos a)`` with
    ``a = 3pi/4 + beta``; identical to the cotangent form where that is
    finite, and well defined at beta = +45 deg. With ``u = pi/4 + beta``
    this is ``(cos u e^{iwt} + sin u) / (cos u e^{iwt} - sin u)``, which is
    evaluated instead so that beta = -45 deg gives exactly 1.

    Raises
    ------
    DegenerateWeakValueError
        If the denominator magnitude is below 1e-15.
    """
    u = math.pi / 4 + beta
    phase = complex(math.cos(omega * tau), math.sin(omega * tau))
    cu, su = math.cos(u), math.sin(u)
    den = cu * phase - su
    if abs(den) < DEGENERATE_TOL:
        raise DegenerateWeakValueError(
            f"post-selection at beta={beta!r} rad is orthogonal to the pre-selection "
            f"(|denominator| = {abs(den):.3e})"
        )
    if su == 0.0:
        return WeakValue(complex(1.0), Arm(arm))
    return WeakValue((cu * phase + su) / den, Arm(arm))


def tilt_to_delay(theta, n0, omega):
    """Birefringent delay from tilting the second waveplate by ``theta``."""
    if abs(theta) >= SMALL_ANGLE_LIMIT:
        raise ValueError(f"tilt {theta!r} rad is outside the small-angle regime |theta| < 0.5")
    return math.pi * theta**2 / (2.0 * n0**2 * omega)


def amplified_shift(wv, tau):
    """Temporal shift Re[A_w] * tau seen by the pointer."""
    value = wv.value if isinstance(wv, WeakValue) else complex(wv)
    return value.real * tau
