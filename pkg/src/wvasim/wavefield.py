"""Scalar-field model of the split Gaussian pointer and its far-field fringes.

Arrays are indexed ``[y, x]``: axis 0 runs along the fringe (y) direction and
becomes the CCD row index m, axis 1 is x (column index n). Grid coordinates
are centred, ``x_j = (j - n/2) * dx``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .polarization import WeakValue


class GridError(ValueError):
    pass


class SamplingError(ValueError):
    pass


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TransverseGrid:
    nx: int
    ny: int
    dx: float
    dy: float

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if not _is_pow2(n) or n < 256:
                raise GridError(f"{name}={n} must be a power of two >= 256")
        if not (self.dx > 0 and self.dy > 0):
            raise GridError("pixel pitch must be positive")

    @property
    def x(self):
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @property
    def y(self):
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    @property
    def extent(self):
        return self.nx * self.dx, self.ny * self.dy

    def scaled(self, m):
        return TransverseGrid(self.nx, self.ny, self.dx * m, self.dy * m)


@dataclass(frozen=True)
class FieldMap:
    grid: TransverseGrid
    amplitude: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.amplitude.shape != (self.grid.ny, self.grid.nx):
            raise GridError(
                f"amplitude shape {self.amplitude.shape} does not match grid "
                f"({self.grid.ny}, {self.grid.nx})"
            )
        self.amplitude.setflags(write=False)

    @property
    def intensity(self):
        return np.abs(self.amplitude) ** 2

    @property
    def power(self):
        return float(self.intensity.sum() * self.grid.dx * self.grid.dy)


@dataclass(frozen=True)
class TemporalEnvelope:
    sigma_t: float = 1e-9

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ValueError("sigma_t must be positive")

    def overlap(self, dt):
        """Normalized inner product of two envelopes offset by ``dt``."""
        return math.exp(-(dt**2) / (2.0 * self.sigma_t**2))


@dataclass(frozen=True)
class InterferenceSpec:
    weak_value_u: WeakValue
    weak_value_d: WeakValue
    tau: float
    omega: float
    t0: float = 0.0
    visibility: float = 1.0
    envelope: TemporalEnvelope = TemporalEnvelope()

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility!r}")
        if not math.isfinite(self.t0):
            raise ValueError("t0 must be finite")

    @property
    def relative_delay(self):
        """Delay between the arms after amplification, including t0."""
        return (self.weak_value_u.real - self.weak_value_d.real) * self.tau + self.t0

    @property
    def phase(self):
        return self.omega * self.relative_delay

    def check_weak_regime(self, ratio=1e-3):
        worst = max(abs(self.weak_value_u.real), abs(self.weak_value_d.real)) * abs(self.tau)
        if worst >= ratio * self.envelope.sigma_t:
            raise ValueError(
                f"amplified shift {worst:.3e} s is not small against sigma_t="
                f"{self.envelope.sigma_t:.3e} s"
            )


def make_input_beam(grid, beam_diameter):
    """Gaussian beam ``exp(-(x^2+y^2)/s^2)`` with 1/e^2 intensity diameter ``2s``."""
    width, height = grid.extent
    if min(width, height) <= 4 * beam_diameter:
        raise GridError(
            f"grid extent {width:.3e} x {height:.3e} m must exceed 4x the beam "
            f"diameter {beam_diameter:.3e} m"
        )
    sigma = beam_diameter / 2.0
    gy = np.exp(-grid.y**2 / sigma**2)
    gx = np.exp(-grid.x**2 / sigma**2)
    return FieldMap(grid, np.outer(gy, gx).astype(complex))


def apply_double_slit(field_map, gap, slit_width):
    """Split a field into the two slit apertures.

    The upper slit passes ``gap/2 < y < gap/2 + slit_width``, the lower one
    the mirror image; the central strip ``|y| <= gap/2`` is opaque.
    """
    y = field_map.grid.y
    if gap >= field_map.grid.extent[1]:
        raise GridError("slit gap exceeds the field extent")
    upper = (y > gap / 2) & (y < gap / 2 + slit_width)
    lower = (y < -gap / 2) & (y > -gap / 2 - slit_width)
    amp = field_map.amplitude
    return (FieldMap(field_map.grid, amp * upper[:, None]),
            FieldMap(field_map.grid, amp * lower[:, None]))


def demagnify(field_map, m):
    """Ideal imaging with lateral magnification ``m`` (power conserving)."""
    if not m > 0:
        raise ValueError("magnification must be positive")
    return FieldMap(field_map.grid.scaled(m), field_map.amplitude / m)


def _dft_matrix(out_coords, in_coords, scale):
    return np.exp(-2j * np.pi * np.outer(out_coords, in_coords) * scale)


def far_field(field_map, focal_length, wavelength, detector_grid):
    """Fraunhofer pattern of ``field_map`` in the back focal plane of a lens.

    Evaluates ``U2 = 1/(i lambda f) * sum U1 exp(-2 pi i (x x2 + y y2)/(lambda f)) dx dy``
    on the detector grid. When the detector pitch equals ``lambda f/(n dx)``
    with matching n this is one FFT and Parseval holds exactly; other
    pitches use a matrix DFT that skips all-zero source rows and columns.

    Raises
    ------
    SamplingError
        If the detector window is wider than one period of the discrete
        transform, ``lambda f / dx``, so samples would alias.
    """
    src = field_map.grid
    lf = wavelength * focal_length
    px, py = lf / (src.nx * src.dx), lf / (src.ny * src.dy)
    if (detector_grid.nx * detector_grid.dx > lf / src.dx * (1 + 1e-12) or
            detector_grid.ny * detector_grid.dy > lf / src.dy * (1 + 1e-12)):
        raise SamplingError(
            "detector window exceeds the unaliased far-field period lambda*f/dx; "
            "refine the source sampling or shrink the detector grid"
        )
    norm = src.dx * src.dy / lf
    amp = field_map.amplitude
    fft_ok = (detector_grid.nx == src.nx and detector_grid.ny == src.ny and
              math.isclose(detector_grid.dx, px, rel_tol=1e-9) and
              math.isclose(detector_grid.dy, py, rel_tol=1e-9))
    if fft_ok:
        out = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(amp)))
    else:
        rows = np.flatnonzero(np.any(amp != 0, axis=1))
        cols = np.flatnonzero(np.any(amp != 0, axis=0))
        ey = _dft_matrix(detector_grid.y, src.y[rows], 1.0 / lf)
        ex = _dft_matrix(detector_grid.x, src.x[cols], 1.0 / lf)
        out = ey @ amp[np.ix_(rows, cols)] @ ex.T
    return FieldMap(detector_grid, out * (norm / 1j))


def interfere(upper_ff, lower_ff, spec):
    """Time-integrated intensity of the two post-selected far fields.

    ``I = a_u^2|U_u|^2 + a_d^2|U_d|^2 + 2 V g a_u a_d Re[U_u conj(U_d) e^{i phi}]``
    with ``a = 1/|A_w|``, ``phi = w (Re A_u - Re A_d) tau + w t0`` and ``g`` the
    temporal-envelope overlap.
    """
    if upper_ff.grid != lower_ff.grid:
        raise GridError("upper and lower far fields are on different grids")
    return interfere_arrays(upper_ff.amplitude, lower_ff.amplitude, spec)


def interfere_arrays(uu, ud, spec):
    a_u = 1.0 / abs(spec.weak_value_u.value)
    a_d = 1.0 / abs(spec.weak_value_d.value)
    gamma = spec.envelope.overlap(spec.relative_delay)
    cross = uu * np.conj(ud) * np.exp(1j * spec.phase)
    return (a_u**2 * np.abs(uu) ** 2 + a_d**2 * np.abs(ud) ** 2
            + 2.0 * spec.visibility * gamma * a_u * a_d * cross.real)


def fringe_shift_theory(spec, fringe_period):
    """Analytic fringe displacement ``period * phi / 2pi`` along +y."""
    if not fringe_period > 0:
        raise ValueError("fringe period must be positive")
    return fringe_period * spec.phase / (2.0 * math.pi)


def crop_center(image, rows, cols):
    ny, nx = image.shape
    if rows > ny or cols > nx:
        raise GridError(f"cannot crop {rows}x{cols} from {ny}x{nx}")
    r0, c0 = (ny - rows) // 2, (nx - cols) // 2
    return image[r0:r0 + rows, c0:c0 + cols]
