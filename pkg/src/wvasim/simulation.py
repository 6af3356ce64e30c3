"""End-to-end forward model: setup -> far fields -> expected counts -> frames.

The two slit far fields depend only on the geometry, so they are computed
once per geometry and cached; every (beta pair, tau, t0) pattern is then a
cheap recombination of the same pair of complex arrays.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
import math

import numpy as np
from scipy.signal import find_peaks

from .detector import photon_budget, expected_counts, sample_frame, row_profile
from .estimator import fit_calibration, register_frames, estimate_delay
from .polarization import Arm, weak_value
from .wavefield import (TemporalEnvelope, TransverseGrid, InterferenceSpec, apply_double_slit,
                        crop_center, demagnify, far_field, fringe_shift_theory,
                        interfere_arrays, make_input_beam)

# source grid spans this many beam diameters in each direction
SOURCE_EXTENT = 5.0


@dataclass(frozen=True)
class Geometry:
    wavelength: float
    beam_diameter: float
    slit_gap: float
    slit_width: float
    expand: float
    reduce: float
    detector_focal: float
    pixel_pitch: float
    ccd_rows: int
    ccd_cols: int
    grid_nx: int
    grid_ny: int

    @classmethod
    def of(cls, setup):
        return cls(setup.wavelength, setup.beam_diameter, setup.slit_gap, setup.slit_width,
                   setup.expander_magnification, setup.reducer_magnification,
                   setup.detector_focal, setup.pixel_pitch, setup.ccd_rows, setup.ccd_cols,
                   setup.grid_nx, setup.grid_ny)


def _pow2_at_least(n):
    return max(256, 1 << (int(n) - 1).bit_length())


@lru_cache(maxsize=8)
def slit_far_fields(geom):
    """Upper and lower slit far fields on the CCD sub-array, indexed [row, col]."""
    extent = SOURCE_EXTENT * geom.beam_diameter
    source = TransverseGrid(geom.grid_nx, geom.grid_ny, extent / geom.grid_nx, extent / geom.grid_ny)
    beam = demagnify(make_input_beam(source, geom.beam_diameter), geom.expand)
    upper, lower = apply_double_slit(beam, geom.slit_gap, geom.slit_width)
    if not (np.any(upper.amplitude) and np.any(lower.amplitude)):
        raise ValueError("slit aperture falls between source samples; refine grid_ny")
    upper, lower = demagnify(upper, geom.reduce), demagnify(lower, geom.reduce)
    det = TransverseGrid(_pow2_at_least(geom.ccd_cols), _pow2_at_least(geom.ccd_rows),
                         geom.pixel_pitch, geom.pixel_pitch)
    out = []
    for part in (upper, lower):
        ff = far_field(part, geom.detector_focal, geom.wavelength, det)
        arr = np.ascontiguousarray(crop_center(ff.amplitude, geom.ccd_rows, geom.ccd_cols))
        arr.setflags(write=False)
        out.append(arr)
    return tuple(out)


def measure_period(profile):
    """Mean peak-to-peak spacing of a fringe profile, in samples.

    Peaks are located to sub-sample precision with a three-point parabola.
    """
    profile = np.asarray(profile, dtype=float)
    idx, _ = find_peaks(profile, prominence=0.05 * np.ptp(profile))
    idx = idx[(idx > 0) & (idx < profile.size - 1)]
    if idx.size < 2:
        raise ValueError("fewer than two fringe maxima in the profile")
    y0, y1, y2 = profile[idx - 1], profile[idx], profile[idx + 1]
    denom = y0 - 2 * y1 + y2
    offset = np.where(denom != 0, 0.5 * (y0 - y2) / np.where(denom != 0, denom, 1), 0.0)
    peaks = idx + offset
    return float((peaks[-1] - peaks[0]) / (peaks.size - 1))


class Simulator:
    """Forward model for one ``OpticalSetup``."""

    def __init__(self, setup):
        self.setup = setup
        self.upper, self.lower = slit_far_fields(Geometry.of(setup))
        self.envelope = TemporalEnvelope(setup.sigma_t)

    @property
    def omega(self):
        return self.setup.omega

    @cached_property
    def fringe_period_px(self):
        return measure_period(row_profile(np.abs(self.upper + self.lower) ** 2))

    @property
    def fringe_period(self):
        """Measured fringe period in metres."""
        return self.fringe_period_px * self.setup.pixel_pitch

    @cached_property
    def budget(self):
        s = self.setup
        return photon_budget(s.resolved_power(), s.resolved_exposure(), s.wavelength)

    @property
    def detected_photons(self):
        return self.setup.eta * self.budget.mean_total_photons

    def interference_spec(self, tau):
        s = self.setup
        return InterferenceSpec(
            weak_value(s.beta_u, tau, self.omega, Arm.UPPER),
            weak_value(s.beta_d, tau, self.omega, Arm.LOWER),
            tau, self.omega, t0=s.t0, visibility=s.visibility, envelope=self.envelope,
        )

    def phase(self, tau):
        return self.interference_spec(tau).phase

    def phase_slope(self, tau, step=None):
        """d(phi)/d(tau) by central differences, in rad/s."""
        h = step if step is not None else 1e-3 / self.omega
        return (self.phase(tau + h) - self.phase(tau - h)) / (2 * h)

    def intensity(self, tau):
        return interfere_arrays(self.upper, self.lower, self.interference_spec(tau))

    def expected_counts(self, tau, budget=None):
        return expected_counts(self.intensity(tau), budget or self.budget, self.setup.eta)

    def frame(self, tau, seed, noise=None, budget=None):
        s = self.setup
        means = self.expected_counts(tau, budget)
        return sample_frame(means, s.noise if noise is None else noise, seed,
                            (budget or self.budget).exposure, s.pixel_pitch)

    def theory_shift(self, tau):
        """Analytic fringe displacement in metres (includes t0)."""
        return fringe_shift_theory(self.interference_spec(tau), self.fringe_period)

    def register(self, reference, moved, upsampling=None):
        k = self.setup.upsampling if upsampling is None else upsampling
        est = register_frames(reference, moved, k, weighting="poisson")
        if est.shift_meters is None:
            est = type(est)(est.shift_pixels, est.shift_pixels * self.setup.pixel_pitch,
                            est.upsampling, est.correlation_peak)
        return est

    def calibrate_local(self, tau, reference, points=5, phase_span=0.1, upsampling=None):
        """Calibration curve around ``tau`` from noise-free patterns.

        The points span ``phase_span`` radians of fringe phase centred on
        ``tau``, so the fitted curve absorbs any small registration bias of
        the actual pattern shape at this operating point.
        """
        slope = abs(self.phase_slope(tau))
        if slope == 0:
            raise ValueError("fringe phase does not depend on tau here (beta_u == beta_d?)")
        half = 0.5 * phase_span / slope
        taus = tau + np.linspace(-half, half, points)
        shifts = [self.register(reference, self.expected_counts(t), upsampling).shift_meters
                  for t in taus]
        return fit_calibration(taus, shifts, self.theory_shift, beta=self.setup.beta_u)

    def estimate(self, frame, reference, calibration, tau_hint, upsampling=None):
        shift = self.register(reference, frame, upsampling)
        return shift, estimate_delay(shift, calibration, tau_hint=tau_hint,
                                     period=self.fringe_period)


def analytic_period(setup):
    """``lambda f_d / D_eff`` with D_eff the demagnified slit-centre separation."""
    d_eff = (setup.slit_gap + setup.slit_width) * setup.reducer_magnification
    return setup.wavelength * setup.detector_focal / d_eff


def nominal_period(setup):
    """``lambda f_d / (gap * f4/f3)`` using the gap alone."""
    return setup.wavelength * setup.detector_focal / (setup.slit_gap * setup.reducer_magnification)


def shift_profile(profile, shift):
    """Translate a 1D profile by ``shift`` samples with a Fourier phase ramp."""
    profile = np.asarray(profile, dtype=float)
    freqs = np.fft.fftfreq(profile.size)
    return np.fft.ifft(np.fft.fft(profile) * np.exp(-2j * math.pi * freqs * shift)).real
