"""Photon budgeting and Poisson CCD frames.

Random streams: a frame seed is either an int or a tuple of ints. The first
element is the root entropy and the rest is the spawn key, so
``(seed, work_item, frame_index)`` addresses an independent PCG64 stream
that does not depend on how many other frames were drawn or in which order.
"""

from dataclasses import dataclass, field, asdict
import math

import numpy as np

from . import kernels
from .constants import PLANCK, SPEED_OF_LIGHT


@dataclass(frozen=True)
class PhotonBudget:
    power: float
    exposure: float
    photon_energy: float

    @property
    def mean_total_photons(self):
        return self.power * self.exposure / self.photon_energy

    def scaled(self, factor):
        return PhotonBudget(self.power * factor, self.exposure, self.photon_energy)


@dataclass(frozen=True)
class NoiseProfile:
    gain_jitter_rms: float = 0.0
    pointing_jitter_rms: float = 0.0
    dark_rate: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value >= 0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")

    @property
    def is_shot_noise_only(self):
        return not (self.gain_jitter_rms or self.pointing_jitter_rms or self.dark_rate)


@dataclass(frozen=True)
class CcdFrame:
    counts: np.ndarray = field(repr=False)
    exposure: float
    seed: tuple
    pixel_pitch: float = 3.45e-6

    def __post_init__(self):
        if self.counts.ndim != 2:
            raise ValueError("frame counts must be a 2D array")
        if self.counts.size and self.counts.min() < 0:
            raise ValueError("frame counts must be non-negative")
        self.counts.setflags(write=False)

    @property
    def total(self):
        return int(self.counts.sum())


def photon_energy(wavelength):
    return PLANCK * SPEED_OF_LIGHT / wavelength


def photon_budget(power, exposure, wavelength, energy=None):
    """Mean photon number ``P * T / E_p`` with ``E_p = hc/lambda`` by default."""
    if not (power > 0 and exposure > 0 and wavelength > 0):
        raise ValueError("power, exposure and wavelength must all be positive")
    e_p = photon_energy(wavelength) if energy is None else energy
    if not e_p > 0:
        raise ValueError("photon energy must be positive")
    return PhotonBudget(power, exposure, e_p)


def expected_counts(intensity, budget, eta):
    """Per-pixel Poisson means, normalized to sum to ``eta * N``."""
    if not 0 < eta <= 1:
        raise ValueError(f"quantum efficiency must lie in (0, 1], got {eta!r}")
    intensity = np.asarray(intensity, dtype=float)
    if intensity.min() < 0:
        floor = -1e-12 * intensity.max()
        if intensity.min() < floor:
            raise ValueError("intensity map has negative values")
        intensity = np.maximum(intensity, 0.0)
    total = intensity.sum()
    if not total > 0:
        raise ValueError("intensity map is identically zero")
    return intensity * (eta * budget.mean_total_photons / total)


def as_seed_tuple(seed):
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def frame_rng(seed):
    key = as_seed_tuple(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key[0], spawn_key=key[1:])))


def sample_frame(means, noise=NoiseProfile(), seed=0, exposure=0.0, pixel_pitch=3.45e-6):
    """Draw one Poisson frame from a map of expected counts.

    Technical noise is applied to the means before sampling, in order:
    pointing jitter (Gaussian offset in metres, converted with
    ``pixel_pitch``), a common log-normal gain factor, then dark counts
    ``dark_rate * exposure`` per pixel.
    """
    means = np.asarray(means, dtype=float)
    if means.size and means.min() < 0:
        raise ValueError("expected counts must be non-negative")
    rng = frame_rng(seed)
    lam = means
    if noise.pointing_jitter_rms:
        dy, dx = rng.normal(0.0, noise.pointing_jitter_rms / pixel_pitch, size=2)
        lam = kernels.shift_bilinear(np.ascontiguousarray(lam), float(dy), float(dx))
    if noise.gain_jitter_rms:
        s = math.sqrt(math.log1p(noise.gain_jitter_rms**2))
        lam = lam * rng.lognormal(-0.5 * s * s, s)
    if noise.dark_rate:
        lam = lam + noise.dark_rate * exposure
    counts = rng.poisson(lam).astype(np.int64)
    return CcdFrame(counts, exposure, as_seed_tuple(seed), pixel_pitch)


def row_profile(frame):
    """Row sums ``K_m = sum_n k_mn`` of a frame (or a bare 2D array)."""
    counts = frame.counts if isinstance(frame, CcdFrame) else np.asarray(frame)
    return counts.sum(axis=1).astype(float)
