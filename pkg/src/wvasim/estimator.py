"""Fringe-shift registration, calibration curves and delay inversion.

Shifts follow the convention ``moved[m] = reference[m - s]``: a pattern that
moves towards larger row index gives a positive shift.
"""

from dataclasses import dataclass, field
import csv
import math
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels
from .detector import CcdFrame, row_profile

MIN_LENGTH = 64
ZOOM_FACTOR = 100
HALF_WINDOW = 1.5
WINDOW_PASSES = 3


class RegistrationError(ValueError):
    pass


class CalibrationError(ValueError):
    pass


class OutOfCalibratedRange(ValueError):
    pass


@dataclass(frozen=True)
class ShiftEstimate:
    shift_pixels: float
    shift_meters: float | None
    upsampling: int
    correlation_peak: float


@dataclass(frozen=True)
class CalibrationCurve:
    """Fitted relation ``shift = scale * model(tau) + offset`` (metres)."""

    beta: float
    taus: tuple
    shifts: tuple
    scale: float
    offset: float
    residual_rms: float
    model: Callable = field(repr=False, compare=False)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.taus, self.taus[1:])):
            raise CalibrationError("calibration delays must be strictly increasing")
        if not self.scale > 0:
            raise CalibrationError(f"fitted scale must be positive, got {self.scale:.6g}")

    def __call__(self, tau):
        return self.scale * self.model(tau) + self.offset

    @property
    def tau_range(self):
        return self.taus[0], self.taus[-1]


def _check_pair(reference, moved, upsampling):
    reference = np.asarray(reference, dtype=float)
    moved = np.asarray(moved, dtype=float)
    if reference.ndim != 1 or moved.ndim != 1:
        raise RegistrationError("profiles must be one-dimensional")
    if reference.shape != moved.shape:
        raise RegistrationError(f"length mismatch: {reference.size} vs {moved.size}")
    if reference.size < MIN_LENGTH:
        raise RegistrationError(f"profiles need at least {MIN_LENGTH} samples, got {reference.size}")
    if int(upsampling) != upsampling or upsampling < 1:
        raise RegistrationError(f"upsampling must be an integer >= 1, got {upsampling!r}")
    for name, arr in (("reference", reference), ("moved", moved)):
        if not np.all(np.isfinite(arr)):
            raise RegistrationError(f"{name} profile contains non-finite values")
        if np.ptp(arr) == 0:
            raise RegistrationError(f"{name} profile is flat (zero variance)")
    return reference, moved


def hann(x, n):
    """Periodic Hann window of length ``n`` evaluated at (fractional) ``x``."""
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.asarray(x, dtype=float) / n)


def _zoom_stages(upsampling):
    """Grid steps used after the integer stage, ending at 1/upsampling."""
    steps, step = [], 1.0
    final = 1.0 / upsampling
    while step > final * (1 + 1e-9):
        step = max(step / ZOOM_FACTOR, final)
        steps.append(step)
    return steps


def _grid(center, step, parent_step):
    k = int(round(HALF_WINDOW * parent_step / step))
    return center + np.arange(-k, k + 1) * step


def register_1d(reference, moved, upsampling=100, weighting="linear", pixel_pitch=None,
                search_radius=8):
    """Sub-pixel translation of ``moved`` relative to ``reference``.

    Both profiles are mean-subtracted and Hann-windowed, and the integer
    peak of their circular cross-correlation gives a coarse shift. The
    refinement then depends on ``weighting``:

    ``"linear"``
        The band-limited cross-correlation is evaluated by a direct
        partial DFT on grids ``1.5`` px either side of the current peak,
        each 100x finer than the last, until the step is ``1/upsampling``.
        This is repeated twice more with the window of ``moved``
        translated by the current estimate.
    ``"poisson"``
        For photon-count profiles. The reference is treated as the mean
        shape and the shift maximizes the Poisson likelihood of ``moved``
        under the translated (cubic-spline interpolated) reference, over
        a fixed row window that stays inside both profiles. An integer
        scan of ``+-search_radius`` px around the coarse peak is followed
        by the same zoom schedule. This removes the window-induced bias of
        the correlation peak and weights rows by their shot noise.

    Parameters
    ----------
    reference, moved : array_like
        Equal-length 1D profiles, at least 64 samples.
    upsampling : int
        Resolution factor; the result is a multiple of ``1/upsampling``.
    pixel_pitch : float, optional
        If given, ``shift_meters`` is filled in.

    Returns
    -------
    ShiftEstimate
    """
    reference, moved = _check_pair(reference, moved, upsampling)
    upsampling = int(upsampling)
    n = reference.size
    rows = np.arange(n)
    freqs = np.fft.fftfreq(n)
    moved0 = moved - moved.mean()
    b = (reference - reference.mean()) * hann(rows, n)
    conj_b = np.conj(np.fft.fft(b))
    a = moved0 * hann(rows, n)
    product = np.fft.fft(a) * conj_b / n
    cc = np.fft.ifft(product * n).real
    coarse = int(np.argmax(cc))
    if coarse > n // 2:
        coarse -= n

    if weighting == "linear":
        shift = float(coarse)
        passes = WINDOW_PASSES if upsampling > 1 else 1
        for k in range(passes):
            if k:
                # let the window follow the pattern, otherwise its slope
                # pulls the peak towards zero
                a = moved0 * hann(rows - shift, n)
                product = np.fft.fft(a) * conj_b / n
            parent = 1.0
            for step in _zoom_stages(upsampling):
                grid = _grid(shift, step, parent)
                shift = float(grid[np.argmax(kernels.dft_xcorr(product, freqs, grid))])
                parent = step
    elif weighting == "poisson":
        shift = _refine_poisson(reference, moved, coarse, upsampling, search_radius)
    else:
        raise ValueError(f"unknown weighting {weighting!r}; expected 'linear' or 'poisson'")

    shift = float(np.clip(shift, -n / 2, n / 2))
    norm = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    peak = float(kernels.dft_xcorr(product, freqs, np.array([shift]))[0]) / norm
    peak = min(max(peak, 0.0), 1.0)
    meters = None if pixel_pitch is None else shift * pixel_pitch
    return ShiftEstimate(shift, meters, upsampling, peak)


def _refine_poisson(reference, counts, coarse, upsampling, radius):
    n = reference.size
    if reference.min() < 0 or counts.min() < 0:
        raise RegistrationError("poisson weighting needs non-negative profiles")
    radius = max(int(radius), 2)
    margin = 2
    lo = max(0, coarse + radius + margin)
    hi = min(n, n - 1 + coarse - radius - margin)
    if hi - lo < MIN_LENGTH // 2:
        raise RegistrationError(
            f"shift {coarse} px leaves too little overlap for likelihood refinement"
        )
    rows = np.arange(lo, hi, dtype=float)
    window_counts = np.ascontiguousarray(counts[lo:hi])
    total = float(window_counts.sum())
    floor = 1e-12 * float(reference.max())
    coef = np.ascontiguousarray(CubicSpline(np.arange(n), np.maximum(reference, floor)).c)

    def loglik(shifts):
        weighted, norm = kernels.spline_loglik(coef, rows, window_counts, shifts, floor)
        return weighted - total * np.log(norm)

    grid = coarse + np.arange(-radius, radius + 1, dtype=float)
    shift = float(grid[np.argmax(loglik(grid))])
    parent = 1.0
    for step in _zoom_stages(upsampling):
        grid = _grid(shift, step, parent)
        shift = float(grid[np.argmax(loglik(grid))])
        parent = step
    return shift


def register_frames(reference, moved, upsampling=100, weighting="poisson"):
    """Register the row-sum profiles of two frames (y shift only).

    ``reference`` and ``moved`` may be ``CcdFrame`` objects or 2D arrays of
    (expected) counts. Columns are summed, which discards the sideways
    refraction walk-off of a tilted waveplate.
    """
    shapes = [f.counts.shape if isinstance(f, CcdFrame) else np.shape(f) for f in (reference, moved)]
    if shapes[0] != shapes[1]:
        raise RegistrationError(f"frame shapes differ: {shapes[0]} vs {shapes[1]}")
    pitch = None
    for f in (moved, reference):
        if isinstance(f, CcdFrame):
            pitch = f.pixel_pitch
            break
    return register_1d(row_profile(reference), row_profile(moved), upsampling,
                       weighting=weighting, pixel_pitch=pitch)


def mean_frame(frames):
    """Pixel-wise average of frames, used as a registration reference."""
    frames = list(frames)
    if not frames:
        raise ValueError("need at least one frame")
    acc = np.zeros(frames[0].counts.shape)
    for f in frames:
        acc += f.counts
    return acc / len(frames)


def fit_calibration(taus, shifts, model, beta=float("nan")):
    """Least-squares ``shifts ~ scale * model(tau) + offset``.

    Parameters
    ----------
    taus : sequence of float
        Set delays in seconds; at least four distinct values.
    shifts : sequence of float
        Measured shifts in metres.
    model : callable
        Analytic shift (metres) as a function of delay.
    """
    taus = np.asarray(taus, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    if taus.shape != shifts.shape or taus.ndim != 1:
        raise CalibrationError("taus and shifts must be 1D sequences of equal length")
    if taus.size < 4:
        raise CalibrationError(f"need at least 4 calibration points, got {taus.size}")
    if np.unique(taus).size != taus.size:
        raise CalibrationError("calibration delays must be distinct")
    order = np.argsort(taus)
    taus, shifts = taus[order], shifts[order]
    x = np.array([model(t) for t in taus], dtype=float)
    if np.ptp(x) <= 1e-12 * max(np.abs(x).max(), 1e-300):
        raise CalibrationError("rank-deficient fit: the model is constant over the delays")
    design = np.column_stack([x, np.ones_like(x)])
    (scale, offset), *_ = np.linalg.lstsq(design, shifts, rcond=None)
    resid = shifts - design @ np.array([scale, offset])
    rms = float(np.sqrt(np.mean(resid**2)))
    return CalibrationCurve(float(beta), tuple(taus), tuple(shifts), float(scale),
                            float(offset), rms, model)


def _branches(taus, values):
    """Split a sampled curve into strictly monotone pieces (index ranges)."""
    sign = np.sign(np.diff(values))
    pieces, start = [], 0
    for i in range(1, sign.size):
        if sign[i] != sign[start] or sign[i] == 0:
            pieces.append((start, i))
            start = i
    pieces.append((start, sign.size))
    return [(taus[i], taus[j], sign[i]) for i, j in pieces if sign[i] != 0]


def estimate_delay(shift, calibration, tolerance=1e-24, tau_hint=None, period=None, extend=0.0):
    """Invert a calibration curve by bisection.

    Parameters
    ----------
    shift : ShiftEstimate or float
        Measured shift (metres if a float).
    calibration : CalibrationCurve
    tolerance : float
        Bracket width at which bisection stops, in seconds.
    tau_hint : float, optional
        Picks the monotone branch of a curve that turns over inside the
        calibrated range, and the fringe order when ``period`` is given.
    period : float, optional
        Fringe period in metres. Registration only knows shifts modulo one
        period; the measured value is moved by whole periods to the copy
        nearest to the curve at ``tau_hint`` (or the range centre).
    extend : float
        Fraction of the calibrated span by which the curve may be followed
        beyond each end; noisy estimates near a range edge need this.

    Raises
    ------
    OutOfCalibratedRange
        If the shift is not reached by the curve over the calibrated range.
    """
    s = shift.shift_meters if isinstance(shift, ShiftEstimate) else float(shift)
    if s is None:
        raise ValueError("shift estimate has no metric value; register with a pixel pitch")
    lo, hi = calibration.tau_range
    pad = extend * (hi - lo)
    lo, hi = lo - pad, hi + pad
    if tau_hint is not None and not lo <= tau_hint <= hi:
        raise OutOfCalibratedRange(f"tau_hint {tau_hint!r} s lies outside the calibrated range")
    if period is not None:
        anchor = calibration(tau_hint if tau_hint is not None else 0.5 * (lo + hi))
        s += round((anchor - s) / period) * period

    grid = np.linspace(lo, hi, 513)
    values = np.array([calibration(t) for t in grid])
    branches = _branches(grid, values)
    if not branches:
        raise CalibrationError("calibration curve is flat over its range")
    if len(branches) > 1:
        if tau_hint is None:
            raise CalibrationError("calibration curve is not monotone; pass tau_hint to pick a branch")
        branches = [min(branches, key=lambda b: 0 if b[0] <= tau_hint <= b[1]
                        else min(abs(tau_hint - b[0]), abs(tau_hint - b[1])))]
    a, b, sign = branches[0]
    fa, fb = calibration(a) - s, calibration(b) - s
    slack = 1e-12 * max(abs(calibration(a)), abs(calibration(b)), 1e-300)
    if fa * fb > 0:
        if min(abs(fa), abs(fb)) <= slack:
            return a if abs(fa) <= abs(fb) else b
        raise OutOfCalibratedRange(
            f"shift {s:.6e} m is outside the calibrated range "
            f"[{min(calibration(a), calibration(b)):.6e}, {max(calibration(a), calibration(b)):.6e}] m"
        )
    for _ in range(200):
        if b - a <= tolerance:
            break
        mid = 0.5 * (a + b)
        fm = calibration(mid) - s
        if fm == 0:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


ESTIMATE_COLUMNS = ("beta_deg", "theta_deg", "tau_as", "shift_um", "tau_hat_as", "seed")


def write_estimates_csv(path, rows):
    """Write estimate rows (mappings keyed by ``ESTIMATE_COLUMNS``)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ESTIMATE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in ESTIMATE_COLUMNS])


def read_estimates_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != ESTIMATE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [{k: (v if k == "seed" else float(v)) for k, v in r.items()} for r in reader]


def _fmt(value):
    if isinstance(value, float):
        return repr(float(value))
    return str(value)
