"""Pure-numpy implementations of the hot numeric loops."""

import numpy as np


def dft_xcorr(product, freqs, shifts):
    """Evaluate the band-limited cross-correlation at arbitrary shifts.

    ``product`` is the cross-power spectrum ``A * conj(B)`` on the DFT
    frequencies ``freqs`` (cycles/sample). Returns the real correlation
    ``sum_k product[k] * exp(2j*pi*freqs[k]*s)`` for every ``s``.
    """
    phase = np.exp(2j * np.pi * np.outer(shifts, freqs))
    return (phase @ product).real


def spline_loglik(coef, rows, counts, shifts, floor):
    """Poisson log-likelihood terms of a cubic-spline template.

    The template is the piecewise cubic ``coef`` (scipy ``PPoly`` layout,
    unit knot spacing starting at 0) translated by each shift. Returns
    ``(sum_m counts[m] * log r(rows[m]-s), sum_m r(rows[m]-s))`` per shift.
    """
    x = rows[None, :] - shifts[:, None]
    idx = np.clip(np.floor(x).astype(np.int64), 0, coef.shape[1] - 1)
    t = x - idx
    r = ((coef[0, idx] * t + coef[1, idx]) * t + coef[2, idx]) * t + coef[3, idx]
    r = np.maximum(r, floor)
    return np.log(r) @ counts, r.sum(axis=1)


def shift_bilinear(image, dy, dx):
    """Translate ``image`` by (dy, dx) pixels with bilinear interpolation.

    Output pixel (i, j) samples the input at (i - dy, j - dx); samples that
    fall off the array take the nearest edge value.
    """
    ny, nx = image.shape
    yi = np.clip(np.arange(ny) - dy, 0.0, ny - 1.0)
    xi = np.clip(np.arange(nx) - dx, 0.0, nx - 1.0)
    y0 = np.minimum(np.floor(yi).astype(np.int64), ny - 2) if ny > 1 else np.zeros(ny, np.int64)
    x0 = np.minimum(np.floor(xi).astype(np.int64), nx - 2) if nx > 1 else np.zeros(nx, np.int64)
    fy = (yi - y0)[:, None]
    fx = (xi - x0)[None, :]
    y1 = np.minimum(y0 + 1, ny - 1)
    x1 = np.minimum(x0 + 1, nx - 1)
    top = image[y0][:, x0] * (1.0 - fx) + image[y0][:, x1] * fx
    bottom = image[y1][:, x0] * (1.0 - fx) + image[y1][:, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def fisher_sum(p0, p_plus, p_minus, step):
    """Central-difference classical Fisher information of a distribution."""
    deriv = (p_plus - p_minus) / (2.0 * step)
    return float(np.sum(deriv * deriv / p0))
