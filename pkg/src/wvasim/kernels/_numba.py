"""Numba-compiled versions of the kernels in ``_numpy``.

Loop bodies mirror the numpy expressions term by term so the two backends
agree to rounding.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def dft_xcorr(product, freqs, shifts):
    out = np.empty(shifts.shape[0])
    two_pi = 2.0 * math.pi
    for i in range(shifts.shape[0]):
        acc = 0.0
        for k in range(freqs.shape[0]):
            arg = two_pi * freqs[k] * shifts[i]
            acc += product[k].real * math.cos(arg) - product[k].imag * math.sin(arg)
        out[i] = acc
    return out


@njit(cache=True, nogil=True)
def spline_loglik(coef, rows, counts, shifts, floor):
    nseg = coef.shape[1]
    loglik = np.empty(shifts.shape[0])
    total = np.empty(shifts.shape[0])
    for i in range(shifts.shape[0]):
        acc_l = 0.0
        acc_r = 0.0
        for m in range(rows.shape[0]):
            x = rows[m] - shifts[i]
            j = int(math.floor(x))
            if j < 0:
                j = 0
            elif j > nseg - 1:
                j = nseg - 1
            t = x - j
            r = ((coef[0, j] * t + coef[1, j]) * t + coef[2, j]) * t + coef[3, j]
            if r < floor:
                r = floor
            acc_l += counts[m] * math.log(r)
            acc_r += r
        loglik[i] = acc_l
        total[i] = acc_r
    return loglik, total


@njit(cache=True, nogil=True)
def shift_bilinear(image, dy, dx):
    ny, nx = image.shape
    out = np.empty((ny, nx))
    for i in range(ny):
        yi = min(max(i - dy, 0.0), ny - 1.0)
        y0 = min(int(math.floor(yi)), ny - 2) if ny > 1 else 0
        fy = yi - y0
        y1 = min(y0 + 1, ny - 1)
        for j in range(nx):
            xi = min(max(j - dx, 0.0), nx - 1.0)
            x0 = min(int(math.floor(xi)), nx - 2) if nx > 1 else 0
            fx = xi - x0
            x1 = min(x0 + 1, nx - 1)
            top = image[y0, x0] * (1.0 - fx) + image[y0, x1] * fx
            bottom = image[y1, x0] * (1.0 - fx) + image[y1, x1] * fx
            out[i, j] = top * (1.0 - fy) + bottom * fy
    return out


@njit(cache=True, nogil=True)
def fisher_sum(p0, p_plus, p_minus, step):
    acc = 0.0
    for m in range(p0.shape[0]):
        d = (p_plus[m] - p_minus[m]) / (2.0 * step)
        acc += d * d / p0[m]
    return acc
