"""Tight iteration kernels (numba).

Everything here operates on plain arrays so the jitted code stays cache-friendly:
circle lifts arrive as piecewise-cubic coefficient tables on a uniform grid, and
trigonometric fiber families arrive as packed (coeff, frequency, phase) arrays.
Phase flag convention: 0 = sin, 1 = cos.
"""

from __future__ import annotations

import numba
import numpy as np

TWO_PI = 2.0 * np.pi


@numba.njit(cache=True, inline="always")
def _ppoly_eval(c, xleft0, inv_h, n_int, xq):
    idx = int(np.floor((xq - xleft0) * inv_h))
    if idx < 0:
        idx = 0
    elif idx >= n_int:
        idx = n_int - 1
    t = xq - (xleft0 + idx / inv_h)
    return ((c[0, idx] * t + c[1, idx]) * t + c[2, idx]) * t + c[3, idx]


@numba.njit(cache=True, inline="always")
def _lift_eval(c, xleft0, inv_h, n_int, x):
    k = np.floor(x)
    return _ppoly_eval(c, xleft0, inv_h, n_int, x - k) + k


@numba.njit(cache=True)
def lift_iterate(c, xleft0, inv_h, x0, n):
    """n-fold iteration of a monotone degree-one lift; returns the final lift value."""
    x = x0
    for _ in range(n):
        x = _lift_eval(c, xleft0, inv_h, c.shape[1], x)
    return x


@numba.njit(cache=True)
def lift_orbit_counts(c, xleft0, inv_h, x0, n, counts):
    """Occupation histogram of the projected orbit; returns the final lift value."""
    x = x0
    nbins = counts.shape[0]
    for _ in range(n):
        x = _lift_eval(c, xleft0, inv_h, c.shape[1], x)
        frac = x - np.floor(x)
        b = int(frac * nbins)
        if b >= nbins:
            b = nbins - 1
        counts[b] += 1
    return x


@numba.njit(cache=True, inline="always")
def _trig_sum(coeffs, freqs, phases, v, z):
    acc = 0.0
    for i in range(coeffs.shape[0]):
        arg = freqs[i, freqs.shape[1] - 1] * z
        for j in range(v.shape[0]):
            arg += freqs[i, j] * v[j]
        arg *= TWO_PI
        if phases[i] == 0:
            acc += coeffs[i] * np.sin(arg)
        else:
            acc += coeffs[i] * np.cos(arg)
    return acc


@numba.njit(cache=True, inline="always")
def _trig_sum_dz(coeffs, freqs, phases, v, z):
    acc = 0.0
    for i in range(coeffs.shape[0]):
        fz = freqs[i, freqs.shape[1] - 1]
        if fz == 0.0:
            continue
        arg = fz * z
        for j in range(v.shape[0]):
            arg += freqs[i, j] * v[j]
        arg *= TWO_PI
        if phases[i] == 0:
            acc += coeffs[i] * TWO_PI * fz * np.cos(arg)
        else:
            acc -= coeffs[i] * TWO_PI * fz * np.sin(arg)
    return acc


@numba.njit(cache=True, inline="always")
def _fiber_forward(theta, coeffs, freqs, phases, v, z):
    return z + theta + _trig_sum(coeffs, freqs, phases, v, z)


@numba.njit(cache=True, inline="always")
def _fiber_inverse(theta, coeffs, freqs, phases, v, z_target):
    # Newton on the monotone lift; the diffeo margin keeps phi' well off zero.
    z = z_target - theta
    for _ in range(60):
        fval = z + theta + _trig_sum(coeffs, freqs, phases, v, z) - z_target
        if np.abs(fval) < 1e-14:
            break
        dval = 1.0 + _trig_sum_dz(coeffs, freqs, phases, v, z)
        z -= fval / dval
    return z


@numba.njit(cache=True, inline="always")
def _mod1_vec(v):
    for j in range(v.shape[0]):
        v[j] = v[j] - np.floor(v[j])
        if v[j] >= 1.0:
            v[j] = 0.0


@numba.njit(cache=True)
def skew_batch_sums(amat, theta, coeffs, freqs, phases,
                    v0, z0, n, tfreqs, tphases, n_batches, backward):
    """Birkhoff sums of trig test functions along a skew-product orbit.

    Returns an (n_test, n_batches) array of per-batch sums plus the visit count
    per batch; backward=True iterates the inverse map (fiber solved by Newton).
    """
    d = v0.shape[0]
    v = v0.copy()
    z = z0
    n_test = tfreqs.shape[0]
    sums = np.zeros((n_test, n_batches))
    batch_len = n // n_batches
    vnew = np.zeros(d)
    for k in range(n):
        b = k // batch_len
        if b >= n_batches:
            b = n_batches - 1
        for i in range(n_test):
            arg = tfreqs[i, d] * z
            for j in range(d):
                arg += tfreqs[i, j] * v[j]
            arg *= TWO_PI
            if tphases[i] == 0:
                sums[i, b] += np.sin(arg)
            else:
                sums[i, b] += np.cos(arg)
        if backward:
            for r in range(d):
                s = 0.0
                for cc in range(d):
                    s += amat[r, cc] * v[cc]
                vnew[r] = s
            _mod1_vec(vnew)
            for r in range(d):
                v[r] = vnew[r]
            z = _fiber_inverse(theta, coeffs, freqs, phases, v, z)
        else:
            z = _fiber_forward(theta, coeffs, freqs, phases, v, z)
            for r in range(d):
                s = 0.0
                for cc in range(d):
                    s += amat[r, cc] * v[cc]
                vnew[r] = s
            _mod1_vec(vnew)
            for r in range(d):
                v[r] = vnew[r]
        z = z - np.floor(z)
        if z >= 1.0:
            z = 0.0
    return sums


@numba.njit(cache=True)
def skew_orbit_samples(amat, theta, coeffs, freqs, phases, v0, z0, out, backward):
    """Fill out[k] = (v, z) along the orbit; out has shape (n, d+1)."""
    d = v0.shape[0]
    v = v0.copy()
    z = z0
    vnew = np.zeros(d)
    for k in range(out.shape[0]):
        for j in range(d):
            out[k, j] = v[j]
        out[k, d] = z
        if backward:
            for r in range(d):
                s = 0.0
                for cc in range(d):
                    s += amat[r, cc] * v[cc]
                vnew[r] = s
            _mod1_vec(vnew)
            for r in range(d):
                v[r] = vnew[r]
            z = _fiber_inverse(theta, coeffs, freqs, phases, v, z)
        else:
            z = _fiber_forward(theta, coeffs, freqs, phases, v, z)
            for r in range(d):
                s = 0.0
                for cc in range(d):
                    s += amat[r, cc] * v[cc]
                vnew[r] = s
            _mod1_vec(vnew)
            for r in range(d):
                v[r] = vnew[r]
        z = z - np.floor(z)
        if z >= 1.0:
            z = 0.0
    return z


@numba.njit(cache=True)
def skew_height_counts(amat, theta, coeffs, freqs, phases, v0, z0, n, counts):
    """Occupation histogram of the fiber coordinate along a forward orbit."""
    d = v0.shape[0]
    v = v0.copy()
    z = z0
    nbins = counts.shape[0]
    vnew = np.zeros(d)
    for _ in range(n):
        b = int(z * nbins)
        if b >= nbins:
            b = nbins - 1
        counts[b] += 1
        z = _fiber_forward(theta, coeffs, freqs, phases, v, z)
        for r in range(d):
            s = 0.0
            for cc in range(d):
                s += amat[r, cc] * v[cc]
            vnew[r] = s
        _mod1_vec(vnew)
        for r in range(d):
            v[r] = vnew[r]
        z = z - np.floor(z)
        if z >= 1.0:
            z = 0.0


def warm_up():
    """Compile the kernels on tiny inputs (cached to disk afterwards)."""
    c = np.zeros((4, 8))
    c[2, :] = 1.0
    c[3, :] = np.linspace(0.0, 1.0, 9)[:-1]
    lift_iterate(c, 0.0, 8.0, 0.1, 3)
    lift_orbit_counts(c, 0.0, 8.0, 0.1, 3, np.zeros(8, dtype=np.int64))
    amat = np.array([[2.0, 1.0], [1.0, 1.0]])
    coeffs = np.array([0.05])
    freqs = np.array([[1.0, 0.0, 0.0]])
    phases = np.array([0], dtype=np.int8)
    tf = np.array([[1.0, 0.0, 0.0]])
    tp = np.array([1], dtype=np.int8)
    v0 = np.array([0.1, 0.2])
    skew_batch_sums(amat, 0.0, coeffs, freqs, phases, v0, 0.3, 10, tf, tp, 2, False)
    skew_batch_sums(amat, 0.0, coeffs, freqs, phases, v0, 0.3, 10, tf, tp, 2, True)
    skew_orbit_samples(amat, 0.0, coeffs, freqs, phases, v0, 0.3,
                       np.zeros((4, 3)), False)
    skew_height_counts(amat, 0.0, coeffs, freqs, phases, v0, 0.3, 10,
                       np.zeros(8, dtype=np.int64))
