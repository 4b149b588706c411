"""Monotone circle-map lifts and their rotation theory.

Lifts are represented by samples on a uniform grid with monotone piecewise-cubic
(PCHIP) interpolation, so compositions and inverses stay inside the
representation.  Rotation numbers come with a 1/n error bound and a rational
snapping step that insists on a verified periodic point before declaring
rationality.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import _kernels

DEFAULT_GRID = 4096
_PAD = 4  # wrapped nodes on each side so the interpolant is smooth at the seam


class MonotoneCircleLift:
    """Degree-one strictly increasing lift F with F(x+1) = F(x) + 1."""

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or samples.size < 8:
            raise ValueError("need a 1-d sample array with at least 8 points")
        self.grid_size = samples.size
        self.samples = samples
        g = self.grid_size
        idx = np.arange(-_PAD, g + _PAD + 1)
        ext = samples[idx % g] + (idx // g)
        if np.any(np.diff(ext) <= 0.0):
            bad = int(np.argmin(np.diff(ext)))
            raise ValueError(
                f"lift samples are not strictly increasing near x = {(bad - _PAD) / g}")
        self._pp = PchipInterpolator(idx / g, ext)
        self._deriv = self._pp.derivative()
        # packed form for the jitted orbit kernels
        self._c = np.ascontiguousarray(self._pp.c)
        self._xleft0 = float(self._pp.x[0])
        self._inv_h = float(g)

    @classmethod
    def from_function(cls, fn, grid_size: int = DEFAULT_GRID):
        x = np.arange(grid_size) / grid_size
        vals = np.asarray(fn(x), dtype=float)
        wrap = float(fn(np.array([1.0]))[0] - fn(np.array([0.0]))[0])
        if abs(wrap - 1.0) > 1e-8:
            raise ValueError(f"not a degree-one lift: F(1)-F(0) = {wrap}")
        return cls(vals)

    @classmethod
    def identity(cls, grid_size: int = DEFAULT_GRID):
        return cls(np.arange(grid_size) / grid_size)

    @classmethod
    def rotation(cls, theta: float, grid_size: int = DEFAULT_GRID):
        return cls(np.arange(grid_size) / grid_size + theta)

    @property
    def grid_points(self) -> np.ndarray:
        return np.arange(self.grid_size) / self.grid_size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.floor(x)
        return self._pp(x - k) + k

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return self._deriv(x - np.floor(x))

    def displacement(self) -> np.ndarray:
        return self.samples - self.grid_points

    def max_abs_displacement(self) -> float:
        return float(np.max(np.abs(self.displacement())))

    def compose(self, other: "MonotoneCircleLift") -> "MonotoneCircleLift":
        """self after other, resampled onto other's grid."""
        return MonotoneCircleLift(self(other.samples))

    def inverse(self) -> "MonotoneCircleLift":
        g = self.grid_size
        targets = np.arange(g) / g
        disp = self.displacement()
        lo = targets - float(np.max(disp)) - 0.25
        hi = targets - float(np.min(disp)) + 0.25
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            too_low = self(mid) < targets
            lo = np.where(too_low, mid, lo)
            hi = np.where(too_low, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(4):  # Newton polish
            x = x - (self(x) - targets) / self.derivative(x)
        return MonotoneCircleLift(x)

    def iterate(self, x0: float, n: int) -> float:
        """F^n(x0) through the jitted kernel."""
        return float(_kernels.lift_iterate(self._c, self._xleft0, self._inv_h,
                                           float(x0), int(n)))

    def occupation_counts(self, x0: float, n: int, nbins: int):
        counts = np.zeros(nbins, dtype=np.int64)
        xf = _kernels.lift_orbit_counts(self._c, self._xleft0, self._inv_h,
                                        float(x0), int(n), counts)
        return counts, float(xf)


@dataclass
class RotationNumber:
    value: float
    error_bound: float
    rational: Fraction | None = None
    periodic_point: float | None = None

    @property
    def is_rational(self) -> bool:
        return self.rational is not None


def _convergents(x: float, max_q: int):
    """Continued-fraction convergents p/q of x with q <= max_q."""
    p0, q0, p1, q1 = 1, 0, int(np.floor(x)), 1
    yield p1, q1
    frac = x - np.floor(x)
    for _ in range(64):
        if frac < 1e-15:
            return
        x = 1.0 / frac
        a = int(np.floor(x))
        frac = x - a
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        if q1 > max_q:
            return
        yield p1, q1


def _verify_periodic(F: MonotoneCircleLift, p: int, q: int):
    """Search for a genuine q-periodic point with F^q(x) = x + p."""
    xs = np.arange(257) / 256.0
    ys = xs.copy()
    for _ in range(q):
        ys = F(ys)
    g = ys - xs - p
    i = int(np.argmin(np.abs(g)))
    if abs(g[i]) < 1e-9:
        return float(xs[i] % 1.0)
    sign = np.sign(g)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if flips.size == 0:
        return None
    lo, hi = float(xs[flips[0]]), float(xs[flips[0] + 1])
    glo = float(g[flips[0]])
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        gm = F.iterate(mid, q) - mid - p
        if gm == 0.0:
            lo = hi = mid
            break
        if (gm < 0) == (glo < 0):
            lo = mid
        else:
            hi = mid
    x_star = 0.5 * (lo + hi)
    if abs(F.iterate(x_star, q) - x_star - p) < 1e-9:
        return float(x_star % 1.0)
    return None


def rotation_number(F: MonotoneCircleLift, n_iter: int = 10**6,
                    x0: float = 0.0, max_q: int = 1000) -> RotationNumber:
    """Long-orbit rotation number with continued-fraction rational snapping."""
    if n_iter < 1000:
        raise ValueError("n_iter must be at least 1000")
    xn = F.iterate(x0, n_iter)
    rho_hat = (xn - x0) / n_iter
    err = 1.0 / n_iter
    for p, q in _convergents(rho_hat, max_q):
        if abs(rho_hat - p / q) < 1.0 / (q * q):
            x_star = _verify_periodic(F, p, q)
            if x_star is not None:
                frac = Fraction(p, q)
                return RotationNumber(value=float(frac), error_bound=err,
                                      rational=frac, periodic_point=x_star)
    return RotationNumber(value=rho_hat, error_bound=err)


class CircleMeasure:
    """A probability measure on the circle stored through its cdf on a grid."""

    def __init__(self, cdf_samples, atoms=None):
        cdf = np.asarray(cdf_samples, dtype=float)
        if cdf.ndim != 1 or cdf.size < 2:
            raise ValueError("cdf needs at least two samples")
        if abs(cdf[0]) > 1e-12 or abs(cdf[-1] - 1.0) > 1e-12:
            raise ValueError("cdf must run from 0 to 1")
        if np.any(np.diff(cdf) < -1e-15):
            raise ValueError("cdf must be nondecreasing")
        self.cdf_samples = np.clip(cdf, 0.0, 1.0)
        self.cdf_samples[0] = 0.0
        self.cdf_samples[-1] = 1.0
        self.grid_size = cdf.size - 1
        self.atoms = atoms  # [(position, mass)] when the measure is periodic-orbit supported

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        k = np.floor(x)
        nodes = np.arange(self.grid_size + 1) / self.grid_size
        return np.interp(x - k, nodes, self.cdf_samples) + k

    def mass(self, a: float, b: float) -> float:
        return float(self.cdf(b) - self.cdf(a))

    def invariance_residual(self, F: MonotoneCircleLift, n_points: int = 512) -> float:
        """sup over x of |mu(F^{-1}[0,x)) - mu([0,x))|."""
        xs = np.arange(n_points) / n_points
        Finv = F.inverse()
        pre = self.cdf(Finv(xs)) - self.cdf(Finv(np.array([0.0]))[0])
        return float(np.max(np.abs(pre - self.cdf(xs))))


def invariant_measure(F: MonotoneCircleLift, n_iter: int = 10**6,
                      n_burn: int = 10**4, x0: float = 0.0,
                      grid_size: int = DEFAULT_GRID) -> CircleMeasure:
    """Occupation measure of a long orbit, or periodic-orbit atoms when rational."""
    rot = rotation_number(F, n_iter=min(n_iter, 10**6), x0=x0)
    if rot.is_rational and rot.periodic_point is not None:
        q = rot.rational.denominator
        pts = []
        x = rot.periodic_point
        for _ in range(q):
            pts.append(x % 1.0)
            x = float(F(np.array([x]))[0])
        pts = sorted(pts)
        atoms = [(p, 1.0 / q) for p in pts]
        nodes = np.arange(grid_size + 1) / grid_size
        cdf = np.zeros(grid_size + 1)
        for pos, mass in atoms:
            cdf += np.where(nodes > pos, mass, 0.0)
        cdf[-1] = 1.0
        return CircleMeasure(cdf, atoms=atoms)
    x_warm = F.iterate(x0, n_burn)
    counts, _ = F.occupation_counts(x_warm, n_iter, grid_size)
    cdf = np.concatenate(([0.0], np.cumsum(counts) / float(n_iter)))
    cdf[-1] = 1.0
    return CircleMeasure(cdf)


@dataclass
class Semiconjugacy:
    P: MonotoneCircleLift
    rho: float
    defect: float  # sup |P(F(x)) - P(x) - rho| on the grid


def semiconjugacy_to_rotation(F: MonotoneCircleLift,
                              n_iter: int = 10**6) -> Semiconjugacy:
    """Monotone P with P o F = P + rho, built from the invariant-measure cdf."""
    rot = rotation_number(F, n_iter=n_iter)
    if rot.is_rational:
        raise ValueError(
            f"rotation number snapped to {rot.rational}; the map has periodic "
            "orbits, analyze those instead of a semiconjugacy to a rotation")
    mu = invariant_measure(F, n_iter=n_iter)
    g = mu.grid_size
    xs = np.arange(g) / g
    eps = 1e-9  # strictness leak so P stays inside the monotone representation
    P = MonotoneCircleLift((1.0 - eps) * mu.cdf_samples[:-1] + eps * xs)
    defect = float(np.max(np.abs(P(F(xs)) - P(xs) - rot.value)))
    return Semiconjugacy(P=P, rho=rot.value, defect=defect)
