"""Stable/unstable holonomies and su-loop maps for skew products.

Transports between fibers over points of a common (un)stable base leaf are
computed as truncated cocycle limits.  Base orbits are taken at anchors snapped
to dyadic rationals so that v -> A v mod 1 is exact in floating point, and leaf
offsets are carried separately in the exactly-contracting eigendirection; this
keeps the two orbit legs correlated to machine precision for the full depth.
Every transport carries a certified tail bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circle import MonotoneCircleLift, DEFAULT_GRID
from .systems import SkewProductSystem

DEFAULT_DEPTH = 80
DISPLACEMENT_TOL = 1e-6
LEAF_RESIDUAL_TOL = 1e-10
TAIL_BOUND_CAP = 1e-9
_REPRESENTATION_FLOOR = 1e-10
_SNAP_BITS = 40


def _snap_dyadic(v: np.ndarray, bits: int = _SNAP_BITS) -> np.ndarray:
    scale = float(2**bits)
    return np.round(np.asarray(v, dtype=float) * scale) / scale


def _wrapped_orbit(matrix: np.ndarray, v0: np.ndarray, n: int) -> np.ndarray:
    """Rows k = 0..n of (matrix^k v0) mod 1; exact for dyadic v0."""
    d = v0.size
    out = np.empty((n + 1, d))
    v = np.mod(v0, 1.0)
    v[v >= 1.0] = 0.0
    m = matrix.astype(float)
    for k in range(n + 1):
        out[k] = v
        v = np.mod(m @ v, 1.0)
        v[v >= 1.0] = 0.0
    return out


def _certified_constants(fiber):
    """(min dphi/dz, max dphi/dz, Lipschitz constant in the base variable)."""
    if fiber.is_plain:
        amp = 0.0
        lip = 0.0
        for t in fiber.terms:
            two_pi_c = 2.0 * np.pi * abs(t.coefficient)
            amp += two_pi_c * abs(t.frequency[-1])
            lip += two_pi_c * float(np.hypot.reduce(np.abs(t.frequency[:-1]).astype(float)))
        lower = 1.0 - amp
        upper = 1.0 + amp
        if lower <= 0.0:
            lower = fiber.validate()  # fall back to the measured grid minimum
        return lower, upper, lip
    # conjugated family: compose certified bounds through the chain rule
    mi, Mi, Li = _certified_constants(fiber.inner)
    mh, Mh, Lh = _certified_constants(fiber.conjugator)
    a_norm = float(np.linalg.norm(fiber.base_matrix, 2))
    lower = mi * mh / Mh
    upper = Mi * Mh / mh
    lip = (Lh * a_norm + Li + Mi * Lh) / mh
    return lower, upper, lip


def _tail_bound(fiber, d0: float, rate: float, depth: int) -> float:
    """Certified sup-distance between the depth-truncated and the limit transport."""
    lower, _upper, lip = _certified_constants(fiber)
    q = rate / lower
    if q >= 1.0:
        raise ValueError(
            f"cannot certify the transport: contraction rate {rate:.4g} does not "
            f"beat the fiber derivative lower bound {lower:.4g}")
    tail = lip * abs(d0) * (1.0 / lower) * q**depth / (1.0 - q)
    return tail + _REPRESENTATION_FLOOR


def _eigen_frame(base):
    """Columns (e_u, e_s) for a 2-d base with one expanding, one contracting line."""
    if base.unstable_basis.shape != (1, 2) or base.stable_basis.shape != (1, 2):
        raise NotImplementedError(
            "holonomy transports require a 2-d base with 1-d stable and unstable "
            "lines")
    e_u = base.unstable_basis[0]
    e_s = base.stable_basis[0]
    return np.column_stack([e_u, e_s])


def _leaf_coefficients(base, delta: np.ndarray):
    frame = _eigen_frame(base)
    return np.linalg.solve(frame, np.asarray(delta, dtype=float))


@dataclass
class HolonomyMap:
    """A depth-truncated leaf transport between two fibers, with certificate.

    `lift` is the grid interpolant; `evaluate`/`derivative` rerun the exact
    composition chain, so derivative values agree with the telescoping product
    of fiber derivatives along the two orbits.
    """

    leaf: str                      # 's' or 'u'
    anchor: np.ndarray
    t_from: float
    t_to: float
    depth: int
    tail_bound: float
    lift: MonotoneCircleLift
    _fiber: object = field(repr=False)
    _from_points: np.ndarray = field(repr=False)
    _to_points: np.ndarray = field(repr=False)

    def __call__(self, z):
        return self.lift(z)

    def _chain(self, z, want_derivative: bool):
        zz = np.atleast_1d(np.asarray(z, dtype=float))
        deriv = np.ones_like(zz)
        fiber = self._fiber
        if self.leaf == "s":
            for vk in self._from_points:
                if want_derivative:
                    deriv = deriv * fiber.dphi_dz(vk, zz)
                zz = fiber.phi(vk, zz)
            for vk in self._to_points[::-1]:
                zz = fiber.phi_inverse(vk, zz)
                if want_derivative:
                    deriv = deriv / fiber.dphi_dz(vk, zz)
        else:
            for vk in self._from_points:
                zz = fiber.phi_inverse(vk, zz)
                if want_derivative:
                    deriv = deriv / fiber.dphi_dz(vk, zz)
            for vk in self._to_points[::-1]:
                if want_derivative:
                    deriv = deriv * fiber.dphi_dz(vk, zz)
                zz = fiber.phi(vk, zz)
        return zz, deriv

    def evaluate(self, z):
        """Exact (non-interpolated) value of the truncated transport."""
        out, _ = self._chain(z, want_derivative=False)
        return out if np.ndim(z) else float(out[0])

    def derivative(self, z):
        """Chain-rule derivative: the product of fiber derivatives along both legs."""
        _, deriv = self._chain(z, want_derivative=True)
        return deriv if np.ndim(z) else float(deriv[0])


def _build_transport(sys: SkewProductSystem, leaf: str, anchor: np.ndarray,
                     t_from: float, t_to: float, depth: int,
                     grid_size: int) -> HolonomyMap:
    base = sys.base
    _eigen_frame(base)  # dimension guard
    fiber = sys.fiber
    anchor = _snap_dyadic(np.mod(anchor, 1.0))
    if leaf == "s":
        e_vec = base.stable_basis[0]
        rate_signed = base.stable_eigenvalues[0]
        orbit = _wrapped_orbit(base.matrix, anchor, depth - 1)
        powers = rate_signed ** np.arange(depth)
    elif leaf == "u":
        e_vec = base.unstable_basis[0]
        rate_signed = 1.0 / base.unstable_eigenvalues[0]
        orbit = _wrapped_orbit(base.inverse, anchor, depth)[1:]
        powers = rate_signed ** np.arange(1, depth + 1)
    else:
        raise ValueError(f"leaf must be 's' or 'u', got {leaf!r}")
    from_points = orbit + np.outer(t_from * powers, e_vec)
    to_points = orbit + np.outer(t_to * powers, e_vec)
    tail = _tail_bound(fiber, abs(t_to - t_from), abs(rate_signed), depth)
    if tail > TAIL_BOUND_CAP:
        raise ValueError(
            f"transport tail bound {tail:.3g} exceeds the certification cap "
            f"{TAIL_BOUND_CAP}; increase the depth")
    hol = HolonomyMap(leaf=leaf, anchor=anchor, t_from=float(t_from),
                      t_to=float(t_to), depth=depth, tail_bound=tail,
                      lift=MonotoneCircleLift.identity(grid_size),
                      _fiber=fiber, _from_points=from_points,
                      _to_points=to_points)
    zs = np.arange(grid_size) / grid_size
    samples, _ = hol._chain(zs, want_derivative=False)
    hol.lift = MonotoneCircleLift(samples)
    return hol


def _two_point_transport(sys, p, q, leaf, depth, grid_size):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c_u, c_s = _leaf_coefficients(sys.base, q - p)
    along, transverse = (c_s, c_u) if leaf == "s" else (c_u, c_s)
    if abs(transverse) > LEAF_RESIDUAL_TOL:
        leaf_name = "stable" if leaf == "s" else "unstable"
        raise ValueError(
            f"points are not on a common {leaf_name} leaf: transverse component "
            f"{transverse:.3g} exceeds {LEAF_RESIDUAL_TOL}")
    return _build_transport(sys, leaf, p, 0.0, float(along), depth, grid_size)


def stable_holonomy(sys: SkewProductSystem, p, q, depth: int = DEFAULT_DEPTH,
                    grid_size: int = DEFAULT_GRID) -> HolonomyMap:
    """Transport fiber_p -> fiber_q along the stable leaf through p (lift input)."""
    return _two_point_transport(sys, p, q, "s", depth, grid_size)


def unstable_holonomy(sys: SkewProductSystem, p, q, depth: int = DEFAULT_DEPTH,
                      grid_size: int = DEFAULT_GRID) -> HolonomyMap:
    """Transport fiber_p -> fiber_q along the unstable leaf through p (lift input)."""
    return _two_point_transport(sys, p, q, "u", depth, grid_size)


def holonomy_derivative(hol: HolonomyMap, z) -> float:
    """Derivative of the transport at z via the fiber-derivative product."""
    return hol.derivative(z)


@dataclass
class SuLoop:
    """The su-loop at an anchor closing up a lattice generator.

    The path runs along the unstable leaf from the anchor to anchor + c_u e_u,
    then along the stable leaf to anchor + generator, which is the anchor again
    on the torus.  `lift` is the composed fiber return map.
    """

    generator: tuple
    anchor: np.ndarray
    coefficient_u: float
    coefficient_s: float
    leg_u: HolonomyMap
    leg_s: HolonomyMap
    lift: MonotoneCircleLift
    tail_bound: float

    def __call__(self, z):
        return self.lift(z)

    def evaluate(self, z):
        return self.leg_s.evaluate(self.leg_u.evaluate(z))

    def displacement(self, z):
        return self.evaluate(z) - np.asarray(z, dtype=float)

    def max_abs_displacement(self) -> float:
        return self.lift.max_abs_displacement()


def su_loop_map(sys: SkewProductSystem, generator, anchor=None,
                depth: int = DEFAULT_DEPTH, grid_size: int = DEFAULT_GRID) -> SuLoop:
    """Fiber return map of the two-leg su-path closing up a lattice generator."""
    if not sys.is_product:
        raise NotImplementedError(
            "su-loop maps are implemented for trivial gluing only; with a "
            "nontrivial gluing the fibers are lines and loop transports do not "
            "close up on a circle")
    base = sys.base
    d = base.dim
    if d != 2:
        raise NotImplementedError("su-loop generators are implemented for 2-d bases")
    w = np.asarray(generator, dtype=float)
    if w.shape != (d,) or np.any(w != np.round(w)):
        raise ValueError(f"generator must be an integer lattice vector of length {d}")
    anchor = np.zeros(d) if anchor is None else _snap_dyadic(np.mod(anchor, 1.0))
    c_u, c_s = _leaf_coefficients(base, w)
    # unstable leg: anchor -> anchor + c_u e_u, anchored at the dyadic point
    leg_u = _build_transport(sys, "u", anchor, 0.0, float(c_u), depth, grid_size)
    # stable leg: (anchor + w) - c_s e_s -> anchor + w; on the torus the anchor
    # orbit of anchor + w equals the orbit of the anchor, so it stays dyadic
    leg_s = _build_transport(sys, "s", anchor, -float(c_s), 0.0, depth, grid_size)
    zs = np.arange(grid_size) / grid_size
    samples = leg_s.evaluate(leg_u.evaluate(zs))
    lift = MonotoneCircleLift(np.asarray(samples, dtype=float))
    return SuLoop(generator=tuple(int(x) for x in w), anchor=anchor,
                  coefficient_u=float(c_u), coefficient_s=float(c_s),
                  leg_u=leg_u, leg_s=leg_s, lift=lift,
                  tail_bound=leg_u.tail_bound + leg_s.tail_bound)


def accessibility_group(sys: SkewProductSystem, anchor=None,
                        depth: int = DEFAULT_DEPTH,
                        grid_size: int = DEFAULT_GRID) -> list:
    """Su-loop maps for the standard lattice generators at one anchor."""
    d = sys.base.dim
    gens = [tuple(int(i == j) for i in range(d)) for j in range(d)]
    return [su_loop_map(sys, g, anchor, depth, grid_size) for g in gens]


@dataclass
class CompactClassReport:
    """Census of fiber points fixed by every generator loop.

    Intervals are closed arcs [a, b] in fiber coordinates (wrapping through 1
    is encoded by b > 1).  `fixed_intervals` is the candidate compact set K,
    `moving_intervals` its certified complement, `indeterminate_intervals` the
    band where displacements fall between tol and 10 tol.
    """

    anchor: np.ndarray
    tol: float
    depth: int
    loops: list
    grid: np.ndarray
    displacement_table: np.ndarray   # (n_generators, grid)
    max_displacement_profile: np.ndarray
    fixed_intervals: list
    moving_intervals: list
    indeterminate_intervals: list
    indeterminate_fraction: float
    min_max_displacement: float
    max_displacement: float
    tail_bound: float

    @property
    def has_compact_class(self) -> bool:
        return len(self.fixed_intervals) > 0

    @property
    def all_fixed(self) -> bool:
        return self.max_displacement < self.tol

    @property
    def all_moving(self) -> bool:
        return self.min_max_displacement > 10.0 * self.tol


def _grid_components(flags: np.ndarray) -> list:
    """Maximal circular runs of True as (start_index, end_index) inclusive."""
    n = flags.size
    if not flags.any():
        return []
    if flags.all():
        return [(0, n - 1)]
    comps = []
    idx = np.flatnonzero(flags)
    # walk runs on the circle: start after a False cell
    starts = [i for i in idx if not flags[(i - 1) % n]]
    for s in starts:
        e = s
        while flags[(e + 1) % n]:
            e += 1
        comps.append((s, e))
    return comps


def _refine_crossing(profile_fn, z_lo: float, z_hi: float, level: float,
                     rising: bool, iters: int = 40) -> float:
    """Bisect for profile(z) = level on [z_lo, z_hi]; `rising` fixes orientation."""
    lo, hi = z_lo, z_hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = profile_fn(mid) > level
        if above == rising:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def detect_compact_classes(sys: SkewProductSystem, anchor=None,
                           depth: int = DEFAULT_DEPTH,
                           tol: float = DISPLACEMENT_TOL,
                           grid_size: int = DEFAULT_GRID) -> CompactClassReport:
    """Locate fiber arcs fixed by all generator loops over one anchor fiber."""
    loops = accessibility_group(sys, anchor, depth, grid_size)
    zs = np.arange(grid_size) / grid_size
    table = np.stack([np.abs(lp.lift(zs) - zs) for lp in loops])
    profile = table.max(axis=0)

    def exact_profile(z: float) -> float:
        return max(abs(float(lp.evaluate(z)) - z) for lp in loops)

    fixed = profile < tol
    moving = profile > 10.0 * tol
    indeterminate = ~fixed & ~moving

    def intervals_from(flags, refine_level, rising_into):
        out = []
        n = zs.size
        for s, e in _grid_components(flags):
            a = zs[s % n] + (s // n)
            b = zs[e % n] + (e // n)
            if not flags.all():
                # push endpoints outward to the exact level crossing
                left = _refine_crossing(exact_profile, a - 1.0 / n, a,
                                        refine_level, rising=not rising_into)
                right = _refine_crossing(exact_profile, b, b + 1.0 / n,
                                         refine_level, rising=rising_into)
                a, b = left, right
            out.append((float(a), float(b)))
        return out

    fixed_iv = intervals_from(fixed, tol, rising_into=True)
    moving_iv = intervals_from(moving, 10.0 * tol, rising_into=False)
    indet_iv = []
    for s, e in _grid_components(indeterminate):
        indet_iv.append((float(zs[s]), float(zs[e % zs.size] + (e // zs.size))))
    return CompactClassReport(
        anchor=loops[0].anchor, tol=tol, depth=depth, loops=loops, grid=zs,
        displacement_table=table, max_displacement_profile=profile,
        fixed_intervals=fixed_iv, moving_intervals=moving_iv,
        indeterminate_intervals=indet_iv,
        indeterminate_fraction=float(np.mean(indeterminate)),
        min_max_displacement=float(profile.min()),
        max_displacement=float(profile.max()),
        tail_bound=max(lp.tail_bound for lp in loops))


def displacement_rows(report: CompactClassReport):
    """Rows (z, |disp| per generator, max) for delimited export."""
    header = ["z"]
    for lp in report.loops:
        header.append("disp_" + "".join(str(g) for g in lp.generator))
    header.append("max_disp")
    rows = np.column_stack([report.grid, report.displacement_table.T,
                            report.max_displacement_profile])
    return header, rows
