"""Conservative three-case classification and numerical ergodic decomposition.

`classify` inspects the su-loop displacements over the origin fiber and sorts a
system into exactly one of: Accessible (every fiber point moved with margin),
JointlyIntegrable (every loop is the identity within tolerance, with the fiber
rotation number attached), or Laminated (a proper nonempty compact fixed set K
with complement U).  `decompose` then validates the expected ergodic
decomposition statistically through Birkhoff averages of a trigonometric test
family, and `build_projection` collapses the detected compact classes to
points of a reparametrized circle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .circle import (CircleMeasure, MonotoneCircleLift, RotationNumber,
                     rotation_number, semiconjugacy_to_rotation)
from .holonomy import (CompactClassReport, DEFAULT_DEPTH, DISPLACEMENT_TOL,
                       detect_compact_classes)
from .systems import SkewProductSystem, restrict_to_invariant_circle, step

INDETERMINATE_LIMIT = 0.10

CASE_ACCESSIBLE = "Accessible"
CASE_INTEGRABLE = "JointlyIntegrable"
CASE_LAMINATED = "Laminated"


class InconclusiveClassification(Exception):
    """Raised when displacement data cannot separate the three cases."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class TrigMonomial:
    """coefficient-one sin/cos(2 pi freq . (base..., fiber)) test observable."""

    frequency: tuple
    phase: str

    def __post_init__(self):
        if self.phase not in ("sin", "cos"):
            raise ValueError("phase must be sin or cos")

    @property
    def name(self) -> str:
        coords = "xyw"[: len(self.frequency) - 1] + "z"
        parts = []
        for f, c in zip(self.frequency, coords):
            if f == 0:
                continue
            prefix = "" if abs(f) == 1 else str(abs(f))
            parts.append(("-" if f < 0 else "+") + prefix + c)
        arg = "".join(parts).lstrip("+") or "0"
        return f"{self.phase}2pi({arg})"

    def __call__(self, v, z):
        v = np.asarray(v, dtype=float)
        arg = 2.0 * np.pi * (v @ np.asarray(self.frequency[:-1], dtype=float)
                             + self.frequency[-1] * np.asarray(z, dtype=float))
        return np.sin(arg) if self.phase == "sin" else np.cos(arg)


def default_test_family(base_dim: int = 2) -> list:
    """Six low-frequency trig observables mixing base and fiber coordinates."""
    z = (0,) * base_dim
    e1 = (1,) + (0,) * (base_dim - 1)
    e2 = (0, 1) + (0,) * (base_dim - 2)
    return [
        TrigMonomial(e1 + (0,), "cos"),
        TrigMonomial(e1 + (0,), "sin"),
        TrigMonomial(e2 + (0,), "cos"),
        TrigMonomial(z + (1,), "cos"),
        TrigMonomial(z + (1,), "sin"),
        TrigMonomial(e1 + (1,), "cos"),
    ]


# ---------------------------------------------------------------------------
# circular interval helpers; intervals are (a, b) with b >= a, wrap encoded
# by b > 1, all in fiber coordinates

def _interval_gaps(intervals, period: float = 1.0):
    """Open complement arcs of a disjoint union of closed arcs on the circle."""
    if not intervals:
        return [(0.0, period)]
    ivs = sorted((a % period, a % period + (b - a)) for a, b in intervals)
    gaps = []
    for i, (a, b) in enumerate(ivs):
        nxt = ivs[(i + 1) % len(ivs)][0] + (period if i + 1 == len(ivs) else 0.0)
        if nxt - b > 1e-15:
            if b >= period:
                gaps.append((b - period, nxt - period))
            else:
                gaps.append((b, nxt))
    return gaps


def _interval_contains(interval, z: float, tol: float = 0.0,
                       period: float = 1.0) -> bool:
    a, b = interval
    zz = (z - a) % period
    return zz <= (b - a) + tol or zz >= period - tol


def _total_length(intervals) -> float:
    return float(sum(b - a for a, b in intervals))


@dataclass
class ClassificationReport:
    case: str
    theta: object                  # Fraction or float for JointlyIntegrable
    n_leaves: object               # int for the laminated rational case
    K: list
    U: list
    subcases: list
    rotation: RotationNumber
    witnesses: dict
    indeterminate_bands: list
    compact: CompactClassReport
    depth: int
    tol: float
    irrational_routing: dict | None = None

    @property
    def is_accessible(self) -> bool:
        return self.case == CASE_ACCESSIBLE


def _fiber_multiplier(F: MonotoneCircleLift, z: float, n: int) -> float:
    acc = 1.0
    x = float(z)
    for _ in range(max(1, n)):
        acc *= float(F.derivative(x))
        x = float(F(x)) % 1.0
    return acc


def _escape_probe(F: MonotoneCircleLift, interval, n_period: int,
                  n_steps: int = 4000, tol: float = 1e-6):
    """Does the n_period-th iterate push the interval interior to its ends?"""
    a, b = interval
    mid = (a + 0.5 * (b - a)) % 1.0
    x = mid
    for _ in range(n_steps):
        for _ in range(n_period):
            x = float(F(x)) % 1.0
    da = min((x - a) % 1.0, (a - x) % 1.0)
    db = min((x - b) % 1.0, (b - x) % 1.0)
    if min(da, db) < tol:
        endpoint = a if da <= db else b
        return True, endpoint % 1.0
    return False, None


def _classify_subcases(F, K, U, n_period, dropped_heights, tol):
    """Trichotomy inside each complement interval of the compact set."""
    out = []
    for interval in U:
        entry = {"interval": interval}
        inside_dropped = [z for z in dropped_heights
                          if _interval_contains(interval, z)]
        escaped, endpoint = _escape_probe(F, interval, n_period, tol=10 * tol)
        if inside_dropped:
            z0 = inside_dropped[0]
            entry["subcase"] = "scaling"
            entry["scaling_height"] = z0
            entry["lam"] = _fiber_multiplier(F, z0, n_period)
        elif escaped:
            entry["subcase"] = "attractor_repeller"
            entry["limit_endpoint"] = endpoint
            entry["lam"] = _fiber_multiplier(F, endpoint, n_period)
        else:
            entry["subcase"] = "accessible_on_interval"
        out.append(entry)
    return out


def classify(sys: SkewProductSystem, depth: int = DEFAULT_DEPTH,
             tol: float = DISPLACEMENT_TOL, grid_size: int = 4096,
             anchor=None) -> ClassificationReport:
    """Sort a system into Accessible / JointlyIntegrable / Laminated."""
    compact = detect_compact_classes(sys, anchor=anchor, depth=depth, tol=tol,
                                     grid_size=grid_size)
    if compact.indeterminate_fraction > INDETERMINATE_LIMIT:
        raise InconclusiveClassification(
            f"indeterminate displacement bands cover "
            f"{100 * compact.indeterminate_fraction:.1f}% of the circle "
            f"(limit {100 * INDETERMINATE_LIMIT:.0f}%)",
            diagnostics={
                "indeterminate_fraction": compact.indeterminate_fraction,
                "indeterminate_intervals": compact.indeterminate_intervals,
                "min_max_displacement": compact.min_max_displacement,
                "max_displacement": compact.max_displacement,
                "depth": depth, "tol": tol,
            })
    F = restrict_to_invariant_circle(sys, grid_size)
    rot = rotation_number(F)
    zs = compact.grid
    profile = compact.max_displacement_profile
    witnesses = {
        "min_max_displacement": compact.min_max_displacement,
        "max_displacement": compact.max_displacement,
        "argmin_height": float(zs[int(np.argmin(profile))]),
        "argmax_height": float(zs[int(np.argmax(profile))]),
        "rotation_number": rot.value,
        "rotation_rational": rot.rational,
        "rotation_error_bound": rot.error_bound,
        "tail_bound": compact.tail_bound,
        "depth": depth,
        "tol": tol,
    }
    common = dict(rotation=rot, witnesses=witnesses,
                  indeterminate_bands=compact.indeterminate_intervals,
                  compact=compact, depth=depth, tol=tol)

    if compact.all_fixed:
        theta = rot.rational if rot.is_rational else rot.value
        if rot.is_rational:
            q = rot.rational.denominator
            p = rot.rational.numerator
            xs = np.arange(512) / 512.0
            vals = xs.copy()
            for _ in range(q):
                vals = F(vals)
            witnesses["case2_coherence_defect"] = float(
                np.max(np.abs(vals - xs - p)))
        return ClassificationReport(case=CASE_INTEGRABLE, theta=theta,
                                    n_leaves=None, K=[(0.0, 1.0)], U=[],
                                    subcases=[], **common)

    if compact.all_moving and not compact.fixed_intervals:
        return ClassificationReport(case=CASE_ACCESSIBLE, theta=None,
                                    n_leaves=None, K=[], U=[(0.0, 1.0)],
                                    subcases=[], **common)

    if compact.fixed_intervals:
        # keep only components the fiber return map sends back into the
        # candidate set; dropped heights feed the scaling sub-case
        kept, dropped = [], []
        for a, b in compact.fixed_intervals:
            mid = (a + 0.5 * (b - a)) % 1.0
            image = float(F(mid)) % 1.0
            if any(_interval_contains(iv, image, tol=tol)
                   for iv in compact.fixed_intervals):
                kept.append((a, b))
            else:
                dropped.append(mid)
        if not kept:
            raise InconclusiveClassification(
                "all candidate compact components move under the fiber return "
                "map", diagnostics={"dropped_heights": dropped,
                                    "depth": depth, "tol": tol})
        K = kept
        U = _interval_gaps(K)
        irrational = None
        if rot.is_rational:
            n_leaves = rot.rational.denominator
        else:
            n_leaves = None
            semi = semiconjugacy_to_rotation(F)
            irrational = {
                "rho": rot.value,
                "note": "irrational fiber rotation number: compact set carried "
                        "by the nonwandering set of the rotation factor",
                "semiconjugacy_defect": semi.defect,
            }
        subcases = _classify_subcases(F, K, U, n_leaves or 1, dropped, tol)
        return ClassificationReport(case=CASE_LAMINATED, theta=None,
                                    n_leaves=n_leaves, K=K, U=U,
                                    subcases=subcases,
                                    irrational_routing=irrational, **common)

    raise InconclusiveClassification(
        "no compact components detected, but the accessibility margin "
        f"10*tol = {10 * tol:.1e} is not met everywhere "
        f"(min-max displacement {compact.min_max_displacement:.3g})",
        diagnostics={"min_max_displacement": compact.min_max_displacement,
                     "depth": depth, "tol": tol})


def classification_is_stable(sys: SkewProductSystem,
                             report: ClassificationReport,
                             grid_size: int = 4096) -> bool:
    """Same case tag after doubling the depth and halving the tolerance."""
    again = classify(sys, depth=2 * report.depth, tol=0.5 * report.tol,
                     grid_size=grid_size)
    return again.case == report.case


# ---------------------------------------------------------------------------
# Birkhoff machinery

def _packed_for_kernel(sys: SkewProductSystem):
    if not (sys.fiber.is_plain and sys.is_product):
        return None
    theta, coeffs, freqs, phases = sys.fiber.packed()
    return (sys.base.matrix.astype(float), sys.base.inverse.astype(float),
            float(theta), coeffs, freqs, phases)


def _as_monomials(test_functions):
    if all(isinstance(tf, TrigMonomial) for tf in test_functions):
        d1 = len(test_functions[0].frequency)
        tf_freqs = np.array([tf.frequency for tf in test_functions], dtype=float)
        tf_phases = np.array([0 if tf.phase == "sin" else 1
                              for tf in test_functions], dtype=np.int8)
        return d1, tf_freqs, tf_phases
    return None


def birkhoff_sums_batched(sys: SkewProductSystem, test_functions, start,
                          n: int, direction: str = "forward",
                          n_batches: int = 100):
    """Per-batch sums of each test function along one orbit.

    Returns (sums, batch_len): sums has shape (n_test, n_batches); the orbit
    mean of function i is sums[i].sum() / n and the batch means give a
    standard error that respects slow mixing.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    v0 = np.asarray(start[0], dtype=float)
    z0 = float(start[1])
    packed = _packed_for_kernel(sys)
    mono = _as_monomials(test_functions)
    batch_len = n // n_batches
    if packed is not None and mono is not None:
        amat, ainv, theta, coeffs, freqs, phases = packed
        _d1, tf_freqs, tf_phases = mono
        mat = ainv if direction == "backward" else amat
        sums = _kernels.skew_batch_sums(
            mat, theta, coeffs, freqs, phases, v0.copy(), z0, int(n),
            tf_freqs, tf_phases, int(n_batches), direction == "backward")
        return sums, batch_len
    # generic fallback: explicit python iteration
    sums = np.zeros((len(test_functions), n_batches))
    p = (tuple(v0), z0)
    sgn = 1 if direction == "forward" else -1
    for k in range(n):
        b = min(k // batch_len, n_batches - 1)
        for i, tf in enumerate(test_functions):
            sums[i, b] += float(tf(np.asarray(p[0]), p[1]))
        p = step(sys, p, sgn)
    return sums, batch_len


def birkhoff_average(sys: SkewProductSystem, phi, start, n: int,
                     direction: str = "forward") -> float:
    """(1/n) sum of phi over the first n points of the (possibly inverse) orbit."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(phi, TrigMonomial):
        sums, _ = birkhoff_sums_batched(sys, [phi], start, n, direction,
                                        n_batches=1)
        return float(sums[0, 0]) / n
    total = 0.0
    p = (tuple(np.asarray(start[0], dtype=float)), float(start[1]))
    sgn = 1 if direction == "forward" else -1
    for _ in range(n):
        total += float(phi(np.asarray(p[0]), p[1]))
        p = step(sys, p, sgn)
    return total / n


def birkhoff_average_with_error(sys, phi, start, n, direction="forward",
                                n_batches: int = 100):
    """(mean, batch-means standard error) for one observable on one orbit."""
    sums, batch_len = birkhoff_sums_batched(sys, [phi], start, n, direction,
                                            n_batches)
    mean = float(sums.sum()) / n
    bm = sums[0, :] / batch_len
    stderr = float(np.std(bm, ddof=1) / np.sqrt(n_batches))
    return mean, stderr


# ---------------------------------------------------------------------------
# decomposition

@dataclass
class ComponentResult:
    support: object              # (a, b) interval, float height, or "full"
    kind: str                    # 'interval' | 'height' | 'full'
    table: list                  # per test function: dict of statistics


@dataclass
class DecompositionReport:
    components: list
    n: int
    n_orbits: int
    n_iters: int
    seed: int
    test_names: list


def _component_statistics(sys, test_functions, starts, n_iters, period,
                          n_batches=50):
    """Birkhoff means per start, thinned to every period-th orbit point."""
    packed = _packed_for_kernel(sys)
    n_test = len(test_functions)
    per_start = np.zeros((len(starts), n_test))
    per_start_err = np.zeros((len(starts), n_test))
    for si, (v0, z0) in enumerate(starts):
        if period == 1:
            sums, batch_len = birkhoff_sums_batched(
                sys, test_functions, (v0, z0), n_iters, "forward", n_batches)
            means = sums.sum(axis=1) / n_iters
            bm = sums / batch_len
            errs = np.std(bm, axis=1, ddof=1) / np.sqrt(bm.shape[1])
        else:
            n_total = n_iters * period
            if packed is not None:
                amat, _ainv, theta, coeffs, freqs, phases = packed
                out = np.empty((n_total, sys.base.dim + 1))
                _kernels.skew_orbit_samples(amat, theta, coeffs, freqs, phases,
                                            np.asarray(v0, dtype=float).copy(),
                                            float(z0), out, False)
                thin = out[::period]
            else:
                rows = []
                p = (tuple(v0), float(z0))
                for _ in range(n_iters):
                    rows.append(np.concatenate([np.asarray(p[0]), [p[1]]]))
                    p = step(sys, p, period)
                thin = np.asarray(rows)
            vals = np.stack([tf(thin[:, :-1], thin[:, -1])
                             for tf in test_functions])
            means = vals.mean(axis=1)
            k = vals.shape[1] // n_batches
            bm = vals[:, : k * n_batches].reshape(n_test, n_batches, k).mean(axis=2)
            errs = np.std(bm, axis=1, ddof=1) / np.sqrt(n_batches)
        per_start[si] = means
        per_start_err[si] = errs
    table = []
    for i, tf in enumerate(test_functions):
        table.append({
            "name": tf.name if isinstance(tf, TrigMonomial) else f"phi{i}",
            "mean": float(per_start[:, i].mean()),
            "dispersion": float(np.std(per_start[:, i], ddof=1))
            if len(starts) > 1 else 0.0,
            "clt_band": float(np.median(per_start_err[:, i])),
            "per_start_means": per_start[:, i].tolist(),
        })
    return table


def decompose(sys: SkewProductSystem, report: ClassificationReport,
              n_orbits: int = 8, n_iters: int = 100_000,
              test_functions=None, seed: int = 0,
              n_heights: int = 8) -> DecompositionReport:
    """Statistical validation of the per-component ergodic averages."""
    d = sys.base.dim
    if test_functions is None:
        test_functions = default_test_family(d)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    components = []

    def starts_at_height(z0):
        return [(rng.random(d), float(z0)) for _ in range(n_orbits)]

    def starts_in_interval(a, b, margin_frac=0.05):
        w = (b - a) * margin_frac
        return [(rng.random(d), float((a + w + rng.random() * (b - a - 2 * w)) % 1.0))
                for _ in range(n_orbits)]

    if report.case == CASE_ACCESSIBLE:
        period = 1
        starts = [(rng.random(d), rng.random()) for _ in range(n_orbits)]
        table = _component_statistics(sys, test_functions, starts, n_iters, period)
        components.append(ComponentResult(support="full", kind="full", table=table))
    elif report.case == CASE_INTEGRABLE:
        theta = report.theta
        period = theta.denominator if isinstance(theta, Fraction) else 1
        for j in range(n_heights):
            z0 = j / n_heights
            table = _component_statistics(sys, test_functions,
                                          starts_at_height(z0), n_iters, period)
            components.append(ComponentResult(support=float(z0), kind="height",
                                              table=table))
    else:
        period = report.n_leaves or 1
        for a, b in report.U:
            table = _component_statistics(sys, test_functions,
                                          starts_in_interval(a, b), n_iters,
                                          period)
            components.append(ComponentResult(support=(float(a % 1.0), float(b)),
                                              kind="interval", table=table))
        for a, b in report.K:
            z0 = (a + 0.5 * (b - a)) % 1.0
            table = _component_statistics(sys, test_functions,
                                          starts_at_height(z0), n_iters, period)
            components.append(ComponentResult(support=float(z0), kind="height",
                                              table=table))
    return DecompositionReport(
        components=components, n=period, n_orbits=n_orbits, n_iters=n_iters,
        seed=seed,
        test_names=[t["name"] for t in components[0].table] if components else [])


# ---------------------------------------------------------------------------
# projection collapsing compact classes

@dataclass
class ProjectionMap:
    """Monotone degree-one reparametrization collapsing compact classes.

    Piecewise linear: constant on each detected class, affinely stretched on
    the complement so the image circle keeps total length one.
    """

    nodes_z: np.ndarray
    nodes_p: np.ndarray
    class_points: list
    sup_error: float

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        frac = np.mod(z, 1.0)
        vals = np.interp(frac, self.nodes_z, self.nodes_p)
        out = vals + (z - frac)
        return out if out.ndim else float(out)


def build_projection(sys: SkewProductSystem,
                     report: ClassificationReport) -> ProjectionMap:
    """Collapse each compact class to a point; Lebesgue is preserved up to
    the total class length, which the caller checks against the 1e-3 budget."""
    if report.case == CASE_ACCESSIBLE:
        raise ValueError("projection is defined for the integrable and "
                         "laminated cases only")
    if report.case == CASE_INTEGRABLE:
        nodes_z = np.array([0.0, 1.0])
        nodes_p = np.array([0.0, 1.0])
        return ProjectionMap(nodes_z=nodes_z, nodes_p=nodes_p,
                             class_points=[], sup_error=0.0)
    K = sorted((a % 1.0, (a % 1.0) + (b - a)) for a, b in report.K)
    ell = _total_length(K)
    scale = 1.0 / (1.0 - ell)
    zs = [0.0]
    ps = [0.0]
    acc_free = 0.0   # free (non-class) length consumed so far
    cursor = 0.0
    class_points = []
    for a, b in K:
        a_in = a % 1.0
        if a_in < cursor:   # wrapping class handled at the seam
            continue
        acc_free += a_in - cursor
        p_here = acc_free * scale
        zs += [a_in, min(b, 1.0)]
        ps += [p_here, p_here]
        class_points.append(p_here)
        cursor = min(b, 1.0)
    acc_free += 1.0 - cursor
    zs.append(1.0)
    ps.append(acc_free * scale)
    nodes_z = np.array(zs)
    nodes_p = np.array(ps) / ps[-1]  # exact degree one
    proj = ProjectionMap(nodes_z=nodes_z, nodes_p=nodes_p,
                         class_points=class_points, sup_error=0.0)
    grid = np.linspace(0.0, 1.0, 4097)
    proj.sup_error = float(np.max(np.abs(proj(grid) - grid)))
    return proj
