"""A 3-torus diffeomorphism with invariant graphs of unbounded slope.

The 2-d factor g(x, y) = (psi(x), lam*y + forcing(x)) with psi(x) = x +
(2/3) sin x and lam the golden ratio has an invariant "unstable" graph u over
(-pi, pi) and an invariant "stable" graph c over (0, pi], both solving

    w(psi(x)) = lam * w(x) + forcing(x),

u by summing the cocycle backward into the repelling psi-fixed point 0 and c
by summing it forward into the attracting fixed point pi.  Adding a
contracting third coordinate -z/lam and quotienting by a lattice that the
linear (y, z) part preserves gives a 3-torus map whose strong-unstable/stable
2-plane foliation has exactly one compact leaf.  The module builds the graphs
with certified residuals, assembles the 3-d system with its exact Jacobian,
checks the pointwise cone inequalities at sampled nonwandering points, and
runs the compact-leaf census.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GOLDEN = 0.5 * (1.0 + np.sqrt(5.0))
FORCINGS = ("cos_x", "sin_x_minus_x")
GRAPH_RESIDUAL_TOL = 1e-9
LATTICE_TOL = 1e-12

# contraction budget for the backward u-series: once the pulled-back points
# are within 0.5 of the fixed point 0, consecutive terms shrink by at least
# lam / psi'(w)^2 <= lam * (1/1.585)^2 ~ 0.645 because the forcing is
# quadratically flat at 0 (forcing'(0) = 0 for both variants)
_U_TAIL_RATIO = 0.645
_SERIES_STOP = 5e-13


class GraphConvergenceError(RuntimeError):
    def __init__(self, message: str, tail_estimate: float):
        super().__init__(f"{message} (estimated tail {tail_estimate:.3g})")
        self.tail_estimate = tail_estimate


@dataclass(frozen=True)
class IncoherentParameters:
    lam: float = GOLDEN
    forcing: str = "cos_x"

    def __post_init__(self):
        if self.forcing not in FORCINGS:
            raise ValueError(f"forcing must be one of {FORCINGS}")

    def validate(self) -> None:
        if abs(self.lam * self.lam - self.lam - 1.0) > 1e-14:
            raise ValueError(
                f"lam = {self.lam!r} does not satisfy lam^2 = lam + 1")

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        return x + (2.0 / 3.0) * np.sin(x)

    def psi_prime(self, x):
        return 1.0 + (2.0 / 3.0) * np.cos(np.asarray(x, dtype=float))

    def psi_inverse(self, y):
        y = np.asarray(y, dtype=float)
        x = y.copy()
        for _ in range(80):
            r = self.psi(x) - y
            if np.max(np.abs(r)) < 1e-15:
                break
            x = x - np.clip(r / self.psi_prime(x), -0.7, 0.7)
        return x

    def forcing_value(self, x):
        x = np.asarray(x, dtype=float)
        if self.forcing == "cos_x":
            return np.cos(x)
        return np.sin(x) - x

    def forcing_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.forcing == "cos_x":
            return -np.sin(x)
        return np.cos(x) - 1.0

    @property
    def graph_fixed_value(self) -> float:
        """The invariant-graph value over x = 0: forcing(0) / (1 - lam)."""
        return float(self.forcing_value(0.0)) / (1.0 - self.lam)


def u_series(params: IncoherentParameters, x, depth: int = 300):
    """Unstable-graph values by backward summation into the repelling point 0.

    u(x) = u(0) + sum_{k>=1} lam^{k-1} [forcing(psi^{-k} x) - forcing(0)];
    the subtraction makes the series converge since both forcings are
    quadratically flat at 0 while psi^{-1} contracts toward 0 at rate 3/5.
    """
    params.validate()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) >= np.pi):
        raise ValueError("the unstable graph lives over (-pi, pi)")
    f0 = float(params.forcing_value(0.0))
    acc = np.zeros_like(x)
    w = x.copy()
    coef = 1.0
    max_term = np.inf
    for _k in range(1, depth + 1):
        w = params.psi_inverse(w)
        term = coef * (params.forcing_value(w) - f0)
        acc += term
        coef *= params.lam
        max_term = float(np.max(np.abs(term)))
        if max_term < _SERIES_STOP and float(np.max(np.abs(w))) < 0.5:
            break
    else:
        tail = max_term * _U_TAIL_RATIO / (1.0 - _U_TAIL_RATIO)
        raise GraphConvergenceError(
            f"unstable-graph series not converged after {depth} terms", tail)
    return params.graph_fixed_value + acc


def c_series(params: IncoherentParameters, x, depth: int = 160):
    """Stable-graph values by forward summation into the attracting point pi.

    c(x) = -sum_{k>=0} lam^{-(k+1)} forcing(psi^k x); geometric in 1/lam
    because the forcing stays bounded while psi^k x -> pi.
    """
    params.validate()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    acc = np.zeros_like(x)
    w = x.copy()
    coef = 1.0 / params.lam
    f_sup = float(np.max(np.abs(params.forcing_value(
        np.linspace(-np.pi, np.pi, 1001)))))
    for _k in range(depth):
        acc -= coef * params.forcing_value(w)
        w = params.psi(w)
        coef /= params.lam
        tail = coef * f_sup / (1.0 - 1.0 / params.lam)
        if tail < _SERIES_STOP:
            break
    else:
        raise GraphConvergenceError(
            f"stable-graph series not converged after {depth} terms", tail)
    return acc


@dataclass
class InvariantGraph:
    which: str                   # 'unstable_u' or 'stable_c'
    domain: tuple
    xs: np.ndarray
    values: np.ndarray
    residual: float
    params: IncoherentParameters

    def __call__(self, x):
        if self.which == "unstable_u":
            out = u_series(self.params, x)
        else:
            out = c_series(self.params, x)
        return out if np.ndim(x) else float(out[0])

    def grid_slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.xs)


def _graph_residual(params, xs, vals, series_fn) -> float:
    """max |w(psi(x)) - lam w(x) - forcing(x)| with w(psi(x)) re-summed."""
    lhs = series_fn(params, params.psi(xs))
    rhs = params.lam * vals + params.forcing_value(xs)
    return float(np.max(np.abs(lhs - rhs)))


def build_unstable_graph(params: IncoherentParameters, grid: int = 2000,
                         depth: int = 300,
                         margin: float = 1e-3) -> InvariantGraph:
    """The graph u on (-pi + margin, pi - margin) with certified residual.

    The margin keeps the evaluation conditioned: |u'| grows without bound at
    the endpoints, so input rounding of order eps is amplified by |u'(x)|.
    """
    xs = np.linspace(-np.pi + margin, np.pi - margin, grid)
    vals = u_series(params, xs, depth)
    residual = _graph_residual(params, xs, vals, u_series)
    if residual > GRAPH_RESIDUAL_TOL:
        raise GraphConvergenceError(
            f"unstable-graph residual {residual:.3g} exceeds "
            f"{GRAPH_RESIDUAL_TOL}; enlarge the boundary margin", residual)
    return InvariantGraph(which="unstable_u",
                          domain=(-np.pi + margin, np.pi - margin),
                          xs=xs, values=vals, residual=residual, params=params)


def build_stable_graph(params: IncoherentParameters, grid: int = 2000,
                       depth: int = 160, lo: float = 1e-3) -> InvariantGraph:
    """The graph c on [lo, pi] (pi included) with certified residual."""
    xs = np.linspace(lo, np.pi, grid)
    vals = c_series(params, xs, depth)
    residual = _graph_residual(params, xs, vals, c_series)
    if residual > GRAPH_RESIDUAL_TOL:
        raise GraphConvergenceError(
            f"stable-graph residual {residual:.3g} exceeds "
            f"{GRAPH_RESIDUAL_TOL}", residual)
    return InvariantGraph(which="stable_c", domain=(lo, np.pi), xs=xs,
                          values=vals, residual=residual, params=params)


def stable_graph_bound(params: IncoherentParameters) -> float:
    """C with g^{-1}([-C, C] x [0, pi]) inside itself, so sup|c| <= C."""
    f_sup = float(np.max(np.abs(params.forcing_value(
        np.linspace(0.0, np.pi, 2001)))))
    return f_sup / (params.lam - 1.0)


def slope_at(params: IncoherentParameters, which: str, x: float,
             h: float = 1e-4) -> float:
    """One-sided difference quotient pointing into the graph domain."""
    if which == "unstable_u":
        side = -1.0 if x > 0 else 1.0
        vals = u_series(params, np.array([x, x + side * h]))
    elif which == "stable_c":
        side = 1.0 if x < 0.5 * np.pi else -1.0
        vals = c_series(params, np.array([x, x + side * h]))
    else:
        raise ValueError(f"unknown graph {which!r}")
    return float((vals[1] - vals[0]) / (side * h))


def slope_refinement(params: IncoherentParameters, which: str, x: float,
                     h: float = 1e-4, levels: int = 3) -> list:
    """Difference-quotient magnitudes at h, h/2, h/4, ... for threshold tests."""
    return [slope_at(params, which, x, h / 2**j) for j in range(levels)]


def oddness_defect(params: IncoherentParameters, grid: int = 512) -> float:
    """sup |c(-x) + c(x)|: zero for the odd forcing sin x - x."""
    xs = np.linspace(1e-3, np.pi - 1e-6, grid)
    return float(np.max(np.abs(c_series(params, -xs) + c_series(params, xs))))


# ---------------------------------------------------------------------------
# the 3-d system

def _plane_lattice_basis(lam: float) -> np.ndarray:
    """Columns b1, b2 in the (y, z) plane with diag(lam, -1/lam) B = B C,
    C = [[1, 1], [1, 0]]: the scaled eigenbasis of C."""
    return np.array([[1.0, 1.0 / lam], [-1.0, lam]])


@dataclass
class Incoherent3DSystem:
    params: IncoherentParameters
    lattice: np.ndarray          # 3x3, columns are lattice generators

    def map_point(self, p):
        p = np.asarray(p, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        return np.stack([self.params.psi(x),
                         self.params.lam * y + self.params.forcing_value(x),
                         -z / self.params.lam], axis=-1)

    def jacobian(self, x: float) -> np.ndarray:
        lam = self.params.lam
        return np.array([
            [float(self.params.psi_prime(x)), 0.0, 0.0],
            [float(self.params.forcing_derivative(x)), lam, 0.0],
            [0.0, 0.0, -1.0 / lam],
        ])

    def fixed_points(self) -> list:
        lam = self.params.lam
        out = []
        for x0 in (0.0, np.pi):
            y0 = float(self.params.forcing_value(x0)) / (1.0 - lam)
            out.append(np.array([x0, y0, 0.0]))
        return out

    def equivariance_residual(self, n_samples: int = 16, seed: int = 0) -> float:
        """max over samples and generators of the non-integrality of
        lattice coordinates of f(p + l) - f(p)."""
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-2.0, 2.0, size=(n_samples, 3))
        worst = 0.0
        for j in range(3):
            ell = self.lattice[:, j]
            delta = self.map_point(pts + ell) - self.map_point(pts)
            coords = np.linalg.solve(self.lattice, delta.T).T
            worst = max(worst, float(np.max(np.abs(coords - np.round(coords)))))
        return worst


def build_3d_system(params: IncoherentParameters) -> Incoherent3DSystem:
    """f(x,y,z) = (psi(x), lam y + forcing(x), -z/lam) with its quotient lattice.

    The x-period 2pi translate must be corrected in y for the non-periodic
    forcing sin x - x: forcing(x + 2pi) = forcing(x) - 2pi forces the skewed
    generator (2pi, 2pi/(lam-1), 0), and 2pi/(lam-1) = 2pi lam.
    """
    params.validate()
    lam = params.lam
    b = _plane_lattice_basis(lam)
    lattice = np.zeros((3, 3))
    if params.forcing == "cos_x":
        lattice[:, 0] = (2.0 * np.pi, 0.0, 0.0)
    else:
        lattice[:, 0] = (2.0 * np.pi, 2.0 * np.pi / (lam - 1.0), 0.0)
    lattice[1:, 1] = b[:, 0]
    lattice[1:, 2] = b[:, 1]
    system = Incoherent3DSystem(params=params, lattice=lattice)
    res = system.equivariance_residual()
    if res > LATTICE_TOL:
        raise ValueError(
            f"lattice equivariance residual {res:.3g} exceeds {LATTICE_TOL}")
    return system


# ---------------------------------------------------------------------------
# cone inequalities at sampled nonwandering points

@dataclass
class SplittingSample:
    point: np.ndarray
    v_u: np.ndarray
    v_c: np.ndarray
    v_s: np.ndarray
    label: str


def _fd_slope(xs: np.ndarray, vals: np.ndarray, j: int) -> float:
    if 0 < j < xs.size - 1:
        return float((vals[j + 1] - vals[j - 1]) / (xs[j + 1] - xs[j - 1]))
    if j == 0:
        return float((vals[1] - vals[0]) / (xs[1] - xs[0]))
    return float((vals[-1] - vals[-2]) / (xs[-1] - xs[-2]))


def sample_splitting(u_graph: InvariantGraph, c_graph: InvariantGraph,
                     n_side: int = 2) -> list:
    """Candidate E^u/E^c/E^s directions at graph points nearest x = 0 and pi.

    Directions come from finite differences of the constructed graphs; the
    stable direction is the exact z-axis.
    """
    samples = []
    for x_star, label in ((0.0, "near_zero"), (np.pi, "near_pi")):
        ju = int(np.argmin(np.abs(u_graph.xs - x_star)))
        for j in range(max(0, ju - n_side), min(u_graph.xs.size, ju + n_side + 1)):
            x_j = float(u_graph.xs[j])
            su = _fd_slope(u_graph.xs, u_graph.values, j)
            jc = int(np.argmin(np.abs(c_graph.xs - abs(x_j))))
            sc = _fd_slope(c_graph.xs, c_graph.values, jc)
            v_u = np.array([1.0, su, 0.0])
            v_c = np.array([1.0, sc, 0.0])
            samples.append(SplittingSample(
                point=np.array([x_j, float(u_graph.values[j]), 0.0]),
                v_u=v_u / np.linalg.norm(v_u),
                v_c=v_c / np.linalg.norm(v_c),
                v_s=np.array([0.0, 0.0, 1.0]),
                label=label))
    return samples


def cone_check(system: Incoherent3DSystem, samples, k_max: int = 20,
               margin: float = 1e-3, return_k: bool = False):
    """Strict growth ordering ||Tf^k v_s|| < ||Tf^k v_c|| < ||Tf^k v_u||.

    Searches for a single power k <= k_max at which both strict inequalities
    hold with relative margin at every sample; Jacobian products run along
    the orbit of each sample point.
    """
    for k in range(1, k_max + 1):
        ok = True
        for s in samples:
            x = float(s.point[0])
            j = np.eye(3)
            for _ in range(k):
                j = system.jacobian(x) @ j
                x = float(system.params.psi(x))
            gu = np.linalg.norm(j @ s.v_u)
            gc = np.linalg.norm(j @ s.v_c)
            gs = np.linalg.norm(j @ s.v_s)
            if not (gc > gs * (1.0 + margin) and gu > gc * (1.0 + margin)):
                ok = False
                break
        if ok:
            return (True, k) if return_k else True
    return (False, None) if return_k else False


# ---------------------------------------------------------------------------
# compact-leaf census for the strong-unstable/stable plane foliation

@dataclass
class LeafCensus:
    x0_torus_invariant: bool
    x0_torus_residual: float
    pi_torus_invariant: bool
    pi_torus_lattice_residual: float
    vertical_slope_evidence: list    # |u| difference-quotient magnitudes at pi
    horizontal_slope_at_zero: float  # |u'| near 0: the 0-torus is not a leaf
    escapes: list                    # (offset b, steps to escape) per sample
    all_sampled_leaves_escape: bool

    @property
    def unique_compact_leaf(self) -> bool:
        return (self.x0_torus_invariant and self.pi_torus_invariant
                and self.all_sampled_leaves_escape
                and self.vertical_slope_evidence[-1]
                > self.vertical_slope_evidence[0]
                and abs(self.horizontal_slope_at_zero) < 1.0)


def compact_leaf_census(params: IncoherentParameters,
                        offsets=(0.01, -0.25, 0.8, -1.3, 0.0),
                        x_start: float = 0.8,
                        max_steps: int = 120) -> LeafCensus:
    """Certify the leaf picture of the unstable/stable plane foliation.

    The plane field is spanned by the tangents to the translated unstable
    graphs and the z-axis.  The x = pi vertical 2-torus is its one compact
    leaf (the graph slope blows up there, so the planes turn vertical); the
    x = 0 torus is f-invariant but transverse to the planes; every other
    sampled leaf escapes a fundamental domain because the graph-translate
    offset b is scaled to lam * b by the map and the b = 0 leaf runs off to
    infinity along the graph itself.
    """
    params.validate()
    system = build_3d_system(params)
    lam = params.lam

    # f fixes the plane x = 0 (forcing-independent: psi(0) = 0 exactly) and
    # its (y, z) action is affine with the lattice-preserving linear part
    rng = np.random.default_rng(1)
    pts0 = np.column_stack([np.zeros(8), rng.uniform(-2, 2, 8),
                            rng.uniform(-2, 2, 8)])
    imgs0 = system.map_point(pts0)
    x0_res = float(np.max(np.abs(imgs0[:, 0])))
    x0_ok = x0_res < 1e-12

    # the x = pi plane: psi(pi) = pi up to sin(pi_float) rounding, and the
    # induced (y, z) torus map needs D Lambda = Lambda
    pi_res = abs(float(params.psi(np.pi)) - np.pi)
    d_mat = np.array([[lam, 0.0], [0.0, -1.0 / lam]])
    b = _plane_lattice_basis(lam)
    coords = np.linalg.solve(b, d_mat @ b)
    lattice_res = float(np.max(np.abs(coords - np.round(coords))))
    pi_ok = pi_res < 1e-12 and lattice_res < LATTICE_TOL

    # the planes turn vertical at pi (|u| difference quotients blow up) and
    # stay transverse to the x = 0 torus (u-slope near 0 is flat)
    evidence = [abs(s) for s in
                slope_refinement(params, "unstable_u", np.pi - 1e-3, 1e-4, 3)]
    slope0 = slope_at(params, "unstable_u", 1e-3, 1e-4)

    # leaf escape: the leaf through (x0, u(x0) + b) maps to offset lam * b,
    # and offset 0 rides the graph to infinity
    diam = 2.0 * np.pi + float(np.max(np.abs(system.lattice))) * 3.0
    escapes = []
    all_escape = True
    for b_off in offsets:
        x = x_start
        y = float(u_series(params, x)[0]) + b_off
        steps = None
        for n in range(1, max_steps + 1):
            y = lam * y + float(params.forcing_value(x))
            x = float(params.psi(x))
            off = (y - float(u_series(params, np.array([x]))[0])
                   if abs(x) < np.pi - 1e-12 else np.inf)
            if abs(y) > diam or abs(off) > diam:
                steps = n
                break
        escapes.append((float(b_off), steps))
        if steps is None:
            all_escape = False
    return LeafCensus(x0_torus_invariant=x0_ok, x0_torus_residual=x0_res,
                      pi_torus_invariant=pi_ok,
                      pi_torus_lattice_residual=lattice_res,
                      vertical_slope_evidence=evidence,
                      horizontal_slope_at_zero=slope0,
                      escapes=escapes,
                      all_sampled_leaves_escape=all_escape)


def graph_rows(graph: InvariantGraph):
    """Rows (x, value) for delimited export."""
    return ["x", "value"], np.column_stack([graph.xs, graph.values])
