"""Skew-product systems over toral automorphisms.

A system is a hyperbolic base automorphism A, an optional commuting gluing B
(mapping-torus identification (v,t) ~ (Bv, t-1)), and an analytic family of
fiber circle maps phi_v(z) = z + theta + sum of trigonometric terms.  The four
perturbation families (rotation, shear by base, localized, conjugation) all
stay inside this model; conjugated fibers are evaluated exactly through
monotone root-finding rather than re-expanded.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .torus import (
    ToralAutomorphism, as_int_matrix, canonicalize_coords, check_commuting,
    check_hyperbolic, compute_splitting, format_int_matrix, identity_automorphism,
    int_inverse, parse_int_matrix,
)
from .circle import MonotoneCircleLift, DEFAULT_GRID

DIFFEO_MARGIN = 0.05
MAX_STEP = 10**8


@dataclass(frozen=True)
class TrigTerm:
    """coefficient * sin/cos(2 pi * frequency . (base coords..., fiber coord))."""

    coefficient: float
    frequency: tuple
    phase: str  # 'sin' or 'cos'

    def __post_init__(self):
        if self.phase not in ("sin", "cos"):
            raise ValueError(f"phase must be sin or cos, got {self.phase!r}")
        if all(f == 0 for f in self.frequency) and self.phase == "sin":
            raise ValueError("all-zero frequency is only allowed as a cos constant")
        if any(int(f) != f for f in self.frequency):
            raise ValueError("frequencies must be integers")

    @property
    def fiber_frequency(self) -> int:
        return int(self.frequency[-1])


def _pack_terms(terms, d):
    n = len(terms)
    coeffs = np.zeros(n)
    freqs = np.zeros((n, d + 1))
    phases = np.zeros(n, dtype=np.int8)
    for i, t in enumerate(terms):
        if len(t.frequency) != d + 1:
            raise ValueError(
                f"term frequency length {len(t.frequency)} does not match base dim {d}")
        coeffs[i] = t.coefficient
        freqs[i] = t.frequency
        phases[i] = 0 if t.phase == "sin" else 1
    return coeffs, freqs, phases


class FiberMapFamily:
    """phi_v(z) = z + theta + trig terms; a circle diffeo in z for every base v."""

    is_plain = True

    def __init__(self, base_dim: int, theta: float = 0.0, terms=()):
        self.base_dim = int(base_dim)
        self.theta = float(theta)
        self.terms = tuple(terms)
        self._coeffs, self._freqs, self._phases = _pack_terms(self.terms, self.base_dim)

    def phi(self, v, z):
        """Lift value of phi_v at z; broadcasts v (..., d) against z."""
        v = np.asarray(v, dtype=float)
        z = np.asarray(z, dtype=float)
        if self._coeffs.size == 0:
            return z + self.theta
        base_part = v @ self._freqs[:, :-1].T  # (..., n_terms)
        acc = np.zeros_like(z, dtype=float)
        for i, t in enumerate(self.terms):
            arg = 2.0 * np.pi * (base_part[..., i] if base_part.ndim > 1
                                 else base_part[i]) + 2.0 * np.pi * self._freqs[i, -1] * z
            fn = np.sin if t.phase == "sin" else np.cos
            acc = acc + self._coeffs[i] * fn(arg)
        return z + self.theta + acc

    def dphi_dz(self, v, z):
        v = np.asarray(v, dtype=float)
        z = np.asarray(z, dtype=float)
        if self._coeffs.size == 0 or not np.any(self._freqs[:, -1]):
            return np.ones_like(z)
        base_part = v @ self._freqs[:, :-1].T
        acc = np.zeros_like(z, dtype=float)
        for i, t in enumerate(self.terms):
            fz = self._freqs[i, -1]
            if fz == 0.0:
                continue
            arg = 2.0 * np.pi * (base_part[..., i] if base_part.ndim > 1
                                 else base_part[i]) + 2.0 * np.pi * fz * z
            dfn = np.cos if t.phase == "sin" else lambda a: -np.sin(a)
            acc = acc + self._coeffs[i] * 2.0 * np.pi * fz * dfn(arg)
        return 1.0 + acc

    def phi_inverse(self, v, z_target):
        """Solve phi_v(x) = z_target on the lift (Newton, tol 1e-13)."""
        z_target = np.asarray(z_target, dtype=float)
        x = z_target - self.theta
        for _ in range(60):
            f = self.phi(v, x) - z_target
            if np.max(np.abs(f)) < 1e-14:
                break
            step = f / self.dphi_dz(v, x)
            x = x - np.clip(step, -0.5, 0.5)
        return x

    @property
    def has_fiber_dependence(self) -> bool:
        return bool(np.any(self._freqs[:, -1]))

    def packed(self):
        return self.theta, self._coeffs, self._freqs, self._phases

    def validate(self, margin: float = DIFFEO_MARGIN, n_grid: int = 256):
        """Check min over a grid of dphi/dz > margin; name the worst point."""
        if not self.has_fiber_dependence:
            return 1.0
        d = self.base_dim
        nv = n_grid if d == 2 else max(16, int(round(n_grid ** (2.0 / 3.0))))
        nz = n_grid
        zs = np.arange(nz) / nz
        axes = [np.arange(nv) / nv] * d
        worst = np.inf
        worst_pt = None
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        chunk = max(1, 2**18 // nz)
        for i0 in range(0, mesh.shape[0], chunk):
            vs = mesh[i0:i0 + chunk]
            vals = self.dphi_dz(vs[:, None, :], zs[None, :])
            j = np.unravel_index(np.argmin(vals), vals.shape)
            if vals[j] < worst:
                worst = float(vals[j])
                worst_pt = (tuple(vs[j[0]]), float(zs[j[1]]))
        if worst <= margin:
            raise ValueError(
                f"fiber family fails the circle-diffeo margin: dphi/dz = {worst:.6g}"
                f" <= {margin} at base {worst_pt[0]}, height {worst_pt[1]}")
        return worst

    def shifted(self, dtheta: float) -> "FiberMapFamily":
        return FiberMapFamily(self.base_dim, (self.theta + dtheta) % 1.0, self.terms)

    def with_terms(self, extra_terms) -> "FiberMapFamily":
        return FiberMapFamily(self.base_dim, self.theta, self.terms + tuple(extra_terms))


class ConjugatedFiberFamily:
    """h_{Av}^{-1} o phi_v o h_v for a trig conjugator h; evaluated exactly.

    Trig polynomials are not closed under conjugation, so values come from
    monotone root-finding on h instead of re-expansion.
    """

    is_plain = False

    def __init__(self, inner, conjugator: FiberMapFamily, base_matrix: np.ndarray):
        if conjugator.theta != 0.0:
            raise ValueError("conjugator must fix the zero rotation")
        self.inner = inner
        self.conjugator = conjugator
        self.base_matrix = np.asarray(base_matrix, dtype=float)
        self.base_dim = inner.base_dim
        self.theta = inner.theta
        self.terms = inner.terms

    def _av(self, v):
        v = np.asarray(v, dtype=float)
        return (self.base_matrix @ np.moveaxis(np.atleast_2d(v), -1, 0)).T.reshape(np.shape(v))

    def phi(self, v, z):
        h = self.conjugator
        w = h.phi(v, z)
        u = self.inner.phi(v, w)
        return h.phi_inverse(self._av(v), u)

    def dphi_dz(self, v, z):
        h = self.conjugator
        w = h.phi(v, z)
        val = self.phi(v, z)
        return (self.inner.dphi_dz(v, w) * h.dphi_dz(v, z)
                / h.dphi_dz(self._av(v), val))

    def phi_inverse(self, v, z_target):
        h = self.conjugator
        u = h.phi(self._av(v), np.asarray(z_target, dtype=float))
        w = self.inner.phi_inverse(v, u)
        return h.phi_inverse(v, w)

    @property
    def has_fiber_dependence(self) -> bool:
        return True

    def validate(self, margin: float = DIFFEO_MARGIN, n_grid: int = 32):
        d = self.base_dim
        axes = [np.arange(n_grid) / n_grid] * d
        zs = np.arange(n_grid) / n_grid
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        worst = np.inf
        worst_pt = None
        for vrow in mesh:
            vals = self.dphi_dz(vrow, zs)
            j = int(np.argmin(vals))
            if vals[j] < worst:
                worst = float(vals[j])
                worst_pt = (tuple(vrow), float(zs[j]))
        if worst <= margin:
            raise ValueError(
                f"conjugated fiber family fails the circle-diffeo margin: "
                f"dphi/dz = {worst:.6g} <= {margin} at base {worst_pt[0]}, "
                f"height {worst_pt[1]}")
        return worst


@dataclass(frozen=True)
class SkewProductSystem:
    base: ToralAutomorphism
    gluing: ToralAutomorphism
    fiber: object  # FiberMapFamily or ConjugatedFiberFamily
    phase_space: str = "mapping_torus"

    @property
    def is_product(self) -> bool:
        return self.gluing.is_identity

    @property
    def dim(self) -> int:
        return self.base.dim


def _check_equivariance(base, gluing, fiber, tol=1e-12, n_grid=8):
    """phi_{Bv}(t-1) = phi_v(t) - 1 must hold for the map to descend."""
    d = base.dim
    axes = [np.arange(n_grid) / n_grid] * d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    ts = np.arange(n_grid) / n_grid + 0.0381
    worst = 0.0
    bmat = gluing.matrix.astype(float)
    for vrow in mesh:
        lhs = fiber.phi(bmat @ vrow, ts - 1.0)
        rhs = fiber.phi(vrow, ts) - 1.0
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    if worst > tol:
        raise ValueError(
            f"fiber family is not equivariant under the gluing: residual {worst:.3g}")
    return worst


def make_system(base: ToralAutomorphism, gluing: ToralAutomorphism,
                fiber) -> SkewProductSystem:
    if not check_hyperbolic(base.matrix):
        raise ValueError("base automorphism must be hyperbolic")
    if not check_commuting(base.matrix, gluing.matrix):
        raise ValueError("base and gluing must commute")
    fiber.validate()
    if not gluing.is_identity:
        _check_equivariance(base, gluing, fiber)
    return SkewProductSystem(base=base, gluing=gluing, fiber=fiber)


def make_prototype(a, b=None) -> SkewProductSystem:
    """The product-like system (v,t) -> (Av, t) on the mapping torus of B."""
    base = a if isinstance(a, ToralAutomorphism) else compute_splitting(a)
    if b is None:
        gluing = identity_automorphism(base.dim)
    elif isinstance(b, ToralAutomorphism):
        gluing = b
    else:
        bm = as_int_matrix(b)
        gluing = ToralAutomorphism(bm, int_inverse(bm),
                                   np.zeros((0, base.dim)), np.zeros((0, base.dim)),
                                   np.zeros(0), np.zeros(0))
    fiber = FiberMapFamily(base.dim, theta=0.0, terms=())
    return make_system(base, gluing, fiber)


def perturb(sys: SkewProductSystem, method: str, *, theta: float = 0.0,
            terms=(), window=None) -> SkewProductSystem:
    """One of the four perturbation families; returns a new validated system."""
    terms = tuple(terms)
    if method == "rotation":
        fiber = sys.fiber.shifted(theta) if sys.fiber.is_plain else None
        if fiber is None:
            raise ValueError("rotation perturbation requires a plain trig fiber")
    elif method == "fiber_shear":
        if any(t.fiber_frequency != 0 for t in terms):
            raise ValueError("fiber_shear terms must depend only on base coordinates")
        fiber = sys.fiber.with_terms(terms)
    elif method == "localized":
        fiber = sys.fiber.with_terms(terms)
        if window is not None:
            _check_window_fixed(fiber.base_dim, terms, window)
    elif method == "conjugate":
        conj = FiberMapFamily(sys.base.dim, 0.0, terms)
        conj.validate()
        fiber = ConjugatedFiberFamily(sys.fiber, conj, sys.base.matrix)
    else:
        raise ValueError(f"unknown perturbation method {method!r}")
    return make_system(sys.base, sys.gluing, fiber)


def _check_window_fixed(d, terms, window, n_grid=64, tol=1e-12):
    """The added terms must vanish identically on each declared fixed height."""
    probe = FiberMapFamily(d, 0.0, terms)
    axes = [np.arange(n_grid) / n_grid] * d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    for z0 in window:
        vals = np.array([probe.phi(vrow, np.array([z0]))[0] - z0 for vrow in mesh])
        if np.max(np.abs(vals)) > tol:
            raise ValueError(
                f"localized window height {z0} is not fixed by the added terms "
                f"(max residual {np.max(np.abs(vals)):.3g})")


def _canonical_pair(sys, v, t):
    v = np.asarray(v, dtype=float)
    k = int(np.floor(t))
    t_new = float(t) - k
    if t_new >= 1.0:
        t_new = 0.0
        k += 1
    if k != 0 and not sys.gluing.is_identity:
        step = sys.gluing.matrix if k > 0 else sys.gluing.inverse
        for _ in range(abs(k)):
            v = canonicalize_coords(step.astype(float) @ v)
    return canonicalize_coords(v), t_new


def step(sys: SkewProductSystem, p, n: int = 1):
    """n-fold application of the skew map (negative n uses the inverse)."""
    if abs(n) > MAX_STEP:
        raise ValueError(f"|n| exceeds the iteration guard {MAX_STEP}")
    v, z = p
    v = canonicalize_coords(np.asarray(v, dtype=float))
    z = float(z) % 1.0
    amat = sys.base.matrix.astype(float)
    ainv = sys.base.inverse.astype(float)
    for _ in range(abs(n)):
        if n > 0:
            z_new = float(sys.fiber.phi(v, np.array([z]))[0])
            v_new = amat @ v
            v, z = _canonical_pair(sys, v_new, z_new)
        else:
            v_prev = canonicalize_coords(ainv @ v)
            z_prev = float(sys.fiber.phi_inverse(v_prev, np.array([z]))[0])
            v, z = _canonical_pair(sys, v_prev, z_prev)
    return tuple(v), z


def restrict_to_invariant_circle(sys: SkewProductSystem,
                                 grid_size: int = DEFAULT_GRID) -> MonotoneCircleLift:
    """The lift of f on the fiber over the fixed base point at the origin."""
    origin = np.zeros(sys.base.dim)
    zs = np.arange(grid_size) / grid_size
    return MonotoneCircleLift(np.asarray(sys.fiber.phi(origin, zs), dtype=float))


# ---------------------------------------------------------------------------
# system files: sections [base], [gluing], [fiber] and optional [conjugator];
# matrix rows are comma-separated integers, fiber lines are either
# "rotation <float>" or "<coeff> sin|cos <j> <k> [<l>]".

def _format_float(x: float) -> str:
    return repr(float(x))


def _format_term(t: TrigTerm) -> str:
    freq = " ".join(str(int(f)) for f in t.frequency)
    return f"{_format_float(t.coefficient)} {t.phase} {freq}"


def _parse_term(line: str) -> TrigTerm:
    toks = line.split()
    if len(toks) < 3:
        raise ValueError(f"malformed term line: {line!r}")
    return TrigTerm(float(toks[0]), tuple(int(x) for x in toks[2:]), toks[1])


def format_system(sys: SkewProductSystem) -> str:
    lines = ["[base]", format_int_matrix(sys.base.matrix), "", "[gluing]"]
    if sys.gluing.is_identity:
        lines.append("identity")
    else:
        lines.append(format_int_matrix(sys.gluing.matrix))
    lines += ["", "[fiber]"]
    fiber = sys.fiber
    conjugator = None
    if not fiber.is_plain:
        conjugator = fiber.conjugator
        if not fiber.inner.is_plain:
            raise ValueError("nested conjugations cannot be written to a file")
        fiber = fiber.inner
    lines.append(f"rotation {_format_float(fiber.theta)}")
    for t in fiber.terms:
        lines.append(_format_term(t))
    if conjugator is not None:
        lines += ["", "[conjugator]"]
        for t in conjugator.terms:
            lines.append(_format_term(t))
    return "\n".join(lines) + "\n"


def parse_system(text: str) -> SkewProductSystem:
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections[current] = []
            continue
        if current is None:
            raise ValueError(f"content before any section header: {raw!r}")
        sections[current].append(line)
    for required in ("base", "fiber"):
        if required not in sections:
            raise ValueError(f"system file is missing the [{required}] section")

    base = compute_splitting(parse_int_matrix("\n".join(sections["base"])))
    glines = sections.get("gluing", ["identity"])
    if len(glines) == 1 and glines[0].lower() == "identity":
        gluing = identity_automorphism(base.dim)
    else:
        gm = parse_int_matrix("\n".join(glines))
        gluing = ToralAutomorphism(gm, int_inverse(gm),
                                   np.zeros((0, base.dim)), np.zeros((0, base.dim)),
                                   np.zeros(0), np.zeros(0))
    theta = 0.0
    terms = []
    for line in sections["fiber"]:
        toks = line.split()
        if toks[0].lower() == "rotation":
            theta = float(toks[1])
        else:
            terms.append(_parse_term(line))
    fiber = FiberMapFamily(base.dim, theta, terms)
    if "conjugator" in sections:
        conj_terms = [_parse_term(line) for line in sections["conjugator"]]
        conj = FiberMapFamily(base.dim, 0.0, conj_terms)
        fiber = ConjugatedFiberFamily(fiber, conj, base.matrix)
    return make_system(base, gluing, fiber)


def load_system(path) -> SkewProductSystem:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_system(fh.read())


def save_system(sys: SkewProductSystem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_system(sys))
