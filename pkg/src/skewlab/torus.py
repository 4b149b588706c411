"""Integer toral automorphisms: hyperbolicity and commutation checks, invariant
splittings with certified eigen-residuals, and coordinates on tori and mapping tori.

Matrices are kept as exact integers throughout; eigen-data is the only floating
quantity.  Dimensions 2 and 3 are supported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HYPERBOLICITY_TOL = 1e-8
SPLITTING_RESIDUAL_TOL = 1e-10


def as_int_matrix(entries) -> np.ndarray:
    """Coerce to a square int64 matrix of dimension 2 or 3."""
    m = np.asarray(entries)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] not in (2, 3):
        raise ValueError(f"only dimensions 2 and 3 are supported, got {m.shape[0]}")
    mi = m.astype(np.int64)
    if not np.array_equal(mi, m):
        raise ValueError("matrix entries must be integers")
    return mi


def int_det(m: np.ndarray) -> int:
    """Exact determinant of a 2x2 or 3x3 integer matrix."""
    a = [[int(x) for x in row] for row in m]
    if len(a) == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    return (
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    )


def int_inverse(m: np.ndarray) -> np.ndarray:
    """Exact inverse of a unimodular integer matrix (adjugate over det)."""
    d = int_det(m)
    if d not in (1, -1):
        raise ValueError(f"matrix is not unimodular (det = {d})")
    a = [[int(x) for x in row] for row in m]
    if len(a) == 2:
        adj = [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]
    else:
        adj = [
            [
                a[(i + 1) % 3][(j + 1) % 3] * a[(i + 2) % 3][(j + 2) % 3]
                - a[(i + 1) % 3][(j + 2) % 3] * a[(i + 2) % 3][(j + 1) % 3]
                for i in range(3)
            ]
            for j in range(3)
        ]
    inv = np.array(adj, dtype=np.int64)
    if d == -1:
        inv = -inv
    return inv


def check_unimodular(m) -> bool:
    return int_det(as_int_matrix(m)) in (1, -1)


def _char_poly_coeffs(m: np.ndarray) -> list[int]:
    """Exact coefficients of det(xI - m), highest degree first."""
    d = m.shape[0]
    a = [[int(x) for x in row] for row in m]
    if d == 2:
        tr = a[0][0] + a[1][1]
        return [1, -tr, int_det(m)]
    tr = a[0][0] + a[1][1] + a[2][2]
    # sum of principal 2x2 minors
    m2 = (
        a[1][1] * a[2][2] - a[1][2] * a[2][1]
        + a[0][0] * a[2][2] - a[0][2] * a[2][0]
        + a[0][0] * a[1][1] - a[0][1] * a[1][0]
    )
    return [1, -tr, m2, -int_det(m)]


def _polish_real_root(coeffs: list[int], r: float) -> float:
    # a few Newton steps against the exact characteristic polynomial
    for _ in range(4):
        p = 0.0
        dp = 0.0
        for c in coeffs:
            dp = dp * r + p
            p = p * r + c
        if dp == 0.0:
            break
        r = r - p / dp
    return r


def _real_eigenvalues(m: np.ndarray) -> list[float]:
    """All eigenvalues of m, required to be real; guarded root-finding.

    For d=2 the closed-form quadratic is used.  A complex pair on a unimodular
    2x2 matrix has modulus 1, so that case is simply non-hyperbolic.
    """
    coeffs = _char_poly_coeffs(m)
    if m.shape[0] == 2:
        tr, det = -coeffs[1], coeffs[2]
        disc = tr * tr - 4 * det
        if disc < 0:
            raise ValueError("complex eigenvalue pair (modulus 1, not hyperbolic)")
        s = np.sqrt(float(disc))
        roots = [(tr + s) / 2.0, (tr - s) / 2.0]
    else:
        raw = np.roots(np.array(coeffs, dtype=float))
        if np.max(np.abs(raw.imag)) > 1e-8 * (1.0 + np.max(np.abs(raw.real))):
            raise ValueError("complex eigenvalues are not supported for splittings")
        roots = [float(r) for r in raw.real]
    return [_polish_real_root(coeffs, r) for r in roots]


def check_hyperbolic(m, tol: float = HYPERBOLICITY_TOL) -> bool:
    """True iff no eigenvalue modulus is within tol of 1."""
    mi = as_int_matrix(m)
    if int_det(mi) not in (1, -1):
        raise ValueError("hyperbolicity check requires a unimodular matrix")
    moduli = np.abs(np.linalg.eigvals(mi.astype(float)))
    return bool(np.all(np.abs(moduli - 1.0) > tol))


def check_commuting(a, b) -> bool:
    """Exact integer test of a.b = b.a."""
    ai, bi = as_int_matrix(a), as_int_matrix(b)
    if ai.shape != bi.shape:
        raise ValueError("dimension mismatch")
    return np.array_equal(ai @ bi, bi @ ai)


def _eigenvector(m: np.ndarray, r: float) -> np.ndarray:
    a = m.astype(float)
    if m.shape[0] == 2:
        # kernel of (m - r I); pick the better conditioned cofactor row
        v1 = np.array([a[0, 1], r - a[0, 0]])
        v2 = np.array([r - a[1, 1], a[1, 0]])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    else:
        _, _, vh = np.linalg.svd(a - r * np.eye(3))
        v = vh[-1]
    v = v / np.linalg.norm(v)
    # fix an orientation so splittings are reproducible
    i = int(np.argmax(np.abs(v)))
    if v[i] < 0:
        v = -v
    return v


@dataclass(frozen=True)
class ToralAutomorphism:
    """A hyperbolic (or identity, for gluings) integer automorphism with its splitting.

    Rates are the eigenvalue moduli; eigenvalues carry the signs and satisfy
    ``matrix @ v = eigenvalue * v`` to within SPLITTING_RESIDUAL_TOL.
    """

    matrix: np.ndarray
    inverse: np.ndarray
    unstable_basis: np.ndarray  # rows are unit eigenvectors
    stable_basis: np.ndarray
    unstable_eigenvalues: np.ndarray
    stable_eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def unstable_rates(self) -> np.ndarray:
        return np.abs(self.unstable_eigenvalues)

    @property
    def stable_rates(self) -> np.ndarray:
        return np.abs(self.stable_eigenvalues)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix.astype(float) @ np.asarray(v, dtype=float)

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        return self.inverse.astype(float) @ np.asarray(v, dtype=float)

    @property
    def is_identity(self) -> bool:
        return np.array_equal(self.matrix, np.eye(self.dim, dtype=np.int64))


def identity_automorphism(d: int = 2) -> ToralAutomorphism:
    """Identity gluing; carries no splitting data."""
    eye = np.eye(d, dtype=np.int64)
    empty = np.zeros((0, d))
    return ToralAutomorphism(eye, eye.copy(), empty, empty.copy(),
                             np.zeros(0), np.zeros(0))


def compute_splitting(m) -> ToralAutomorphism:
    """Invariant stable/unstable splitting of a hyperbolic unimodular matrix."""
    mi = as_int_matrix(m)
    if not check_hyperbolic(mi):
        raise ValueError("matrix is not hyperbolic; no splitting")
    eigs = _real_eigenvalues(mi)
    un, st = [], []
    for r in eigs:
        v = _eigenvector(mi, r)
        resid = np.linalg.norm(mi.astype(float) @ v - r * v)
        if resid >= SPLITTING_RESIDUAL_TOL:
            raise ArithmeticError(f"eigen-residual {resid:.3g} too large for rate {r}")
        (un if abs(r) > 1.0 else st).append((r, v))
    un.sort(key=lambda p: -abs(p[0]))
    st.sort(key=lambda p: -abs(p[0]))
    return ToralAutomorphism(
        matrix=mi,
        inverse=int_inverse(mi),
        unstable_basis=np.array([v for _, v in un]),
        stable_basis=np.array([v for _, v in st]),
        unstable_eigenvalues=np.array([r for r, _ in un]),
        stable_eigenvalues=np.array([r for r, _ in st]),
    )


def canonicalize_coords(coords) -> np.ndarray:
    """Reduce raw real coordinates into [0,1)^d.

    np.mod can return exactly 1.0 for tiny negative inputs; fold that edge back.
    """
    c = np.mod(np.asarray(coords, dtype=float), 1.0)
    c = np.where(c >= 1.0, 0.0, c)
    return c


@dataclass(frozen=True)
class TorusPoint:
    """A point on T^d stored as raw (possibly lifted) reals."""

    coords: tuple

    def canonical(self) -> "TorusPoint":
        return TorusPoint(tuple(canonicalize_coords(np.array(self.coords))))


@dataclass(frozen=True)
class MappingTorusPoint:
    """A point (v, t) of the mapping torus N x R / (v,t) ~ (Bv, t-1)."""

    base: tuple
    height: float

    def canonical(self, gluing: ToralAutomorphism) -> "MappingTorusPoint":
        v = np.asarray(self.base, dtype=float)
        t = float(self.height)
        k = int(np.floor(t))
        t_new = t - k
        if t_new >= 1.0:  # floating fold at the seam
            t_new = 0.0
            k += 1
        step = gluing.matrix if k >= 0 else gluing.inverse
        for _ in range(abs(k)):
            v = canonicalize_coords(step.astype(float) @ v)
        return MappingTorusPoint(tuple(canonicalize_coords(v)), t_new)


def parse_int_matrix(text: str) -> np.ndarray:
    """Parse a matrix given as lines of comma- or space-separated integers."""
    rows = []
    for line in text.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        rows.append([int(tok) for tok in line.replace(",", " ").split()])
    if not rows:
        raise ValueError("empty matrix block")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged matrix rows")
    return as_int_matrix(rows)


def format_int_matrix(m: np.ndarray) -> str:
    return "\n".join(",".join(str(int(x)) for x in row) for row in m)
