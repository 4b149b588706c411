"""Order-preserving line actions: invariant measures, translation numbers,
conjugation scaling, and the master semiconjugacy.

The supported instance class is deliberately concrete: finitely generated
abelian groups that are coordinate-change conjugates of translation groups
(plus atomic lattices with counting measure).  On these the invariant measure,
the translation homomorphism tau, the scaling factor lambda of conjugation by
an order-preserving f, and the monotone semiconjugacy P with

    P(g(x)) = P(x) + tau(g),    P(f(x)) = lambda * P(x)

are all computed constructively and certified against tight residual budgets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .torus import as_int_matrix, int_det

TAU_TOL = 1e-10
RESIDUAL_TOL = 1e-8
FIXED_POINT_TOL = 1e-10


class UnsupportedInstanceError(Exception):
    """The instance is outside the constructive class this module certifies."""


# ---------------------------------------------------------------------------
# monotone maps of the line

class AffineMap:
    """x -> a x + b with a > 0."""

    def __init__(self, a: float, b: float):
        if a <= 0:
            raise ValueError("affine maps must be order preserving (a > 0)")
        self.a = float(a)
        self.b = float(b)

    def forward(self, x):
        return self.a * np.asarray(x, dtype=float) + self.b

    def inverse(self, y):
        return (np.asarray(y, dtype=float) - self.b) / self.a

    @property
    def is_translation(self) -> bool:
        return self.a == 1.0

    def describe(self) -> str:
        return f"affine {self.a!r} {self.b!r}"


class CubicChange:
    """Coordinate change h(x) = x^3 (an orientation-preserving homeomorphism)."""

    name = "cubic"

    def forward(self, x):
        return np.asarray(x, dtype=float) ** 3

    def inverse(self, y):
        return np.cbrt(np.asarray(y, dtype=float))

    def describe(self) -> str:
        return "cubic"


class SineBumpChange:
    """h(x) = x + c * sin(x) * bump(x/L): identity outside [-L, L]."""

    name = "sine_bump"

    def __init__(self, c: float, support: float = 10.0):
        self.c = float(c)
        self.support = float(support)
        # strict monotonicity: |c| (1 + max|bump'| L-scaled) must stay below 1
        xs = np.linspace(-support, support, 20001)
        d = np.gradient(self._wiggle(xs), xs)
        if np.min(1.0 + d) <= 1e-3:
            raise ValueError("sine bump amplitude destroys monotonicity")

    def _bump(self, x):
        u = np.clip(np.abs(np.asarray(x, dtype=float) / self.support), 0.0, 1.0)
        out = np.zeros_like(u)
        inside = u < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out

    def _wiggle(self, x):
        return self.c * np.sin(np.asarray(x, dtype=float)) * self._bump(x)

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        return x + self._wiggle(x)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        x = y.copy()
        for _ in range(100):
            r = x + self._wiggle(x) - y
            if np.max(np.abs(r)) < 1e-14:
                break
            x = x - np.clip(r, -0.9, 0.9)
        return x

    def describe(self) -> str:
        return f"sine_bump {self.c!r} {self.support!r}"


class ConjugatedMap:
    """h o inner o h^{-1} for a coordinate change h and an affine inner map."""

    def __init__(self, change, inner: AffineMap):
        self.change = change
        self.inner = inner

    def forward(self, x):
        return self.change.forward(self.inner.forward(self.change.inverse(x)))

    def inverse(self, y):
        return self.change.forward(self.inner.inverse(self.change.inverse(y)))

    def describe(self) -> str:
        return f"{self.inner.describe()}  # conjugated by {self.change.describe()}"


class ComposedMap:
    """Left-to-right composition word of order-preserving maps."""

    def __init__(self, maps):
        self.maps = list(maps)

    def forward(self, x):
        for m in self.maps:
            x = m.forward(x)
        return x

    def inverse(self, y):
        for m in reversed(self.maps):
            y = m.inverse(y)
        return y


def compose(*maps):
    """compose(g, h) acts as x -> h(g(x)) (apply left factor first)."""
    return ComposedMap(maps)


# ---------------------------------------------------------------------------
# actions and measures

@dataclass
class LineAction:
    gamma: str                    # 'all' (the line) or 'integers' (atomic)
    generators: list
    conjugator: object
    change: object = None         # coordinate change behind the generators

    def __post_init__(self):
        if self.gamma not in ("all", "integers"):
            raise ValueError(f"unsupported gamma descriptor {self.gamma!r}")


@dataclass
class MeasureDescriptor:
    kind: str                     # 'lebesgue' | 'pushforward' | 'counting'
    change: object = None

    def mass(self, x: float, y: float) -> float:
        """Signed measure of [x, y); negative when y < x."""
        if self.kind == "lebesgue":
            return float(y - x)
        if self.kind == "pushforward":
            return float(self.change.inverse(y) - self.change.inverse(x))
        if self.kind == "counting":
            return float(np.ceil(y) - np.ceil(x))
        raise ValueError(f"unknown measure kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "pushforward":
            return f"pushforward of Lebesgue by {self.change.describe()}"
        return self.kind


def _translation_shift(gen, change, xs) -> float | None:
    """If change^{-1} o gen o change is a translation, return its shift."""
    vals = change.inverse(gen.forward(change.forward(xs))) - xs
    if np.max(vals) - np.min(vals) < 1e-11:
        return float(np.mean(vals))
    return None


class _Identity:
    def forward(self, x):
        return np.asarray(x, dtype=float)

    def inverse(self, y):
        return np.asarray(y, dtype=float)

    def describe(self) -> str:
        return "identity"


def invariant_measure(action: LineAction, n_checks: int = 100,
                      seed: int = 0) -> MeasureDescriptor:
    """Constructive invariant measure, certified on random intervals."""
    if action.gamma == "integers":
        for g in action.generators:
            if not (isinstance(g, AffineMap) and g.is_translation
                    and abs(g.b - round(g.b)) < 1e-12):
                raise UnsupportedInstanceError(
                    "atomic instances support integer translations only")
        mu = MeasureDescriptor(kind="counting")
    else:
        change = action.change if action.change is not None else _Identity()
        xs = np.linspace(-3.0, 3.0, 11)
        shifts = [_translation_shift(g, change, xs) for g in action.generators]
        if any(s is None for s in shifts):
            raise UnsupportedInstanceError(
                "generators are not translations after the declared coordinate "
                "change; only abelian translation-conjugate instances are "
                "supported")
        if action.change is None:
            mu = MeasureDescriptor(kind="lebesgue")
        else:
            mu = MeasureDescriptor(kind="pushforward", change=action.change)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_checks):
        x = float(rng.uniform(-5.0, 5.0))
        y = x + float(rng.uniform(0.1, 3.0))
        for g in action.generators:
            gx, gy = float(g.forward(x)), float(g.forward(y))
            worst = max(worst, abs(mu.mass(gx, gy) - mu.mass(x, y)))
    if worst > TAU_TOL:
        raise UnsupportedInstanceError(
            f"constructed measure fails invariance: residual {worst:.3g}")
    return mu


def _sample_points(action: LineAction, n: int = 10) -> np.ndarray:
    if action.gamma == "integers":
        return np.arange(-(n // 2), n - n // 2, dtype=float)
    return np.linspace(-4.0, 4.0, n)


def _map_fixed_points(g):
    """('none', None) | ('point', x) | ('all', None) | ('scan', None)."""
    if isinstance(g, AffineMap):
        if g.a == 1.0:
            return ("all", None) if g.b == 0.0 else ("none", None)
        return ("point", g.b / (1.0 - g.a))
    if isinstance(g, ConjugatedMap):
        kind, x = _map_fixed_points(g.inner)
        if kind == "point":
            return ("point", float(g.change.forward(x)))
        return (kind, None)
    return ("scan", None)


def fixed_point_scan(action: LineAction, lo: float = -20.0, hi: float = 20.0,
                     n: int = 20001) -> float | None:
    """A common fixed point of all generators, or None.

    Affine and conjugated-affine generators are resolved exactly; anything
    else falls back to a displacement scan on a grid.
    """
    candidates = None          # None = unconstrained so far; [] = impossible
    need_scan = False
    for g in action.generators:
        kind, x = _map_fixed_points(g)
        if kind == "none":
            return None
        if kind == "all":
            continue
        if kind == "point":
            if candidates is None:
                candidates = [x]
            elif all(abs(x - c) > 1e-9 for c in candidates):
                return None
        else:
            need_scan = True
    if candidates:
        x = candidates[0]
        if all(abs(float(g.forward(x)) - x) < 1e-9 for g in action.generators):
            return float(x)
        return None
    if not need_scan:
        # every generator is the identity: every point is fixed
        if all(_map_fixed_points(g)[0] == "all" for g in action.generators):
            return 0.0
        return None
    xs = (np.arange(np.ceil(lo), np.floor(hi) + 1, dtype=float)
          if action.gamma == "integers" else np.linspace(lo, hi, n))
    disp = np.max(np.abs(np.stack([np.asarray(g.forward(xs)) - xs
                                   for g in action.generators])), axis=0)
    j = int(np.argmin(disp))
    if disp[j] < 1e-9:
        return float(xs[j])
    return None


def translation_number(action: LineAction, mu: MeasureDescriptor,
                       n_base_points: int = 10) -> list:
    """tau(g) = signed mu-mass of [x, g(x)), certified base-point independent."""
    fp = fixed_point_scan(action)
    if fp is not None:
        raise ValueError(
            f"the generators share the fixed point x = {fp:.6g}; the action "
            "falls in the fixed-point branch of the trichotomy and has no "
            "translation homomorphism")
    xs = _sample_points(action, n_base_points)
    taus = []
    for g in action.generators:
        vals = [mu.mass(float(x), float(g.forward(x))) for x in xs]
        spread = max(vals) - min(vals)
        if spread > TAU_TOL:
            raise ValueError(
                f"translation number is base-point dependent (spread "
                f"{spread:.3g}) for generator {g.describe()}")
        taus.append(float(np.mean(vals)))
    return taus


def conjugation_scaling(action: LineAction, taus, mu: MeasureDescriptor,
                        n_base_points: int = 10) -> float:
    """lambda with tau(f g f^{-1}) = lambda tau(g) across all generators."""
    f = action.conjugator
    xs = _sample_points(action, n_base_points)
    ratios = []
    for g, tau_g in zip(action.generators, taus):
        if abs(tau_g) < 1e-14:
            continue
        conj = compose(_inverse_of(f), g, f)  # acts as f o g o f^{-1}
        vals = [mu.mass(float(x), float(conj.forward(x))) for x in xs]
        spread = max(vals) - min(vals)
        if spread > TAU_TOL:
            raise ValueError(
                "conjugated translation number is base-point dependent "
                f"(spread {spread:.3g}); scaling hypotheses violated")
        ratios.append(float(np.mean(vals)) / tau_g)
    if not ratios:
        raise ValueError("all translation numbers vanish; scaling undefined")
    if max(ratios) - min(ratios) > TAU_TOL:
        raise ValueError(
            f"inconsistent scaling ratios {ratios}; the conjugator does not "
            "scale the translation homomorphism")
    return float(np.mean(ratios))


class _InverseView:
    def __init__(self, m):
        self._m = m

    def forward(self, x):
        return self._m.inverse(x)

    def inverse(self, y):
        return self._m.forward(y)


def _inverse_of(m):
    return _InverseView(m)


@dataclass
class MasterData:
    """The semiconjugacy P with its certificates."""

    taus: list
    lam: float
    fixed_point: float
    base_point: float
    offset: float
    mu: MeasureDescriptor
    action: LineAction
    translation_residual: float = 0.0
    scaling_residual: float = 0.0

    def P(self, x):
        x = np.asarray(x, dtype=float)
        vals = np.array([self.mu.mass(self.base_point, float(xi))
                         for xi in np.atleast_1d(x)])
        out = vals.reshape(x.shape) + self.offset
        return out if out.ndim else float(out)


def master_semiconjugacy(action: LineAction, grid_n: int = 1001,
                         lo: float = -8.0, hi: float = 8.0) -> MasterData:
    """P monotone with P o g = P + tau(g) and P o f = lambda P, plus the
    f-fixed point in P^{-1}(0)."""
    mu = invariant_measure(action)
    taus = translation_number(action, mu)
    lam = conjugation_scaling(action, taus, mu)
    if abs(lam - 1.0) < 1e-8:
        raise ValueError(
            "conjugation scaling lambda = 1 is excluded: P would be an "
            "invariant cocycle with no contracting normalization")
    f = action.conjugator
    base = 0.0
    xs = (np.arange(lo, hi + 1.0) if action.gamma == "integers"
          else np.linspace(lo, hi, grid_n))
    p0 = np.array([mu.mass(base, float(x)) for x in xs])
    p0f = np.array([mu.mass(base, float(f.forward(x))) for x in xs])
    c = p0f - lam * p0
    c_mean = float(np.mean(c))
    c_spread = float(np.max(c) - np.min(c))
    if c_spread > RESIDUAL_TOL:
        raise ValueError(
            f"P0 o f - lambda P0 is not constant (spread {c_spread:.3g}); "
            "master hypotheses violated")
    offset = c_mean / (lam - 1.0)
    data = MasterData(taus=taus, lam=lam, fixed_point=np.nan, base_point=base,
                      offset=offset, mu=mu, action=action)
    # residual certificates on the grid
    pvals = p0 + offset
    tr = 0.0
    for g, tau_g in zip(action.generators, taus):
        pg = np.array([mu.mass(base, float(g.forward(x))) for x in xs]) + offset
        tr = max(tr, float(np.max(np.abs(pg - pvals - tau_g))))
    sr = float(np.max(np.abs((p0f + offset) - lam * pvals)))
    data.translation_residual = tr
    data.scaling_residual = sr
    # fixed point: P is nondecreasing; bisect P = 0 then polish on f
    lo_x, hi_x = float(xs[0]), float(xs[-1])
    if data.P(lo_x) > 0 or data.P(hi_x) < 0:
        raise ValueError("P has no zero inside the working window; widen it")
    a, b = lo_x, hi_x
    for _ in range(200):
        m = 0.5 * (a + b)
        if data.P(m) < 0.0:
            a = m
        else:
            b = m
    x_star = 0.5 * (a + b)
    # under the lemma f fixes P^{-1}(0); polish with a secant step on f(x)-x
    for _ in range(60):
        fx = float(f.forward(x_star))
        if abs(fx - x_star) < 1e-15:
            break
        x_eps = x_star + 1e-6
        slope = (float(f.forward(x_eps)) - x_eps - (fx - x_star)) / 1e-6
        if slope == 0.0:
            break
        x_next = x_star - (fx - x_star) / slope
        if abs(x_next - x_star) > 1.0:
            break
        x_star = x_next
    if abs(float(f.forward(x_star)) - x_star) > FIXED_POINT_TOL:
        raise ValueError(
            f"no conjugator fixed point found near P^{{-1}}(0): residual "
            f"{abs(float(f.forward(x_star)) - x_star):.3g}")
    if abs(float(data.P(x_star))) > RESIDUAL_TOL:
        raise ValueError(
            f"conjugator fixed point {x_star:.6g} is not in P^{{-1}}(0): "
            f"P = {float(data.P(x_star)):.3g}")
    data.fixed_point = float(x_star)
    return data


def commuting_fixed_point(master: MasterData, h,
                          tol: float = FIXED_POINT_TOL) -> float:
    """Fixed point of a map h commuting with the conjugator, in P^{-1}(0)."""
    f = master.action.conjugator
    xs = np.linspace(master.fixed_point - 2.0, master.fixed_point + 2.0, 9)
    comm = np.max(np.abs(np.asarray(h.forward(f.forward(xs)))
                         - np.asarray(f.forward(h.forward(xs)))))
    if comm > 1e-8:
        raise ValueError(f"map does not commute with the conjugator "
                         f"(residual {comm:.3g})")
    x0 = master.fixed_point
    # P^{-1}(0) is an interval around x0 on which h must have a fixed point
    if abs(float(h.forward(x0)) - x0) < tol:
        return float(x0)
    lo, hi = x0 - 1.0, x0 + 1.0
    g_lo = float(h.forward(lo)) - lo
    g_hi = float(h.forward(hi)) - hi
    if g_lo * g_hi > 0:
        raise ValueError("no commuting fixed point bracketed near P^{-1}(0)")
    for _ in range(200):
        m = 0.5 * (lo + hi)
        if (float(h.forward(m)) - m) * g_lo > 0:
            lo = m
        else:
            hi = m
    return float(0.5 * (lo + hi))


def translation_coset_bijection(matrix) -> bool:
    """Is g -> -g + M g a bijection of the integer lattice?

    True exactly when det(M - I) = +-1; a nonzero non-unit determinant gives
    an injective but not surjective map, and eigenvalue 1 kills injectivity.
    """
    m = as_int_matrix(matrix)
    d = int_det([[int(m[i][j]) - (1 if i == j else 0) for j in range(m.shape[1])]
                 for i in range(m.shape[0])])
    return abs(d) == 1


# ---------------------------------------------------------------------------
# instance files: sections [gamma], [generators], [conjugator], optional
# [coordinate_change]; maps are "affine <a> <b>"; with a coordinate change the
# affine descriptors act in straightened coordinates and the instance is their
# conjugate.

_CHANGES = {
    "cubic": lambda toks: CubicChange(),
    "sine_bump": lambda toks: SineBumpChange(
        float(toks[0]), float(toks[1]) if len(toks) > 1 else 10.0),
}


def _parse_map(line: str) -> AffineMap:
    toks = line.split()
    if toks[0] != "affine" or len(toks) != 3:
        raise ValueError(f"unsupported map descriptor {line!r}")
    return AffineMap(float(toks[1]), float(toks[2]))


def parse_action(text: str) -> LineAction:
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
    for required in ("gamma", "generators", "conjugator"):
        if required not in sections:
            raise ValueError(f"action file is missing the [{required}] section")
    gamma = sections["gamma"][0].lower()
    change = None
    if "coordinate_change" in sections:
        toks = sections["coordinate_change"][0].split()
        if toks[0] not in _CHANGES:
            raise ValueError(f"unknown coordinate change {toks[0]!r}")
        change = _CHANGES[toks[0]](toks[1:])
    gens_aff = [_parse_map(line) for line in sections["generators"]]
    conj_aff = _parse_map(sections["conjugator"][0])
    if change is None:
        return LineAction(gamma=gamma, generators=gens_aff,
                          conjugator=conj_aff, change=None)
    gens = [ConjugatedMap(change, g) for g in gens_aff]
    conj = ConjugatedMap(change, conj_aff)
    return LineAction(gamma=gamma, generators=gens, conjugator=conj,
                      change=change)


def load_action(path) -> LineAction:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_action(fh.read())
