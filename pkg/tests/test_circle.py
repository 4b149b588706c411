import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewlab.circle import (MonotoneCircleLift, invariant_measure,
                            rotation_number, semiconjugacy_to_rotation)

GOLDEN_FRAC = (np.sqrt(5.0) - 1.0) / 2.0


def _conjugated_rotation(theta, amplitude=0.05):
    """h o R_theta o h^{-1} for h(x) = x + amplitude sin(2 pi x)."""
    def h(x):
        return x + amplitude * np.sin(2.0 * np.pi * x)

    h_inv = MonotoneCircleLift.from_function(h).inverse()
    return MonotoneCircleLift.from_function(lambda x: h(h_inv(x) + theta)), h


def test_rigid_rational_rotation_snaps_exactly():
    rho = rotation_number(MonotoneCircleLift.rotation(0.25))
    assert rho.is_rational
    assert (rho.rational.numerator, rho.rational.denominator) == (1, 4)
    assert rho.value == 0.25


def test_rigid_irrational_rotation_recovered_to_1e9():
    for theta in (GOLDEN_FRAC, 1.0 / np.pi, 0.123456789012):
        rho = rotation_number(MonotoneCircleLift.rotation(theta))
        assert abs(rho.value - theta) < 1e-9
        assert not rho.is_rational


def test_lift_samples_must_increase():
    with pytest.raises(ValueError, match="increasing"):
        MonotoneCircleLift.from_function(
            lambda x: x + 0.5 * np.sin(2.0 * np.pi * x))


def test_lift_from_function_reproduces_values():
    lift = MonotoneCircleLift.from_function(
        lambda x: x + 0.05 * np.sin(2.0 * np.pi * x))
    xs = np.linspace(0.0, 2.0, 733)
    exact = xs + 0.05 * np.sin(2.0 * np.pi * xs)
    assert np.max(np.abs(lift(xs) - exact)) < 1e-10


def test_inverse_and_compose_are_consistent():
    lift = MonotoneCircleLift.from_function(
        lambda x: x + 0.3 + 0.04 * np.cos(2.0 * np.pi * x))
    inv = lift.inverse()
    xs = np.linspace(0.0, 1.0, 257)
    assert np.max(np.abs(inv(lift(xs)) - xs)) < 1e-9
    both = lift.compose(inv)  # lift after inv
    assert np.max(np.abs(both(xs) - xs)) < 1e-9


def test_perturbed_half_rotation_has_exact_period_two():
    lift = MonotoneCircleLift.from_function(
        lambda x: x + 0.5 + 0.1 * np.sin(2.0 * np.pi * x))
    rho = rotation_number(lift)
    assert rho.is_rational
    assert (rho.rational.numerator, rho.rational.denominator) == (1, 2)
    # the orbit {0, 1/2} is superattracting and shows up as the atom pair
    mu = invariant_measure(lift)
    assert mu.atoms is not None
    positions = sorted(round(p, 9) for p, _m in mu.atoms)
    assert positions == [0.0, 0.5]
    assert sum(m for _p, m in mu.atoms) == pytest.approx(1.0, abs=1e-12)


def test_invariant_measure_of_conjugated_rotation_is_invariant():
    lift, _h = _conjugated_rotation(GOLDEN_FRAC)
    mu = invariant_measure(lift)
    assert mu.invariance_residual(lift) < 5e-4


def test_semiconjugacy_recovers_constructed_conjugacy():
    lift, h = _conjugated_rotation(GOLDEN_FRAC)
    semi = semiconjugacy_to_rotation(lift)
    assert semi.defect < 1e-4
    xs = np.linspace(0.0, 1.0, 400, endpoint=False)
    offset = semi.P(np.array([h(0.0)]))[0]
    err = np.mod(semi.P(h(xs)) - xs - offset + 0.5, 1.0) - 0.5
    assert np.max(np.abs(err)) < 5e-3


def test_semiconjugacy_refuses_rational_rotation_number():
    lift = MonotoneCircleLift.from_function(
        lambda x: x + 0.5 + 0.1 * np.sin(2.0 * np.pi * x))
    with pytest.raises(ValueError, match="periodic"):
        semiconjugacy_to_rotation(lift)


def test_rotation_number_is_conjugacy_invariant():
    rng = np.random.default_rng(3)
    base = MonotoneCircleLift.rotation(GOLDEN_FRAC)
    rho0 = rotation_number(base)
    for _ in range(10):
        amp = rng.uniform(0.01, 0.08)
        freq = rng.integers(1, 4)
        phase = rng.uniform(0.0, 1.0)

        def h(x):
            return x + amp * np.sin(2.0 * np.pi * (freq * x + phase)) / freq

        h_inv = MonotoneCircleLift.from_function(h).inverse()
        conj = MonotoneCircleLift.from_function(
            lambda x: h(h_inv(x) + GOLDEN_FRAC))
        rho = rotation_number(conj)
        combined = rho.error_bound + rho0.error_bound + 1e-6
        assert abs(rho.value - rho0.value) <= combined


@given(st.floats(0.0, 1.0, exclude_max=True))
@settings(max_examples=30, deadline=None)
def test_rotation_number_of_rigid_rotation_is_theta(theta):
    rho = rotation_number(MonotoneCircleLift.rotation(theta), n_iter=20_000)
    frac_err = abs(rho.value - theta)
    assert min(frac_err, 1.0 - frac_err) < 1e-4


@given(st.floats(-3.0, 3.0, allow_nan=False), st.integers(-2, 2))
@settings(max_examples=40, deadline=None)
def test_lift_is_degree_one_equivariant(x, k):
    lift = MonotoneCircleLift.from_function(
        lambda t: t + 0.1 + 0.06 * np.sin(2.0 * np.pi * t))
    lhs = lift(np.array([x + k]))[0]
    rhs = lift(np.array([x]))[0] + k
    assert abs(lhs - rhs) < 1e-9


def test_occupation_counts_cover_the_orbit():
    lift = MonotoneCircleLift.rotation(GOLDEN_FRAC)
    counts, xf = lift.occupation_counts(0.0, 5000, 64)
    assert counts.sum() == 5000
    # the golden rotation equidistributes: every bin is visited
    assert counts.min() > 0
    # the returned endpoint is the unwrapped lift value after 5000 steps
    assert abs(xf - 5000 * GOLDEN_FRAC) < 1e-8
