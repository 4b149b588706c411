import numpy as np
import pytest

from skewlab.systems import (ConjugatedFiberFamily, FiberMapFamily, TrigTerm,
                             format_system, make_prototype, make_system,
                             parse_system, perturb, restrict_to_invariant_circle,
                             step)
from skewlab.torus import compute_splitting


def test_prototype_is_a_product_with_trivial_fiber(cat_matrix):
    sys = make_prototype(cat_matrix)
    assert sys.is_product
    assert not sys.fiber.has_fiber_dependence
    (v, z) = step(sys, (np.array([0.2, 0.7]), 0.31))
    assert z == pytest.approx(0.31, abs=1e-15)
    assert np.allclose(v, [(0.4 + 0.7) % 1.0, (0.2 + 0.7) % 1.0], atol=1e-12)


def test_mapping_torus_gluing_accepts_equivariant_fibers(cat_matrix):
    sys = make_prototype(cat_matrix, cat_matrix)
    assert not sys.is_product
    # rigid fiber rotations satisfy phi_{Bv}(t-1) = phi_v(t) - 1 trivially
    rotated = perturb(sys, "rotation", theta=0.125)
    assert rotated.fiber.theta == 0.125


def test_mapping_torus_gluing_rejects_base_dependent_fibers(cat_matrix):
    sys = make_prototype(cat_matrix, cat_matrix)
    with pytest.raises(ValueError, match="equivariant"):
        perturb(sys, "fiber_shear",
                terms=[TrigTerm(0.05, (1, 0, 0), "sin")])


def test_rotation_perturbation_wraps_mod_one(cat_matrix):
    sys = make_prototype(cat_matrix)
    assert perturb(sys, "rotation", theta=1.25).fiber.theta == 0.25


def test_fiber_shear_rejects_height_dependence(cat_matrix):
    sys = make_prototype(cat_matrix)
    with pytest.raises(ValueError, match="base coordinates"):
        perturb(sys, "fiber_shear", terms=[TrigTerm(0.01, (1, 0, 1), "sin")])


def test_localized_window_heights_are_verified(cat_matrix):
    sys = make_prototype(cat_matrix)
    terms = [TrigTerm(0.025, (1, 0, -1), "cos"), TrigTerm(-0.025, (1, 0, 1), "cos")]
    out = perturb(sys, "localized", terms=terms, window=(0.0, 0.5))
    assert out.fiber.has_fiber_dependence
    with pytest.raises(ValueError, match="0.25"):
        perturb(sys, "localized", terms=terms, window=(0.0, 0.25))


def test_validation_rejects_non_diffeomorphisms(cat_matrix):
    sys = make_prototype(cat_matrix)
    with pytest.raises(ValueError, match="margin"):
        perturb(sys, "localized", terms=[TrigTerm(0.2, (0, 0, 1), "sin")])


def test_conjugate_perturbation_round_trips_the_fiber(cat_matrix):
    base = compute_splitting(cat_matrix)
    inner = FiberMapFamily(2, 0.25, [TrigTerm(0.02, (1, 0, 0), "sin")])
    sys = make_system(base, make_prototype(cat_matrix).gluing, inner)
    conj = perturb(sys, "conjugate", terms=[TrigTerm(0.03, (0, 1, 1), "sin")])
    assert isinstance(conj.fiber, ConjugatedFiberFamily)
    v = np.array([0.3, 0.8])
    zs = np.linspace(0.0, 1.0, 33)
    vals = conj.fiber.phi(v, zs)
    back = conj.fiber.phi_inverse(v, vals)
    assert np.max(np.abs(back - zs)) < 1e-11
    # the derivative matches a finite difference of the conjugated value
    eps = 1e-7
    fd = (conj.fiber.phi(v, zs + eps) - conj.fiber.phi(v, zs - eps)) / (2 * eps)
    assert np.max(np.abs(fd - conj.fiber.dphi_dz(v, zs))) < 1e-5


def test_step_backward_inverts_forward(localized_system):
    p = (np.array([0.37, 0.58]), 0.21)
    q = step(localized_system, p, 7)
    r = step(localized_system, q, -7)
    assert np.max(np.abs(np.array(r[0]) - p[0])) < 1e-9
    assert abs(r[1] - p[1]) < 1e-9


def test_system_file_round_trip_is_bit_exact(localized_system):
    text = format_system(localized_system)
    again = parse_system(text)
    assert format_system(again) == text
    assert np.array_equal(again.base.matrix, localized_system.base.matrix)
    coeffs = [t.coefficient for t in again.fiber.terms]
    assert coeffs == [t.coefficient for t in localized_system.fiber.terms]


def test_restricted_circle_map_over_the_origin(localized_system, quarter_system):
    lift = restrict_to_invariant_circle(localized_system)
    zs = np.linspace(0.0, 1.0, 65)
    exact = zs + 0.05 * np.sin(2.0 * np.pi * zs) * np.sin(0.0)
    assert np.max(np.abs(lift(zs) - exact)) < 1e-9  # identity at the origin
    lift_q = restrict_to_invariant_circle(quarter_system)
    assert np.max(np.abs(lift_q(zs) - zs - 0.25)) < 1e-12


def test_trig_term_legality():
    with pytest.raises(ValueError, match="sin or cos"):
        TrigTerm(0.1, (1, 0, 0), "tan")
    with pytest.raises(ValueError, match="cos constant"):
        TrigTerm(0.1, (0, 0, 0), "sin")
    TrigTerm(0.1, (0, 0, 0), "cos")  # constants are allowed


def test_unknown_perturbation_method(cat_matrix):
    with pytest.raises(ValueError, match="unknown perturbation"):
        perturb(make_prototype(cat_matrix), "shake")
