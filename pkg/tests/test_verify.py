import numpy as np
import pytest

from subinf import groups, integrands, solver, verify
from subinf.errors import DomainMismatchError, ParameterError
from subinf.grids import GridDomain, ScalarField
from subinf.solver import BoundaryData, SolverConfig
from subinf.verify import OperatorSpec

SQ = integrands.squared_norm()


# -- operator specs --------------------------------------------------------


def test_evaluate_hand_values():
    p = np.array([1.0, 2.0])
    M = np.array([[1.0, 0.0], [0.0, 3.0]])
    x = np.zeros(2)
    assert OperatorSpec.infinity_laplacian().evaluate(x, p, M) == -13.0
    assert OperatorSpec.aronsson(SQ).evaluate(x, p, M) == -52.0
    # aux branches clip against the eikonal part f(p) - eps = 4.7
    assert OperatorSpec.aux_lower(SQ, 0.3).evaluate(x, p, M) == -52.0
    assert OperatorSpec.aux_upper(SQ, 0.3).evaluate(x, p, M) == -4.7


def test_operator_spec_validation():
    with pytest.raises(ParameterError):
        OperatorSpec(kind="laplace")
    with pytest.raises(ParameterError):
        OperatorSpec(kind="custom")
    with pytest.raises(ParameterError):
        OperatorSpec(kind="aronsson")
    with pytest.raises(ParameterError):
        OperatorSpec(kind="aux_lower", f=SQ, eps=0.0)


@pytest.mark.parametrize("op", [
    OperatorSpec.infinity_laplacian(),
    OperatorSpec.aronsson(integrands.power(4.0)),
    OperatorSpec.aux_lower(SQ, 0.3),
    OperatorSpec.aux_upper(SQ, 0.3),
])
def test_shipped_operators_are_degenerate_elliptic(op):
    passed, worst = verify.subelliptic_check(op, samples=400, seed=5)
    assert passed
    assert worst <= 1e-9


def test_broken_operator_fails_the_ellipticity_audit():
    bad = OperatorSpec.custom(lambda x, p, M:
                              np.einsum("...i,...ij,...j->...", p, M, p))
    passed, worst = verify.subelliptic_check(bad, samples=400, seed=5)
    assert not passed
    assert worst > 1.0


def test_subelliptic_check_needs_samples():
    with pytest.raises(ParameterError):
        verify.subelliptic_check(OperatorSpec.infinity_laplacian(), samples=0)


# -- viscosity jets ---------------------------------------------------------


def test_solved_field_passes_viscosity_check():
    dom = GridDomain.box(groups.euclidean(1), [0.0], [1.0], 1.0 / 16)
    g = BoundaryData.from_function(dom, lambda c: c[:, 0])
    u = solver.infinity_solve(g, SQ, SolverConfig(k_max=16)).solution
    rep = verify.viscosity_check(u, OperatorSpec.infinity_laplacian())
    assert rep.passed
    assert rep.jets_above > 0 and rep.jets_below > 0
    assert rep.tol == 10.0 / 16**2


def test_cone_tip_fails_the_supersolution_half():
    """u = |x - 1/2| admits touching-from-below parabolas with p != 0 and

    upward curvature at the tip, so -p^2 S < 0 there; the tip kills the
    supersolution property while the subsolution half stays clean."""
    dom = GridDomain.box(groups.euclidean(1), [0.0], [1.0], 1.0 / 16)
    u = ScalarField.from_function(dom, lambda c: np.abs(c[:, 0] - 0.5))
    rep = verify.viscosity_check(u, OperatorSpec.infinity_laplacian(),
                                 jet_samples=64, seed=0)
    assert not rep.passed
    assert rep.worst_subsolution_violation == 0.0
    assert np.isclose(rep.worst_supersolution_violation, 1.3511778959399383)


def test_negation_swaps_the_violation_columns_exactly():
    dom = GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.125)
    rng = np.random.default_rng(9)
    u = ScalarField(dom, np.cumsum(rng.normal(size=dom.n_nodes)) * 0.01)
    neg = ScalarField(dom, -u.values)
    op = OperatorSpec.infinity_laplacian()
    r1 = verify.viscosity_check(u, op, jet_samples=32, seed=2)
    r2 = verify.viscosity_check(neg, op, jet_samples=32, seed=2)
    assert np.array_equal(r1.subsolution_violations,
                          r2.supersolution_violations)
    assert np.array_equal(r1.supersolution_violations,
                          r2.subsolution_violations)


# -- comparison and minimality ----------------------------------------------


def test_comparison_margin_of_shift_is_zero():
    dom = GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.25)
    rng = np.random.default_rng(4)
    u = ScalarField(dom, rng.normal(size=dom.n_nodes))
    v = ScalarField(dom, u.values + 3.0)
    # u - (u + 3) re-rounds per node, so the margin is rounding, not 0
    assert abs(verify.comparison_check(u, v)) < 1e-12


def test_comparison_margin_negative_for_interior_excess():
    dom = GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.25)
    u = ScalarField.zeros(dom)
    spike = np.zeros(dom.n_nodes)
    spike[dom.interior_flat[4]] = 1.0
    v = ScalarField(dom, -spike)
    assert verify.comparison_check(u, v) == -1.0
    with pytest.raises(DomainMismatchError):
        verify.comparison_check(
            u, ScalarField.zeros(
                GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.125)))


def test_amle_check_accepts_the_linear_field():
    dom = GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.125)
    u = ScalarField.from_function(dom, lambda c: 2 * c[:, 0] - c[:, 1])
    ratio = verify.amle_check(u, SQ, trials=6, seed=1)
    assert ratio <= 1.0 + 1e-9


def test_amle_check_flags_an_interior_bump():
    dom = GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.125)
    u = ScalarField.from_function(
        dom,
        lambda c: 2 * c[:, 0] - c[:, 1]
        + np.exp(-40 * ((c[:, 0] - 0.5) ** 2 + (c[:, 1] - 0.5) ** 2)),
    )
    ratio = verify.amle_check(u, SQ, trials=6, seed=1)
    assert ratio > 1.5
    assert np.isclose(ratio, 6.6104727942215025, rtol=1e-6)


def test_amle_check_validation():
    dom = GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.125)
    u = ScalarField.zeros(dom)
    with pytest.raises(ParameterError):
        verify.amle_check(u, SQ, trials=0)
    # a 4-node axis leaves every sub-box without enough interior
    small = GridDomain.box(groups.euclidean(1), [0.0], [1.0], 1.0 / 3)
    with pytest.raises(ParameterError):
        verify.amle_check(ScalarField.zeros(small), SQ, trials=3, seed=0)
