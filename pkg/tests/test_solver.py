import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from subinf import groups, integrands, solver
from subinf.errors import DomainMismatchError, IncompleteFieldError, ParameterError
from subinf.grids import GridDomain, ScalarField
from subinf.solver import BoundaryData, SolverConfig


def line_domain(n=4, band=1):
    return GridDomain.box(groups.euclidean(1), [0.0], [1.0], 1.0 / n, band=band)


def line_boundary(dom, slope=1.0, offset=0.0):
    return BoundaryData.from_function(dom, lambda c: slope * c[:, 0] + offset)


SQ = integrands.squared_norm()


# -- energy ---------------------------------------------------------------


def test_energy_of_linear_field_frozen():
    # |u'|^2 = 1 on each of the 3 interior nodes, cell volume 1/4
    dom = line_domain(4)
    u = ScalarField.from_function(dom, lambda c: c[:, 0])
    for k in (1, 2, 7, 32):
        assert solver.energy(u, SQ, k) == 0.75


def test_energy_source_term_sign():
    dom = line_domain(4)
    u = ScalarField.from_function(dom, lambda c: c[:, 0])
    base = solver.energy(u, SQ, 3)
    s = 0.5**2 * 0.25 * float(np.sum(u.values[dom.interior_flat]))
    assert np.isclose(solver.energy(u, SQ, 3, eps=0.5, side="lower"), base - s)
    assert np.isclose(solver.energy(u, SQ, 3, eps=0.5, side="upper"), base + s)


def test_energy_validation():
    dom = line_domain(4)
    u = ScalarField.zeros(dom)
    with pytest.raises(ParameterError):
        solver.energy(u, SQ, 0)
    with pytest.raises(ParameterError):
        solver.energy(u, SQ, 2, side="middle")
    with pytest.raises(ParameterError):
        solver.energy(u, SQ, 2, eps=-1.0)


@given(st.lists(st.floats(-3.0, 3.0), min_size=9, max_size=9),
       st.lists(st.floats(-3.0, 3.0), min_size=9, max_size=9),
       st.sampled_from([1, 2, 3]))
@settings(max_examples=60, deadline=None)
def test_energy_midpoint_convexity(a, b, k):
    dom = line_domain(8)
    u = ScalarField(dom, np.array(a))
    v = ScalarField(dom, np.array(b))
    mid = ScalarField(dom, 0.5 * (u.values + v.values))
    lhs = solver.energy(mid, SQ, k)
    rhs = 0.5 * (solver.energy(u, SQ, k) + solver.energy(v, SQ, k))
    assert lhs <= rhs + 1e-9 * max(1.0, abs(rhs))


# -- boundary data --------------------------------------------------------


def test_boundary_data_validation():
    dom = line_domain(4)
    with pytest.raises(ParameterError):
        BoundaryData(dom, [1.0, 2.0, 3.0])
    with pytest.raises(IncompleteFieldError):
        BoundaryData(dom, [1.0, np.nan])


def test_boundary_extend_nearest():
    dom = line_domain(4)
    g = BoundaryData(dom, [2.0, 6.0])
    ext = g.extend_nearest().values
    assert np.array_equal(ext, [2.0, 2.0, 2.0, 6.0, 6.0])


def test_graph_lipschitz_linear():
    dom = line_domain(4)
    assert np.isclose(line_boundary(dom, slope=3.0).graph_lipschitz(), 3.0)
    # shifting changes nothing: only differences enter
    g = line_boundary(dom, slope=3.0)
    assert np.isclose(g.shift(10.0).graph_lipschitz(), 3.0)


# -- config ---------------------------------------------------------------


def test_schedule_is_dyadic_with_exact_cap():
    assert SolverConfig(k_max=24).schedule() == (2, 4, 8, 16, 24)
    assert SolverConfig(k_max=16).schedule() == (2, 4, 8, 16)
    assert SolverConfig(k_schedule=(3, 5, 9)).schedule() == (3, 5, 9)


def test_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(k_max=2)
    with pytest.raises(ParameterError):
        SolverConfig(k_schedule=(4, 4))
    with pytest.raises(ParameterError):
        SolverConfig(k_schedule=(8, 2))
    with pytest.raises(ParameterError):
        SolverConfig(initialization="random")
    with pytest.raises(ParameterError):
        SolverConfig(eps=-0.1)


# -- single-level minimization --------------------------------------------


@pytest.mark.parametrize("k", [2, 4, 16, 64])
def test_minimize_k_reproduces_linear_interpolant(k):
    """The cell quadrature in 1D is minimized by the linear interpolant

    at every k, so the discrete solution should nail it."""
    dom = line_domain(8)
    g = line_boundary(dom, slope=2.0, offset=-0.5)
    rep = solver.minimize_k(g, SQ, k, 0.0, "lower")
    exact = 2.0 * dom.coords[:, 0] - 0.5
    assert rep.converged
    assert np.max(np.abs(rep.solution.values - exact)) <= 1e-6


def test_minimize_k_matches_lbfgs_oracle():
    """Independent check: hand-assembled forward-difference objective

    minimized by scipy's L-BFGS-B from a cold start."""
    dom = GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.25)
    g = BoundaryData.from_function(dom, lambda c: c[:, 0] ** 2 - c[:, 1] ** 2)
    k = 4
    rep = solver.minimize_k(g, SQ, k, 0.0, "lower")

    nx = ny = 5
    h = 0.25
    base = np.zeros((nx, ny))
    bvals = g.values
    bidx = [dom.multi_of_flat(f) for f in dom.boundary_flat]
    for (i, j), v in zip(bidx, bvals):
        base[i, j] = v
    free = [dom.multi_of_flat(f) for f in dom.interior_flat]

    def objective(z):
        u = base.copy()
        for (i, j), v in zip(free, z):
            u[i, j] = v
        gx = (u[1:, :-1] - u[:-1, :-1]) / h
        gy = (u[:-1, 1:] - u[:-1, :-1]) / h
        q = gx**2 + gy**2
        e = h**2 * np.sum(q**k)
        w = 2 * k * q ** (k - 1)
        du = np.zeros((nx, ny))
        du[1:, :-1] += w * gx / h
        du[:-1, :-1] -= w * gx / h
        du[:-1, 1:] += w * gy / h
        du[:-1, :-1] -= w * gy / h
        du *= h**2
        return e, np.array([du[i, j] for i, j in free])

    res = scipy.optimize.minimize(
        objective, np.zeros(len(free)), jac=True, method="L-BFGS-B",
        options={"maxiter": 20000, "ftol": 1e-18, "gtol": 1e-12},
    )
    oracle = np.array(res.x)
    got = rep.solution.values[dom.interior_flat]
    assert np.max(np.abs(got - oracle)) <= 1e-6
    e_pkg = rep.energy_trace[k][-1]
    assert np.isclose(e_pkg, res.fun, rtol=1e-10, atol=1e-14)


def test_minimize_k_validation_and_warm_start_lattice():
    dom = line_domain(4)
    g = line_boundary(dom)
    with pytest.raises(ParameterError):
        solver.minimize_k(g, SQ, 0, 0.0, "lower")
    with pytest.raises(ParameterError):
        solver.minimize_k(g, SQ, 2, -1.0, "lower")
    with pytest.raises(ParameterError):
        solver.minimize_k(g, SQ, 2, 0.0, "above")
    other = line_domain(8)
    with pytest.raises(DomainMismatchError):
        solver.minimize_k(g, SQ, 2, 0.0, "lower",
                          warm=ScalarField.zeros(other))


# -- schedule solves -------------------------------------------------------


def test_infinity_solve_linear_and_boundary_round_trip():
    dom = line_domain(8)
    g = line_boundary(dom, slope=1.5)
    rep = solver.infinity_solve(g, SQ, SolverConfig(k_max=32))
    assert rep.converged
    exact = 1.5 * dom.coords[:, 0]
    assert np.max(np.abs(rep.solution.values - exact)) <= 1e-5
    # the boundary rows are never free variables and the solver
    # reimposes the data after unscaling, so the match is bitwise
    got = rep.solution.values[dom.boundary_flat]
    assert np.array_equal(got, g.values)
    assert rep.cross_trace, "doubling must record cross-level gaps"


def test_minimize_k_translation_equivariance():
    # tight only at k = 2 where the energy is strictly convex; higher k
    # flattens the basin and the floor point wanders at the 1e-2 level
    dom = GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.25)
    g = BoundaryData.from_function(dom, lambda c: np.abs(c[:, 0] - 0.4))
    a = solver.minimize_k(g, SQ, 2, 0.0, "lower").solution.values
    b = solver.minimize_k(g.shift(7.0), SQ, 2, 0.0, "lower").solution.values
    assert np.max(np.abs((b - a) - 7.0)) <= 1e-6


def test_energy_trace_is_monotone_per_level():
    dom = GridDomain.box(groups.euclidean(2), [0, 0], [1, 1], 0.25)
    g = BoundaryData.from_function(dom, lambda c: c[:, 0] * c[:, 1])
    rep = solver.infinity_solve(g, SQ, SolverConfig(k_max=8))
    for k, trace in rep.energy_trace.items():
        diffs = np.diff(np.array(trace))
        assert np.all(diffs <= 1e-12 * np.maximum(1.0, np.abs(trace[:-1])))


def test_zero_initialization_reaches_the_same_solution():
    dom = line_domain(8)
    g = line_boundary(dom, slope=1.0)
    a = solver.infinity_solve(g, SQ, SolverConfig(k_max=8)).solution.values
    b = solver.infinity_solve(
        g, SQ, SolverConfig(k_max=8, initialization="zero")).solution.values
    assert np.max(np.abs(a - b)) <= 1e-6


def test_aux_solve_sides_and_validation():
    dom = line_domain(8)
    g = line_boundary(dom)
    with pytest.raises(ParameterError):
        solver.aux_solve(g, SQ, 0.0, "lower")
    with pytest.raises(ParameterError):
        solver.aux_solve(g, SQ, 0.1, "middle")
    cfg = SolverConfig(k_max=8)
    lo = solver.aux_solve(g, SQ, 0.05, "lower", cfg).solution
    hi = solver.aux_solve(g, SQ, 0.05, "upper", cfg).solution
    idx = dom.interior_flat
    # the lower branch maximizes the source credit, the upper pays it
    assert np.all(lo.values[idx] >= hi.values[idx] - 1e-8)
    assert solver.uniqueness_gap(lo, hi) < 0.05


def test_uniqueness_gap_checks_lattice():
    u = ScalarField.zeros(line_domain(4))
    v = ScalarField.zeros(line_domain(8))
    with pytest.raises(DomainMismatchError):
        solver.uniqueness_gap(u, v)
    w = ScalarField(u.domain, u.values + 0.25)
    assert solver.uniqueness_gap(u, w) == 0.25


# -- strictification -------------------------------------------------------


def test_strictify_frozen_margin():
    dom = line_domain(8)
    v = ScalarField.from_function(dom, lambda c: c[:, 0])
    res = solver.strictify(v, delta=0.1, eps=1.0)
    assert res.c0 == 4.0
    assert res.mu == 0.05
    assert np.isclose(res.deviation, 0.09375)
    assert not res.degenerate
    # iterating unpacks (field, mu)
    w, mu = res
    assert mu == 0.05
    assert np.isclose(w.values[-1], 1.1 - 0.1 / 16.0)


def test_strictify_degenerate_and_validation():
    dom = line_domain(4)
    z = ScalarField.zeros(dom)
    res = solver.strictify(z, delta=0.5, eps=0.2)
    assert res.degenerate
    assert res.deviation == 0.0
    assert np.array_equal(res.field.values, z.values)
    with pytest.raises(ParameterError):
        solver.strictify(z, delta=0.0, eps=0.2)
    with pytest.raises(ParameterError):
        solver.strictify(z, delta=0.1, eps=0.0)
    with pytest.raises(ParameterError):
        solver.strictify(z, delta=0.1, eps=0.2, alpha=0.5)


def test_strictify_preserves_order_of_bounded_fields():
    # g is increasing on [-c0, c0] = [-4 sup, 4 sup], so order survives
    dom = line_domain(8)
    rng = np.random.default_rng(3)
    a = ScalarField(dom, rng.uniform(-1.0, 1.0, dom.n_nodes))
    b = ScalarField(dom, a.values + rng.uniform(0.0, 0.5, dom.n_nodes))
    wa = solver.strictify(a, 0.2, 0.3).field
    wb = solver.strictify(b, 0.2, 0.3).field
    assert np.all(wb.values >= wa.values - 1e-12)
