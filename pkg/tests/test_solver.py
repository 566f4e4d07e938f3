import numpy as np
import pytest

from bondnet import (
    EquilibriumProblem,
    MaterialLaw,
    Partition,
    SolverOptions,
    Status,
    assemble_state,
    build_network,
    check_jacobian,
    generate_example,
    load_sweep,
    solve,
)
from bondnet.errors import StepFailure

from conftest import TRIANGLE_D, triangle_problem

LAW = MaterialLaw(1.0, 0.5, 0.1, 1.0)


def bond_problem(law=LAW, load=(0.0, 0.0, 0.0)):
    net = build_network([[0, 0, 0], [1.0, 0, 0]], [(0, 1)])
    part = Partition.from_prescribed(2, [0])
    return EquilibriumProblem.create(net, law, part, B_P=np.array([load], dtype=float))


def test_zero_load_needs_no_iterations(trilinear):
    rep = solve(triangle_problem(trilinear))
    assert rep.status is Status.CONVERGED
    assert rep.iterations == 0
    np.testing.assert_array_equal(rep.X, TRIANGLE_D)


def test_single_bond_elastic_load():
    rep = solve(bond_problem(load=(0.3, 0, 0)))
    assert rep.converged
    np.testing.assert_allclose(rep.X[1], [1.3, 0, 0], rtol=1e-12)
    np.testing.assert_allclose(rep.B_Q, [[-0.3, 0, 0]], atol=1e-12)


def test_single_bond_hardening_load():
    # f = 0.5 + 0.1 (e - 0.5) = 0.52 at e = 0.7
    rep = solve(bond_problem(load=(0.52, 0, 0)))
    assert rep.converged
    assert rep.extensions[0] == pytest.approx(0.7, rel=1e-10)


def test_trace_is_monotone_per_stage():
    prob, opts = generate_example("octahedron").to_problem()
    rep = solve(prob, opts)
    norms = [r.residual_norm for r in rep.trace]
    assert rep.converged and len(norms) > 1
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_broken_on_arrival_leaves_free_node_force_free():
    prob = bond_problem()
    rep = solve(prob, initial_guess=[[2.5, 0.0, 0.0]])
    assert rep.converged
    assert rep.broken_bonds == (0,)
    assert np.all(rep.F == 0.0)
    assert np.all(rep.B_Q == 0.0)


def test_allow_fracture_off_does_not_mark():
    prob = bond_problem()
    rep = solve(prob, SolverOptions(allow_fracture=False), initial_guess=[[2.5, 0.0, 0.0]])
    assert rep.converged and rep.broken_bonds == ()


def test_force_controlled_overload_fails_with_last_step():
    # peak force of LAW is 0.55; a 1.0 load in 4 steps fails at step 3
    prob = bond_problem(load=(1.0, 0, 0))
    with pytest.raises(StepFailure) as info:
        load_sweep(prob, SolverOptions(load_steps=4, max_iterations=40))
    assert info.value.last_converged_step == 2
    rep = info.value.report
    assert not rep.converged
    assert len(rep.per_step_history) == 3


def test_single_step_sweep_equals_solve():
    prob, opts = generate_example("octahedron").to_problem()
    a = solve(prob, opts)
    b = load_sweep(prob, opts)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.F, b.F)
    assert a.broken_bonds == b.broken_bonds


def test_warm_start_matches_direct_solve():
    base, _ = generate_example("octahedron").to_problem()
    prob = EquilibriumProblem.create(base.net, MaterialLaw.linear(2.0), base.part,
                                     base.X_Q, 20 * base.B_P)
    a = solve(prob)
    b = load_sweep(prob, SolverOptions(load_steps=2))
    assert a.converged and b.converged
    np.testing.assert_allclose(b.X, a.X, rtol=0, atol=1e-8 * np.abs(a.X).max())


def test_deterministic():
    prob, opts = generate_example("series").to_problem()
    a, b = load_sweep(prob, opts), load_sweep(prob, opts)
    np.testing.assert_array_equal(a.X, b.X)
    assert [r.residual_norm for r in a.trace] == [r.residual_norm for r in b.trace]


def test_series_bar_break_is_reequilibrated():
    prob, opts = generate_example("series").to_problem()
    rep = load_sweep(prob, opts)
    k = next(i for i, br in enumerate(rep.broken_history) if br)
    assert rep.broken_history[k] == (1,)
    assert rep.per_step_history[k][1, 1] == 0.0
    # with the weak bond gone the stiff one unloads completely
    assert abs(rep.per_step_history[k][0, 1]) < 1e-10
    assert rep.step_residuals[k] < opts.tol_residual


def test_unbalanced_load_is_reported():
    # moment about the prescribed node cannot be carried by the reference shape
    B = np.array([[0.0, 0.0, 0.3], [0.0, 0.0, 0.0]])
    prob = triangle_problem(MaterialLaw.linear(1.0), B_P=B)
    rep = solve(prob, SolverOptions(max_iterations=30))
    if rep.converged:
        assert rep.residual_norm <= 1e-10 * max(1.0, 0.3)
        total = rep.B_Q.sum(axis=0) + B.sum(axis=0)
        assert np.abs(total).max() < 1e-9
    else:
        assert rep.status in (Status.SINGULAR_SYSTEM, Status.MAX_ITERATIONS)
        assert rep.message


def test_degenerate_start_is_reported():
    prob = triangle_problem(MaterialLaw.linear(1.0))
    x0 = prob.reference_free_positions()
    x0[0] = TRIANGLE_D[2]
    rep = solve(prob, initial_guess=x0)
    assert rep.status is Status.DEGENERATE_GEOMETRY


def test_options_roundtrip():
    opts = SolverOptions(tol_residual=1e-9, load_steps=3)
    assert SolverOptions.from_dict(opts.to_dict()) == opts
    assert SolverOptions.from_dict({"line_search": 0.3}).line_search_beta == 0.3
    with pytest.raises(ValueError):
        SolverOptions(load_steps=0)


# -- Jacobian checks ---------------------------------------------------------

def test_check_jacobian_triangle():
    prob = triangle_problem(MaterialLaw(2.0, 0.5, 0.1, 1.0))
    rng = np.random.default_rng(0)
    x = prob.reference_free_positions() + 0.05 * rng.standard_normal((2, 3))
    assert check_jacobian(prob, x) < 1e-6


def test_check_jacobian_inside_blend_zone():
    # unit lattice stretched so every bond sits near the smoothed yield point
    ey, r = 0.2, 0.05
    prob, _ = generate_example("grid", 3, 2, 2).to_problem()
    law = MaterialLaw(1.0, ey, 0.2, 0.6, smoothing_radius=r)
    D = prob.net.D
    prob = EquilibriumProblem.create(prob.net, law, prob.part, (1 + ey) * D[prob.part.prescribed])
    rng = np.random.default_rng(1)
    x = (1 + ey) * D[prob.part.free] + 0.005 * rng.standard_normal((prob.p, 3))
    st = assemble_state(prob, x)
    assert np.all(np.abs(st.ext - ey) < r)
    assert check_jacobian(prob, x) < 1e-5


def test_check_jacobian_flags_unsmoothed_kink():
    prob = bond_problem()
    x = np.array([[1.5, 0.0, 0.0]])
    assert check_jacobian(prob, x) > 0.1
