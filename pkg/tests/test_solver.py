import numpy as np
import pytest

from stxdiff import problems as P
from stxdiff import solver
from stxdiff.errors import InvalidArgument, SolverError
from stxdiff.diagnostics import solution_error
from stxdiff.entropy import LogisticEntropy
from stxdiff.solver import (
    NewtonConfig, SlabDriverConfig, clamp_state, eps_continuation, initial_guess, newton_solve,
    slab_solve,
)


@pytest.fixture(scope="module")
def heat_ctx():
    prob = P.heat_manufactured()
    return prob.context(prob.mesh(8, 8), 2)


def test_heat_converges_quickly_with_decreasing_residual(heat_ctx):
    rep = newton_solve(heat_ctx, initial_guess(heat_ctx, 0.1))
    assert rep.converged and rep.iterations <= 10
    h = rep.history
    assert all(b < a for a, b in zip(h, h[1:]))
    assert rep.bounds["all_inside"]


def test_restart_at_solution_is_immediate(heat_ctx):
    rep = newton_solve(heat_ctx, initial_guess(heat_ctx, 0.1))
    again = newton_solve(heat_ctx, rep.coeffs, NewtonConfig(abs_tol=1e-8))
    assert again.converged and again.iterations == 0 and again.damping_steps == 0


def test_iteration_cap_reports_instead_of_raising(heat_ctx):
    rep = newton_solve(heat_ctx, initial_guess(heat_ctx, 0.1), NewtonConfig(max_iter=1))
    assert not rep.converged and rep.message == "max_iter reached" and rep.ledger is None


def test_singular_jacobian_bumps_epsilon_once(heat_ctx, monkeypatch):
    real = solver._factor
    calls = {"n": 0}

    def flaky(J):
        calls["n"] += 1
        if calls["n"] == 1:
            raise np.linalg.LinAlgError("singular")
        return real(J)

    monkeypatch.setattr(solver, "_factor", flaky)
    rep = newton_solve(heat_ctx, initial_guess(heat_ctx, 0.1))
    assert rep.converged and rep.eps_bumped and rep.epsilon == solver.EPS_FLOOR

    def broken(J):
        raise np.linalg.LinAlgError("singular")

    monkeypatch.setattr(solver, "_factor", broken)
    with pytest.raises(SolverError):
        newton_solve(heat_ctx, initial_guess(heat_ctx, 0.1))


def test_initial_guess_and_clamping():
    prob = P.heat_manufactured()
    ctx = prob.context(prob.mesh(2, 2), 1, rho0=lambda x: np.full(np.shape(x) + (1,), 0.5))
    assert np.allclose(initial_guess(ctx), 0.0)
    ent = LogisticEntropy(2)
    c = clamp_state(ent, np.array([0.0, 0.501]))
    assert c[0] == 1e-7 and c[1] == 0.501
    c = clamp_state(ent, np.array([0.6, 0.4]))
    assert c.sum() == pytest.approx(1 - 1e-7)


def test_eps_continuation_validation_and_single_stage(heat_ctx):
    with pytest.raises(InvalidArgument):
        eps_continuation(heat_ctx, [1e-4, 1e-3])
    with pytest.raises(InvalidArgument):
        eps_continuation(heat_ctx, [])
    w0 = initial_guess(heat_ctx, 0.1)
    a = eps_continuation(heat_ctx, [1e-3], w0=w0)
    b = newton_solve(solver.with_epsilon(heat_ctx, 1e-3), w0)
    assert np.array_equal(a.coeffs, b.coeffs)


def test_one_slab_equals_whole_solve():
    prob = P.heat_manufactured(T=0.5)
    whole = prob.context(prob.mesh(4, 4), 2)
    w = newton_solve(whole, initial_guess(whole, 1e-7))

    def make(t0, t1, rho0):
        return prob.context(prob.mesh(4, 4, t0=t0, t1=t1), 2, rho0=rho0)

    reps = slab_solve(SlabDriverConfig(0.0, 0.5, count=1), make)
    assert np.array_equal(reps[0].coeffs, w.coeffs)


def test_two_slabs_agree_with_one():
    prob = P.heat_manufactured(T=0.5)
    errs = []
    for count in (1, 2):
        def make(t0, t1, rho0, count=count):
            return prob.context(prob.mesh(8, 8 // count, t0=t0, t1=t1), 2, rho0=rho0)
        reps = slab_solve(SlabDriverConfig(0.0, 0.5, count=count, eps_schedule=(1e-2,)), make)
        assert all(r.converged for r in reps)
        sq = 0.0
        for r in reps:
            sq += solution_error(prob, r) ** 2
        errs.append(np.sqrt(sq))
    assert errs[1] == pytest.approx(errs[0], rel=0.1)


def test_slab_levels_validation():
    with pytest.raises(InvalidArgument):
        SlabDriverConfig(levels=(0.0, 0.5, 0.5, 1.0)).slab_levels()
    with pytest.raises(InvalidArgument):
        SlabDriverConfig(count=0).slab_levels()
    with pytest.raises(InvalidArgument):
        NewtonConfig(abs_tol=0)
