import numpy as np
import pytest

from stxdiff import checks, models
from stxdiff import problems as P
from stxdiff.assembly import (
    ResidualContext, SchemeConfig, entropy_ledger, h1_eps_product_matrix, jacobian, mass_balance,
    residual,
)
from stxdiff.errors import InvalidArgument
from stxdiff.fespace import FeSpace
from stxdiff.mesh import Tag, build_cartesian, build_simplicial
from stxdiff.solver import initial_guess, newton_solve


def _const_ctx(value=0.5, p=2, **cfg):
    space = FeSpace(build_cartesian(0, 1, 1, 3, 3), p, 1)
    return ResidualContext(space, models.heat(), lambda x: np.full(np.shape(x) + (1,), value),
                           SchemeConfig(**cfg))


def test_constant_state_is_an_exact_discrete_solution():
    ctx = _const_ctx()
    assert np.abs(residual(ctx, np.zeros(ctx.ndof))).max() < 1e-13
    ctx_m = _const_ctx(formulation="mixed")
    assert np.abs(residual(ctx_m, np.zeros(ctx_m.ndof))).max() < 1e-13


@pytest.mark.parametrize("name", ["heat", "porous", "fisher", "maxwell-stefan"])
@pytest.mark.parametrize("form", ["primal", "mixed"])
def test_jacobian_against_finite_differences(name, form):
    prob = dict(checks.jacobian_cases())[name]
    for kind in ("cartesian", "simplicial"):
        ctx = prob.context(prob.mesh(3, 2, kind), 2, epsilon=1e-3, formulation=form)
        x = checks._perturbed_state(ctx, 4)
        assert checks.fd_jacobian_error(ctx, x, directions=4) < 1e-6


def test_jacobian_is_square_and_sparse():
    ctx = _const_ctx(formulation="mixed", q=1)
    J = jacobian(ctx, np.zeros(ctx.ndof))
    assert J.shape == (ctx.ndof, ctx.ndof)
    assert J.nnz < 0.5 * ctx.ndof ** 2


def test_h1_eps_matrix_is_symmetric_positive():
    space = FeSpace(build_simplicial(0, 1, 1, 2, 2), 2, 1)
    K = h1_eps_product_matrix(space, 1e-2).toarray()
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > 0


def test_linear_debug_mode_converges_in_one_step():
    ctx = _const_ctx(linear_debug=True)
    x0 = np.random.default_rng(0).normal(size=ctx.ndof)
    rep = newton_solve(ctx, x0)
    assert rep.converged and rep.iterations == 1
    assert not rep.ledger["applicable"]


def test_closed_heat_solve_conserves_mass_and_satisfies_ledger():
    prob = P.heat_manufactured()
    ctx = prob.context(prob.mesh(6, 6), 2)
    rep = newton_solve(ctx, initial_guess(ctx, 0.1))
    assert rep.converged
    assert np.abs(mass_balance(ctx, rep.coeffs)).max() < 1e-10
    led = entropy_ledger(ctx, rep.coeffs)
    assert led["applicable"] and led["holds"]
    assert led["lhs"] <= led["rhs"]


def test_config_validation():
    with pytest.raises(InvalidArgument):
        SchemeConfig(epsilon=-1)
    with pytest.raises(InvalidArgument):
        SchemeConfig(formulation="dual")
    with pytest.raises(InvalidArgument):
        SchemeConfig(dirichlet={Tag.INITIAL: lambda x, t: x})
    g = lambda x, t: x  # noqa: E731
    with pytest.raises(InvalidArgument):
        SchemeConfig(dirichlet={Tag.LEFT: g}, neumann={Tag.LEFT: g})
    assert SchemeConfig().closed and not SchemeConfig(neumann={Tag.LEFT: g}).closed


def test_component_mismatch_rejected():
    space = FeSpace(build_cartesian(0, 1, 1, 2, 2), 1, 2)
    with pytest.raises(InvalidArgument):
        ResidualContext(space, models.heat(), lambda x: np.zeros(np.shape(x) + (1,)))
