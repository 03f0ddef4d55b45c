"""Property checks shared by ``selftest`` and the test suite."""
from __future__ import annotations

import numpy as np

from . import models
from . import problems as P
from .assembly import jacobian, mass_balance, residual
from .mesh import Tag
from .solver import initial_guess, newton_solve


def fd_jacobian_error(ctx, x, directions=20, delta=1e-6, seed=0):
    """Worst relative mismatch between ``J v`` and central differences of ``R``."""
    rng = np.random.default_rng(seed)
    J = jacobian(ctx, x)
    worst = 0.0
    for _ in range(directions):
        v = rng.standard_normal(x.size)
        v /= np.linalg.norm(v)
        fd = (residual(ctx, x + delta * v) - residual(ctx, x - delta * v)) / (2 * delta)
        jv = J @ v
        worst = max(worst, float(np.linalg.norm(fd - jv) / max(np.linalg.norm(jv), 1e-300)))
    return worst


def _perturbed_state(ctx, seed, scale=0.3):
    rng = np.random.default_rng(seed)
    x = initial_guess(ctx, 0.1)
    return x + scale * rng.standard_normal(x.size)


def jacobian_cases():
    """The four model systems on small meshes with boundary data of both kinds."""
    heat = P.heat_manufactured()
    heat.dirichlet = {Tag.LEFT: heat.exact}
    heat.neumann = {Tag.RIGHT: lambda x, t: 0.0 * np.asarray(x)[..., None]}
    porous = P.porous_exact(m=1.5)
    fisher = P.fisher_wave()
    dt = P.duncan_toor_1d(T=20.8)
    dt.x_right = 10.0
    dt.rho0 = lambda x: np.broadcast_to(np.array([0.2, 0.5]), np.shape(x) + (2,))
    return [("heat", heat), ("porous", porous), ("fisher", fisher), ("maxwell-stefan", dt)]


def jacobian_battery(directions=20, nx=3, nt=2, p=2, kinds=("cartesian", "simplicial")):
    """``{(name, formulation, kind): worst relative error}``."""
    out = {}
    for name, prob in jacobian_cases():
        for form in ("primal", "mixed"):
            for kind in kinds:
                mesh = prob.mesh(nx, nt, kind)
                ctx = prob.context(mesh, p, epsilon=1e-3, formulation=form)
                x = _perturbed_state(ctx, 1)
                out[(name, form, kind)] = fd_jacobian_error(ctx, x, directions)
    return out


def entropy_roundtrip_error(samples=2000):
    """Worst ``|s'(u(w)) - w|`` over random ``w`` for each density."""
    from .entropy import BoltzmannEntropy, LogisticEntropy, ScaledLogEntropy
    rng = np.random.default_rng(3)
    out = {}
    for name, ent, N in (("logistic-1", LogisticEntropy(1), 1), ("logistic-2", LogisticEntropy(2), 2),
                         ("scaled-log", ScaledLogEntropy(2.0), 1), ("boltzmann", BoltzmannEntropy(), 1)):
        w = rng.uniform(-8, 8, size=(samples, N))
        out[name] = float(np.abs(ent.grad_s(ent.u(w)) - w).max())
    return out


def ms_inverse_error(samples=100):
    """``max |(-M A) - I|`` on Halton states for the Duncan-Toor coefficients."""
    sysm = models.duncan_toor_system()
    coeffs = models.duncan_toor_coefficients()
    rho = models.sample_domain(sysm, samples)
    M = models.ms_matrix_M(coeffs, rho)
    A = sysm.A(rho)
    return float(np.abs(-np.einsum("...ij,...jk->...ik", M, A) - np.eye(2)).max())


def mass_balance_error(nx=8, nt=8, p=2):
    """Mass drift of a closed heat solve (Neumann zero flux, no reaction)."""
    prob = P.heat_manufactured()
    ctx = prob.context(prob.mesh(nx, nt), p)
    rep = newton_solve(ctx, initial_guess(ctx, 0.1))
    if not rep.converged:
        return float("inf")
    return float(np.abs(mass_balance(ctx, rep.coeffs)).max())


def run_all(quick=True):
    """Run the battery; returns ``[(name, value, threshold, passed)]``."""
    rows = []
    for k, v in entropy_roundtrip_error().items():
        rows.append((f"entropy roundtrip {k}", v, 1e-8, v <= 1e-8))
    v = ms_inverse_error()
    rows.append(("maxwell-stefan -M.A = I", v, 1e-12, v <= 1e-12))
    for key, v in jacobian_battery(directions=5 if quick else 20).items():
        rows.append(("jacobian " + "/".join(key), v, 1e-6, v <= 1e-6))
    v = mass_balance_error()
    rows.append(("mass balance heat", v, 1e-9, v <= 1e-9))
    return rows
