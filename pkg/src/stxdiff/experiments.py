"""Experiment drivers shared by the command line and the acceptance suite.

Each driver returns plain data (records, arrays, summary dicts); file output
is the command line's job.
"""
from __future__ import annotations

import math

import numpy as np

from . import problems as P
from .diagnostics import (
    _slab_for, convergence_sweep, entropy_series, flux_error_indicator,
    solution_error, solve_on_mesh, stitched_entropy_series, stitched_probe_series,
    waiting_time_track,
)
from .entropy import BoltzmannEntropy
from .fespace import evaluate_points
from .mesh import Tag, adaptive_refine
from .solver import SlabDriverConfig, initial_guess, newton_solve, slab_solve

HEAT_DELTA0 = 0.1


def _solves(records):
    return [r.report for r in records if r.report is not None]


# -- convergence ---------------------------------------------------------------


def heat_convergence(p_list=(1, 2, 3), refinements=4, epsilon=0.0, nx0=4, kind="cartesian",
                     delta0=HEAT_DELTA0):
    return convergence_sweep(P.heat_manufactured(), p_list, refinements, epsilon, nx0, nx0,
                             kind, delta0)


def porous_convergence(p_list=(1, 2, 3), refinements=4, epsilon=0.0, nx0=4, kind="cartesian"):
    return convergence_sweep(P.porous_exact(), p_list, refinements, epsilon, nx0, nx0, kind)


def fisher_convergence(p_list=(1, 2, 3), refinements=4, epsilon=0.0, nx0=4, kind="cartesian"):
    return convergence_sweep(P.fisher_wave(), p_list, refinements, epsilon, nx0, nx0, kind)


def porous_eps_sweep(p=3, eps_list=(1e-4, 1e-6, 1e-8, 1e-10, 1e-12), nx=32, nt=32,
                     kind="cartesian"):
    """Error against epsilon on one mesh; every solve starts from the initial guess.

    Warm starts are avoided on purpose: the previous solution often already
    meets the absolute residual tolerance and would mask the epsilon floor.
    """
    from .diagnostics import ConvergenceRecord
    prob = P.porous_exact()
    mesh = prob.mesh(nx, nt, kind)
    out = []
    h = (prob.x_right - prob.x_left) / nx
    for eps in sorted(eps_list, reverse=True):
        ctx = prob.context(mesh, p, epsilon=eps)
        rep = newton_solve(ctx, initial_guess(ctx))
        if rep.converged:
            out.append(ConvergenceRecord(h, p, eps, solution_error(prob, rep), ndof=ctx.ndof,
                                         iterations=rep.iterations, report=rep))
        else:
            out.append(ConvergenceRecord(h, p, eps, None, converged=False, report=rep))
    return out


# -- adaptivity ----------------------------------------------------------------


def heat_adaptive(p=1, theta=0.5, steps=40, nx0=4, uniform_levels=4, delta0=HEAT_DELTA0,
                  target=None):
    """Adaptive and uniform refinement histories ``[(level, ndof, error)]``.

    With ``target`` the adaptive loop stops once the error falls below it.
    """
    prob = P.heat_manufactured()
    uniform = []
    for lev in range(uniform_levels):
        n = nx0 * 2 ** lev
        rep = solve_on_mesh(prob, prob.mesh(n, n, "simplicial"), p, delta0=delta0)
        uniform.append((lev, rep.context.ndof, solution_error(prob, rep) if rep.converged else None))
    adaptive = []
    mesh = prob.mesh(nx0, nx0, "simplicial")
    reports = []
    for lev in range(steps):
        rep = solve_on_mesh(prob, mesh, p, delta0=delta0)
        reports.append(rep)
        if not rep.converged:
            adaptive.append((lev, rep.context.ndof, None))
            break
        err = solution_error(prob, rep)
        adaptive.append((lev, rep.context.ndof, err))
        if target is not None and err <= target:
            break
        ctx = rep.context
        eta = flux_error_indicator(ctx.space, rep.coeffs, ctx.system)
        mesh = adaptive_refine(mesh, eta, theta)
    return adaptive, uniform, reports


# -- porous medium waiting time ------------------------------------------------


def porous_waiting_time(p=5, epsilon=1e-6, nx=96, nt=8, threshold=0.01, T=0.2,
                        eps_schedule=(1e-2, 1e-4), samples=1000):
    prob = P.waiting_time_problem(T=T)
    mesh = prob.mesh(nx, nt, "cartesian")
    rep = solve_on_mesh(prob, mesh, p, epsilon, eps_schedule=list(eps_schedule) or None)
    out = {"report": rep, "t_star": prob.notes["t_star"], "x_interface": prob.notes["x_interface"]}
    if rep.converged:
        ctx = rep.context
        t_first, times, vals = waiting_time_track(ctx.space, rep.coeffs, prob.notes["x_interface"],
                                                  threshold, lambda w: ctx.transform(w)[0], samples)
        out.update(t_first=t_first, times=times, values=vals)
    return out


# -- Fisher-KPP ------------------------------------------------------------------


FISHER_EPS_SCHEDULE = (1e-2, 1e-4, 1e-6, 1e-7)


def fisher_jump(n=2.0, p=3, epsilon=1e-8, hs=0.025, ht=0.4, T=24.0, slab_elements=6,
                samples_per_slab=6, eps_schedule=FISHER_EPS_SCHEDULE):
    """Jump initial datum solved slab by slab; entropy series with the solver's density.

    ``T`` is rounded up to whole slabs of ``slab_elements`` time cells.  Also
    returned: the Boltzmann entropy of the same states, the domain mean and the
    first sample time at which ``max |rho - 1| <= 1e-3``.
    """
    nx = int(round(1.0 / hs))
    slabs = int(math.ceil(T / (ht * slab_elements) - 1e-9))
    T = slabs * slab_elements * ht
    prob = P.fisher_jump(n=n, T=T)

    def make(t0, t1, rho0):
        mesh = prob.mesh(nx, slab_elements, "cartesian", t0=t0, t1=t1)
        return prob.context(mesh, p, epsilon=epsilon, rho0=rho0)

    cfg = SlabDriverConfig(t_start=0.0, t_end=T, count=slabs, eps_schedule=eps_schedule)
    reports = slab_solve(cfg, make)
    out = {"reports": reports, "n": n, "T": T,
           "converged": len(reports) == slabs and all(r.converged for r in reports)}
    if out["converged"]:
        times = np.linspace(0.0, T, slabs * samples_per_slab + 1)
        out["times"] = times
        out["entropy"] = stitched_entropy_series(reports, times)
        out["boltzmann"] = stitched_entropy_series(reports, times, density=BoltzmannEntropy())
        out["mean"] = stitched_probe_series(reports, times, subdomain=(0.0, 1.0)).values[:, 0]
        dev = np.array([np.abs(_states_at(reports, t, np.linspace(0.0, 1.0, 81)) - 1.0).max()
                        for t in times])
        hit = np.nonzero(dev <= 1e-3)[0]
        out["deviation"] = dev
        out["t_equilibrium"] = float(times[hit[0]]) if hit.size else float("inf")
    return out


def _states_at(reports, t, xs):
    rep = _slab_for(reports, t)
    ctx = rep.context
    pts = np.column_stack([xs, np.full(len(xs), t)])
    return ctx.transform(evaluate_points(ctx.space, rep.coeffs[:ctx.n_w], pts))[0]


def fisher_entropy_compare(n_values=(2.0, 2.1), **kw):
    return {n: fisher_jump(n=n, **kw) for n in n_values}


# -- Maxwell-Stefan --------------------------------------------------------------


DT_EPS_SCHEDULE = (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8)


def duncan_toor(p=2, epsilon=1e-10, slab_dt=P.DT_SLAB, slabs=40, nx=84, nt_per_slab=1,
                samples_per_slab=4, eps_schedule=DT_EPS_SCHEDULE):
    """Slab sweep of the three-gas analog; each slab uses epsilon continuation."""
    prob = P.duncan_toor_1d(T=slab_dt * slabs)

    def make(t0, t1, rho0):
        mesh = prob.mesh(nx, nt_per_slab, "cartesian", t0=t0, t1=t1)
        return prob.context(mesh, p, epsilon=epsilon, rho0=rho0)

    cfg = SlabDriverConfig(t_start=0.0, t_end=prob.T, count=slabs, eps_schedule=eps_schedule)
    reports = slab_solve(cfg, make)
    out = {"reports": reports, "problem": prob,
           "converged": all(r.converged for r in reports) and len(reports) == slabs}
    if out["converged"]:
        times = np.linspace(0.0, prob.T, slabs * samples_per_slab + 1)
        left = stitched_probe_series(reports, times, subdomain=(0.0, prob.notes["midpoint"]))
        eq = np.array(prob.notes["equilibrium"])
        rel = stitched_entropy_series(reports, times, reference=eq)
        out.update(times=times, left=left.values, relative_entropy=rel, equilibrium=eq)
    return out


def ms_implicit(p=2, q=2, nx=8, nt=8, D12=1.0, T=0.25, kind="cartesian"):
    """Mixed two-species Maxwell-Stefan against the primal heat solve on one mesh."""
    prob = P.ms_binary(D12=D12, T=T)
    heat = P.heat_manufactured(tau=1.0 / D12, T=T)
    mesh = prob.mesh(nx, nt, kind)
    ctx_m = prob.context(mesh, p, formulation="mixed", q=q)
    rep_m = newton_solve(ctx_m, initial_guess(ctx_m, HEAT_DELTA0))
    ctx_p = heat.context(mesh, p)
    rep_p = newton_solve(ctx_p, initial_guess(ctx_p, HEAT_DELTA0))
    out = {"mixed": rep_m, "primal": rep_p}
    if rep_m.converged and rep_p.converged:
        vd = ctx_p.vol
        um = ctx_m.transform(ctx_m.fields(rep_m.coeffs[:ctx_m.n_w], vd)[:, :, 0, :])[0]
        up = ctx_p.transform(ctx_p.fields(rep_p.coeffs, vd)[:, :, 0, :])[0]
        out["difference"] = float(np.sqrt((vd.weights[..., None] * (um - up) ** 2).sum()))
        out["mixed_error"] = solution_error(prob, rep_m)
        out["primal_error"] = solution_error(heat, rep_p)
    return out


def ms_open(p=2, levels=(4, 8, 16, 32), a=0.2, b=0.5, T=0.5, samples=21):
    """Dirichlet data at both ends imposed by Nitsche terms; boundary mismatch per level."""
    prob = P.open_linear_heat(a, b, T)
    rows = []
    reports = []
    series = None
    for n in levels:
        mesh = prob.mesh(n, n, "cartesian")
        ctx = prob.context(mesh, p)
        rep = newton_solve(ctx, initial_guess(ctx))
        reports.append(rep)
        if not rep.converged:
            rows.append((1.0 / n, None))
            continue
        mism = 0.0
        for tag in (Tag.LEFT, Tag.RIGHT):
            fd = ctx.space.facet_data(tag)
            u = ctx.transform(ctx.fields(rep.coeffs, fd)[:, :, 0, :])[0]
            g = prob.exact(fd.points[..., 0], fd.points[..., 1])
            mism += float((fd.weights[..., None] * (u - g) ** 2).sum())
        rows.append((1.0 / n, math.sqrt(mism)))
        times = np.linspace(0.0, T, samples)
        series = entropy_series(ctx.space, rep.coeffs, ctx.system, times,
                                reference=np.array([a + 0.5 * b]))
    return {"rows": rows, "entropy": series, "p": p, "reports": reports}
