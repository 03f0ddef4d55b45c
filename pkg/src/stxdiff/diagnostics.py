"""Errors and rates, entropy series, flux indicators, interface and probe tracking."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import line_rule
from .errors import InvalidArgument, SolverError
from .fespace import evaluate_points, l2_error, time_slice_integral
from .solver import eps_continuation, initial_guess, newton_solve


@dataclass
class ConvergenceRecord:
    h: float
    p: int
    epsilon: float
    l2_error: Optional[float]
    rate: Optional[float] = None
    ndof: int = 0
    iterations: int = 0
    converged: bool = True
    report: object = field(default=None, repr=False)


def observed_rates(records):
    """Fill ``rate`` from the next-coarser record with the same ``(p, epsilon)``."""
    last = {}
    for rec in records:
        key = (rec.p, rec.epsilon)
        prev = last.get(key)
        rec.rate = None
        if prev is not None and prev.l2_error and rec.l2_error:
            rec.rate = float(np.log(prev.l2_error / rec.l2_error) / np.log(prev.h / rec.h))
        last[key] = rec
    return records


def solve_on_mesh(problem, mesh, p, epsilon=0.0, delta0=1e-7, newton=None, eps_schedule=None,
                  formulation="primal"):
    """One solve of ``problem``; optional epsilon continuation down to ``epsilon``."""
    ctx = problem.context(mesh, p, epsilon=epsilon, formulation=formulation)
    w0 = initial_guess(ctx, delta0)
    if eps_schedule:
        sched = [e for e in eps_schedule if e > epsilon] + [epsilon]
        return eps_continuation(ctx, sched, newton, w0=w0)
    return newton_solve(ctx, w0, newton)


def solution_error(problem, report):
    """L2(Q_T) error of ``u(w_h)`` against the exact solution."""
    ctx = report.context
    return l2_error(ctx.space, report.coeffs[:ctx.n_w], lambda w: ctx.transform(w)[0], problem.exact)


def convergence_sweep(problem, p_list, refinement_count, epsilon=0.0, nx0=4, nt0=4,
                      kind="cartesian", delta0=1e-7, newton=None, eps_schedule=None):
    """Uniform h-refinement for each order; ``h`` is the spatial cell width."""
    if problem.exact is None:
        raise InvalidArgument(f"problem {problem.name!r} has no exact solution")
    records = []
    for p in p_list:
        for level in range(refinement_count + 1):
            nx, nt = nx0 * 2 ** level, nt0 * 2 ** level
            mesh = problem.mesh(nx, nt, kind)
            h = (problem.x_right - problem.x_left) / nx
            try:
                rep = solve_on_mesh(problem, mesh, p, epsilon, delta0, newton, eps_schedule)
            except SolverError:
                rep = None
            if rep is None or not rep.converged:
                records.append(ConvergenceRecord(h, p, epsilon, None, ndof=0, converged=False,
                                                 report=rep))
                continue
            err = solution_error(problem, rep)
            records.append(ConvergenceRecord(h, p, epsilon, err, ndof=rep.context.ndof,
                                             iterations=rep.iterations, report=rep))
    return observed_rates(records)


# -- entropy -------------------------------------------------------------------


@dataclass
class EntropySeries:
    times: np.ndarray
    entropy: np.ndarray
    dissipation: np.ndarray


def _differences(times, values):
    """Forward differences; the last sample reuses the backward difference."""
    d = np.diff(values) / np.diff(times)
    return np.append(d, d[-1]) if len(d) else np.zeros_like(values)


def entropy_series(space, coeffs, system, sample_times, reference=None, density=None,
                   transform=None):
    """``E(t) = int s(u(w_h(t, x))) dx`` at the sample times.

    ``reference`` switches to the relative entropy with respect to the constant
    state ``g``; ``density`` evaluates a different entropy on the same states.
    """
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0):
        raise InvalidArgument("sample times must be strictly increasing")
    ent = system.entropy if density is None else density
    to_rho = system.entropy.u if transform is None else transform
    if reference is not None:
        g = np.asarray(reference, dtype=float)
        fn = lambda w: ent.relative_entropy(to_rho(w), g)  # noqa: E731
    else:
        fn = lambda w: ent.s(to_rho(w))  # noqa: E731
    E = np.array([time_slice_integral(space, coeffs, t, fn) for t in times])
    return EntropySeries(times, E, _differences(times, E))


def stitched_entropy_series(reports, sample_times, reference=None, density=None):
    """Entropy series across consecutive slab solves."""
    times = np.asarray(sample_times, dtype=float)
    E = np.empty_like(times)
    for k, t in enumerate(times):
        rep = _slab_for(reports, t)
        ctx = rep.context
        sub = entropy_series(ctx.space, rep.coeffs[:ctx.n_w], ctx.system, [t], reference, density)
        E[k] = sub.entropy[0]
    return EntropySeries(times, E, _differences(times, E))


def _slab_for(reports, t):
    for rep in reports:
        m = rep.context.mesh
        if m.t_start - 1e-12 <= t <= m.t_end + 1e-12:
            return rep
    raise InvalidArgument(f"time {t} not covered by the slabs")


def log_linear_fit(times, values):
    """Slope and R^2 of a least-squares line through ``log(values)``."""
    y = np.log(np.asarray(values, dtype=float))
    t = np.asarray(times, dtype=float)
    slope, icpt = np.polyfit(t, y, 1)
    resid = y - (slope * t + icpt)
    ss = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid ** 2).sum() / ss if ss > 0 else 1.0
    return float(slope), float(r2)


# -- flux indicator ------------------------------------------------------------


def flux_error_indicator(space, coeffs, system, degree=None):
    """Per-element ``eta_K`` from jumps of the discrete spatial flux.

    ``eta_K^2 = h_K * sum_e 1/2 int_e |[[B(w_h) d_x w_h . n_x]]|^2`` over the
    interior edges of ``K``; edges parallel to the x-axis have ``n_x = 0``.
    """
    mesh = space.mesh
    ee = mesh.edge_elements
    interior = np.nonzero(ee[:, 1] >= 0)[0]
    a = mesh.nodes[mesh.edges[interior, 0]]
    b = mesh.nodes[mesh.edges[interior, 1]]
    length = np.linalg.norm(b - a, axis=1)
    nx = (b[:, 1] - a[:, 1]) / length
    rule = line_rule(2 * space.p + 2 if degree is None else degree)
    s = 0.5 * (rule.points + 1.0)
    pts = a[:, None] + s[None, :, None] * (b - a)[:, None]
    w = 0.5 * length[:, None] * rule.weights[None]

    def flux(elements):
        el = np.repeat(elements[:, None], len(s), axis=1)
        ref = mesh.inverse_map(el, pts)
        data, _ = space._basis_at(elements, ref)
        F = np.einsum("eqas,eai->eqsi", data, space.local_coeffs(coeffs, elements))
        wv = F[:, :, 0, :]
        B = system.B(wv)
        return np.einsum("eqij,eqj->eqi", B, F[:, :, 2, :])

    jump = (flux(ee[interior, 0]) - flux(ee[interior, 1])) * nx[:, None, None]
    edge_sq = (w * (jump ** 2).sum(-1)).sum(-1)
    eta2 = np.zeros(mesh.n_elements)
    np.add.at(eta2, ee[interior, 0], 0.5 * edge_sq)
    np.add.at(eta2, ee[interior, 1], 0.5 * edge_sq)
    return np.sqrt(eta2 * mesh.diameters)


# -- tracking ------------------------------------------------------------------


def sample_field(space, coeffs, x, times, transform):
    """``transform(w_h)`` at ``(x, t)`` for each time: ``(len(times), N)``."""
    times = np.asarray(times, dtype=float)
    pts = np.column_stack([np.full(times.shape, float(x)), times])
    return transform(evaluate_points(space, coeffs, pts))


def waiting_time_track(space, coeffs, x_interface, threshold, transform, samples=1000):
    """First sampled time where component 0 exceeds ``threshold``.

    Returns ``(t_first, times, values)``; ``t_first = inf`` means no crossing
    before the final time.
    """
    mesh = space.mesh
    if not mesh.x_left <= x_interface <= mesh.x_right:
        raise InvalidArgument("interface outside the spatial domain")
    times = np.linspace(mesh.t_start, mesh.t_end, samples)
    vals = sample_field(space, coeffs, x_interface, times, transform)[:, 0]
    hit = np.nonzero(vals > threshold)[0]
    t_first = float(times[hit[0]]) if hit.size else float("inf")
    return t_first, times, vals


@dataclass
class ProbeSeries:
    location: object
    times: np.ndarray
    values: np.ndarray


def probe_series(space, coeffs, transform, sample_times, x=None, subdomain=None):
    """Point values at ``x`` or averages over ``subdomain = (a, b)``."""
    times = np.asarray(sample_times, dtype=float)
    if (x is None) == (subdomain is None):
        raise InvalidArgument("give exactly one of a probe point or a subdomain")
    mesh = space.mesh
    if x is not None:
        if not mesh.x_left <= x <= mesh.x_right:
            raise InvalidArgument("probe outside the spatial domain")
        return ProbeSeries(x, times, sample_field(space, coeffs, x, times, transform))
    lo, hi = subdomain
    if not (mesh.x_left <= lo < hi <= mesh.x_right):
        raise InvalidArgument("subdomain outside the spatial domain")
    vals = np.array([time_slice_integral(space, coeffs, t, transform, x_range=(lo, hi), vector=True)
                     for t in times]) / (hi - lo)
    return ProbeSeries((lo, hi), times, vals)


def stitched_probe_series(reports, sample_times, subdomain=None, x=None):
    """Probe series across slab solves (each time uses the slab containing it)."""
    times = np.asarray(sample_times, dtype=float)
    vals = []
    for t in times:
        rep = _slab_for(reports, t)
        ctx = rep.context
        ps = probe_series(ctx.space, rep.coeffs[:ctx.n_w], lambda w: ctx.transform(w)[0], [t],
                          x=x, subdomain=subdomain)
        vals.append(ps.values[0])
    return ProbeSeries(subdomain if x is None else x, times, np.array(vals))
