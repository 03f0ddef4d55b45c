"""Damped Newton iteration, epsilon continuation and the time-slab driver."""
from __future__ import annotations

import copy
import dataclasses
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import ResidualContext, boundedness, entropy_ledger, jacobian, residual
from .entropy import LogisticEntropy, ScaledLogEntropy
from .errors import InvalidArgument, NumericError, SolverError
from .fespace import evaluate_points, interpolate

DELTA0 = 1e-7
EPS_FLOOR = 1e-10


@dataclass(frozen=True)
class NewtonConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_iter: int = 50
    max_halvings: int = 12
    decrease: float = 0.25

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise InvalidArgument("tolerances must be positive")
        if self.max_iter < 1 or self.max_halvings < 0:
            raise InvalidArgument("iteration limits must be positive")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    history: list
    coeffs: np.ndarray
    wall_time: float
    ledger: Optional[dict] = None
    bounds: Optional[dict] = None
    damping_steps: int = 0
    epsilon: float = 0.0
    eps_bumped: bool = False
    message: str = ""
    context: Optional[ResidualContext] = field(default=None, repr=False)


def with_epsilon(ctx, epsilon):
    """Shallow copy of ``ctx`` with a different regularization weight."""
    new = copy.copy(ctx)
    new.config = dataclasses.replace(ctx.config, epsilon=float(epsilon))
    return new


def _factor(J):
    try:
        lu = splu(J.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise np.linalg.LinAlgError(str(exc)) from exc
    return lu


def _safe_norm(ctx, x):
    try:
        r = residual(ctx, x)
    except (NumericError, FloatingPointError, OverflowError):
        return np.inf, None
    n = float(np.linalg.norm(r))
    return (n, r) if np.isfinite(n) else (np.inf, None)


def newton_solve(ctx, w0, config: NewtonConfig = None):
    """Damped Newton with sparse LU; never raises on plain non-convergence."""
    cfg = config if config is not None else NewtonConfig()
    start = time.perf_counter()
    x = np.array(w0, dtype=float)
    if x.shape != (ctx.ndof,) or not np.all(np.isfinite(x)):
        raise InvalidArgument("initial coefficients must be finite with one entry per dof")
    norm, r = _safe_norm(ctx, x)
    if r is None:
        raise NumericError("residual not finite at the initial guess")
    norm0 = norm
    history = [norm]
    bumped = False
    damping = 0
    message = "max_iter reached"
    converged = False
    it = 0
    while True:
        if norm <= cfg.abs_tol or norm <= cfg.rel_tol * norm0:
            converged = True
            message = "converged"
            break
        if it >= cfg.max_iter:
            break
        try:
            lu = _factor(jacobian(ctx, x))
            step = lu.solve(-r)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError("non-finite Newton step")
        except np.linalg.LinAlgError as exc:
            if bumped:
                raise SolverError(f"singular Jacobian after epsilon bump: {exc}") from exc
            bumped = True
            ctx = with_epsilon(ctx, max(10.0 * ctx.config.epsilon, EPS_FLOOR))
            norm, r = _safe_norm(ctx, x)
            norm0 = max(norm0, norm)
            history.append(norm)
            continue
        lam = 1.0
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            trial = x + lam * step
            tnorm, tr = _safe_norm(ctx, trial)
            if tnorm <= (1.0 - cfg.decrease * lam) * norm:
                accepted = True
                break
            lam *= 0.5
            damping += 1
        it += 1
        if not accepted:
            message = "line search failed"
            break
        x, r, norm = trial, tr, tnorm
        history.append(norm)
    report = SolveReport(
        converged=converged, iterations=it, history=history, coeffs=x,
        wall_time=time.perf_counter() - start, damping_steps=damping,
        epsilon=ctx.config.epsilon, eps_bumped=bumped, message=message, context=ctx,
    )
    if converged:
        report.ledger = entropy_ledger(ctx, x)
        report.bounds = boundedness(ctx, x)
    return report


def clamp_state(entropy, rho, delta0=DELTA0):
    """Pull states into the open domain by ``delta0`` margins."""
    rho = np.array(rho, dtype=float)
    if isinstance(entropy, ScaledLogEntropy):
        return np.clip(rho, delta0, entropy.n - delta0)
    rho = np.maximum(rho, delta0)
    if isinstance(entropy, LogisticEntropy):
        rho = np.minimum(rho, 1.0 - delta0)
        total = rho.sum(-1, keepdims=True)
        scale = np.where(total >= 1.0 - delta0, (1.0 - delta0) / total, 1.0)
        rho = rho * scale
    return rho


def _rho0_at(ctx, x):
    vals = np.asarray(ctx.rho0(x), dtype=float)
    if vals.shape == np.shape(x):
        vals = vals[..., None]
    return np.broadcast_to(vals, np.shape(x) + (ctx.N,))


def initial_guess(ctx, delta0=DELTA0):
    """``s'(clamp(rho0(x)))`` extended constant in time; zero currents."""
    if ctx.config.linear_debug:
        w = interpolate(ctx.space, lambda x, t: _rho0_at(ctx, x))
    else:
        ent = ctx.system.entropy
        w = interpolate(ctx.space, lambda x, t: ent.grad_s(clamp_state(ent, _rho0_at(ctx, x), delta0)))
    if ctx.mixed:
        return np.concatenate([w, np.zeros(ctx.ndof - ctx.n_w)])
    return w


def eps_continuation(ctx, eps_schedule, config: NewtonConfig = None, w0=None):
    """Solve along a decreasing epsilon schedule, warm-starting each stage."""
    sched = [float(e) for e in eps_schedule]
    if not sched or any(e < 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
        raise InvalidArgument("epsilon schedule must be nonempty, nonnegative and strictly decreasing")
    x = initial_guess(ctx) if w0 is None else np.asarray(w0, dtype=float)
    last_good = None
    for k, eps in enumerate(sched):
        final = k == len(sched) - 1
        try:
            rep = newton_solve(with_epsilon(ctx, eps), x, config)
        except (SolverError, NumericError):
            if final or last_good is None:
                raise
            rep = None
        if rep is not None and rep.converged:
            last_good = rep
            x = rep.coeffs
        elif not final and last_good is not None:
            warnings.warn(f"epsilon continuation stalled at eps={eps}; keeping eps={last_good.epsilon}")
            last_good.message = f"fell back to eps={last_good.epsilon}"
            return last_good
        if final:
            return rep
    return last_good


@dataclass
class SlabDriverConfig:
    """Slab levels from ``t_start`` to ``t_end``; ``count`` splits evenly.

    ``eps_schedule`` runs each slab through epsilon continuation, ending at the
    slab context's own epsilon.
    """

    t_start: float = 0.0
    t_end: float = 1.0
    count: Optional[int] = None
    levels: Optional[tuple] = None
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    warm_start: str = "interface"
    eps_schedule: Optional[tuple] = None

    def slab_levels(self):
        if self.levels is not None:
            lv = np.asarray(self.levels, dtype=float)
        else:
            if not self.count or self.count < 1:
                raise InvalidArgument("slab count must be positive")
            lv = np.linspace(self.t_start, self.t_end, self.count + 1)
        if lv.ndim != 1 or len(lv) < 2 or np.any(np.diff(lv) <= 0):
            raise InvalidArgument("slab levels must be strictly increasing")
        return lv


def interface_data(ctx, coeffs, t):
    """``rho(x) = u(w_h(x, t))`` as a callable, clamped into the domain."""
    space = ctx.space
    w = coeffs[:ctx.n_w]
    ent = ctx.system.entropy
    debug = ctx.config.linear_debug

    def rho(x):
        x = np.asarray(x, dtype=float)
        pts = np.column_stack([x.ravel(), np.full(x.size, t)])
        vals = evaluate_points(space, w, pts)
        u = vals if debug else ent.u(vals)
        return u.reshape(x.shape + (ctx.N,))

    return rho


def slab_solve(driver_cfg: SlabDriverConfig, make_context: Callable):
    """Sequential slabs; ``make_context(t0, t1, rho0)`` builds each slab problem.

    Returns the list of reports; a failed slab ends the sweep early.
    """
    levels = driver_cfg.slab_levels()
    reports = []
    rho0 = None
    for t0, t1 in zip(levels[:-1], levels[1:]):
        ctx = make_context(float(t0), float(t1), rho0)
        eps = ctx.config.epsilon
        if driver_cfg.eps_schedule:
            sched = [e for e in driver_cfg.eps_schedule if e > eps] + [eps]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = eps_continuation(ctx, sched, driver_cfg.newton, initial_guess(ctx))
        else:
            rep = newton_solve(ctx, initial_guess(ctx), driver_cfg.newton)
        reports.append(rep)
        if not rep.converged:
            break
        rho0 = interface_data(rep.context, rep.coeffs, float(t1))
    return reports
