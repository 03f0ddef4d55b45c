"""Experiment setups: systems, data on the cylinder and exact solutions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import models
from .assembly import ResidualContext, SchemeConfig
from .errors import InvalidArgument
from .fespace import FeSpace
from .mesh import Pattern, Tag, build_cartesian, build_simplicial


@dataclass
class Problem:
    """A cross-diffusion system on ``(x_left, x_right) x (0, T)`` with data.

    ``rho0(x)`` returns ``(..., N)``; ``exact(x, t)`` likewise when known.
    ``neumann`` maps spatial tags to the outward diffusive flux
    ``(A d_x rho) . nu``; ``dirichlet`` maps tags to boundary states.
    """
    name: str
    system: object
    x_left: float
    x_right: float
    T: float
    rho0: Callable
    exact: Optional[Callable] = None
    neumann: dict = field(default_factory=dict)
    dirichlet: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def mesh(self, nx, nt, kind="cartesian", t0=0.0, t1=None):
        t1 = self.T if t1 is None else t1
        if kind == "cartesian":
            return build_cartesian(self.x_left, self.x_right, t1, nx, nt, t0=t0)
        if kind == "simplicial":
            return build_simplicial(self.x_left, self.x_right, t1, nx, nt,
                                    pattern=Pattern.DIAGONAL_NE, t0=t0)
        if kind == "crisscross":
            return build_simplicial(self.x_left, self.x_right, t1, nx, nt,
                                    pattern=Pattern.CRISS_CROSS, t0=t0)
        raise InvalidArgument(f"unknown mesh kind {kind!r}")

    def context(self, mesh, p, epsilon=0.0, formulation="primal", q=None, rho0=None,
                quad_degree=None, nitsche_eta=1.0):
        cfg = SchemeConfig(epsilon=epsilon, formulation=formulation, q=q,
                           dirichlet=dict(self.dirichlet), neumann=dict(self.neumann),
                           quad_degree=quad_degree, nitsche_eta=nitsche_eta)
        space = FeSpace(mesh, p, self.system.N)
        return ResidualContext(space, self.system, self.rho0 if rho0 is None else rho0, cfg)


def _col(v):
    return np.asarray(v, dtype=float)[..., None]


def _flux_bc(system, exact_grad):
    """Outward flux data ``A(rho) d_x rho * nu`` on both ends from an exact solution."""

    def make(sign):
        def g(x, t):
            rho, drho = exact_grad(x, t)
            A = system.A(rho)
            return sign * np.einsum("...ij,...j->...i", A, drho)
        return g

    return {Tag.LEFT: make(-1.0), Tag.RIGHT: make(1.0)}


# -- heat --------------------------------------------------------------------

HEAT_TAU = 7.0


def heat_manufactured(tau=HEAT_TAU, T=1.0):
    """``rho = 0.5 exp(-4 pi^2 t / tau) cos(2 pi x) + 0.5`` on the unit interval.

    The time rescaling by ``tau`` is carried by the diffusivity ``1/tau`` so the
    formula is an exact solution with homogeneous Neumann data.
    """
    k = 4.0 * np.pi ** 2 / tau

    def exact(x, t):
        return _col(0.5 * np.exp(-k * t) * np.cos(2 * np.pi * x) + 0.5)

    return Problem("heat", models.heat(1.0 / tau), 0.0, 1.0, T,
                   rho0=lambda x: exact(x, 0.0), exact=exact, notes={"tau": tau})


def open_linear_heat(a=0.2, b=0.5, T=0.5):
    """Stationary ``rho = a + b x`` with Dirichlet data at both ends."""

    def exact(x, t):
        return _col(a + b * np.asarray(x) + 0.0 * np.asarray(t))

    return Problem("heat-open", models.heat(1.0), 0.0, 1.0, T, rho0=lambda x: exact(x, 0.0),
                   exact=exact, dirichlet={Tag.LEFT: exact, Tag.RIGHT: exact},
                   notes={"a": a, "b": b})


# -- porous medium -------------------------------------------------------------


def porous_exact(m=2.0, alpha=2.0, beta=5.0, T=1.0):
    """Self-similar solution ``[(m-1)(x-alpha)^2 / (2m(m+1)(beta-t))]^(1/(m-1))``."""
    sysm = models.porous_medium(m)
    c = (m - 1.0) / (2.0 * m * (m + 1.0))
    e = 1.0 / (m - 1.0)

    def rho(x, t):
        return (c * (x - alpha) ** 2 / (beta - t)) ** e

    def exact(x, t):
        return _col(rho(np.asarray(x, float), np.asarray(t, float)))

    def grad(x, t):
        x = np.asarray(x, float)
        t = np.asarray(t, float)
        r = rho(x, t)
        return _col(r), _col(e * r * 2.0 / (x - alpha))

    return Problem("porous", sysm, 0.0, 1.0, T, rho0=lambda x: exact(x, 0.0), exact=exact,
                   neumann=_flux_bc(sysm, grad), notes={"m": m, "alpha": alpha, "beta": beta})


def waiting_time_problem(m=2.0, T=0.2, floor=1e-16):
    """Compactly supported ``sin^2(x - pi/4)`` bump on ``(0, 3 pi / 2)``."""
    sysm = models.porous_medium(m)

    def rho0(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= np.pi / 4) & (x <= 5 * np.pi / 4)
        return _col(np.where(inside, np.maximum(np.sin(x - np.pi / 4) ** 2, floor), floor))

    t_star = (m - 1.0) / (2.0 * m * (m + 1.0))
    return Problem("porous-waiting", sysm, 0.0, 1.5 * np.pi, T, rho0=rho0,
                   notes={"m": m, "t_star": t_star, "x_interface": np.pi / 4})


# -- Fisher-KPP ----------------------------------------------------------------


def fisher_wave(n=2.0, T=1.0):
    """Travelling wave ``(1 + exp(x/sqrt6 - 5t/6))^-2`` for unit diffusion."""
    sysm = models.fisher_kpp(1.0, n)
    r6 = np.sqrt(6.0)

    def exact(x, t):
        return _col((1.0 + np.exp(np.asarray(x) / r6 - 5.0 * np.asarray(t) / 6.0)) ** -2)

    def grad(x, t):
        e = np.exp(np.asarray(x) / r6 - 5.0 * np.asarray(t) / 6.0)
        return _col((1.0 + e) ** -2), _col(-2.0 * (1.0 + e) ** -3 * e / r6)

    return Problem("fisher", sysm, 0.0, 1.0, T, rho0=lambda x: exact(x, 0.0), exact=exact,
                   neumann=_flux_bc(sysm, grad), notes={"n": n})


def fisher_jump(n=2.0, A_const=1e-4, T=8.0, x_jump=0.5, floor=1e-7):
    """``rho0 = 1`` left of the jump, ``floor`` right of it (left limit at the jump).

    The floor seeds the logistic growth on the empty half, as the gas-mixture
    experiments do with absent species.
    """
    sysm = models.fisher_kpp(A_const, n)

    def rho0(x):
        return _col(np.where(np.asarray(x) <= x_jump, 1.0, floor))

    return Problem("fisher-jump", sysm, 0.0, 1.0, T, rho0=rho0,
                   notes={"n": n, "A": A_const, "x_jump": x_jump, "floor": floor})


# -- Maxwell-Stefan ------------------------------------------------------------

DT_LENGTH = 171.9
DT_LEFT = (0.0, 0.501)
DT_RIGHT = (0.501, 0.499)
DT_SLAB = 20.8


def duncan_toor_1d(T=DT_SLAB * 40, length=DT_LENGTH):
    """Two half-domains of H2/N2/CO2 mixtures meeting at the midpoint (mm, s)."""
    sysm = models.duncan_toor_system()
    mid = 0.5 * length
    left, right = np.array(DT_LEFT), np.array(DT_RIGHT)

    def rho0(x):
        x = np.asarray(x, dtype=float)[..., None]
        return np.where(x <= mid, left, right)

    eq = 0.5 * (left + right)
    return Problem("duncan-toor", sysm, 0.0, length, T, rho0=rho0,
                   notes={"equilibrium": eq.tolist(), "midpoint": mid})


def ms_binary(D12=1.0, T=0.25):
    """Two-species Maxwell-Stefan (reduces to heat with diffusivity ``D12``)."""
    coeffs = models.MaxwellStefanCoefficients(np.array([[1.0, D12], [D12, 1.0]]))
    sysm = models.maxwell_stefan_system(coeffs, name="ms-binary")
    sysm.gamma = 4.0 * D12
    base = heat_manufactured(tau=1.0 / D12 if D12 else HEAT_TAU, T=T)
    return Problem("ms-binary", sysm, 0.0, 1.0, T, rho0=base.rho0, exact=base.exact,
                   notes={"D12": D12})
