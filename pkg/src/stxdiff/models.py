"""Cross-diffusion systems: diffusion matrix, reaction, entropy and constants.

``A``, ``f`` and ``M`` act on the last axis of ``rho`` and accept
:class:`~stxdiff.dual.Dual` input, which is how the assembly differentiates
them.  Closed-form ``dA`` is supplied for the scalar systems only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from . import dual as D
from .entropy import EntropyDensity, LogisticEntropy, ScaledLogEntropy
from .errors import HypothesisViolation, InvalidArgument, NumericError

DOMAIN_SAMPLE_MARGIN = 1e-6


def _const_matrix(rho, c):
    shape = D.value(rho).shape[:-1]
    return np.broadcast_to(np.asarray(c, dtype=float), shape + (1, 1)).copy()


def _zero_vector(rho):
    return np.zeros(D.value(rho).shape)


@dataclass
class CrossDiffusionSystem:
    N: int
    A: Callable
    f: Callable
    df: Callable
    entropy: EntropyDensity
    gamma: float
    c_f: float
    dA: Optional[Callable] = None
    M: Optional[Callable] = None
    name: str = "system"
    params: dict = field(default_factory=dict)

    def mobility(self, rho):
        """The implicit-current matrix; ``-A^{-1}`` unless given explicitly."""
        if self.M is not None:
            return self.M(rho)
        return -D.inv(self.A(rho))

    def B(self, w):
        """``A(u(w)) u'(w)``."""
        return D.matmul(self.A(self.entropy.u(w)), self.entropy.jac_u(w))


def heat(diffusivity=1.0):
    """Heat equation with logistic entropy; ``gamma = 4 * diffusivity``."""
    a = float(diffusivity)
    if a <= 0:
        raise InvalidArgument("diffusivity must be positive")
    return CrossDiffusionSystem(
        N=1,
        A=lambda rho: _const_matrix(rho, a),
        dA=lambda rho: np.zeros(np.shape(rho)[:-1] + (1, 1, 1)),
        f=_zero_vector,
        df=lambda rho: np.zeros(np.shape(rho) + (1,)),
        entropy=LogisticEntropy(1),
        gamma=4.0 * a,
        c_f=0.0,
        name="heat",
        params={"diffusivity": a},
    )


def porous_medium(m):
    """``A = m rho^(m-1)``; the entropy hypothesis needs ``1 < m <= 2``."""
    m = float(m)
    if not 1.0 < m <= 2.0:
        raise HypothesisViolation(f"porous medium exponent m={m} outside (1, 2]")

    def A(rho):
        r = rho[..., 0:1]
        val = m * r ** (m - 1.0)
        if isinstance(val, D.Dual):
            return D.Dual(val.val[..., None], val.der[..., None, :])
        return val[..., None]

    def dA(rho):
        r = np.asarray(rho)[..., 0]
        return (m * (m - 1.0) * r ** (m - 2.0))[..., None, None, None]

    return CrossDiffusionSystem(
        N=1, A=A, dA=dA, f=_zero_vector,
        df=lambda rho: np.zeros(np.shape(rho) + (1,)),
        entropy=LogisticEntropy(1), gamma=m, c_f=0.0,
        name="porous", params={"m": m},
    )


def fisher_kpp(A_const=1.0, n=2.0, enforce=True):
    """Fisher-KPP with ``f = rho (1 - rho)`` and the scaled log entropy.

    ``enforce=False`` skips the ``n >= 2`` gate so the violation can be
    observed by :func:`verify_hypotheses`.
    """
    a, n = float(A_const), float(n)
    if a <= 0:
        raise InvalidArgument("diffusion constant must be positive")
    if enforce and n < 2.0:
        raise HypothesisViolation(f"f . s' <= 0 needs n >= 2, got n={n}")
    ent = ScaledLogEntropy(n)
    lo, hi = DOMAIN_SAMPLE_MARGIN, 1.0 - DOMAIN_SAMPLE_MARGIN
    res = minimize_scalar(lambda r: 1.0 / r + 1.0 / (n - r), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    gamma = a * min(res.fun, 1.0 / hi + 1.0 / (n - hi))

    def f(rho):
        return rho * (1.0 - rho)

    def df(rho):
        return (1.0 - 2.0 * np.asarray(rho))[..., None]

    return CrossDiffusionSystem(
        N=1,
        A=lambda rho: _const_matrix(rho, a),
        dA=lambda rho: np.zeros(np.shape(rho)[:-1] + (1, 1, 1)),
        f=f, df=df, entropy=ent, gamma=gamma, c_f=0.0,
        name="fisher", params={"A": a, "n": n},
    )


@dataclass(frozen=True)
class MaxwellStefanCoefficients:
    """Symmetric binary diffusivities ``D_ij`` for ``N + 1`` species."""

    D: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.D, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 2:
            raise InvalidArgument("binary diffusivities must form a square matrix of size >= 2")
        off = ~np.eye(len(d), dtype=bool)
        if not np.allclose(d, d.T, rtol=0, atol=0):
            raise InvalidArgument("binary diffusivities must be symmetric")
        if np.any(d[off] <= 0):
            raise InvalidArgument("binary diffusivities must be positive")
        object.__setattr__(self, "D", d)

    @classmethod
    def from_pairs(cls, pairs, n_species):
        """Build from ``{(i, j): D_ij}`` with 1-based species indices."""
        d = np.ones((n_species, n_species))
        for (i, j), v in pairs.items():
            d[i - 1, j - 1] = d[j - 1, i - 1] = v
        return cls(d)

    @property
    def N(self):
        return len(self.D) - 1

    @property
    def d(self):
        """``(1/D13, 1/D23, 1/D12)`` for three species."""
        if len(self.D) != 3:
            raise InvalidArgument("d_i is defined for three species only")
        return 1.0 / self.D[0, 2], 1.0 / self.D[1, 2], 1.0 / self.D[0, 1]


def ms_matrix_M(coeffs, rho):
    """Reduced Maxwell-Stefan matrix with the last species eliminated."""
    Dm = coeffs.D
    n = coeffs.N
    rest = 1.0 - D.asum(rho, -1)
    rows = []
    for i in range(n):
        diag = rest / Dm[i, n]
        for k in range(n):
            if k != i:
                diag = diag + rho[..., k] / Dm[i, k]
        row = []
        for j in range(n):
            entry = -rho[..., i] / Dm[i, n]
            if j != i:
                entry = entry + rho[..., i] / Dm[i, j]
            else:
                entry = entry - diag
            row.append(entry)
        rows.append(row)
    return D.matrix(rows)


def ms_full_matrix(coeffs, rho_full):
    """Unreduced ``(N+1) x (N+1)`` friction matrix acting on all fractions."""
    Dm = coeffs.D
    n1 = len(Dm)
    r = np.asarray(rho_full, dtype=float)
    M = np.zeros(r.shape[:-1] + (n1, n1))
    for i in range(n1):
        for j in range(n1):
            if i != j:
                M[..., i, j] = r[..., i] / Dm[i, j]
        M[..., i, i] = -sum(r[..., k] / Dm[i, k] for k in range(n1) if k != i)
    return M


def ms_explicit_A2(coeffs, rho1, rho2=None):
    """Closed-form ``-M^{-1}`` for three species.

    The printed closed form pairs ``d1`` and ``d2`` the other way round; this
    is the exact inverse of :func:`ms_matrix_M` with ``d = coeffs.d``.
    """
    if rho2 is None:
        rho1, rho2 = rho1[..., 0], rho1[..., 1]
    d1, d2, d3 = coeffs.d
    delta = d1 * d2 * (1.0 - rho1 - rho2) + d1 * d3 * rho1 + d2 * d3 * rho2
    if np.any(D.value(delta) <= 0):
        raise NumericError("nonpositive determinant in the explicit Maxwell-Stefan matrix")
    return D.matrix([
        [(d2 + (d3 - d2) * rho1) / delta, (d3 - d1) * rho1 / delta],
        [(d3 - d2) * rho2 / delta, (d1 + (d3 - d1) * rho2) / delta],
    ])


def maxwell_stefan_system(coeffs, name="maxwell_stefan"):
    n = coeffs.N
    if n == 2:
        A = lambda rho: ms_explicit_A2(coeffs, rho)  # noqa: E731
    else:
        A = lambda rho: -D.inv(ms_matrix_M(coeffs, rho))  # noqa: E731
    return CrossDiffusionSystem(
        N=n, A=A, M=lambda rho: ms_matrix_M(coeffs, rho),
        f=_zero_vector, df=lambda rho: np.zeros(np.shape(rho) + (n,)),
        entropy=LogisticEntropy(n), gamma=float("nan"), c_f=0.0,
        name=name, params={"D": coeffs.D.tolist()},
    )


DUNCAN_TOOR = {(1, 3): 68.0, (2, 3): 16.8, (1, 2): 83.3}


def duncan_toor_coefficients():
    """Hydrogen (1), nitrogen (2), carbon dioxide (3), in mm^2/s."""
    return MaxwellStefanCoefficients.from_pairs(DUNCAN_TOOR, 3)


def duncan_toor_system():
    sys = maxwell_stefan_system(duncan_toor_coefficients(), name="duncan_toor")
    sys.gamma = verify_hypotheses(sys, 2000)["gamma_observed"]
    return sys


def sample_domain(system, count, margin=DOMAIN_SAMPLE_MARGIN, seed=0):
    """Quasi-random states in the interior of the state domain.

    Simplex samples come from sorted Halton coordinates.  The Fisher-KPP
    entropy lives on ``(0, n)`` but the hypotheses are checked on ``(0, 1)``.
    """
    n = system.N
    h = qmc.Halton(d=n, scramble=True, seed=seed).random(count)
    if n == 1:
        return margin + (1.0 - 2.0 * margin) * h
    s = np.sort(h, axis=1)
    gaps = np.diff(np.concatenate([np.zeros((count, 1)), s], axis=1), axis=1)
    return margin + (1.0 - (n + 1) * margin) * gaps


def verify_hypotheses(system, sample_count=10_000):
    """Sampled coercivity constant and reaction bound."""
    if sample_count < 1:
        raise InvalidArgument("sample_count must be positive")
    rho = sample_domain(system, sample_count)
    P = np.einsum("...ij,...jk->...ik", system.entropy.hess_s(rho), system.A(rho))
    gamma_obs = float(np.linalg.eigvalsh(0.5 * (P + P.swapaxes(-1, -2))).min())
    cf_obs = float(np.max(np.sum(system.f(rho) * system.entropy.grad_s(rho), axis=-1)))
    return {
        "gamma_observed": gamma_obs,
        "cf_observed": cf_obs,
        "pass": bool(gamma_obs > 0 and cf_obs <= system.c_f + 1e-12),
    }
