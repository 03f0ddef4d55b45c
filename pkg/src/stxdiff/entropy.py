"""Entropy densities and the entropy-variable transform ``u = (s')^{-1}``.

All maps act on the last axis and broadcast over leading axes.  ``u``,
``jac_u`` and ``hess_s`` accept :class:`~stxdiff.dual.Dual` arguments so the
assembly can differentiate compositions through them.
"""
import numpy as np

from . import dual as D
from .errors import DomainError, NumericError

DOMAIN_MARGIN = 1e-14


def _log_args(args):
    """Clamp log arguments to the domain margin; reject anything further out."""
    if isinstance(args, D.Dual):
        return args
    args = np.asarray(args, dtype=float)
    if np.any(args < -DOMAIN_MARGIN) or not np.all(np.isfinite(args)):
        raise DomainError("state outside the entropy domain")
    return np.maximum(args, DOMAIN_MARGIN)


def _check_finite(w):
    w = D.value(w)
    if not np.all(np.isfinite(w)):
        raise NumericError("non-finite entropy variable")


class EntropyDensity:
    """Interface shared by the concrete densities."""

    N = 1
    name = "entropy"

    def s(self, rho):
        raise NotImplementedError

    def grad_s(self, rho):
        raise NotImplementedError

    def hess_s(self, rho):
        raise NotImplementedError

    def u(self, w):
        raise NotImplementedError

    def jac_u(self, w):
        raise NotImplementedError

    def jac_u_deriv(self, w):
        """``d(jac_u)_{lj} / dw_k`` with shape ``(..., N, N, N)``."""
        raise NotImplementedError

    def in_domain(self, rho):
        raise NotImplementedError

    def fractions(self, w):
        """Partition of ``u(w)`` and its complement(s), each computed directly."""
        raise NotImplementedError

    def in_domain_w(self, w):
        """Strict membership of ``u(w)`` in the domain, decided on the fractions.

        Testing ``1 - sum(u(w)) > 0`` on rounded values fails near the
        boundary even though every fraction is positive.
        """
        f = self.fractions(w)
        return np.all((f > 0) & np.isfinite(f), axis=-1)

    def relative_entropy(self, rho, g):
        rho = np.asarray(rho, dtype=float)
        g = np.asarray(g, dtype=float)
        return self.s(rho) - self.s(g) - np.sum(self.grad_s(g) * (rho - g), axis=-1)


class LogisticEntropy(EntropyDensity):
    """Mixing entropy on the simplex ``{rho in (0,1)^N : sum(rho) < 1}``."""

    name = "logistic"

    def __init__(self, N=1):
        self.N = int(N)

    def _args(self, rho):
        rest = 1.0 - D.asum(rho, -1)
        return rho, rest

    def s(self, rho):
        rho = np.asarray(rho, dtype=float)
        a = _log_args(rho)
        r = _log_args(1.0 - rho.sum(-1))
        return (a * np.log(a)).sum(-1) + r * np.log(r) + np.log(self.N + 1)

    def grad_s(self, rho):
        rho = np.asarray(rho, dtype=float)
        a = _log_args(rho)
        r = _log_args(1.0 - rho.sum(-1))
        return np.log(a) - np.log(r)[..., None]

    def hess_s(self, rho):
        a = _log_args(rho)
        r = _log_args(1.0 - D.asum(rho, -1))
        inv_r = 1.0 / r
        if isinstance(inv_r, D.Dual):
            inv_r = D.Dual(inv_r.val[..., None, None], inv_r.der[..., None, None, :])
        else:
            inv_r = inv_r[..., None, None]
        return D.diag_embed(1.0 / a) + inv_r

    def u(self, w):
        _check_finite(w)
        shift = np.maximum(D.value(w).max(axis=-1), 0.0)[..., None]
        e = D.exp(w - shift)
        denom = np.exp(-shift[..., 0]) + D.asum(e, -1)
        if isinstance(denom, D.Dual):
            denom = D.Dual(denom.val[..., None], denom.der[..., None, :])
        else:
            denom = denom[..., None]
        return e / denom

    def fractions(self, w):
        w = np.asarray(w, dtype=float)
        _check_finite(w)
        shift = np.maximum(w.max(axis=-1), 0.0)[..., None]
        e = np.concatenate([np.exp(w - shift), np.exp(-shift)], axis=-1)
        return e / e.sum(-1, keepdims=True)

    def jac_u(self, w):
        u = self.u(w)
        if isinstance(u, D.Dual):
            outer = D.Dual(u.val[..., :, None], u.der[..., :, None, :]) * \
                D.Dual(u.val[..., None, :], u.der[..., None, :, :])
            return D.diag_embed(u) - outer
        return D.diag_embed(u) - u[..., :, None] * u[..., None, :]

    def jac_u_deriv(self, w):
        u = self.u(w)
        J = D.diag_embed(u) - u[..., :, None] * u[..., None, :]
        n = self.N
        eye = np.eye(n)
        # d(J_lj)/dw_k = delta_lj J_lk - J_lk u_j - u_l J_jk
        return (eye[:, :, None] * J[..., :, None, :]
                - J[..., :, None, :] * u[..., None, :, None]
                - u[..., :, None, None] * J[..., None, :, :])

    def in_domain(self, rho):
        rho = np.asarray(rho)
        return np.all(rho > 0, axis=-1) & (rho.sum(-1) < 1)


class ScaledLogEntropy(EntropyDensity):
    """``s(rho) = rho log rho + (n - rho) log(n - rho)`` for one species."""

    name = "scaled_log"

    def __init__(self, n=2.0):
        self.n = float(n)
        self.N = 1

    def s(self, rho):
        rho = np.asarray(rho, dtype=float)[..., 0]
        a = _log_args(rho)
        b = _log_args(self.n - rho)
        return a * np.log(a) + b * np.log(b)

    def grad_s(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.log(_log_args(rho)) - np.log(_log_args(self.n - rho))

    def hess_s(self, rho):
        a = _log_args(rho)
        b = _log_args(self.n - rho)
        h = 1.0 / a + 1.0 / b
        if isinstance(h, D.Dual):
            return D.Dual(h.val[..., None], h.der[..., None, :])
        return h[..., None]

    def u(self, w):
        _check_finite(w)
        # n * sigmoid(w), evaluated without overflow
        neg = -D.value(w)
        shift = np.maximum(neg, 0.0)
        e = D.exp(-w - shift)
        return self.n * np.exp(-shift) / (np.exp(-shift) + e)

    def fractions(self, w):
        w = np.asarray(w, dtype=float)
        _check_finite(w)
        sig = np.where(w >= 0, 1.0 / (1.0 + np.exp(-np.abs(w))), np.exp(-np.abs(w)) / (1.0 + np.exp(-np.abs(w))))
        cosig = np.where(w >= 0, np.exp(-np.abs(w)) / (1.0 + np.exp(-np.abs(w))), 1.0 / (1.0 + np.exp(-np.abs(w))))
        return np.concatenate([sig, cosig], axis=-1)

    def jac_u(self, w):
        u = self.u(w)
        j = u * (self.n - u) / self.n
        if isinstance(j, D.Dual):
            return D.Dual(j.val[..., None], j.der[..., None, :])
        return j[..., None]

    def jac_u_deriv(self, w):
        u = self.u(w)
        j = u * (self.n - u) / self.n
        return (j * (self.n - 2 * u) / self.n)[..., None, None]

    def in_domain(self, rho):
        rho = np.asarray(rho)[..., 0]
        return (rho > 0) & (rho < self.n)


class BoltzmannEntropy(EntropyDensity):
    """``rho log rho - rho + 1``; diagnostic series only, never a solver transform."""

    name = "boltzmann"
    N = 1

    def s(self, rho):
        rho = np.asarray(rho, dtype=float)[..., 0]
        a = _log_args(rho)
        return a * np.log(a) - rho + 1.0

    def grad_s(self, rho):
        return np.log(_log_args(np.asarray(rho, dtype=float)))

    def hess_s(self, rho):
        return (1.0 / _log_args(np.asarray(rho, dtype=float)))[..., None]

    def u(self, w):
        _check_finite(w)
        return np.exp(np.asarray(w, dtype=float))

    def fractions(self, w):
        return self.u(w)

    def jac_u(self, w):
        return self.u(w)[..., None]

    def jac_u_deriv(self, w):
        return self.u(w)[..., None, None]

    def in_domain(self, rho):
        return np.asarray(rho)[..., 0] > 0
