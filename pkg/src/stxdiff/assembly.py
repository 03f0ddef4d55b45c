"""Residuals and Jacobians of the space-time Galerkin scheme in entropy variables.

Pointwise integrands are arranged by test slot (value, d/dt, d/dx) and
contracted with the element kernels.  Matrix coefficients come in
(test slot, trial slot) pairs.  The unknown vector is ``w`` in the primal
formulation and ``[w, J]`` in the mixed one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import dual as D
from .errors import DomainError, InvalidArgument, NumericError
from .fespace import FeSpace
from .kernels import element_matrices, element_vectors
from .mesh import Tag

PRIMAL = "primal"
MIXED = "mixed"

VAL, DT, DX = 0, 1, 2


@dataclass
class SchemeConfig:
    epsilon: float = 0.0
    quad_degree: Optional[int] = None
    formulation: str = PRIMAL
    q: Optional[int] = None
    dirichlet: dict = field(default_factory=dict)
    neumann: dict = field(default_factory=dict)
    nitsche_eta: float = 1.0
    linear_debug: bool = False

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise InvalidArgument("epsilon must be nonnegative")
        if self.formulation not in (PRIMAL, MIXED):
            raise InvalidArgument(f"unknown formulation {self.formulation!r}")
        if self.dirichlet and not self.nitsche_eta > 0:
            raise InvalidArgument("Nitsche penalty must be positive")
        for tags in (self.dirichlet, self.neumann):
            for t in tags:
                if Tag(t) not in (Tag.LEFT, Tag.RIGHT):
                    raise InvalidArgument("boundary data lives on spatial facets only")
        if set(map(Tag, self.dirichlet)) & set(map(Tag, self.neumann)):
            raise InvalidArgument("a facet set cannot carry both Dirichlet and Neumann data")

    @property
    def closed(self):
        """No boundary exchange: the entropy estimate applies."""
        return not self.dirichlet and not self.neumann


class _Pattern:
    """CSR pattern of element-local blocks and scatter positions into it."""

    def __init__(self, local_to_global, n):
        ne, nl = local_to_global.shape
        rows = np.repeat(local_to_global, nl, axis=1)
        cols = np.tile(local_to_global, (1, nl))
        keys = rows.astype(np.int64) * n + cols
        uniq, inv = np.unique(keys.ravel(), return_inverse=True)
        self.n = n
        self.pos = inv.reshape(ne, nl, nl)
        self.indices = (uniq % n).astype(np.int32)
        self.indptr = np.searchsorted(uniq // n, np.arange(n + 1)).astype(np.int32)
        self.nnz = len(uniq)

    def matrix(self, contributions):
        """Sum ``[(elements or None, K (ne, nl, nl))]`` into a CSR matrix."""
        data = np.zeros(self.nnz)
        for elems, K in contributions:
            pos = self.pos if elems is None else self.pos[elems]
            data += np.bincount(pos.ravel(), weights=K.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()),
                             shape=(self.n, self.n))


def _local_to_global(space, offset=0):
    """``(ne, nb*N)`` global indices in (basis, component) order."""
    comp = np.arange(space.N) * space.n_scalar
    return offset + (space.element_dofs[:, :, None] + comp).reshape(space.mesh.n_elements, -1)


def _pairs_matrix(test, weights, pairs, trial):
    """Element matrices ``(ne, nbt*N, nbr*N)`` from ``[(s, r, coeff)]``."""
    s_idx = np.array([p[0] for p in pairs], dtype=np.int64)
    r_idx = np.array([p[1] for p in pairs], dtype=np.int64)
    coeff = np.ascontiguousarray(np.stack([p[2] for p in pairs], axis=2))
    K = element_matrices(np.ascontiguousarray(test), np.ascontiguousarray(weights),
                         s_idx, r_idx, coeff, np.ascontiguousarray(trial))
    ne, a, n, b, m = K.shape
    return K.reshape(ne, a * n, b * m)


def _check_finite(arr, elements):
    bad = ~np.isfinite(arr).reshape(arr.shape[0], -1).all(axis=1)
    if bad.any():
        raise NumericError("non-finite quadrature value", element_id=int(elements[np.argmax(bad)]))


def _eye_like(shape, n):
    return np.broadcast_to(np.eye(n), tuple(shape) + (n, n))


class ResidualContext:
    """Everything needed to evaluate the discrete scheme on one mesh.

    ``rho0`` maps x-coordinates ``(...)`` to initial states ``(..., N)``.
    """

    def __init__(self, space: FeSpace, system, rho0: Callable, config: SchemeConfig = None,
                 space_J: FeSpace = None):
        self.config = config if config is not None else SchemeConfig()
        if space.N != system.N:
            raise InvalidArgument("space and system component counts differ")
        self.space = space
        self.system = system
        self.rho0 = rho0
        self.mesh = space.mesh
        self.N = system.N
        cfg = self.config
        self.degree = cfg.quad_degree if cfg.quad_degree is not None else 2 * space.p + 2
        self.mixed = cfg.formulation == MIXED
        if self.mixed:
            q = cfg.q if cfg.q is not None else space.p
            self.space_J = space_J if space_J is not None else FeSpace(space.mesh, q, self.N)
        else:
            self.space_J = None
        self.n_w = space.ndof
        self.ndof = self.n_w + (self.space_J.ndof if self.mixed else 0)

        self.vol = space.volume_data(self.degree)
        self.init = space.facet_data(Tag.INITIAL, self.degree)
        self.final = space.facet_data(Tag.FINAL, self.degree)
        self.rho0_values = self._initial_values()
        if self.mixed:
            self.volJ = self.space_J.volume_data(self.degree)
        self.boundary = {}
        for tag, g in cfg.dirichlet.items():
            self.boundary[Tag(tag)] = ("dirichlet", g)
        for tag, g in cfg.neumann.items():
            self.boundary[Tag(tag)] = ("neumann", g)
        self._facets = {}
        for tag, (kind, g) in self.boundary.items():
            fd = space.facet_data(tag, self.degree)
            vals = np.asarray(g(fd.points[..., 0], fd.points[..., 1]), dtype=float)
            vals = np.broadcast_to(vals.reshape(vals.shape[:2] + (-1,)), fd.weights.shape + (self.N,))
            xy = self.mesh.nodes[self.mesh.cells[fd.elements]]
            hs = xy[..., 0].max(axis=1) - xy[..., 0].min(axis=1)
            fJ = self.space_J.facet_data(tag, self.degree) if self.mixed else None
            self._facets[tag] = (kind, fd, vals, hs, fJ)

        L = _local_to_global(space)
        if self.mixed:
            L = np.concatenate([L, _local_to_global(self.space_J, self.n_w)], axis=1)
        self.local_to_global = L
        self.nl_w = space.basis.size * self.N
        self.pattern = _Pattern(L, self.ndof)

    # -- pointwise maps ----------------------------------------------------

    def _initial_values(self):
        x = self.init.points[..., 0]
        vals = np.asarray(self.rho0(x), dtype=float)
        if vals.shape == x.shape:
            vals = vals[..., None]
        vals = np.broadcast_to(vals, x.shape + (self.N,)).copy()
        if not np.all(np.isfinite(vals)):
            raise NumericError("non-finite initial data")
        if not self.config.linear_debug:
            tol = 1e-12
            if np.any(vals < -tol) or (self.system.entropy.name == "logistic"
                                       and np.any(vals.sum(-1) > 1 + tol)):
                raise DomainError("initial data outside the closed state domain")
        return vals

    def transform(self, w):
        """``u(w)`` and ``u'(w)`` (identity in linear debug mode)."""
        if self.config.linear_debug:
            return np.array(w, dtype=float), _eye_like(np.shape(w)[:-1], self.N)
        ent = self.system.entropy
        return ent.u(w), ent.jac_u(w)

    def _pointwise(self, w, derivs):
        """Values at quadrature points; with ``derivs`` also their w-derivatives.

        Returns ``u, u', B, f`` and, if requested, ``dB[..., i, l, j] =
        dB_il/dw_j`` and ``df[..., i, j] = d f_i(u(w))/dw_j``.
        """
        sysm = self.system
        if not derivs:
            u, jac = self.transform(w)
            B = np.einsum("...ij,...jk->...ik", sysm.A(u), jac)
            return u, jac, B, np.asarray(sysm.f(u), dtype=float)
        W = D.Dual.seed(w)
        if self.config.linear_debug:
            U = W
        else:
            U = sysm.entropy.u(W)
        jac = U.der
        Bm = D.matmul(sysm.A(U), self._jac_dual(W))
        F = sysm.f(U)
        Bv, dB = (Bm.val, Bm.der) if isinstance(Bm, D.Dual) else (Bm, np.zeros(Bm.shape + (self.N,)))
        Fv, dF = (F.val, F.der) if isinstance(F, D.Dual) else (np.asarray(F), np.zeros(np.shape(F) + (self.N,)))
        return U.val, jac, Bv, Fv, dB, dF

    def _jac_dual(self, W):
        if self.config.linear_debug:
            return _eye_like(W.shape[:-1], self.N)
        return self.system.entropy.jac_u(W)

    def current_matrix(self, w, derivs=False):
        """``s''(u(w)) M(u(w))`` and optionally its w-derivative ``[..., i, k, j]``."""
        ent, sysm = self.system.entropy, self.system
        if not derivs:
            u, _ = self.transform(w)
            return np.einsum("...ij,...jk->...ik", ent.hess_s(u), D.value(sysm.mobility(u)))
        W = D.Dual.seed(w)
        U = W if self.config.linear_debug else ent.u(W)
        S = D.matmul(ent.hess_s(U), sysm.mobility(U))
        if isinstance(S, D.Dual):
            return S.val, S.der
        return S, np.zeros(S.shape + (self.N,))

    # -- field evaluation ----------------------------------------------------

    def split(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.ndof,):
            raise InvalidArgument(f"expected {self.ndof} coefficients, got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise NumericError("non-finite coefficients")
        return coeffs[:self.n_w], coeffs[self.n_w:]

    def fields(self, w, pdata):
        return self.space.eval_at(w, pdata)

    def _vector(self, parts):
        """Scatter ``[(elements or None, local vectors (ne, nl))]``."""
        out = np.zeros(self.ndof)
        L = self.local_to_global
        for elems, vloc in parts:
            idx = L if elems is None else L[elems]
            out += np.bincount(idx.ravel(), weights=vloc.ravel(), minlength=self.ndof)
        return out

    def _pad(self, vloc, block):
        """Place a w-block (0) or J-block (1) local vector into the full local layout."""
        if not self.mixed:
            return vloc
        full = np.zeros(vloc.shape[:1] + (self.local_to_global.shape[1],))
        if block == 0:
            full[:, :self.nl_w] = vloc
        else:
            full[:, self.nl_w:] = vloc
        return full

    def _pad_matrix(self, K, rb, cb):
        if not self.mixed:
            return K
        nl = self.local_to_global.shape[1]
        full = np.zeros((K.shape[0], nl, nl))
        rs = slice(0, self.nl_w) if rb == 0 else slice(self.nl_w, nl)
        cs = slice(0, self.nl_w) if cb == 0 else slice(self.nl_w, nl)
        full[:, rs, cs] = K
        return full


def h1_eps_product_matrix(space, epsilon, degree=None):
    """Gram matrix of ``int f g + int f_x g_x + epsilon int f_t g_t``."""
    if not epsilon >= 0:
        raise InvalidArgument("epsilon must be nonnegative")
    vd = space.volume_data(degree)
    n = space.N
    shape = vd.weights.shape
    eye = _eye_like(shape, n)
    K = _pairs_matrix(vd.basis, vd.weights, [(VAL, VAL, eye), (DX, DX, eye), (DT, DT, epsilon * eye)],
                      vd.basis)
    pat = _Pattern(_local_to_global(space), space.ndof)
    return pat.matrix([(None, K)])


def _eps_flux(eps, F):
    """Regularization integrand ``eps * (w, w_t * eps, w_x)`` by test slot."""
    out = np.empty_like(F)
    out[:, :, VAL] = eps * F[:, :, VAL]
    out[:, :, DT] = eps * eps * F[:, :, DT]
    out[:, :, DX] = eps * F[:, :, DX]
    return out


def _eps_pairs(eps, shape, n):
    eye = _eye_like(shape, n)
    return [(VAL, VAL, eps * eye), (DT, DT, eps * eps * eye), (DX, DX, eps * eye)]


def _trace_parts(ctx, w):
    """Final-time and initial-time trace integrands tested with the w-space."""
    fin = ctx.final
    uT, _ = ctx.transform(ctx.fields(w, fin)[:, :, VAL, :])
    _check_finite(uT, fin.elements)
    vT = element_vectors(fin.basis[..., :1], fin.weights, uT[:, :, None, :])
    ini = ctx.init
    v0 = element_vectors(ini.basis[..., :1], ini.weights, -ctx.rho0_values[:, :, None, :])
    return [(fin.elements, vT.reshape(len(fin.elements), -1)),
            (ini.elements, v0.reshape(len(ini.elements), -1))]


def _trace_jacobian(ctx, w):
    fin = ctx.final
    _, jac = ctx.transform(ctx.fields(w, fin)[:, :, VAL, :])
    K = _pairs_matrix(fin.basis, fin.weights, [(VAL, VAL, jac)], fin.basis)
    return (fin.elements, ctx._pad_matrix(K, 0, 0))


def residual_primal(ctx, w_coeffs):
    if ctx.mixed:
        raise InvalidArgument("context is configured for the mixed formulation")
    w, _ = ctx.split(w_coeffs)
    eps = ctx.config.epsilon
    vd = ctx.vol
    F = ctx.fields(w, vd)
    u, jac, B, f = ctx._pointwise(F[:, :, VAL, :], derivs=False)
    flux = _eps_flux(eps, F)
    flux[:, :, VAL] -= f
    flux[:, :, DT] -= u
    flux[:, :, DX] += np.einsum("eqij,eqj->eqi", B, F[:, :, DX, :])
    _check_finite(flux, vd.elements)
    vol = element_vectors(vd.basis, vd.weights, flux)
    parts = [(None, vol.reshape(vol.shape[0], -1))] + _trace_parts(ctx, w)
    parts += _boundary_parts_primal(ctx, w)
    return ctx._vector(parts)


def _boundary_parts_primal(ctx, w):
    parts = []
    eta = ctx.config.nitsche_eta
    for tag, (kind, fd, g, hs, _) in ctx._facets.items():
        nx = fd.normals[:, 0][:, None, None]
        if kind == "neumann":
            integrand = -g
        else:
            F = ctx.fields(w, fd)
            u, jac, B, _ = ctx._pointwise(F[:, :, VAL, :], derivs=False)
            J = -np.einsum("eqij,eqj->eqi", B, F[:, :, DX, :])
            integrand = J * nx + (eta / hs)[:, None, None] * (u - g)
        _check_finite(integrand, fd.elements)
        v = element_vectors(fd.basis[..., :1], fd.weights, integrand[:, :, None, :])
        parts.append((fd.elements, v.reshape(len(fd.elements), -1)))
    return parts


def jacobian_primal(ctx, w_coeffs):
    if ctx.mixed:
        raise InvalidArgument("context is configured for the mixed formulation")
    w, _ = ctx.split(w_coeffs)
    eps = ctx.config.epsilon
    vd = ctx.vol
    F = ctx.fields(w, vd)
    u, jac, B, f, dB, dF = ctx._pointwise(F[:, :, VAL, :], derivs=True)
    G = np.einsum("eqilj,eql->eqij", dB, F[:, :, DX, :])
    pairs = _eps_pairs(eps, vd.weights.shape, ctx.N)
    pairs += [(VAL, VAL, -dF), (DT, VAL, -jac), (DX, DX, B), (DX, VAL, G)]
    for _, _, c in pairs:
        _check_finite(c, vd.elements)
    K = _pairs_matrix(vd.basis, vd.weights, pairs, vd.basis)
    contributions = [(None, K), _trace_jacobian(ctx, w)]
    eta = ctx.config.nitsche_eta
    for tag, (kind, fd, g, hs, _) in ctx._facets.items():
        if kind != "dirichlet":
            continue
        Ff = ctx.fields(w, fd)
        _, jf, Bf, _, dBf, _ = ctx._pointwise(Ff[:, :, VAL, :], derivs=True)
        Gf = np.einsum("eqilj,eql->eqij", dBf, Ff[:, :, DX, :])
        nx = fd.normals[:, 0][:, None, None, None]
        pen = (eta / hs)[:, None, None, None]
        fp = [(VAL, DX, -nx * Bf), (VAL, VAL, -nx * Gf + pen * jf)]
        contributions.append((fd.elements, _pairs_matrix(fd.basis, fd.weights, fp, fd.basis)))
    return ctx.pattern.matrix(contributions)


def residual_mixed(ctx, w_coeffs, J_coeffs=None):
    """Block residuals ``(R_w, R_J)``; ``w_coeffs`` may hold the stacked vector."""
    if not ctx.mixed:
        raise InvalidArgument("context is configured for the primal formulation")
    x = w_coeffs if J_coeffs is None else np.concatenate([w_coeffs, J_coeffs])
    R = _residual_mixed_full(ctx, x)
    return R[:ctx.n_w], R[ctx.n_w:]


def _residual_mixed_full(ctx, x):
    w, Jc = ctx.split(x)
    eps = ctx.config.epsilon
    vd, vj = ctx.vol, ctx.volJ
    F = ctx.fields(w, vd)
    Jq = ctx.space_J.eval_at(Jc, vj)[:, :, VAL, :]
    u, jac, _, f = ctx._pointwise(F[:, :, VAL, :], derivs=False)
    flux = _eps_flux(eps, F)
    flux[:, :, VAL] -= f
    flux[:, :, DT] -= u
    flux[:, :, DX] -= Jq
    _check_finite(flux, vd.elements)
    Rw = element_vectors(vd.basis, vd.weights, flux)
    S = ctx.current_matrix(F[:, :, VAL, :])
    cur = np.einsum("eqij,eqj->eqi", S, Jq) - F[:, :, DX, :]
    _check_finite(cur, vd.elements)
    RJ = element_vectors(vj.basis[..., :1], vj.weights, cur[:, :, None, :])
    ne = vd.weights.shape[0]
    parts = [(None, np.concatenate([Rw.reshape(ne, -1), RJ.reshape(ne, -1)], axis=1))]
    parts += [(e, ctx._pad(v, 0)) for e, v in _trace_parts(ctx, w)]
    eta = ctx.config.nitsche_eta
    for tag, (kind, fd, g, hs, fJ) in ctx._facets.items():
        nx = fd.normals[:, 0][:, None, None]
        if kind == "neumann":
            v = element_vectors(fd.basis[..., :1], fd.weights, -g[:, :, None, :])
            parts.append((fd.elements, ctx._pad(v.reshape(len(fd.elements), -1), 0)))
            continue
        Ff = ctx.fields(w, fd)
        uf, _ = ctx.transform(Ff[:, :, VAL, :])
        Jf = ctx.space_J.eval_at(Jc, fJ)[:, :, VAL, :]
        iw = Jf * nx + (eta / hs)[:, None, None] * (uf - g)
        ij = (uf - g) * nx
        vw = element_vectors(fd.basis[..., :1], fd.weights, iw[:, :, None, :])
        vJ = element_vectors(fJ.basis[..., :1], fJ.weights, ij[:, :, None, :])
        nf = len(fd.elements)
        parts.append((fd.elements, np.concatenate([vw.reshape(nf, -1), vJ.reshape(nf, -1)], axis=1)))
    return ctx._vector(parts)


def jacobian_mixed(ctx, w_coeffs, J_coeffs=None):
    if not ctx.mixed:
        raise InvalidArgument("context is configured for the primal formulation")
    x = w_coeffs if J_coeffs is None else np.concatenate([w_coeffs, J_coeffs])
    w, Jc = ctx.split(x)
    eps = ctx.config.epsilon
    n = ctx.N
    vd, vj = ctx.vol, ctx.volJ
    shape = vd.weights.shape
    eye = _eye_like(shape, n)
    F = ctx.fields(w, vd)
    Jq = ctx.space_J.eval_at(Jc, vj)[:, :, VAL, :]
    u, jac, _, f, _, dF = ctx._pointwise(F[:, :, VAL, :], derivs=True)
    S, dS = ctx.current_matrix(F[:, :, VAL, :], derivs=True)
    dSJ = np.einsum("eqikj,eqk->eqij", dS, Jq)
    ww = _eps_pairs(eps, shape, n) + [(VAL, VAL, -dF), (DT, VAL, -jac)]
    Kww = _pairs_matrix(vd.basis, vd.weights, ww, vd.basis)
    KwJ = _pairs_matrix(vd.basis, vd.weights, [(DX, VAL, -eye)], vj.basis)
    KJw = _pairs_matrix(vj.basis, vj.weights, [(VAL, DX, -eye), (VAL, VAL, dSJ)], vd.basis)
    KJJ = _pairs_matrix(vj.basis, vj.weights, [(VAL, VAL, S)], vj.basis)
    for K in (Kww, KJw, KJJ):
        _check_finite(K, vd.elements)
    K = np.concatenate([np.concatenate([Kww, KwJ], axis=2), np.concatenate([KJw, KJJ], axis=2)], axis=1)
    contributions = [(None, K), _trace_jacobian(ctx, w)]
    eta = ctx.config.nitsche_eta
    for tag, (kind, fd, g, hs, fJ) in ctx._facets.items():
        if kind != "dirichlet":
            continue
        Ff = ctx.fields(w, fd)
        _, jf = ctx.transform(Ff[:, :, VAL, :])
        fshape = fd.weights.shape
        nx = fd.normals[:, 0][:, None, None, None]
        pen = (eta / hs)[:, None, None, None]
        feye = _eye_like(fshape, n)
        Bww = _pairs_matrix(fd.basis, fd.weights, [(VAL, VAL, pen * jf)], fd.basis)
        BwJ = _pairs_matrix(fd.basis, fd.weights, [(VAL, VAL, nx * feye)], fJ.basis)
        BJw = _pairs_matrix(fJ.basis, fJ.weights, [(VAL, VAL, nx * jf)], fd.basis)
        BJJ = np.zeros((len(fd.elements), BJw.shape[1], BwJ.shape[2]))
        Kf = np.concatenate([np.concatenate([Bww, BwJ], axis=2),
                             np.concatenate([BJw, BJJ], axis=2)], axis=1)
        contributions.append((fd.elements, Kf))
    return ctx.pattern.matrix(contributions)


def residual(ctx, coeffs):
    """Stacked residual for either formulation."""
    if ctx.mixed:
        return _residual_mixed_full(ctx, coeffs)
    return residual_primal(ctx, coeffs)


def jacobian(ctx, coeffs):
    if ctx.mixed:
        return jacobian_mixed(ctx, coeffs)
    return jacobian_primal(ctx, coeffs)


# -- post-solve checks ---------------------------------------------------------


def entropy_ledger(ctx, coeffs):
    """Both sides of the discrete entropy estimate.

    ``lhs = eps ||w||^2_{H1_eps} + int s(u(w(T))) + gamma int |d_x u(w)|^2``,
    ``rhs = int s(rho0) + C_f |Omega| T``.
    """
    w, _ = ctx.split(coeffs)
    eps = ctx.config.epsilon
    ent = ctx.system.entropy
    vd = ctx.vol
    F = ctx.fields(w, vd)
    wt = vd.weights[..., None]
    norm2 = float((wt * (F[:, :, VAL] ** 2 + F[:, :, DX] ** 2 + eps * F[:, :, DT] ** 2)).sum())
    _, jac = ctx.transform(F[:, :, VAL, :])
    grad_u = np.einsum("eqij,eqj->eqi", jac, F[:, :, DX, :])
    dissipation = float((wt * grad_u ** 2).sum())
    uT, _ = ctx.transform(ctx.fields(w, ctx.final)[:, :, VAL, :])
    sT = float((ctx.final.weights * ent.s(uT)).sum())
    s0 = float((ctx.init.weights * ent.s(ctx.rho0_values)).sum())
    gamma = ctx.system.gamma
    lhs = eps * norm2 + sT + gamma * dissipation
    rhs = s0 + ctx.system.c_f * ctx.mesh.width * ctx.mesh.duration
    applicable = ctx.config.closed and not ctx.config.linear_debug and np.isfinite(gamma)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "applicable": bool(applicable),
        "holds": bool(lhs <= rhs + 1e-8 * abs(rhs)) if applicable else None,
        "entropy_final": sT,
        "entropy_initial": s0,
        "dissipation": dissipation,
    }


def boundedness(ctx, coeffs):
    """Count quadrature points where ``u(w_h)`` lies strictly in the state domain."""
    w, _ = ctx.split(coeffs)
    ent = ctx.system.entropy
    vals = [ctx.fields(w, pd)[:, :, VAL, :].reshape(-1, ctx.N) for pd in (ctx.vol, ctx.final)]
    allw = np.concatenate(vals)
    inside = ent.in_domain_w(allw)
    return {"points": int(inside.size), "inside": int(inside.sum()), "all_inside": bool(inside.all())}


def mass_balance(ctx, coeffs):
    """``int u(w_h(T)) - int rho0`` per component."""
    w, _ = ctx.split(coeffs)
    uT, _ = ctx.transform(ctx.fields(w, ctx.final)[:, :, VAL, :])
    mT = (ctx.final.weights[..., None] * uT).sum(axis=(0, 1))
    m0 = (ctx.init.weights[..., None] * ctx.rho0_values).sum(axis=(0, 1))
    return mT - m0
