"""Element-level contraction kernels.

Each kernel has a numba implementation and a numpy (einsum) reference.  The
public names dispatch on :data:`stxdiff._backend.USE_NUMBA`.

Shapes
------
``test``/``trial``: ``(ne, nq, nb, 3)`` basis data, last axis is
(value, d/dt, d/dx).  ``weights``: ``(ne, nq)`` physical quadrature weights.
"""
import numpy as np

from ._backend import USE_NUMBA, njit


def element_matrices_numpy(test, weights, s_idx, r_idx, coeff, trial):
    ne, nq, nbt, _ = test.shape
    nbr = trial.shape[2]
    n = coeff.shape[-1]
    out = np.zeros((ne, nbt, n, nbr, n))
    for k in range(len(s_idx)):
        tw = test[..., s_idx[k]] * weights[:, :, None]
        out += np.einsum("eqa,eqij,eqb->eaibj", tw, coeff[:, :, k], trial[..., r_idx[k]],
                         optimize=True)
    return out


@njit
def _element_matrices_nb(test, weights, s_idx, r_idx, coeff, trial):
    ne, nq, nbt, _ = test.shape
    nbr = trial.shape[2]
    n = coeff.shape[-1]
    npair = s_idx.shape[0]
    out = np.zeros((ne, nbt, n, nbr, n))
    # per-element contiguous copies of the weighted test and trial columns
    tw = np.empty((nq, nbt))
    tr = np.empty((nq, nbr))
    acc = np.empty((nbt, nbr))
    for e in range(ne):
        for k in range(npair):
            s = s_idx[k]
            r = r_idx[k]
            for q in range(nq):
                for a in range(nbt):
                    tw[q, a] = test[e, q, a, s] * weights[e, q]
                for b in range(nbr):
                    tr[q, b] = trial[e, q, b, r]
            for i in range(n):
                for j in range(n):
                    acc[:, :] = 0.0
                    for q in range(nq):
                        c = coeff[e, q, k, i, j]
                        if c == 0.0:
                            continue
                        for a in range(nbt):
                            ta = tw[q, a] * c
                            if ta == 0.0:
                                continue
                            for b in range(nbr):
                                acc[a, b] += ta * tr[q, b]
                    for a in range(nbt):
                        for b in range(nbr):
                            out[e, a, i, b, j] += acc[a, b]
    return out


def element_vectors_numpy(test, weights, flux):
    return np.einsum("eqas,eq,eqsi->eai", test, weights, flux, optimize=True)


@njit
def _element_vectors_nb(test, weights, flux):
    ne, nq, nb, ns = test.shape
    n = flux.shape[-1]
    out = np.zeros((ne, nb, n))
    for e in range(ne):
        for q in range(nq):
            wq = weights[e, q]
            for a in range(nb):
                for s in range(ns):
                    t = test[e, q, a, s] * wq
                    if t == 0.0:
                        continue
                    for i in range(n):
                        out[e, a, i] += t * flux[e, q, s, i]
    return out


def eval_fields_numpy(basis, local_coeffs):
    """Values and gradients of fields at points: ``(ne, nq, 3, N)``."""
    return np.einsum("eqas,eai->eqsi", basis, local_coeffs, optimize=True)


@njit
def _eval_fields_nb(basis, local_coeffs):
    ne, nq, nb, ns = basis.shape
    n = local_coeffs.shape[-1]
    out = np.zeros((ne, nq, ns, n))
    for e in range(ne):
        for q in range(nq):
            for a in range(nb):
                for s in range(ns):
                    v = basis[e, q, a, s]
                    for i in range(n):
                        out[e, q, s, i] += v * local_coeffs[e, a, i]
    return out


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


if USE_NUMBA:
    def element_matrices(test, weights, s_idx, r_idx, coeff, trial):
        return _element_matrices_nb(_c(test), _c(weights), np.asarray(s_idx, np.int64),
                                    np.asarray(r_idx, np.int64), _c(coeff), _c(trial))

    def element_vectors(test, weights, flux):
        return _element_vectors_nb(_c(test), _c(weights), _c(flux))

    def eval_fields(basis, local_coeffs):
        return _eval_fields_nb(_c(basis), _c(local_coeffs))
else:
    element_matrices = element_matrices_numpy
    element_vectors = element_vectors_numpy
    eval_fields = eval_fields_numpy
