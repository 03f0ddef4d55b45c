"""Forward-mode dual numbers over numpy arrays.

A :class:`Dual` carries a value array of shape ``S`` and ``k`` derivative
channels of shape ``S + (k,)``.  Only the operations needed by the models and
entropy maps are provided.
"""
import numpy as np


class Dual:
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, val, der):
        self.val = np.asarray(val, dtype=float)
        self.der = np.asarray(der, dtype=float)

    @classmethod
    def seed(cls, x):
        """Independent variables along the last axis of ``x``."""
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        der = np.broadcast_to(np.eye(n), x.shape + (n,)).copy()
        return cls(x, der)

    @property
    def shape(self):
        return self.val.shape

    @property
    def nchan(self):
        return self.der.shape[-1]

    def __repr__(self):
        return f"Dual(shape={self.shape}, channels={self.nchan})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        other = np.asarray(other)
        return Dual(self.val + other, np.broadcast_to(self.der, np.broadcast_shapes(
            self.val.shape, other.shape) + (self.nchan,)))

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.der * other.val[..., None] + other.der * self.val[..., None])
        other = np.asarray(other)
        return Dual(self.val * other, self.der * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other.reciprocal()
        other = np.asarray(other)
        return Dual(self.val / other, self.der / other[..., None])

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self):
        inv = 1.0 / self.val
        return Dual(inv, -self.der * (inv * inv)[..., None])

    def __pow__(self, exponent):
        if isinstance(exponent, Dual):
            raise TypeError("dual exponents are not supported")
        v = self.val ** exponent
        return Dual(v, self.der * (exponent * self.val ** (exponent - 1))[..., None])

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            return Dual(self.val[idx], self.der[idx + (slice(None),)])
        return Dual(self.val[idx], self.der[idx])

    def sum(self, axis):
        axis = axis if axis < 0 else axis - self.val.ndim
        return Dual(self.val.sum(axis=axis), self.der.sum(axis=axis - 1))


def value(x):
    return x.val if isinstance(x, Dual) else np.asarray(x)


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.val)
        return Dual(e, x.der * e[..., None])
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(np.log(x.val), x.der / x.val[..., None])
    return np.log(x)


def asum(x, axis=-1):
    if isinstance(x, Dual):
        return x.sum(axis)
    return np.sum(x, axis=axis)


def stack(items, axis=-1):
    if not any(isinstance(v, Dual) for v in items):
        return np.stack(items, axis=axis)
    k = next(v.nchan for v in items if isinstance(v, Dual))
    shape = np.broadcast_shapes(*(value(v).shape for v in items))
    vals, ders = [], []
    for v in items:
        if isinstance(v, Dual):
            vals.append(np.broadcast_to(v.val, shape))
            ders.append(np.broadcast_to(v.der, shape + (k,)))
        else:
            vals.append(np.broadcast_to(v, shape))
            ders.append(np.zeros(shape + (k,)))
    dax = axis - 1 if axis < 0 else axis
    return Dual(np.stack(vals, axis=axis), np.stack(ders, axis=dax))


def matrix(rows):
    """Build ``(..., n, m)`` from a nested list of entries."""
    return stack([stack(list(r), axis=-1) for r in rows], axis=-2)


def diag_embed(x):
    if isinstance(x, Dual):
        n = x.shape[-1]
        eye = np.eye(n)
        return Dual(x.val[..., :, None] * eye, x.der[..., :, None, :] * eye[..., None])
    x = np.asarray(x)
    return x[..., :, None] * np.eye(x.shape[-1])


def matmul(a, b):
    if isinstance(a, Dual) and isinstance(b, Dual):
        return Dual(a.val @ b.val, np.einsum("...ijd,...jk->...ikd", a.der, b.val)
                    + np.einsum("...ij,...jkd->...ikd", a.val, b.der))
    if isinstance(a, Dual):
        return Dual(a.val @ b, np.einsum("...ijd,...jk->...ikd", a.der, b))
    if isinstance(b, Dual):
        return Dual(a @ b.val, np.einsum("...ij,...jkd->...ikd", a, b.der))
    return a @ b


def matvec(a, x):
    if isinstance(a, Dual) or isinstance(x, Dual):
        xm = Dual(x.val[..., None], x.der[..., None, :]) if isinstance(x, Dual) else np.asarray(x)[..., None]
        r = matmul(a, xm)
        return r[..., 0]
    return np.einsum("...ij,...j->...i", a, x)


def inv(a):
    if isinstance(a, Dual):
        ai = np.linalg.inv(a.val)
        return Dual(ai, -np.einsum("...ij,...jkd,...kl->...ild", ai, a.der, ai))
    return np.linalg.inv(a)


def jacobian(fn, x):
    """``(value, d value / d x)`` of a function of the last axis of ``x``."""
    out = fn(Dual.seed(x))
    if isinstance(out, Dual):
        return out.val, out.der
    out = np.asarray(out, dtype=float)
    return out, np.zeros(out.shape + (np.shape(x)[-1],))
