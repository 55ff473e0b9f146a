"""Manufactured solutions with hand-expanded derivatives.

All callables are vectorized over numpy coordinate arrays.  The
derivative stacks follow the conventions of the error module: gradients
as (..., 2), Hessians as (..., 3) ordered (xx, xy, yy).
"""

import numpy as np


class ManufacturedSolution:
    """Bundle of value/gradient/Hessian/Laplacian/bi-Laplacian callables."""

    def __init__(self, value, grad, hess, laplacian, bilaplacian):
        self.value = value
        self.grad = grad
        self.hess = hess
        self.laplacian = laplacian
        self.bilaplacian = bilaplacian

    @classmethod
    def cos4pi(cls):
        """u(x, y) = (cos 4 pi x - 1)(cos 4 pi y - 1)."""
        w = 4.0 * np.pi

        def a(t, k):
            # k-th derivative of cos(w t) - 1
            if k == 0:
                return np.cos(w * t) - 1.0
            cyc = (
                lambda s: -np.sin(s),
                lambda s: -np.cos(s),
                np.sin,
                np.cos,
            )[(k - 1) % 4]
            return w ** k * cyc(w * t)

        value = lambda x, y: a(x, 0) * a(y, 0)
        grad = lambda x, y: np.stack([a(x, 1) * a(y, 0), a(x, 0) * a(y, 1)], axis=-1)
        hess = lambda x, y: np.stack(
            [a(x, 2) * a(y, 0), a(x, 1) * a(y, 1), a(x, 0) * a(y, 2)], axis=-1
        )
        lap = lambda x, y: a(x, 2) * a(y, 0) + a(x, 0) * a(y, 2)
        bilap = lambda x, y: (
            a(x, 4) * a(y, 0) + 2.0 * a(x, 2) * a(y, 2) + a(x, 0) * a(y, 4)
        )
        return cls(value, grad, hess, lap, bilap)

    @classmethod
    def linear(cls, cx=1.0, cy=0.0, c0=0.0):
        """u(x, y) = cx*x + cy*y + c0 (harmonic; zero source and g1)."""
        value = lambda x, y: cx * x + cy * y + c0 + 0.0 * x
        grad = lambda x, y: np.stack(
            [np.full(np.shape(x), cx), np.full(np.shape(x), cy)], axis=-1
        )
        hess = lambda x, y: np.zeros(np.shape(x) + (3,))
        zero = lambda x, y: np.zeros(np.shape(x))
        return cls(value, grad, hess, zero, zero)
