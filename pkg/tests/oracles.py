"""Independent reference computations used by the tests.

Nothing here calls into the package's special-function or eigen code.
"""
import math

from scipy import integrate


def phi_quadrature(H: float, lam: float, t: float) -> float:
    """Scalar ``phi(t) = t^2H / 2 - U(t)`` with ``U`` from its double integral.

    ``U(t) = H lam int_0^t int_0^s e^{-lam w} (s^{2H-1} - w^{2H-1}) dw ds``
    (``w = s - u``). Both singular factors are removed by substitution:
    ``s = r^{1/2H}`` in the first term and ``w = v^{1/2H}`` in the second, which
    turns ``s^{2H-1} ds`` and ``w^{2H-1} dw`` into ``dr / 2H`` and ``dv / 2H``.
    """
    if t == 0:
        return 0.0
    a = 2.0 * H
    opts = dict(epsabs=1e-13, epsrel=1e-12)
    # int_0^t s^{2H-1} int_0^s e^{-lam w} dw ds
    first, _ = integrate.dblquad(lambda w, r: math.exp(-lam * w), 0.0, t ** a,
                                 0.0, lambda r: r ** (1.0 / a), **opts)
    # int_0^t int_0^s e^{-lam w} w^{2H-1} dw ds
    second, _ = integrate.dblquad(lambda v, s: math.exp(-lam * v ** (1.0 / a)), 0.0, t,
                                  0.0, lambda s: s ** a, **opts)
    u = H * lam * (first - second) / a
    return 0.5 * t ** a - u


def brownian_lse(x, h):
    """Classical least-squares drift estimator for ``dX = -g X dt + dW`` with ``X_0 = 0``.

    ``-(X_T^2 / 2 - T / 2) / (h sum X_l^2)`` with the Gram sum over l = 0..n.
    """
    T = h * (len(x) - 1)
    return -(0.5 * x[-1] ** 2 - 0.5 * T) / (h * sum(v * v for v in x))
