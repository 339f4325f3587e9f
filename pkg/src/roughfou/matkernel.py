"""Small dense symmetric linear algebra and the special functions the rest
of the package needs (lower incomplete gamma, 1F2 hypergeometric series).

Everything here is pure and works on plain floats / small numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import DomainError, NumericError, ValidationError

SYMMETRY_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 64
HYP_RTOL = 1e-15
HYP_MAX_TERMS = 10_000


@dataclass(frozen=True)
class EigDecomp:
    """Spectral decomposition ``M = basis @ diag(eigenvalues) @ basis.T``.

    Eigenvalues are ascending; each column of ``basis`` has its first
    non-negligible component positive.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.eigenvalues) @ self.basis.T


def as_sym_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a float64 square array, raising if it is not symmetric."""
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
        raise ValidationError(f"{name} is not symmetric")
    return a


def sym_eig(m) -> EigDecomp:
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Sweeps visit the pairs (p, q), p < q, in row-major order, so the result is
    deterministic for a given input.
    """
    a = as_sym_matrix(m).copy()
    # symmetrize exactly so the rotations see a truly symmetric matrix
    a = 0.5 * (a + a.T)
    d = a.shape[0]
    v = np.eye(d)
    norm = math.sqrt(float(np.sum(a * a)))
    for _ in range(JACOBI_MAX_SWEEPS):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= 1e-15 * norm or off == 0.0:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(d)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    else:
        raise NumericError("Jacobi iteration did not converge")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    for k in range(d):
        col = v[:, k]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size and col[lead[0]] < 0:
            v[:, k] = -col
    return EigDecomp(w, v)


def sym_apply(m, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """``Q diag(fn(lambda)) Q^T`` for symmetric ``m``."""
    eig = m if isinstance(m, EigDecomp) else sym_eig(m)
    vals = np.asarray(fn(eig.eigenvalues), dtype=float)
    out = (eig.basis * vals) @ eig.basis.T
    return 0.5 * (out + out.T)


def mat_exp_sym(m, t: float) -> np.ndarray:
    """``exp(-M t)`` for symmetric ``M``."""
    a = as_sym_matrix(m)
    if t == 0:
        return np.eye(a.shape[0])
    return sym_apply(a, lambda lam: np.exp(-lam * t))


def lower_inc_gamma(a: float, x: float) -> float:
    """Unnormalized lower incomplete gamma ``int_0^x s^(a-1) e^(-s) ds``.

    Series expansion below ``x = a + 1``, Lentz continued fraction for the
    upper tail above it.
    """
    if not a > 0:
        raise DomainError(f"lower_inc_gamma requires a > 0, got {a}")
    if x < 0 or math.isnan(x):
        raise DomainError(f"lower_inc_gamma requires x >= 0, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return math.gamma(a)
    if x < a + 1.0:
        return _gamma_series(a, x)
    return math.gamma(a) - _upper_gamma_cf(a, x)


def _gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    for k in range(1, 100_000):
        term *= x / (a + k)
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    else:
        raise NumericError(f"incomplete gamma series did not converge (a={a}, x={x})")
    return total * math.exp(a * math.log(x) - x)


def _upper_gamma_cf(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    dd = 1.0 / b
    h = dd
    for i in range(1, 100_000):
        an = -i * (i - a)
        b += 2.0
        dd = an * dd + b
        if abs(dd) < tiny:
            dd = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        dd = 1.0 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:
        raise NumericError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")
    return math.exp(a * math.log(x) - x) * h


def _check_hyp_params(b1: float, b2: float) -> None:
    for b in (b1, b2):
        if b <= 0 and float(b).is_integer():
            raise DomainError(f"1F2 lower parameter must not be a non-positive integer, got {b}")


def hyp1f2_terms(a: float, b1: float, b2: float, x: float) -> Iterator[float]:
    """Yield the successive terms of the 1F2 series (unbounded generator)."""
    _check_hyp_params(b1, b2)
    term = 1.0
    k = 0
    while True:
        yield term
        term *= (a + k) / ((b1 + k) * (b2 + k)) * x / (k + 1)
        k += 1


def hyp1f2(a: float, b1: float, b2: float, x: float,
           rtol: float = HYP_RTOL, max_terms: int = HYP_MAX_TERMS) -> float:
    """Generalized hypergeometric function 1F2(a; b1, b2; x) by direct summation."""
    total = 0.0
    for k, term in enumerate(hyp1f2_terms(a, b1, b2, x)):
        total += term
        if term == 0.0 or (k > 0 and abs(term) < rtol * abs(total)):
            return total
        if k + 1 >= max_terms:
            raise NumericError(
                f"1F2({a}; {b1}, {b2}; {x}) did not converge in {max_terms} terms "
                f"(partial sum {total!r}, last term {term!r})"
            )
    raise AssertionError("unreachable")
