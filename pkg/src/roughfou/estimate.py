"""Rough path drift estimators.

With ``Sigma = sigma I`` the estimator is

    Gamma_hat^T = -(int X (x) X ds)^{-1} (int X (x) dX),

where the second integral is the first-level rough integral against the
Ito lift, discretized as ``sum_l X_l (x) X_{l,l+1} + XX_{l,l+1}``. Using the
Stratonovich lift instead makes the estimator tend to zero, so Stratonovich
input is rejected.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, FlavorError, ShapeError, ValidationError
from .fbm import PathMatrix, SampleGrid
from .fou import ModelSpec
from .matkernel import sym_eig
from .rough import CrossAreas, LiftedPath

MAX_CONDITION = 1e12
DEFAULT_BETA = 0.5


@dataclass(frozen=True)
class EstimationResult:
    gamma_hat: np.ndarray
    denominator: np.ndarray
    numerator: np.ndarray
    condition: float
    grid: SampleGrid
    flavor: str = "ito"

    def to_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat.tolist(),
            "condition": self.condition,
            "T": self.grid.T,
            "n": self.grid.n,
            "h": self.grid.h,
            "flavor": self.flavor,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def sym_solve(gram: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    """``gram^{-1} rhs`` through the eigendecomposition of the symmetric ``gram``."""
    eig = sym_eig(gram)
    lo, hi = eig.eigenvalues[0], eig.eigenvalues[-1]
    cond = hi / lo if lo > 0 else float("inf")
    if not cond < MAX_CONDITION:
        raise EstimationError(f"Gram matrix is singular or ill-conditioned (condition {cond:.3g})", cond)
    q = eig.basis
    return q @ ((q.T @ rhs) / eig.eigenvalues[:, None]), float(cond)


def _estimate_from_sums(gram, numerator, grid, flavor) -> EstimationResult:
    sol, cond = sym_solve(gram, numerator)
    gamma_t = -sol
    return EstimationResult(gamma_t.T.copy(), gram, numerator, cond, grid, flavor)


def _numerator(x_left: np.ndarray, increments: np.ndarray, areas: np.ndarray) -> np.ndarray:
    # sum_l X_l (x) X_{l,l+1} + XX_{l,l+1};  x_left is (n, d)
    return x_left.T @ increments + areas.sum(axis=0)


def _riemann_gram(values: np.ndarray, h: float) -> np.ndarray:
    # sum_{l=0}^{n} X_l (x) X_l h, including the terminal point
    return (values @ values.T) * h


def _check_pair(lift: LiftedPath, path: PathMatrix, grid: SampleGrid):
    if path.d != lift.d:
        raise ShapeError(f"path has d={path.d}, lift has d={lift.d}")
    if path.grid != grid:
        raise ShapeError(f"path grid {path.grid} does not match {grid}")


def _require_ito(lift: LiftedPath):
    if lift.flavor != "ito":
        raise FlavorError(
            "the estimator needs the Ito lift; with Stratonovich areas it converges to 0"
        )


def estimator_core(lift: LiftedPath, path: PathMatrix) -> EstimationResult:
    """Discrete estimator without the flavor guard (for studying the Stratonovich case)."""
    _check_pair(lift, path, lift.grid)
    x = path.values
    gram = _riemann_gram(x, lift.grid.h)
    num = _numerator(x[:, :-1].T, lift.increments, lift.areas)
    return _estimate_from_sums(gram, num, lift.grid, lift.flavor)


def estimate_discrete(lift: LiftedPath, path: PathMatrix) -> EstimationResult:
    """High-frequency estimator

        Gamma~^T = -(sum_{l=0}^{n} X_l (x) X_l h)^{-1} sum_{l=0}^{n-1} (X_l (x) X_{l,l+1} + XX_{l,l+1}).
    """
    _require_ito(lift)
    return estimator_core(lift, path)


def estimate_continuous(lift: LiftedPath, path: PathMatrix, refine: int = 1,
                        rule: str = "trapezoid") -> EstimationResult:
    """Estimator with the Gram integral taken on a finer grid.

    ``path`` is sampled on the lift's grid refined ``refine`` times. ``rule``
    is ``"trapezoid"`` or ``"riemann"`` (the point sum used by
    :func:`estimate_discrete`; with ``refine=1`` the two functions then agree
    bit for bit).
    """
    _require_ito(lift)
    refine = int(refine)
    if refine < 1:
        raise ValidationError("refine must be >= 1")
    _check_pair(lift, path, lift.grid.refine(refine))
    x = path.values
    hf = path.grid.h
    if rule == "riemann":
        gram = _riemann_gram(x, hf)
    elif rule == "trapezoid":
        gram = (x @ x.T - 0.5 * (np.outer(x[:, 0], x[:, 0]) + np.outer(x[:, -1], x[:, -1]))) * hf
    else:
        raise ValidationError(f"unknown quadrature rule {rule!r}")
    coarse = x[:, ::refine]
    num = _numerator(coarse[:, :-1].T, lift.increments, lift.areas)
    return _estimate_from_sums(gram, num, lift.grid, lift.flavor)


def closed_form_2d(lift: LiftedPath, path: PathMatrix) -> EstimationResult:
    """Two-dimensional estimator written out entry by entry.

    ``Gamma^{ij} = -(L_{kk} I^{ji} - L_{12} I^{ki}) / V`` with ``k = 3 - j``,
    ``I^{ij} = XX^{ij}_{0,T} + X_0^i X^j_{0,T}`` and ``V = det L``.
    """
    _require_ito(lift)
    if lift.d != 2:
        raise ShapeError("closed_form_2d needs d = 2")
    _check_pair(lift, path, lift.grid)
    h = lift.grid.h
    x1, x2 = path.values
    l11 = float(np.dot(x1, x1)) * h
    l22 = float(np.dot(x2, x2)) * h
    l12 = float(np.dot(x1, x2)) * h
    v = l11 * l22 - l12 * l12
    if not v > 1e-12 * l11 * l22:
        raise EstimationError(f"det of the Gram matrix is numerically zero ({v:.3g})")
    x0 = path.values[:, 0]
    xt = x0 + lift.increments.sum(axis=0)
    integ = lift.running[-1] + np.outer(x0, xt - x0)
    lkk = (l22, l11)
    g = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            k = 1 - j
            g[i, j] = -(lkk[j] * integ[j, i] - l12 * integ[k, i]) / v
    gram = np.array([[l11, l12], [l12, l22]])
    eig = sym_eig(gram).eigenvalues
    return EstimationResult(g, gram, integ, float(eig[-1] / eig[0]), lift.grid, lift.flavor)


def integral_x_db(lift_x: LiftedPath, lift_b: LiftedPath, cross: CrossAreas) -> np.ndarray:
    """``int_0^T X (x) dB`` from increments of ``B`` and the cross areas."""
    if lift_b.grid != lift_x.grid or cross.grid != lift_x.grid:
        raise ShapeError("lifts and cross areas must share a grid")
    if not (lift_x.flavor == lift_b.flavor == cross.flavor):
        raise FlavorError(
            f"flavor mismatch: X {lift_x.flavor}, B {lift_b.flavor}, cross {cross.flavor}"
        )
    x_left = lift_x.values()[:, :-1].T
    return x_left.T @ lift_b.increments + cross.areas.sum(axis=0)


def chain_rule_check(lift_x: LiftedPath, lift_b: LiftedPath, model: ModelSpec,
                     cross: CrossAreas) -> float:
    """Largest residual over grid times of

        int_0^t X (x) dX + (int_0^t X (x) X ds) Gamma^T - sigma int_0^t X (x) dB,

    with left-point Riemann sums for the Lebesgue integral.
    """
    if not (lift_x.flavor == lift_b.flavor == cross.flavor):
        raise FlavorError(
            f"flavor mismatch: X {lift_x.flavor}, B {lift_b.flavor}, cross {cross.flavor}"
        )
    if lift_b.grid != lift_x.grid or cross.grid != lift_x.grid:
        raise ShapeError("lifts and cross areas must share a grid")
    x_left = lift_x.values()[:, :-1].T
    h = lift_x.grid.h
    xdx = x_left[:, :, None] * lift_x.increments[:, None, :] + lift_x.areas
    xx = x_left[:, :, None] * x_left[:, None, :] * h
    xdb = x_left[:, :, None] * lift_b.increments[:, None, :] + cross.areas
    step = xdx + xx @ model.gamma.T - model.sigma * xdb
    resid = np.cumsum(step, axis=0)
    return float(np.max(np.abs(resid)))


# --- sampling schedule ------------------------------------------------------

class ScheduleWarning(UserWarning):
    """A (T, n) cell violates the high-frequency sampling condition."""


@dataclass(frozen=True)
class ScheduleCheck:
    ok: bool
    p: float
    n_h_p: float
    message: str


def sampling_exponent(H: float, beta: float = DEFAULT_BETA) -> float:
    """Midpoint of the admissible range ``p in (1, (1 + H + beta) / (1 + beta))``."""
    if not (0 < beta < 1):
        raise ValidationError(f"beta must lie in (0, 1), got {beta}")
    return 0.5 * (1.0 + (1.0 + H + beta) / (1.0 + beta))


def check_schedule(T: float, n: int, H: float, beta: float = DEFAULT_BETA,
                   warn: bool = True) -> ScheduleCheck:
    """Check ``n h^p < 1`` (the finite-sample proxy for ``n h^p -> 0``)."""
    h = T / n
    p = sampling_exponent(H, beta)
    v = n * h ** p
    ok = v < 1.0
    msg = f"T={T:g}, n={n}, H={H:g}: n*h^p = {v:.3g} with p={p:.4f}"
    if not ok:
        msg += " (>= 1: mesh too coarse for the high-frequency condition)"
        if warn:
            warnings.warn(msg, ScheduleWarning, stacklevel=2)
    return ScheduleCheck(ok, p, v, msg)
