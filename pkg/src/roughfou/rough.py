"""Level-2 rough path lifts of sampled paths.

A :class:`LiftedPath` stores, for each grid interval ``[t_l, t_{l+1}]``, the
increment and the second-level tensor ``XX_{t_l, t_{l+1}}`` (entry ``[i, j]``
approximates ``int X^i_{t_l, u} dX^j_u``), plus the running second level
``XX_{0, t_l}`` assembled from them by Chen's identity. The Stratonovich
lift comes from the one-step trapezoid rule, optionally on a finer grid
composed back with Chen's identity; the Ito lift subtracts the deterministic
correction ``sigma^2 (phi(t_{l+1}) - phi(t_l))``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DomainError, FlavorError, ShapeError, ValidationError
from .fbm import PathMatrix, SampleGrid, check_hurst
from .matkernel import as_sym_matrix, lower_inc_gamma, sym_eig

FLAVORS = ("stratonovich", "ito")


def chen_running(base_offsets: np.ndarray, increments: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """Running second level ``XX_{0, t_l}`` from per-interval data.

    ``base_offsets[l] = X_{t_l} - X_0`` (shape ``(n+1, d)``).
    """
    n, d = increments.shape
    terms = areas + base_offsets[:-1, :, None] * increments[:, None, :]
    running = np.zeros((n + 1, d, d))
    np.cumsum(terms, axis=0, out=running[1:])
    return running


def _readonly(a):
    # C order so that reductions and products do not depend on how the input was laid out
    a = np.array(a, dtype=float, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LiftedPath:
    grid: SampleGrid
    increments: np.ndarray
    areas: np.ndarray
    flavor: str
    base_point: np.ndarray
    running: np.ndarray
    strat_areas: np.ndarray | None = None

    def __post_init__(self):
        n = self.grid.n
        inc = _readonly(self.increments)
        if inc.ndim != 2 or inc.shape[0] != n:
            raise ShapeError(f"increments must have shape ({n}, d), got {inc.shape}")
        d = inc.shape[1]
        areas = _readonly(self.areas)
        if areas.shape != (n, d, d):
            raise ShapeError(f"areas must have shape ({n}, {d}, {d}), got {areas.shape}")
        running = _readonly(self.running)
        if running.shape != (n + 1, d, d):
            raise ShapeError(f"running must have shape ({n + 1}, {d}, {d}), got {running.shape}")
        if self.flavor not in FLAVORS:
            raise FlavorError(f"unknown flavor {self.flavor!r}")
        base = _readonly(np.reshape(self.base_point, -1))
        if base.shape != (d,):
            raise ShapeError(f"base_point must have length {d}")
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "areas", areas)
        object.__setattr__(self, "running", running)
        object.__setattr__(self, "base_point", base)

    @classmethod
    def from_areas(cls, grid, increments, areas, flavor, base_point, strat_areas=None) -> "LiftedPath":
        """Build a lift and its running second level by Chen composition."""
        increments = np.asarray(increments, dtype=float)
        offsets = np.zeros((increments.shape[0] + 1, increments.shape[1]))
        np.cumsum(increments, axis=0, out=offsets[1:])
        running = chen_running(offsets, increments, np.asarray(areas, dtype=float))
        return cls(grid, increments, areas, flavor, base_point, running, strat_areas)

    @property
    def d(self) -> int:
        return self.increments.shape[1]

    def offsets(self) -> np.ndarray:
        """``X_{t_l} - X_0`` for every grid point, shape ``(n+1, d)``."""
        out = np.zeros((self.grid.n + 1, self.d))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def values(self) -> np.ndarray:
        """Path positions, shape ``(d, n+1)``."""
        return (self.base_point + self.offsets()).T

    def second_level(self, i: int, j: int) -> np.ndarray:
        """``XX_{t_i, t_j}`` recovered from the running second level."""
        p = self.offsets()
        return self.running[j] - self.running[i] - np.outer(p[i], p[j] - p[i])

    def total_area(self) -> np.ndarray:
        return self.running[-1].copy()

    def replace_areas(self, areas) -> "LiftedPath":
        """Same lift with new per-interval areas and a recomposed running level."""
        return LiftedPath.from_areas(self.grid, self.increments, areas, self.flavor, self.base_point)


@dataclass(frozen=True)
class CorrectionTable:
    """``phi^gamma(t_l)`` for every grid point, shape ``(n+1, d, d)``."""

    grid: SampleGrid
    phi: np.ndarray
    gamma_used: np.ndarray
    hurst: float

    def increments(self) -> np.ndarray:
        return np.diff(self.phi, axis=0)


@dataclass(frozen=True)
class CrossAreas:
    """Per-interval ``int X_{t_l, u} (x) dB_u`` for a driver ``B`` and solution ``X``."""

    grid: SampleGrid
    areas: np.ndarray
    flavor: str = "stratonovich"


def _block_offsets(dx: np.ndarray) -> np.ndarray:
    """Within-block exclusive cumulative sums: ``X_{u_k} - X_s`` for blocks of shape (n, m, d)."""
    y = np.cumsum(dx, axis=1)
    y -= dx
    return y


def strat_lift(path: PathMatrix, substeps: int = 1) -> LiftedPath:
    """Stratonovich lift by the trapezoid rule.

    ``path`` lives on the fine grid; the lift lives on the grid with
    ``path.grid.n // substeps`` intervals, each area being the Chen
    composition of the one-step areas ``0.5 dX (x) dX`` inside it.
    """
    m = int(substeps)
    if m < 1 or path.grid.n % m:
        raise ShapeError(f"substeps={substeps} does not divide the path's n={path.grid.n}")
    n = path.grid.n // m
    d = path.d
    dx = np.diff(path.values, axis=1).T.reshape(n, m, d)
    if m == 1:
        areas = 0.5 * dx[:, 0, :, None] * dx[:, 0, None, :]
    else:
        y = _block_offsets(dx)
        areas = np.einsum("nki,nkj->nij", y + 0.5 * dx, dx)
    coarse = path.values[:, ::m]
    increments = np.diff(coarse, axis=1).T
    grid = SampleGrid(path.grid.T, n)
    return LiftedPath.from_areas(grid, increments, areas, "stratonovich", path.values[:, 0])


def cross_areas(x_path: PathMatrix, b_path: PathMatrix, substeps: int = 1) -> CrossAreas:
    """Trapezoid cross integrals ``int X_{s,u} (x) dB_u`` per coarse interval."""
    if x_path.grid != b_path.grid or x_path.d != b_path.d:
        raise ShapeError("solution and driver must share grid and dimension")
    m = int(substeps)
    if m < 1 or x_path.grid.n % m:
        raise ShapeError(f"substeps={substeps} does not divide n={x_path.grid.n}")
    n = x_path.grid.n // m
    d = x_path.d
    dx = np.diff(x_path.values, axis=1).T.reshape(n, m, d)
    db = np.diff(b_path.values, axis=1).T.reshape(n, m, d)
    y = _block_offsets(dx)
    areas = np.einsum("nki,nkj->nij", y + 0.5 * dx, db)
    return CrossAreas(SampleGrid(x_path.grid.T, n), areas, "stratonovich")


# --- Ito correction --------------------------------------------------------

def _phi_scalar(lam: float, H: float, t: float) -> float:
    # H * lam^-2H * [(1 - 2H + lam t) g(2H, lam t) + (lam t)^2H e^{-lam t}]
    if t == 0:
        return 0.0
    x = lam * t
    a = 2.0 * H
    return H * lam ** (-a) * ((1.0 - a + x) * lower_inc_gamma(a, x) + math.exp(a * math.log(x) - x))


def _pd_eig(gamma):
    eig = sym_eig(as_sym_matrix(gamma, "gamma"))
    if eig.eigenvalues[0] <= 0:
        raise DomainError(f"gamma must be positive definite, eigenvalues {eig.eigenvalues}")
    return eig


def ito_correction_phi(gamma, H: float, t: float) -> np.ndarray:
    """``phi^gamma(t) = I t^2H / 2 - U^gamma(t)`` evaluated in the eigenbasis of ``gamma``.

    Each eigen-direction reduces to lower incomplete gamma functions,
    ``int_0^t e^{-lam s} s^(a-1) ds = lam^-a g(a, lam t)``. At ``H = 1/2`` the
    result is exactly ``(t/2) I``.
    """
    check_hurst(H)
    if t < 0:
        raise DomainError("phi is defined for t >= 0")
    eig = _pd_eig(gamma)
    d = len(eig.eigenvalues)
    if H == 0.5:
        return 0.5 * t * np.eye(d)
    vals = np.array([_phi_scalar(lam, H, t) for lam in eig.eigenvalues])
    out = (eig.basis * vals) @ eig.basis.T
    return 0.5 * (out + out.T)


def phi_rate_limit(gamma, H: float) -> np.ndarray:
    """``lim phi(t)/t = H Gamma int_0^inf e^{-Gamma s} s^(2H-1) ds = H G(2H) Gamma^(1-2H)``."""
    eig = _pd_eig(gamma)
    vals = H * math.gamma(2 * H) * eig.eigenvalues ** (1 - 2 * H)
    return (eig.basis * vals) @ eig.basis.T


def correction_table(gamma, H: float, grid: SampleGrid) -> CorrectionTable:
    check_hurst(H)
    eig = _pd_eig(gamma)
    t = grid.times()
    d = len(eig.eigenvalues)
    if H == 0.5:
        phi = 0.5 * t[:, None, None] * np.eye(d)
    else:
        diag = np.array([[_phi_scalar(lam, H, tt) for lam in eig.eigenvalues] for tt in t])
        phi = np.einsum("ik,lk,jk->lij", eig.basis, diag, eig.basis)
        phi = 0.5 * (phi + np.swapaxes(phi, 1, 2))
    g = np.array(gamma, dtype=float).reshape(d, d)
    return CorrectionTable(grid, _readonly(phi), _readonly(g), float(H))


def to_ito_lift(lift: LiftedPath, table: CorrectionTable, sigma: float) -> LiftedPath:
    """Subtract ``sigma^2 phi_{t_l, t_{l+1}}`` from every Stratonovich area."""
    if lift.flavor != "stratonovich":
        raise FlavorError("to_ito_lift expects a Stratonovich lift")
    if table.grid != lift.grid:
        raise ShapeError(f"correction table grid {table.grid} does not match lift grid {lift.grid}")
    if table.phi.shape[1] != lift.d:
        raise ShapeError("correction table dimension does not match the lift")
    s2 = float(sigma) ** 2
    areas = lift.areas - s2 * table.increments()
    running = lift.running - s2 * (table.phi - table.phi[0])
    return LiftedPath(lift.grid, lift.increments, areas, "ito", lift.base_point, running,
                      strat_areas=lift.areas)


def to_strat_lift(lift: LiftedPath, table: CorrectionTable, sigma: float) -> LiftedPath:
    """Inverse of :func:`to_ito_lift`; exact when the lift came from it."""
    if lift.flavor != "ito":
        raise FlavorError("to_strat_lift expects an Ito lift")
    if table.grid != lift.grid:
        raise ShapeError("correction table grid does not match lift grid")
    s2 = float(sigma) ** 2
    if lift.strat_areas is not None:
        areas = lift.strat_areas
    else:
        areas = lift.areas + s2 * table.increments()
    return LiftedPath.from_areas(lift.grid, lift.increments, areas, "stratonovich", lift.base_point)


def to_ito_cross(cross: CrossAreas, table: CorrectionTable, sigma: float) -> CrossAreas:
    """Ito cross integrals against the driver: subtract ``sigma phi_{s,t}``."""
    if cross.flavor != "stratonovich":
        raise FlavorError("to_ito_cross expects Stratonovich cross areas")
    if table.grid != cross.grid:
        raise ShapeError("correction table grid does not match")
    return CrossAreas(cross.grid, cross.areas - float(sigma) * table.increments(), "ito")


# --- diagnostics on lifts ----------------------------------------------------

def chen_scale(lift: LiftedPath) -> float:
    """Squared path scale used to make Chen defects relative."""
    p = lift.offsets()
    s = max(float(np.max(np.sum(p * p, axis=1))),
            float(np.max(np.abs(lift.running))),
            float(np.max(np.abs(lift.areas), initial=0.0)))
    return s


def check_chen(lift: LiftedPath, relative: bool = False) -> float:
    """Largest Chen defect ``|XX_{s,t} - XX_{s,u} - XX_{u,t} - X_{s,u} (x) X_{u,t}|``.

    Checks consecutive triples ``(t_l, t_{l+1}, t_{l+2})`` and the anchored
    triples ``(0, t_l, t_{l+1})``, with ``XX_{s,t}`` over two intervals taken
    from the running second level. ``relative=True`` divides by
    :func:`chen_scale`.
    """
    p = lift.offsets()
    inc = lift.increments
    a = lift.areas
    r = lift.running
    # (0, t_l, t_{l+1})
    anchored = r[1:] - r[:-1] - a - p[:-1, :, None] * inc[:, None, :]
    defect = float(np.max(np.sqrt(np.sum(anchored ** 2, axis=(1, 2)))))
    if lift.grid.n >= 2:
        two = r[2:] - r[:-2] - p[:-2, :, None] * (p[2:] - p[:-2])[:, None, :]
        consecutive = two - a[:-1] - a[1:] - inc[:-1, :, None] * inc[1:, None, :]
        defect = max(defect, float(np.max(np.sqrt(np.sum(consecutive ** 2, axis=(1, 2))))))
    if relative:
        scale = chen_scale(lift)
        return defect / scale if scale > 0 else defect
    return defect


def default_p(H: float) -> float:
    """``1/H + 0.1`` clipped into the open interval (2, 3)."""
    return min(max(1.0 / H + 0.1, 2.0 + 1e-9), 3.0 - 1e-9)


def p_var_levels(a: LiftedPath, b: LiftedPath, p: float) -> tuple[float, float]:
    """Level-1 and level-2 p-variation distances, suprema taken over grid partitions."""
    if a.grid != b.grid or a.d != b.d:
        raise ShapeError("p-variation distance needs lifts on the same grid and dimension")
    if not (2 < p < 3):
        raise DomainError(f"p must lie in (2, 3), got {p}")
    xa = a.values().T
    xb = b.values().T
    lvl1 = kernels.pvar_level1(xa, xb, p) ** (1.0 / p)
    lvl2 = kernels.pvar_level2(xa, a.running, xb, b.running, p / 2.0) ** (2.0 / p)
    return lvl1, lvl2


def p_var_distance(a: LiftedPath, b: LiftedPath, p: float | None = None, hurst: float = 0.5) -> float:
    """Inhomogeneous p-variation rough path distance on the grid."""
    if p is None:
        p = default_p(hurst)
    return max(p_var_levels(a, b, p))


# --- CSV --------------------------------------------------------------------

def write_lift_csv(lift: LiftedPath, filename) -> Path:
    """Rows ``l, t_l, dX_1..dX_d, A_11..A_dd, flavor`` at full double precision."""
    filename = Path(filename)
    d = lift.d
    t = lift.grid.times()
    header = ["l", "t"] + [f"dX{i + 1}" for i in range(d)]
    header += [f"A{i + 1}{j + 1}" for i in range(d) for j in range(d)] + ["flavor"]
    with filename.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for ell in range(lift.grid.n):
            row = [str(ell), format(t[ell], ".17g")]
            row += [format(x, ".17g") for x in lift.increments[ell]]
            row += [format(x, ".17g") for x in lift.areas[ell].ravel()]
            w.writerow(row + [lift.flavor])
    return filename


def read_lift_csv(filename, base_point=None, grid: SampleGrid | None = None) -> LiftedPath:
    """Read a lift written by :func:`write_lift_csv`.

    The horizon is inferred from the time column unless ``grid`` is given.
    """
    with Path(filename).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    ndx = sum(1 for h in header if h.startswith("dX"))
    if ndx == 0 or len(header) != 3 + ndx + ndx * ndx or not body:
        raise ValidationError(f"{filename}: not a lift CSV")
    d = ndx
    flavors = {r[-1] for r in body}
    if len(flavors) != 1 or next(iter(flavors)) not in FLAVORS:
        raise FlavorError(f"{filename}: inconsistent or unknown flavor column {sorted(flavors)}")
    data = np.array([[float(x) for x in r[1:-1]] for r in body])
    n = len(body)
    t = data[:, 0]
    if grid is None:
        if n < 2:
            raise ValidationError(f"{filename}: cannot infer the grid from one row; pass grid=")
        grid = SampleGrid(t[-1] * n / (n - 1), n)
    if grid.n != n:
        raise ShapeError(f"{filename}: {n} rows but grid has n={grid.n}")
    inc = data[:, 1:1 + d]
    areas = data[:, 1 + d:].reshape(n, d, d)
    base = np.zeros(d) if base_point is None else np.asarray(base_point, dtype=float)
    return LiftedPath.from_areas(grid, inc, areas, next(iter(flavors)), base)
