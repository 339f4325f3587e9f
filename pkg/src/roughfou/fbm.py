"""Fractional Brownian motion on a uniform grid.

Two samplers with the same seeding scheme: an exact Cholesky sampler (slow,
kept as an oracle, n <= 4096) and a circulant-embedding sampler for the
stationary fGn increments (Davies-Harte), which is what the Monte Carlo
harness uses.

Seeding: every (experiment seed, path index, component index) triple gets
its own ``numpy.random.SeedSequence`` child, so paths can be generated in any
order or in parallel and still be reproducible. Normals are produced by
inverse-CDF transform of PCG64 uniforms (see :func:`standard_normals`), a
fixed map that does not depend on numpy's internal normal sampler.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from .errors import DomainError, NumericError, ShapeError, SizeError, ValidationError

H_MIN = 1.0 / 3.0
H_MAX = 0.5
CHOLESKY_MAX_N = 4096
CIRCULANT_NEG_TOL = 1e-10


@dataclass(frozen=True)
class SampleGrid:
    """Uniform grid ``t_l = l * T / n`` on ``[0, T]``."""

    T: float
    n: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValidationError(f"horizon T must be positive, got {self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"steps n must be a positive integer, got {self.n}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return self.T / self.n

    def times(self) -> np.ndarray:
        return self.T * np.arange(self.n + 1) / self.n

    def refine(self, factor: int) -> "SampleGrid":
        return SampleGrid(self.T, self.n * int(factor))


@dataclass(frozen=True)
class PathMatrix:
    """Path values on a grid, shape ``(d, n + 1)``; column 0 is the initial state."""

    grid: SampleGrid
    values: np.ndarray
    kind: str = "fbm"

    def __post_init__(self):
        v = np.array(self.values, dtype=float, order="C")
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[1] != self.grid.n + 1:
            raise ShapeError(f"values must have shape (d, {self.grid.n + 1}), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("path contains non-finite values")
        if self.kind not in ("fbm", "fou"):
            raise ValidationError(f"unknown path kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def increments(self) -> np.ndarray:
        """Per-interval increments, shape ``(n, d)``."""
        return np.diff(self.values, axis=1).T

    def subsample(self, step: int) -> "PathMatrix":
        if self.grid.n % step:
            raise ShapeError(f"step {step} does not divide n={self.grid.n}")
        return PathMatrix(SampleGrid(self.grid.T, self.grid.n // step),
                          self.values[:, ::step], self.kind)


def check_hurst(H: float) -> float:
    if not (H_MIN < H <= H_MAX):
        raise DomainError(f"Hurst parameter must lie in (1/3, 1/2], got {H}")
    return float(H)


def fbm_cov(H: float, s: float, t: float) -> float:
    """Covariance ``R_H(s, t) = (s^2H + t^2H - |t - s|^2H) / 2``."""
    check_hurst(H)
    if s < 0 or t < 0:
        raise DomainError("fbm_cov is defined for s, t >= 0")
    two_h = 2.0 * H
    return 0.5 * (s ** two_h + t ** two_h - abs(t - s) ** two_h)


def fgn_autocov(H: float, k, h: float = 1.0):
    """Autocovariance of fGn increments with mesh ``h`` at integer lag(s) ``k``."""
    k = np.abs(np.asarray(k, dtype=float))
    two_h = 2.0 * H
    return 0.5 * h ** two_h * ((k + 1) ** two_h - 2 * k ** two_h + np.abs(k - 1) ** two_h)


def rng_for(seed: int, path_index: int = 0, component: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, path, component) stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index), int(component)))
    return np.random.Generator(np.random.PCG64(ss))


def standard_normals(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normals by inverse CDF, ``ndtri(u)`` with ``u`` on the open midpoint lattice."""
    # random() is a multiple of 2^-53 in [0, 1); the half-step shift keeps u off 0
    u = rng.random(size) + 2.0 ** -54
    return special.ndtri(u)


def _validate(H, grid, d):
    check_hurst(H)
    if not isinstance(grid, SampleGrid):
        raise ValidationError("grid must be a SampleGrid")
    if int(d) != d or d < 1:
        raise ValidationError(f"dimension must be a positive integer, got {d}")


def sample_fbm_cholesky(H: float, grid: SampleGrid, d: int, seed: int,
                        path_index: int = 0) -> PathMatrix:
    """Exact sampler via Cholesky factorization of the covariance of ``B_{t_1..t_n}``."""
    _validate(H, grid, d)
    if grid.n > CHOLESKY_MAX_N:
        raise SizeError(f"n={grid.n} exceeds the Cholesky guard ({CHOLESKY_MAX_N}); use sample_fbm")
    chol = _cholesky_factor(float(H), grid.T, grid.n)
    values = np.zeros((d, grid.n + 1))
    for i in range(d):
        z = standard_normals(rng_for(seed, path_index, i), grid.n)
        values[i, 1:] = chol @ z
    return PathMatrix(grid, values, "fbm")


@functools.lru_cache(maxsize=8)
def _cholesky_factor(H: float, T: float, n: int) -> np.ndarray:
    t = SampleGrid(T, n).times()[1:]
    two_h = 2.0 * H
    cov = 0.5 * (t[:, None] ** two_h + t[None, :] ** two_h - np.abs(t[:, None] - t[None, :]) ** two_h)
    chol = np.linalg.cholesky(cov)
    chol.setflags(write=False)
    return chol


def circulant_eigenvalues(H: float, n: int) -> np.ndarray:
    """Eigenvalues of the size-2n circulant embedding of the unit-mesh fGn covariance."""
    r = fgn_autocov(H, np.arange(n + 1))
    row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -CIRCULANT_NEG_TOL * max(1.0, lam.max()):
        raise NumericError(f"circulant embedding not nonnegative definite (min eigenvalue {lam.min()})")
    return np.clip(lam, 0.0, None)


def sample_fgn(H: float, n: int, h: float, rng: np.random.Generator,
               eigenvalues: np.ndarray | None = None) -> np.ndarray:
    """One fGn sample of length ``n`` with mesh ``h`` (Davies-Harte)."""
    lam = circulant_eigenvalues(H, n) if eigenvalues is None else eigenvalues
    m = 2 * n
    z = standard_normals(rng, m) + 1j * standard_normals(rng, m)
    # real and imaginary parts are each exact, independent samples; keep the real one
    y = np.fft.fft(np.sqrt(lam / m) * z)
    return y[:n].real * h ** H


def sample_fbm(H: float, grid: SampleGrid, d: int, seed: int, path_index: int = 0,
               eigenvalues: np.ndarray | None = None) -> PathMatrix:
    """Circulant-embedding sampler; exact in law for ``H <= 1/2``.

    ``eigenvalues`` may be passed to reuse the embedding spectrum across many
    paths on the same grid.
    """
    _validate(H, grid, d)
    lam = circulant_eigenvalues(H, grid.n) if eigenvalues is None else eigenvalues
    values = np.zeros((d, grid.n + 1))
    for i in range(d):
        inc = sample_fgn(H, grid.n, grid.h, rng_for(seed, path_index, i), lam)
        np.cumsum(inc, out=values[i, 1:])
    return PathMatrix(grid, values, "fbm")


def write_path_csv(path: PathMatrix, filename) -> Path:
    """Write ``t,x1,...,xd`` rows at full double precision."""
    filename = Path(filename)
    t = path.grid.times()
    with filename.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(path.d)])
        for ell in range(path.grid.n + 1):
            w.writerow([format(t[ell], ".17g")] + [format(x, ".17g") for x in path.values[:, ell]])
    return filename


def read_path_csv(filename, kind: str = "fou") -> PathMatrix:
    """Inverse of :func:`write_path_csv`; the grid must be uniform and start at 0."""
    with Path(filename).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[0] != "t" or len(body) < 2:
        raise ValidationError(f"{filename}: not a path CSV (need header t,x1,... and >= 2 rows)")
    data = np.array([[float(x) for x in r] for r in body])
    t = data[:, 0]
    n = len(t) - 1
    grid = SampleGrid(t[-1], n)
    if abs(t[0]) > 0 or np.max(np.abs(t - grid.times())) > 1e-9 * max(1.0, grid.T):
        raise ValidationError(f"{filename}: time column is not a uniform grid starting at 0")
    return PathMatrix(grid, data[:, 1:].T, kind)
