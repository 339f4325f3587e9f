"""The fractional Ornstein-Uhlenbeck model ``dX = -Gamma X dt + sigma dB^H``.

Holds the model description, the Euler integrator used for all simulations,
and the closed-form quantities used as oracles: the stationary covariance
``r(t)`` of the one-dimensional stationary process and the ergodic limits
``C1(H)`` and ``C2(H) = -Gamma C1(H)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, optimize

from . import kernels
from .errors import DomainError, NumericError, ShapeError, ValidationError
from .fbm import PathMatrix, SampleGrid, check_hurst
from .matkernel import as_sym_matrix, hyp1f2, sym_apply, sym_eig

COSH_BRANCH_MAX = 20.0
ASYMPTOTIC_TERMS = 4
CANCELLATION_TOL = 1e-6
CONVEXITY_STEP = 1e-3


@dataclass(frozen=True)
class ModelSpec:
    """fOU model with ``Sigma = sigma * I``.

    ``gamma`` must be symmetric with nonnegative spectrum; routines that need
    strict positive definiteness (limit constants, the Ito correction) check
    it themselves. ``sigma = 0`` is allowed for deterministic checks.
    """

    gamma: np.ndarray
    sigma: float = 1.0
    hurst: float = 0.5
    x0: np.ndarray | None = None
    d: int = field(init=False)

    def __post_init__(self):
        g = as_sym_matrix(self.gamma, "gamma")
        lam = sym_eig(g).eigenvalues
        if lam[0] < -1e-12 * max(1.0, abs(lam[-1])):
            raise ValidationError(f"gamma must be positive semidefinite, eigenvalues {lam}")
        check_hurst(self.hurst)
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"sigma must be >= 0, got {self.sigma}")
        d = g.shape[0]
        x0 = np.zeros(d) if self.x0 is None else np.array(self.x0, dtype=float).reshape(-1)
        if x0.shape != (d,):
            raise ShapeError(f"x0 must have length {d}, got {x0.shape}")
        g.setflags(write=False)
        x0.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "hurst", float(self.hurst))
        object.__setattr__(self, "d", d)

    def require_pd(self) -> np.ndarray:
        lam = sym_eig(self.gamma).eigenvalues
        if lam[0] <= 0:
            raise DomainError(f"gamma must be positive definite, eigenvalues {lam}")
        return lam

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "gamma": self.gamma.tolist(),
            "sigma": self.sigma,
            "hurst": self.hurst,
            "x0": self.x0.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        try:
            model = cls(gamma=data["gamma"], sigma=data.get("sigma", 1.0),
                        hurst=data["hurst"], x0=data.get("x0"))
        except KeyError as exc:
            raise ValidationError(f"model spec missing field {exc}") from None
        if "d" in data and int(data["d"]) != model.d:
            raise ValidationError(f"model spec declares d={data['d']} but gamma is {model.d}x{model.d}")
        return model

    def to_json(self, filename=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if filename is not None:
            Path(filename).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "ModelSpec":
        """Parse a JSON string or read a JSON file."""
        text = Path(source).read_text() if isinstance(source, Path) or not str(source).lstrip().startswith("{") else source
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LimitConstants:
    c1: np.ndarray
    c2: np.ndarray


def euler_simulate(model: ModelSpec, grid: SampleGrid, driver: PathMatrix) -> PathMatrix:
    """Euler scheme ``X_{l+1} = X_l - Gamma X_l h + sigma (B_{l+1} - B_l)``."""
    if driver.grid != grid:
        raise ShapeError(f"driver grid {driver.grid} does not match {grid}")
    if driver.d != model.d:
        raise ShapeError(f"driver has d={driver.d}, model has d={model.d}")
    noise = model.sigma * np.diff(driver.values, axis=1)
    values = kernels.euler_path(model.gamma, model.x0, noise, grid.h)
    return PathMatrix(grid, values, "fou")


# --- stationary covariance -------------------------------------------------

def _check_cov_args(H, lam, sigma, t):
    if not (0 < H <= 0.5):
        raise DomainError(f"stationary covariance needs H in (0, 1/2], got {H}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if t < 0:
        raise DomainError("only t >= 0 is exposed")


def stationary_variance(H: float, lam: float, sigma: float) -> float:
    """``r(0) = sigma^2 lambda^(-2H) H Gamma(2H)``."""
    return sigma ** 2 * lam ** (-2 * H) * H * math.gamma(2 * H)


def _cov_hypergeometric(H, lam, sigma, t):
    big = 0.5 * sigma ** 2 * lam ** (-2 * H) * math.gamma(2 * H + 1) * math.cosh(lam * t)
    small = 0.5 * sigma ** 2 * t ** (2 * H) * hyp1f2(1.0, H + 0.5, H + 1.0, 0.25 * (lam * t) ** 2)
    return big - small, big


def _cov_asymptotic(H, lam, sigma, t, terms=ASYMPTOTIC_TERMS):
    total = 0.0
    for n in range(1, terms + 1):
        coef = math.prod(2 * H - k for k in range(2 * n))
        total += lam ** (-2 * n) * coef * t ** (2 * H - 2 * n)
    return 0.5 * sigma ** 2 * total


def stationary_cov(H: float, lam: float, sigma: float, t: float, branch: str = "auto") -> float:
    """Covariance ``r(t) = Cov(X_0, X_t)`` of the stationary 1-d fOU process.

    ``branch="hypergeometric"`` uses the cosh / 1F2 closed form,
    ``"asymptotic"`` the large-t series with four terms; ``"auto"`` picks the
    closed form for ``lambda t <= 20``. The closed form raises
    :class:`NumericError` when the two cancelling terms would lose more than
    ``1e-6`` relative to ``r(0)``.
    """
    _check_cov_args(H, lam, sigma, t)
    if sigma == 0:
        return 0.0
    if branch == "auto":
        branch = "hypergeometric" if lam * t <= COSH_BRANCH_MAX else "asymptotic"
    if branch == "asymptotic":
        if t == 0:
            raise DomainError("asymptotic branch is undefined at t = 0")
        return _cov_asymptotic(H, lam, sigma, t)
    if branch != "hypergeometric":
        raise ValidationError(f"unknown branch {branch!r}")
    value, big = _cov_hypergeometric(H, lam, sigma, t)
    loss = np.finfo(float).eps * abs(big) / stationary_variance(H, lam, sigma)
    if loss > CANCELLATION_TOL:
        raise NumericError(
            f"cancellation in the cosh/1F2 form at lambda*t={lam * t:g} (relative loss {loss:.1e}); "
            "use branch='asymptotic'"
        )
    return value


def stationary_cov_spectral(H: float, lam: float, sigma: float, t: float) -> float:
    """Independent evaluation of ``r(t)`` from its spectral integral by adaptive quadrature."""
    _check_cov_args(H, lam, sigma, t)
    pref = sigma ** 2 * lam ** (-2 * H) * math.gamma(2 * H + 1) * math.sin(math.pi * H) / math.pi
    w = lam * t
    alpha = 1.0 - 2.0 * H
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=500)
    # [0, 1]: algebraic weight x^alpha absorbs the non-smooth factor at the origin
    head, _ = integrate.quad(lambda x: math.cos(w * x) / (1.0 + x * x), 0.0, 1.0,
                             weight="alg", wvar=(alpha, 0.0), **opts)
    if w == 0:
        tail, _ = integrate.quad(lambda x: x ** alpha / (1.0 + x * x), 1.0, np.inf, **opts)
    else:
        # Fourier-weighted integral on [1, inf)
        tail, _ = integrate.quad(lambda x: x ** alpha / (1.0 + x * x), 1.0, np.inf,
                                 weight="cos", wvar=w, limlst=200, epsabs=1e-12)
    return pref * (head + tail)


def stationary_cov_d2(H, lam, sigma, t, step=CONVEXITY_STEP):
    """Central-difference second derivative of ``r`` at ``t > step``."""
    r = lambda u: stationary_cov(H, lam, sigma, u)  # noqa: E731
    return (r(t + step) - 2.0 * r(t) + r(t - step)) / step ** 2


def convexity_change(H: float, lam: float = 1.0, sigma: float = 1.0, t_max: float | None = None,
                     step: float = CONVEXITY_STEP) -> float:
    """First zero ``T0`` of ``r''``: ``r`` is convex on ``(0, T0)``.

    Scans a grid of spacing ``step`` for the first sign change of the
    central-difference ``r''`` and refines it with Brent's method.
    """
    if t_max is None:
        t_max = COSH_BRANCH_MAX / lam - 2 * step
    f = lambda u: stationary_cov_d2(H, lam, sigma, u, step)  # noqa: E731
    grid = np.arange(2 * step, t_max, step)
    prev = f(grid[0])
    for a, b in zip(grid[:-1], grid[1:]):
        cur = f(b)
        if prev > 0 >= cur:
            return optimize.brentq(f, a, b, xtol=1e-12)
        prev = cur
    raise NumericError(f"no convexity change of r found on (0, {t_max}]")


def increment_cov(r, t1: float, t2: float, t3: float, t4: float) -> float:
    """``E[(X_t2 - X_t1)(X_t4 - X_t3)]`` for a stationary process with covariance ``r``."""
    return r(abs(t4 - t2)) - r(abs(t4 - t1)) - r(abs(t3 - t2)) + r(abs(t3 - t1))


# --- ergodic limits --------------------------------------------------------

def c1_limit(model: ModelSpec) -> np.ndarray:
    """``C1(H) = sigma^2 H int_0^inf x^(2H-1) exp(-Gamma x) dx``."""
    model.require_pd()
    H = model.hurst
    g2h = math.gamma(2 * H)
    return model.sigma ** 2 * H * sym_apply(model.gamma, lambda lam: lam ** (-2 * H) * g2h)


def c2_limit(model: ModelSpec) -> np.ndarray:
    """``C2(H) = -Gamma C1(H)``."""
    return -model.gamma @ c1_limit(model)


def limit_constants(model: ModelSpec) -> LimitConstants:
    c1 = c1_limit(model)
    return LimitConstants(c1, -model.gamma @ c1)


def orthogonalize(gamma) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Lambda, Sbar)`` with ``Sbar @ gamma @ Sbar.T = Lambda`` diagonal ascending."""
    eig = sym_eig(gamma)
    return np.diag(eig.eigenvalues), eig.basis.T.copy()
