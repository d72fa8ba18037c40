"""Marginalized M-estimator scoring core and baseline scorers.

The inlier residual magnitude is modeled by a chi distribution with ``n``
degrees of freedom, scaled by an unknown noise level and trimmed at its
``k``-quantile; marginalizing the noise level uniformly over (0, sigma_max]
yields a threshold-free weight w(r) and its loss rho(r) with rho'(r) = r*w(r).
Both have closed forms in incomplete gamma functions and are tabulated once
per configuration so the per-point hot loops reduce to table lookups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geometry, kernels
from .errors import DomainError, EmptyPointSet

DEFAULT_DIMENSIONS = 4
DEFAULT_QUANTILE = 3.64  # 0.99 quantile of the chi distribution with n = 4
DEFAULT_TABLE_BINS = 4096
QUALITY_SATURATION = 1e300
_ZERO_LOSS = 1e-300

_GAMMA_EPS = 1e-15
_GAMMA_ITMAX = 500
_FPMIN = 1e-300


@dataclass(frozen=True)
class NoiseConfig:
    """Residual-noise model: dimension n, quantile multiplier k, scale cap sigma_max."""

    sigma_max: float
    n: int = DEFAULT_DIMENSIONS
    k: float = DEFAULT_QUANTILE

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n}")
        if not (self.k > 0.0) or not (self.sigma_max > 0.0):
            raise DomainError("k and sigma_max must be positive")

    @property
    def cutoff(self) -> float:
        """tau(sigma_max) = k * sigma_max; residuals beyond it carry zero weight."""
        return self.k * self.sigma_max

    @classmethod
    def from_threshold(cls, threshold: float, n: int = DEFAULT_DIMENSIONS,
                       k: float = DEFAULT_QUANTILE) -> "NoiseConfig":
        """Derive sigma_max from a user-facing inlier threshold t via sigma_max = t / k."""
        if not (threshold > 0.0):
            raise DomainError("threshold must be positive")
        return cls(sigma_max=threshold / k, n=n, k=k)


@dataclass(frozen=True)
class IrlsSettings:
    max_iterations: int = 10
    rel_tol: float = 1e-4

    def __post_init__(self):
        if self.max_iterations < 1 or not (self.rel_tol > 0.0):
            raise DomainError("bad IRLS settings")


def _chi_norm(n: int) -> float:
    """C(n) = (2^(n/2) Gamma(n/2))^-1, the chi-density normalizer."""
    return 1.0 / (2.0 ** (0.5 * n) * math.gamma(0.5 * n))


def _reg_lower_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by series; for x < a + 1."""
    if x == 0.0:
        return 0.0
    ap = a
    summ = 1.0 / a
    delt = summ
    for _ in range(_GAMMA_ITMAX):
        ap += 1.0
        delt *= x / ap
        summ += delt
        if abs(delt) < abs(summ) * _GAMMA_EPS:
            break
    return summ * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _reg_upper_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction; x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_ITMAX + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delt = d * c
        h *= delt
        if abs(delt - 1.0) < _GAMMA_EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def _reg_lower(a: float, x: float) -> float:
    if x < a + 1.0:
        return _reg_lower_series(a, x)
    return 1.0 - _reg_upper_cf(a, x)


def incomplete_gamma(kind: str, a: float, x: float) -> float:
    """Gamma integrals: 'lower' gamma(a,x), 'upper' Gamma(a,x), 'complete' Gamma(a).

    Non-regularized, computed by series for x < a + 1 and by continued
    fraction otherwise, with the complement taken off Gamma(a) so the two
    halves always sum to the complete function.
    """
    if not (a > 0.0):
        raise DomainError(f"a must be positive, got {a}")
    if kind == "complete":
        return math.gamma(a)
    if x < 0.0:
        raise DomainError(f"x must be nonnegative, got {x}")
    whole = math.gamma(a)
    if x < a + 1.0:
        lower = _reg_lower_series(a, x) * whole
        if kind == "lower":
            return lower
        if kind == "upper":
            return whole - lower
    else:
        upper = _reg_upper_cf(a, x) * whole
        if kind == "upper":
            return upper
        if kind == "lower":
            return whole - upper
    raise DomainError(f"unknown incomplete gamma kind {kind!r}")


def chi_density(r, sigma: float, config: NoiseConfig):
    """Trimmed chi density of inlier residuals at noise scale sigma.

    2 C(n) sigma^-n exp(-r^2 / 2 sigma^2) r^(n-1) for r < k*sigma, 0 beyond.
    """
    if not (sigma > 0.0):
        raise DomainError("sigma must be positive")
    r_arr = np.asarray(r, dtype=np.float64)
    g = (2.0 * _chi_norm(config.n) * sigma ** (-config.n)
         * np.exp(-(r_arr**2) / (2.0 * sigma**2)) * r_arr ** (config.n - 1))
    out = np.where(r_arr >= config.k * sigma, 0.0, g)
    return float(out) if np.isscalar(r) else out


def _weight_scalar(r: float, n: int, k: float, sigma_max: float) -> float:
    if r >= k * sigma_max:
        return 0.0  # the closed form vanishes at the cutoff
    a = 0.5 * (n - 1)
    upper_r = incomplete_gamma("upper", a, r * r / (2.0 * sigma_max * sigma_max))
    upper_k = incomplete_gamma("upper", a, 0.5 * k * k)
    return _chi_norm(n) * 2.0 ** a * max(upper_r - upper_k, 0.0) / sigma_max


def _rho_scalar(r: float, n: int, k: float, sigma_max: float) -> float:
    cutoff = k * sigma_max
    if r > cutoff:
        r = cutoff  # rho is constant beyond the trimming point
    a_lo = 0.5 * (n + 1)
    a_up = 0.5 * (n - 1)
    u = r * r / (2.0 * sigma_max * sigma_max)
    lower = incomplete_gamma("lower", a_lo, u)
    upper_r = incomplete_gamma("upper", a_up, u)
    upper_k = incomplete_gamma("upper", a_up, 0.5 * k * k)
    return (_chi_norm(n) * 2.0 ** a_lo / sigma_max
            * (0.5 * sigma_max**2 * lower + 0.25 * r * r * (upper_r - upper_k)))


def _broadcast(fn: Callable[[float], float], r):
    if np.isscalar(r):
        return fn(float(r))
    r_arr = np.asarray(r, dtype=np.float64)
    out = np.empty(r_arr.shape, dtype=np.float64)
    flat = r_arr.reshape(-1)
    oflat = out.reshape(-1)
    for i in range(flat.shape[0]):
        oflat[i] = fn(float(flat[i]))
    return out


def weight(r, config: NoiseConfig):
    """Marginalized inlier weight w(r); positive and decreasing on (0, k*sigma_max)."""
    return _broadcast(lambda x: _weight_scalar(x, config.n, config.k, config.sigma_max), r)


def loss_rho(r, config: NoiseConfig):
    """M-estimator loss rho(r) = integral_0^r x w(x) dx, constant past k*sigma_max."""
    return _broadcast(lambda x: _rho_scalar(x, config.n, config.k, config.sigma_max), r)


def rho_ceiling(config: NoiseConfig) -> float:
    """rho(k * sigma_max), the loss contributed by any residual at or past the cutoff."""
    return _rho_scalar(config.cutoff, config.n, config.k, config.sigma_max)


_PROFILE_CACHE: dict = {}


@dataclass(frozen=True)
class ScoreProfile:
    """Precomputed w/rho tables on a uniform grid over [0, k*sigma_max].

    Immutable after construction; instances are cached per (config, bins) and
    shared freely across runs and threads.
    """

    config: NoiseConfig
    bins: int
    step: float
    w_table: np.ndarray
    rho_table: np.ndarray
    rho_max: float

    @classmethod
    def build(cls, config: NoiseConfig, bins: int = DEFAULT_TABLE_BINS) -> "ScoreProfile":
        if bins < 8:
            raise DomainError("need at least 8 table bins")
        cached = _PROFILE_CACHE.get((config, bins))
        if cached is not None:
            return cached
        grid = np.linspace(0.0, config.cutoff, bins + 1)
        w_table = weight(grid, config)
        rho_table = loss_rho(grid, config)
        profile = cls(config=config, bins=bins, step=float(grid[1] - grid[0]),
                      w_table=w_table, rho_table=rho_table,
                      rho_max=float(rho_table[-1]))
        _PROFILE_CACHE[(config, bins)] = profile
        return profile

    def interp_weight(self, r) -> np.ndarray:
        """Table-interpolated w at residuals r; 0 at or beyond the cutoff."""
        return kernels.table_interp(np.asarray(r, dtype=np.float64), self.w_table,
                                    self.step, 0.0)

    def interp_rho(self, r) -> np.ndarray:
        """Table-interpolated rho at residuals r; rho_max at or beyond the cutoff."""
        return kernels.table_interp(np.asarray(r, dtype=np.float64), self.rho_table,
                                    self.step, self.rho_max)

    def loss(self, residuals) -> float:
        """Total loss L = sum of interpolated rho over the residuals."""
        return kernels.rho_loss_sum(np.asarray(residuals, dtype=np.float64),
                                    self.rho_table, self.step, self.rho_max)


def model_loss(model: geometry.Model, points, profile: ScoreProfile) -> float:
    return profile.loss(geometry.residuals(model, points))


def model_quality(model: geometry.Model, points, profile: ScoreProfile) -> float:
    """Quality Q = 1 / L; permutation-invariant, higher is better.

    Saturates at a large finite sentinel when every residual is exactly zero.
    """
    pts = geometry.as_points(points)
    if pts.shape[0] == 0:
        raise EmptyPointSet("model_quality needs at least one point")
    L = model_loss(model, pts, profile)
    if L < _ZERO_LOSS:
        return QUALITY_SATURATION
    return 1.0 / L


@dataclass
class IrlsResult:
    model: geometry.Model
    loss: float
    diverged: bool
    losses: list[float] = field(default_factory=list)


def sigma_consensus_pp(initial: geometry.Model, points, profile: ScoreProfile,
                       settings: Optional[IrlsSettings] = None,
                       solver: Optional[Callable] = None) -> IrlsResult:
    """Polish a model by IRLS with marginalized weights.

    Each step solves the weighted non-minimal problem with weights w(D(theta, p))
    from the profile table and accepts the iterate only if the tabulated loss
    does not increase, so the reported loss trace is non-increasing.  Stops on
    relative loss change < rel_tol, on max_iterations, or when the weighted
    solve fails.  If fewer than the minimal sample size of points carry
    positive weight, returns the initial model flagged as diverged.
    """
    settings = settings or IrlsSettings()
    pts = geometry.as_points(points)
    m = initial.kind.min_sample_size
    if solver is None:
        solver = lambda p, w: geometry.solve_weighted(initial.kind, p, w)

    model = initial
    loss = model_loss(model, pts, profile)
    initial_loss = loss
    losses = [loss]
    for _ in range(settings.max_iterations):
        w = profile.interp_weight(geometry.residuals(model, pts))
        if int(np.count_nonzero(w > 0.0)) < m:
            return IrlsResult(initial, initial_loss, True, [initial_loss])
        candidate = solver(pts, w)
        if candidate is None:
            break
        new_loss = model_loss(candidate, pts, profile)
        if new_loss > loss:
            break  # descent guard: keep the monotone prefix
        rel_drop = (loss - new_loss) / max(loss, _ZERO_LOSS)
        model, loss = candidate, new_loss
        losses.append(loss)
        if rel_drop < settings.rel_tol:
            break
    return IrlsResult(model, loss, False, losses)


def baseline_score(kind: str, model: geometry.Model, points, threshold: float = 0.0) -> float:
    """Classical scoring rules, all reported so that higher is better.

    ransac: inlier count at the threshold; msac: negated truncated quadratic
    cost; lmeds: negated median of squared residuals (threshold ignored).
    """
    pts = geometry.as_points(points)
    if pts.shape[0] == 0:
        raise EmptyPointSet("baseline_score needs at least one point")
    r = geometry.residuals(model, pts)
    if kind == "ransac":
        if not (threshold > 0.0):
            raise DomainError("ransac scoring needs a positive threshold")
        return float(kernels.count_below(r, threshold))
    if kind == "msac":
        if not (threshold > 0.0):
            raise DomainError("msac scoring needs a positive threshold")
        return -kernels.truncated_quadratic_sum(r, threshold)
    if kind == "lmeds":
        return -float(np.median(r * r))
    raise DomainError(f"unknown baseline scorer {kind!r}")
