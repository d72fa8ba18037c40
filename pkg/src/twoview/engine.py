"""Robust estimation main loop: sample, solve, score, polish, terminate."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry, sampling, scoring
from .errors import DomainError, InsufficientPoints, NoModelFound
from .geometry import Model, ModelKind

SCORERS = ("magsac++", "ransac", "msac", "lmeds")
SAMPLERS = ("uniform", "prosac", "napsac", "pnapsac")
LOCALIZED_SAMPLERS = ("napsac", "pnapsac")
DEFAULT_MAX_ITERATIONS = 100_000
LOW_CONFIDENCE_RATIO = 0.1


def required_iterations(mu: float, eta: float, m: int,
                        cap: int = DEFAULT_MAX_ITERATIONS) -> int:
    """Iterations needed to hit an all-inlier sample with confidence mu.

    ceil(log(1 - mu) / log(1 - eta^m)), clamped to [1, cap]; certain success
    (eta = 1) needs one iteration, a hopeless ratio pins the cap.
    """
    if not (0.0 < mu < 1.0):
        raise DomainError(f"confidence must be in (0, 1), got {mu}")
    eta = min(max(eta, 0.0), 1.0)
    if eta >= 1.0:
        return 1
    p_good = eta**m
    if p_good <= 0.0:
        return cap
    denom = math.log1p(-p_good)
    if denom == 0.0:
        return 1
    r = math.log1p(-mu) / denom
    if not math.isfinite(r) or r >= cap:
        return cap
    return max(1, int(math.ceil(r)))


def relaxed_iterations(mu: float, eta: float, gamma: float, m: int,
                       cap: int = DEFAULT_MAX_ITERATIONS) -> int:
    """Relaxed bound targeting inlier ratio eta + gamma; gamma = 0 reduces exactly."""
    gamma = min(max(gamma, 0.0), max(0.0, 1.0 - eta))
    return required_iterations(mu, eta + gamma, m, cap)


@dataclass
class EngineConfig:
    """One estimation run's knobs; sigma_max and threshold derive one another."""

    kind: ModelKind
    scorer: str = "magsac++"
    sampler: str = "uniform"
    confidence: float = 0.99
    gamma: Optional[float] = None  # default 0.1 for localized samplers, else 0
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    sigma_max: Optional[float] = None
    threshold: Optional[float] = None
    n_dims: int = scoring.DEFAULT_DIMENSIONS
    k_quantile: float = scoring.DEFAULT_QUANTILE
    seed: int = 0
    irls: scoring.IrlsSettings = field(default_factory=scoring.IrlsSettings)
    table_bins: int = scoring.DEFAULT_TABLE_BINS
    napsac_radius: Optional[float] = None
    ordering: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.scorer not in SCORERS:
            raise DomainError(f"unknown scorer {self.scorer!r}")
        if self.sampler not in SAMPLERS:
            raise DomainError(f"unknown sampler {self.sampler!r}")
        if not (0.0 < self.confidence < 1.0):
            raise DomainError("confidence must be in (0, 1)")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if self.sigma_max is None and self.threshold is None:
            raise DomainError("either sigma_max or threshold must be set")

    def noise_config(self) -> scoring.NoiseConfig:
        if self.sigma_max is not None:
            return scoring.NoiseConfig(self.sigma_max, n=self.n_dims, k=self.k_quantile)
        return scoring.NoiseConfig.from_threshold(self.threshold, n=self.n_dims,
                                                  k=self.k_quantile)

    def effective_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return 0.1 if self.sampler in LOCALIZED_SAMPLERS else 0.0

    def inlier_threshold(self) -> float:
        """Threshold for the reported inlier mask and the inlier-ratio estimate."""
        if self.scorer == "magsac++":
            return self.noise_config().cutoff
        if self.threshold is not None:
            return self.threshold
        return self.noise_config().cutoff


@dataclass
class EstimationReport:
    model: Model
    quality: float
    inlier_mask: np.ndarray
    inlier_ratio: float
    iterations: int
    degenerate_samples: int
    wall_time_ms: float
    low_confidence: bool
    seed: int
    counters: dict = field(default_factory=dict)
    incumbent_iterations: list = field(default_factory=list)
    incumbent_qualities: list = field(default_factory=list)


def _infer_image_sizes(pts: np.ndarray) -> tuple:
    hi = pts.max(axis=0) if pts.size else np.ones(4)
    return tuple(float(max(v, 1.0)) for v in np.ceil(hi))


class _Run:
    """Internal per-run bindings resolved once from the config."""

    def __init__(self, pts: np.ndarray, config: EngineConfig, image_sizes):
        self.pts = pts
        self.config = config
        self.kind = config.kind
        self.m = self.kind.min_sample_size
        self.image_sizes = image_sizes or _infer_image_sizes(pts)
        self.tau = config.inlier_threshold()
        self.profile = None
        if config.scorer == "magsac++":
            self.profile = scoring.ScoreProfile.build(config.noise_config(),
                                                      bins=config.table_bins)
        self.state = sampling.make_sampler_state(pts, self.image_sizes, self.m,
                                                 seed=config.seed,
                                                 ordering=config.ordering)
        self.radius = config.napsac_radius
        if config.sampler == "napsac" and self.radius is None:
            self.radius = sampling.default_napsac_radius(self.image_sizes)

    def draw(self) -> np.ndarray:
        sampler = self.config.sampler
        if sampler == "pnapsac":
            sample = sampling.draw_sample_pnapsac(self.state)
            sampling.update_hits(self.state, sample)
            return sample
        return sampling.draw_sample_baseline(sampler, self.state, radius=self.radius)

    def score(self, model: Model) -> float:
        if self.profile is not None:
            return scoring.model_quality(model, self.pts, self.profile)
        return scoring.baseline_score(self.config.scorer, model, self.pts, self.tau)

    def polish(self, model: Model, score: float):
        """Refit and keep the better of (candidate, polished)."""
        polished = None
        if self.profile is not None:
            polished = scoring.sigma_consensus_pp(model, self.pts, self.profile,
                                                  self.config.irls).model
        else:
            inliers = geometry.residuals(model, self.pts) < self.tau
            if int(inliers.sum()) >= self.kind.min_nonminimal_size:
                polished = geometry.solve_weighted(self.kind, self.pts,
                                                   inliers.astype(np.float64))
        if polished is None:
            return model, score, False
        polished_score = self.score(polished)
        if polished_score >= score:
            return polished, polished_score, True
        return model, score, False

    def inlier_ratio(self, model: Model) -> float:
        r = geometry.residuals(model, self.pts)
        return float(np.count_nonzero(r < self.tau)) / self.pts.shape[0]


def run_estimation(points, config: EngineConfig,
                   image_sizes=None) -> EstimationReport:
    """Estimate a model robustly; returns the best-quality incumbent.

    Iterates draw -> minimal solve -> score until the relaxed termination
    bound at the incumbent's inlier ratio (or the iteration cap) is reached.
    Candidates that beat the incumbent are polished (sigma-consensus++ for the
    marginalized scorer, least squares on inliers for the baselines) and kept
    only if polishing did not hurt; one final polish pass runs at the end.
    Raises NoModelFound when every sample was degenerate.
    """
    pts = geometry.as_points(points)
    if pts.shape[0] < config.kind.min_sample_size:
        raise InsufficientPoints(
            f"need at least {config.kind.min_sample_size} points, got {pts.shape[0]}")
    t0 = time.perf_counter()
    run = _Run(pts, config, image_sizes)
    mu = config.confidence
    gamma = config.effective_gamma()
    cap = config.max_iterations
    m = run.m

    best: Optional[Model] = None
    best_score = -math.inf
    best_eta = 0.0
    required = cap
    iterations = 0
    degenerate = 0
    counters = {"samples_drawn": 0, "models_scored": 0, "polish_runs": 0,
                "polish_kept": 0}
    incumbent_iterations: list[int] = []
    incumbent_qualities: list[float] = []

    while iterations < required:
        iterations += 1
        sample = run.draw()
        counters["samples_drawn"] += 1
        candidates = geometry.solve_minimal(config.kind, pts[sample])
        if not candidates:
            degenerate += 1
            continue
        improved = False
        for cand in candidates:
            score = run.score(cand)
            counters["models_scored"] += 1
            if score > best_score:
                counters["polish_runs"] += 1
                model, score, kept = run.polish(cand, score)
                counters["polish_kept"] += int(kept)
                best, best_score = model, score
                improved = True
        if improved:
            incumbent_iterations.append(iterations)
            incumbent_qualities.append(best_score)
            best_eta = max(best_eta, run.inlier_ratio(best))
            required = min(cap, relaxed_iterations(mu, best_eta, gamma, m, cap))

    if best is None:
        raise NoModelFound(f"all {iterations} samples were degenerate")

    counters["polish_runs"] += 1
    model, score, kept = run.polish(best, best_score)
    counters["polish_kept"] += int(kept)
    best, best_score = model, score

    residuals = geometry.residuals(best, pts)
    mask = residuals < run.tau
    ratio = float(np.count_nonzero(mask)) / pts.shape[0]
    wall_ms = (time.perf_counter() - t0) * 1e3
    return EstimationReport(
        model=best,
        quality=best_score,
        inlier_mask=mask,
        inlier_ratio=ratio,
        iterations=iterations,
        degenerate_samples=degenerate,
        wall_time_ms=wall_ms,
        low_confidence=ratio < LOW_CONFIDENCE_RATIO,
        seed=config.seed,
        counters=counters,
        incumbent_iterations=incumbent_iterations,
        incumbent_qualities=incumbent_qualities,
    )
