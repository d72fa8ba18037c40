"""Minimal-sample generators: uniform, PROSAC, NAPSAC, and Progressive NAPSAC.

Progressive NAPSAC draws the sample around a center point from a neighborhood
that grows with the center's hit count, blending local into global sampling.
Neighborhoods are approximated by distance-sorting within cells of a
multi-layer 4D grid over correspondence space (one cell layer per division
count delta), never by exact k-NN search.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, InsufficientPoints, NapsacStarved
from .geometry import as_points

GRID_DELTAS = (16, 8, 4, 2, 1)
_T_CAP = 2**62  # int64 ceiling; hit counts never get near it


@dataclass(frozen=True)
class GrowthTable:
    """Integer thresholds T'_k for neighborhood sizes k in [m-1, n-1].

    T'_k approximates the number of samples drawn before the neighborhood of a
    point should grow past k, anchored at T'_{m-1} = 1.
    """

    m: int
    n: int
    t_prime: np.ndarray

    def threshold(self, k: int) -> int:
        """T'_k for k in [m-1, n-1]."""
        return int(self.t_prime[k - (self.m - 1)])

    def g(self, t: int) -> int:
        """Growth function g(t) = min{k : T'_k >= t}, saturating at n - 1."""
        idx = int(np.searchsorted(self.t_prime, t, side="left"))
        return min(self.m - 1 + idx, self.n - 1)


def build_growth_table(m: int, n: int) -> GrowthTable:
    """Unroll the expected-hit recursion E_{k+1} = E_k (k+1)/(k+2-m).

    Anchored at E_{m-1} = 1 the expectation sequence is integral (it equals
    binomial coefficients), so exact integer arithmetic reproduces the
    ceiling-increment definition with no rounding.
    """
    if int(m) != m or int(n) != n or m < 2 or n <= m:
        raise DomainError(f"need integers n > m >= 2, got m={m}, n={n}")
    m, n = int(m), int(n)
    e = 1
    t = 1
    vals = [1]
    for k in range(m - 1, n - 1):  # fills T'_{k+1} for k+1 in [m, n-1]
        e_next = e * (k + 1) // (k + 2 - m)
        t += e_next - e
        e = e_next
        vals.append(min(t, _T_CAP))
    return GrowthTable(m=m, n=n, t_prime=np.array(vals, dtype=np.int64))


@dataclass
class _GridLayer:
    """One layer's buckets: point indices grouped by sorted cell code.

    The code -> slice dict is filled lazily on first query, so construction
    stays vectorized and repeated lookups are amortized O(1).
    """

    codes: np.ndarray         # per-point cell code
    grouped: np.ndarray       # point indices, cell-contiguous
    bounds: np.ndarray        # group boundaries into `grouped`
    unique_codes: np.ndarray  # sorted, one per occupied cell
    _lookup: dict = field(default_factory=dict)

    def members_of_code(self, code: int) -> np.ndarray:
        got = self._lookup.get(code)
        if got is None:
            pos = int(np.searchsorted(self.unique_codes, code))
            if pos >= self.unique_codes.size or self.unique_codes[pos] != code:
                got = self.grouped[0:0]
            else:
                got = self.grouped[self.bounds[pos]:self.bounds[pos + 1]]
            self._lookup[code] = got
        return got


@dataclass
class MultiLayerGrid:
    """Stacked uniform 4D grids over correspondence space, one per delta."""

    image_sizes: tuple
    deltas: tuple
    n: int
    _layers: dict

    def cell_members(self, delta: int, i: int) -> np.ndarray:
        """Indices sharing point i's cell at the given layer (i included)."""
        layer = self._layers[delta]
        return layer.members_of_code(int(layer.codes[i]))

    def cell_of(self, delta: int, point4) -> np.ndarray:
        """Indices in the cell containing an arbitrary 4D point; empty if none."""
        code = int(_cell_codes(np.asarray(point4, dtype=np.float64).reshape(1, 4),
                               self.image_sizes, delta)[0])
        return self._layers[delta].members_of_code(code)

    def cell_tuple(self, delta: int, point4) -> tuple:
        """The 4D cell index (floor(u1 d/w1), floor(v1 d/h1), ...), clamped."""
        code = int(_cell_codes(np.asarray(point4, dtype=np.float64).reshape(1, 4),
                               self.image_sizes, delta)[0])
        c4 = code % delta
        code //= delta
        c3 = code % delta
        code //= delta
        c2 = code % delta
        return (code // delta, c2, c3, c4)


def _cell_codes(pts: np.ndarray, image_sizes, delta: int) -> np.ndarray:
    w1, h1, w2, h2 = image_sizes
    scale = np.array([delta / w1, delta / h1, delta / w2, delta / h2])
    c = np.floor(pts * scale).astype(np.int64)
    np.clip(c, 0, delta - 1, out=c)
    return ((c[:, 0] * delta + c[:, 1]) * delta + c[:, 2]) * delta + c[:, 3]


def build_grid(points, image_sizes, deltas=GRID_DELTAS) -> MultiLayerGrid:
    """Bucket all correspondences once per layer; linear in the point count."""
    if any(s <= 0 for s in image_sizes):
        raise DomainError(f"image sizes must be positive, got {image_sizes}")
    pts = as_points(points) if np.size(points) else np.empty((0, 4))
    layers = {}
    for delta in deltas:
        code = _cell_codes(pts, image_sizes, delta)
        order = np.argsort(code, kind="stable")
        sorted_code = code[order]
        if code.size:
            starts = np.flatnonzero(np.diff(sorted_code)) + 1
            bounds = np.concatenate([[0], starts, [code.size]])
            unique = sorted_code[bounds[:-1]]
        else:
            bounds = np.zeros(1, dtype=np.int64)
            unique = sorted_code
        layers[delta] = _GridLayer(codes=code, grouped=order,
                                   bounds=bounds, unique_codes=unique)
    return MultiLayerGrid(image_sizes=tuple(image_sizes), deltas=tuple(deltas),
                          n=pts.shape[0], _layers=layers)


@dataclass
class SamplerState:
    """Mutable per-run sampler state; deterministic given the seed."""

    points: np.ndarray
    growth: GrowthTable
    grid: MultiLayerGrid
    hits: np.ndarray
    ksizes: np.ndarray
    rng: np.random.Generator
    ordering: Optional[np.ndarray] = None
    prosac_n: int = 0
    prosac_t: int = 0
    prosac_thresholds: Optional[np.ndarray] = None
    _nbr_cache: dict = field(default_factory=dict)


def make_sampler_state(points, image_sizes, m: int, seed: int = 0,
                       ordering=None) -> SamplerState:
    """Build grids, growth table, and counters for one estimation run.

    ``ordering`` ranks point indices best-first (a PROSAC-style quality order);
    when given it drives first-point selection, otherwise centers are uniform.
    """
    pts = as_points(points)
    n = pts.shape[0]
    if n < m:
        raise InsufficientPoints(f"need at least {m} points, got {n}")
    growth = build_growth_table(m, n) if n > m else GrowthTable(
        m=m, n=n, t_prime=np.array([1], dtype=np.int64))
    state = SamplerState(
        points=pts,
        growth=growth,
        grid=build_grid(pts, image_sizes),
        hits=np.zeros(n, dtype=np.int64),
        ksizes=np.full(n, m, dtype=np.int64),
        rng=np.random.default_rng(seed),
    )
    if ordering is not None:
        order = np.asarray(ordering, dtype=np.int64)
        if sorted(order.tolist()) != list(range(n)):
            raise DomainError("ordering must be a permutation of the point indices")
        state.ordering = order
        state.prosac_n = m
        state.prosac_thresholds = _prosac_thresholds(m, n)
    return state


def neighborhood(state: SamplerState, i: int, required: int) -> np.ndarray:
    """Approximate nearest neighbors of point i, grid-cell based.

    Picks the finest grid layer whose cell containing p_i holds at least
    ``required`` points, then returns that cell's members sorted by 4D
    Euclidean distance to p_i, excluding p_i itself.
    """
    n = state.points.shape[0]
    required = min(required, n)
    chosen = state.grid.deltas[-1]
    for delta in state.grid.deltas:  # finest (largest delta) first
        if state.grid.cell_members(delta, i).size >= required:
            chosen = delta
            break
    key = (i, chosen)
    cached = state._nbr_cache.get(key)
    if cached is None:
        members = state.grid.cell_members(chosen, i)
        others = members[members != i]
        d2 = np.sum((state.points[others] - state.points[i]) ** 2, axis=1)
        cached = others[np.argsort(d2, kind="stable")]
        state._nbr_cache[key] = cached
    return cached


def _grow(state: SamplerState, i: int) -> None:
    """One neighborhood-growth step for point i, per its hit threshold."""
    n = state.points.shape[0]
    k = int(state.ksizes[i])
    if k < n and state.hits[i] >= state.growth.threshold(k):
        state.ksizes[i] = k + 1


def _distinct(rng: np.random.Generator, pool_size: int, count: int,
              exclude: int = -1) -> list[int]:
    """``count`` distinct indices in [0, pool_size), rejecting ``exclude``."""
    out: list[int] = []
    while len(out) < count:
        c = int(rng.integers(pool_size))
        if c != exclude and c not in out:
            out.append(c)
    return out


def _prosac_thresholds(m: int, n: int) -> np.ndarray:
    """PROSAC subset-growth thresholds for subset sizes k in [m, n], anchored at 1."""
    e = 1
    t = 1
    vals = [1]
    for k in range(m, n):
        e_next = e * (k + 1) // (k + 1 - m)
        t += e_next - e
        e = e_next
        vals.append(min(t, _T_CAP))
    return np.array(vals, dtype=np.int64)


def _prosac_step(state: SamplerState):
    """Advance the PROSAC counters; returns (subset size, take-newest flag)."""
    thr = state.prosac_thresholds
    m = state.growth.m
    n = state.points.shape[0]
    state.prosac_t += 1
    while state.prosac_n < n and state.prosac_t >= int(thr[state.prosac_n + 1 - m]):
        state.prosac_n += 1
    take_newest = state.prosac_t > int(thr[state.prosac_n - m])
    return state.prosac_n, take_newest


def _select_center(state: SamplerState) -> int:
    if state.ordering is None:
        return int(state.rng.integers(state.points.shape[0]))
    n_star, take_newest = _prosac_step(state)
    if take_newest:
        return int(state.ordering[n_star - 1])
    return int(state.ordering[int(state.rng.integers(n_star))])


def draw_sample_pnapsac(state: SamplerState) -> np.ndarray:
    """One Progressive NAPSAC sample; entry 0 is the center point.

    The center is chosen by the PROSAC strategy when an ordering is available,
    uniformly otherwise; its hit count grows and may enlarge its neighborhood.
    While the neighborhood is smaller than the whole set, the sample is the
    center, its k_i-th nearest neighbor, and m - 2 uniform draws from the
    k_i - 1 nearest; once saturated it degrades to global uniform sampling.
    """
    pts = state.points
    n = pts.shape[0]
    m = state.growth.m
    if n < m:
        raise InsufficientPoints(f"need at least {m} points, got {n}")
    i = _select_center(state)
    state.hits[i] += 1
    _grow(state, i)
    k_i = int(state.ksizes[i])
    if k_i < n:
        nbrs = neighborhood(state, i, k_i + 1)
        kth = int(nbrs[k_i - 1])
        pool = nbrs[: k_i - 1]
        picks = [int(pool[j]) for j in _distinct(state.rng, pool.shape[0], m - 2)]
        return np.array([i, kth] + picks, dtype=np.int64)
    picks = _distinct(state.rng, n, m - 1, exclude=i)
    return np.array([i] + picks, dtype=np.int64)


def _in_neighborhood(state: SamplerState, j: int, i: int) -> bool:
    """True when p_i lies inside S_{j, k_j}, point j's current neighborhood.

    S_{j,k} is the ball reaching j's k-th nearest neighbor; the grid only
    approximates which point that is, so the test compares distances against
    the ball radius rather than requiring cell co-membership.
    """
    k_j = int(state.ksizes[j])
    if k_j >= state.points.shape[0]:
        return True
    nbrs = neighborhood(state, j, k_j + 1)
    if bool(np.any(nbrs[:k_j] == i)):
        return True
    pj = state.points[j]
    radius2 = float(np.sum((state.points[nbrs[k_j - 1]] - pj) ** 2))
    d2 = float(np.sum((state.points[i] - pj) ** 2))
    return d2 <= radius2


def update_hits(state: SamplerState, sample: np.ndarray, center: Optional[int] = None) -> None:
    """Credit non-center sample members whose neighborhood contains the center.

    Each credited point's hit counter grows and its neighborhood may enlarge,
    mirroring the center-handling growth rule.
    """
    i = int(sample[0]) if center is None else int(center)
    for j in sample[1:]:
        j = int(j)
        if j == i:
            continue
        if _in_neighborhood(state, j, i):
            state.hits[j] += 1
            _grow(state, j)


def default_napsac_radius(image_sizes) -> float:
    """10% of the 4D correspondence-space diagonal."""
    w1, h1, w2, h2 = image_sizes
    return 0.1 * float(np.sqrt(w1**2 + h1**2 + w2**2 + h2**2))


def draw_sample_uniform(state: SamplerState) -> np.ndarray:
    n = state.points.shape[0]
    m = state.growth.m
    if n < m:
        raise InsufficientPoints(f"need at least {m} points, got {n}")
    return np.array(_distinct(state.rng, n, m), dtype=np.int64)


def draw_sample_prosac(state: SamplerState) -> np.ndarray:
    """Classic PROSAC draw over the quality-ordered list."""
    if state.ordering is None:
        raise DomainError("prosac sampling requires a point ordering")
    n = state.points.shape[0]
    m = state.growth.m
    if n < m:
        raise InsufficientPoints(f"need at least {m} points, got {n}")
    n_star, take_newest = _prosac_step(state)
    order = state.ordering
    if take_newest:
        picks = _distinct(state.rng, n_star - 1, m - 1)
        return np.array([int(order[n_star - 1])] + [int(order[j]) for j in picks],
                        dtype=np.int64)
    picks = _distinct(state.rng, n_star, m)
    return np.array([int(order[j]) for j in picks], dtype=np.int64)


def draw_sample_napsac(state: SamplerState, radius: float) -> np.ndarray:
    """Center plus m - 1 uniform draws from the radius-``radius`` 4D ball.

    Redraws the center when its ball is too small; raises NapsacStarved after
    n failed centers.
    """
    if not (radius > 0.0):
        raise DomainError("napsac radius must be positive")
    pts = state.points
    n = pts.shape[0]
    m = state.growth.m
    if n < m:
        raise InsufficientPoints(f"need at least {m} points, got {n}")
    r2 = radius * radius
    for _ in range(n):
        c = int(state.rng.integers(n))
        d2 = np.sum((pts - pts[c]) ** 2, axis=1)
        ball = np.flatnonzero(d2 <= r2)
        ball = ball[ball != c]
        if ball.shape[0] >= m - 1:
            picks = _distinct(state.rng, ball.shape[0], m - 1)
            return np.array([c] + [int(ball[j]) for j in picks], dtype=np.int64)
    raise NapsacStarved(f"no center with {m - 1} neighbors within radius {radius}")


def draw_sample_baseline(strategy: str, state: SamplerState,
                         radius: Optional[float] = None) -> np.ndarray:
    if strategy == "uniform":
        return draw_sample_uniform(state)
    if strategy == "prosac":
        return draw_sample_prosac(state)
    if strategy == "napsac":
        if radius is None:
            radius = default_napsac_radius(state.grid.image_sizes)
        return draw_sample_napsac(state, radius)
    raise DomainError(f"unknown sampling strategy {strategy!r}")
