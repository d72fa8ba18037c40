"""Instance files, synthetic scenes, and the benchmark harness.

Instance text format: line 1 holds ``w1 h1 w2 h2``, then one correspondence
``x1 y1 x2 y2`` per line, optionally followed by ``H:``/``F:`` (9 numbers,
row-major ground-truth model) and ``L:`` (one 0/1 inlier label per
correspondence).  Numbers after a section tag may continue on later lines.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics
from .engine import EngineConfig, run_estimation
from .errors import DomainError, NoModelFound, ParseError, TwoviewError
from .geometry import Model, ModelKind, solve_homography_minimal
from .metrics import GroundTruth


@dataclass(eq=False)
class ProblemInstance:
    identifier: str
    points: np.ndarray
    image_sizes: tuple
    gt: Optional[GroundTruth] = None

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def _num(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(lineno, f"expected a number, got {token!r}") from None


def parse_instance_text(text: str, identifier: str = "<memory>") -> ProblemInstance:
    """Parse the instance format; raises ParseError with the offending line."""
    sizes = None
    rows = []
    sections: dict[str, list[float]] = {}
    pending: Optional[str] = None
    need = 0
    n_rows_at_tag = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] in ("H:", "F:", "L:"):
            tag = tokens[0][0]
            if tag in sections:
                raise ParseError(lineno, f"duplicate section {tokens[0]}")
            if tag in ("H", "F") and ("H" in sections or "F" in sections):
                raise ParseError(lineno, "instance may carry only one model section")
            sections[tag] = []
            pending = tag
            need = 9 if tag in ("H", "F") else len(rows)
            n_rows_at_tag[tag] = len(rows)
            tokens = tokens[1:]
            if tag == "L" and need == 0:
                raise ParseError(lineno, "label section before any correspondences")
        if pending is not None:
            for tok in tokens:
                if len(sections[pending]) >= need:
                    raise ParseError(lineno, f"too many values in section {pending}:")
                sections[pending].append(_num(tok, lineno))
            if len(sections[pending]) == need:
                pending = None
            continue
        if sizes is None:
            if len(tokens) != 4:
                raise ParseError(lineno, "header must be 'w1 h1 w2 h2'")
            sizes = tuple(_num(t, lineno) for t in tokens)
            if any(s <= 0 for s in sizes):
                raise ParseError(lineno, "image sizes must be positive")
            continue
        if len(tokens) != 4:
            raise ParseError(lineno, f"correspondence row needs 4 fields, got {len(tokens)}")
        vals = [_num(t, lineno) for t in tokens]
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(lineno, "non-finite coordinate")
        if not (0.0 <= vals[0] <= sizes[0] and 0.0 <= vals[1] <= sizes[1]
                and 0.0 <= vals[2] <= sizes[2] and 0.0 <= vals[3] <= sizes[3]):
            raise ParseError(lineno, "coordinate outside the image bounds")
        rows.append(vals)
    if sizes is None:
        raise ParseError(1, "missing header line 'w1 h1 w2 h2'")
    if pending is not None:
        raise ParseError(lineno, f"section {pending}: ended with too few values")
    points = np.array(rows, dtype=np.float64).reshape(len(rows), 4)

    gt = None
    model = None
    labels = None
    if "H" in sections:
        model = Model.create(ModelKind.HOMOGRAPHY, np.array(sections["H"]).reshape(3, 3))
    elif "F" in sections:
        model = Model.create(ModelKind.FUNDAMENTAL, np.array(sections["F"]).reshape(3, 3))
    if "L" in sections:
        vals = sections["L"]
        if any(v not in (0.0, 1.0) for v in vals):
            raise ParseError(1, "labels must be 0 or 1")
        labels = np.array(vals, dtype=bool)
    if model is not None or labels is not None:
        gt = GroundTruth(model=model, labels=labels, image_sizes=sizes)
    return ProblemInstance(identifier=identifier, points=points,
                           image_sizes=sizes, gt=gt)


def parse_instance(path) -> ProblemInstance:
    path = Path(path)
    return parse_instance_text(path.read_text(), identifier=path.stem)


def serialize_instance(inst: ProblemInstance) -> str:
    """Canonical text form; floats use repr so parsing round-trips exactly."""
    out = [" ".join(repr(float(s)) for s in inst.image_sizes)]
    for row in inst.points:
        out.append(" ".join(repr(float(v)) for v in row))
    if inst.gt is not None and inst.gt.model is not None:
        tag = "H:" if inst.gt.model.kind is ModelKind.HOMOGRAPHY else "F:"
        out.append(tag + " " + " ".join(repr(float(v)) for v in inst.gt.model.M.ravel()))
    if inst.gt is not None and inst.gt.labels is not None:
        out.append("L: " + " ".join(str(int(v)) for v in inst.gt.labels))
    return "\n".join(out) + "\n"


def write_instance(inst: ProblemInstance, path) -> None:
    Path(path).write_text(serialize_instance(inst))


def _project(H: np.ndarray, xy: np.ndarray) -> np.ndarray:
    v = H @ np.array([xy[0], xy[1], 1.0])
    return v[0:2] / v[2]


def _random_homography(rng: np.random.Generator, image_sizes) -> np.ndarray:
    """Random projective map with bounded distortion between the two images."""
    w1, h1, w2, h2 = image_sizes
    src = np.array([[0.0, 0.0], [w1, 0.0], [w1, h1], [0.0, h1]])
    base = np.array([[0.0, 0.0], [w2, 0.0], [w2, h2], [0.0, h2]])
    for _ in range(100):
        jitter = rng.uniform(-0.12, 0.12, size=(4, 2)) * np.array([w2, h2])
        dst = base + jitter
        model = solve_homography_minimal(np.hstack([src, dst]))
        if model is None:
            continue
        H = model.M
        if abs(np.linalg.det(H)) < 1e-9:
            continue
        if np.linalg.cond(H) > 1e5:
            continue
        return H
    raise DomainError("failed to draw a well-conditioned homography")


def _skew(t: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -t[2], t[1]], [t[2], 0.0, -t[0]], [-t[1], t[0], 0.0]])


def _rotation(rng: np.random.Generator, max_angle: float) -> np.ndarray:
    ax, ay, az = rng.uniform(-max_angle, max_angle, size=3)
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def _sample_window(rng: np.random.Generator, w: float, h: float, layout: str):
    """Image-1 sampling window; 'localized' confines it to <= 25% of the area."""
    if layout == "global":
        return 0.02 * w, 0.98 * w, 0.02 * h, 0.98 * h
    fx = rng.uniform(0.35, 0.5)
    fy = rng.uniform(0.35, 0.5)
    x0 = rng.uniform(0.0, w * (1.0 - fx))
    y0 = rng.uniform(0.0, h * (1.0 - fy))
    return x0, x0 + fx * w, y0, y0 + fy * h


def generate_synthetic(kind: ModelKind, n_points: int, inlier_ratio: float,
                       noise_sigma: float, layout: str = "global", seed: int = 0,
                       image_sizes=(1000.0, 1000.0, 1000.0, 1000.0)) -> ProblemInstance:
    """Synthetic scene with known model and labels.

    Inliers follow a random valid model (plane-induced projective map for H,
    a random two-camera rig for F) with isotropic Gaussian noise added to the
    image-2 point; outliers are uniform over both images.  'localized' confines
    the inliers' image-1 positions to a random sub-window of <= 25% area.
    """
    if not (0.0 < inlier_ratio <= 1.0):
        raise DomainError("inlier_ratio must be in (0, 1]")
    if noise_sigma < 0.0:
        raise DomainError("noise_sigma must be >= 0")
    if layout not in ("global", "localized"):
        raise DomainError(f"unknown layout {layout!r}")
    rng = np.random.default_rng(seed)
    w1, h1, w2, h2 = (float(s) for s in image_sizes)
    n_in = int(round(inlier_ratio * n_points))
    x_lo, x_hi, y_lo, y_hi = _sample_window(rng, w1, h1, layout)

    if kind is ModelKind.HOMOGRAPHY:
        M = _random_homography(rng, (w1, h1, w2, h2))

        def draw_inlier():
            for _ in range(1000):
                p1 = np.array([rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)])
                p2 = _project(M, p1) + rng.normal(0.0, noise_sigma, size=2)
                if 0.0 <= p2[0] <= w2 and 0.0 <= p2[1] <= h2:
                    return np.concatenate([p1, p2])
            raise DomainError("could not place an inlier inside image 2")
    else:
        f1 = 1.2 * max(w1, h1)
        f2 = 1.2 * max(w2, h2)
        K1 = np.array([[f1, 0.0, w1 / 2], [0.0, f1, h1 / 2], [0.0, 0.0, 1.0]])
        K2 = np.array([[f2, 0.0, w2 / 2], [0.0, f2, h2 / 2], [0.0, 0.0, 1.0]])
        K1inv = np.linalg.inv(K1)
        R = _rotation(rng, 0.25)
        t = rng.normal(size=3)
        t *= 1.0 / max(np.linalg.norm(t), 1e-9)
        M = np.linalg.inv(K2).T @ _skew(t) @ R @ K1inv

        def draw_inlier():
            for _ in range(1000):
                u = rng.uniform(x_lo, x_hi)
                v = rng.uniform(y_lo, y_hi)
                z = rng.uniform(3.0, 9.0)
                X = z * (K1inv @ np.array([u, v, 1.0]))
                x2 = K2 @ (R @ X + t)
                if x2[2] <= 1e-9:
                    continue
                p2 = x2[0:2] / x2[2] + rng.normal(0.0, noise_sigma, size=2)
                if 0.0 <= p2[0] <= w2 and 0.0 <= p2[1] <= h2:
                    return np.array([u, v, p2[0], p2[1]])
            raise DomainError("could not place an inlier inside image 2")

    rows = np.empty((n_points, 4))
    labels = np.zeros(n_points, dtype=bool)
    for i in range(n_in):
        rows[i] = draw_inlier()
        labels[i] = True
    for i in range(n_in, n_points):
        rows[i] = [rng.uniform(0.0, w1), rng.uniform(0.0, h1),
                   rng.uniform(0.0, w2), rng.uniform(0.0, h2)]
    perm = rng.permutation(n_points)
    rows, labels = rows[perm], labels[perm]

    tag = "h" if kind is ModelKind.HOMOGRAPHY else "f"
    ident = f"synth-{tag}-{layout}-n{n_points}-r{inlier_ratio:g}-s{noise_sigma:g}-seed{seed}"
    gt = GroundTruth(model=Model.create(kind, M), labels=labels,
                     image_sizes=(w1, h1, w2, h2))
    return ProblemInstance(identifier=ident, points=rows,
                           image_sizes=(w1, h1, w2, h2), gt=gt)


@dataclass(frozen=True)
class BenchmarkRecord:
    instance: str
    method: str
    repeat: int
    seed: int
    error: float
    failure: bool
    iterations: int
    wall_time_ms: float


@dataclass(frozen=True)
class MethodSummary:
    method: str
    runs: int
    median_error: float
    failure_rate: float
    mean_time_ms: float


def parse_methods(spec: str) -> list[tuple[str, str]]:
    """'scorer:sampler[,scorer:sampler...]' -> list of pairs."""
    methods = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 2:
            raise DomainError(f"method must be 'scorer:sampler', got {part!r}")
        methods.append((bits[0], bits[1]))
    if not methods:
        raise DomainError("no methods given")
    return methods


def derive_seed(master_seed: int, instance_id: str, method_id: str, repeat: int) -> int:
    """Stable per-run seed; depends only on ids, never on instance data."""
    key = f"{master_seed}|{instance_id}|{method_id}|{repeat}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") % (2**63)


def evaluate_error(model: Model, inst: ProblemInstance) -> float:
    """Protocol error of an estimate against the instance's ground truth."""
    if inst.gt is None:
        raise DomainError(f"instance {inst.identifier} has no ground truth")
    if model.kind is ModelKind.HOMOGRAPHY:
        if inst.gt.labels is None:
            raise DomainError("homography evaluation needs ground-truth inlier labels")
        return metrics.rmse_reprojection(model, inst.points[inst.gt.labels])
    if inst.gt.model is None:
        raise DomainError("fundamental-matrix evaluation needs a ground-truth model")
    return metrics.sgd_error(model, inst.gt.model, inst.image_sizes)


def _instance_kind(inst: ProblemInstance, default: Optional[ModelKind]) -> ModelKind:
    if inst.gt is not None and inst.gt.model is not None:
        return inst.gt.model.kind
    if default is None:
        raise DomainError(f"cannot infer model kind for instance {inst.identifier}")
    return default


def run_benchmark(instances: Sequence[ProblemInstance],
                  methods: Sequence[tuple[str, str]], repeats: int,
                  master_seed: int = 0, kind: Optional[ModelKind] = None,
                  **engine_params) -> list[BenchmarkRecord]:
    """One record per (instance, method, repeat); failures never abort the run."""
    if not instances or not methods:
        raise DomainError("need at least one instance and one method")
    if repeats < 1:
        raise DomainError("repeats must be >= 1")
    records = []
    for inst in instances:
        inst_kind = _instance_kind(inst, kind)
        for scorer, sampler in methods:
            method_id = f"{scorer}:{sampler}"
            for rep in range(repeats):
                seed = derive_seed(master_seed, inst.identifier, method_id, rep)
                config = EngineConfig(kind=inst_kind, scorer=scorer, sampler=sampler,
                                      seed=seed, **engine_params)
                t0 = time.perf_counter()
                try:
                    report = run_estimation(inst.points, config, inst.image_sizes)
                    error = evaluate_error(report.model, inst)
                    iterations = report.iterations
                    wall_ms = report.wall_time_ms
                except (NoModelFound, TwoviewError):
                    error = math.inf
                    iterations = 0
                    wall_ms = (time.perf_counter() - t0) * 1e3
                records.append(BenchmarkRecord(
                    instance=inst.identifier, method=method_id, repeat=rep,
                    seed=seed, error=error,
                    failure=metrics.is_failure(error, inst.image_sizes)
                    if math.isfinite(error) else True,
                    iterations=iterations, wall_time_ms=wall_ms))
    records.sort(key=lambda r: (r.instance, r.method, r.repeat))
    return records


def summarize(records: Sequence[BenchmarkRecord]) -> list[MethodSummary]:
    """Per-method aggregates, ordered by method id; a pure function of the records."""
    by_method: dict[str, list[BenchmarkRecord]] = {}
    for rec in records:
        by_method.setdefault(rec.method, []).append(rec)
    out = []
    for method in sorted(by_method):
        group = by_method[method]
        errors = np.array([r.error for r in group])
        out.append(MethodSummary(
            method=method,
            runs=len(group),
            median_error=float(np.median(errors)),
            failure_rate=float(np.mean([r.failure for r in group])),
            mean_time_ms=float(np.mean([r.wall_time_ms for r in group])),
        ))
    return out


def cdf_points(records: Sequence[BenchmarkRecord]) -> dict[str, np.ndarray]:
    """Per-method (error, cumulative fraction) pairs over finite errors.

    The fraction is relative to all of the method's runs, so curves saturate
    below 1 when failures produced non-finite errors.
    """
    by_method: dict[str, list[float]] = {}
    totals: dict[str, int] = {}
    for rec in records:
        totals[rec.method] = totals.get(rec.method, 0) + 1
        if math.isfinite(rec.error):
            by_method.setdefault(rec.method, []).append(rec.error)
    out = {}
    for method in sorted(totals):
        errs = np.sort(np.array(by_method.get(method, []), dtype=np.float64))
        frac = np.arange(1, errs.size + 1, dtype=np.float64) / totals[method]
        out[method] = np.column_stack([errs, frac])
    return out


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_records_csv(records: Sequence[BenchmarkRecord], path) -> None:
    """Deterministic record table: everything except wall time (see timing CSV)."""
    lines = ["instance,method,repeat,seed,error,failure,iterations"]
    for r in records:
        lines.append(f"{r.instance},{r.method},{r.repeat},{r.seed},"
                     f"{_fmt(r.error)},{int(r.failure)},{r.iterations}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_timing_csv(records: Sequence[BenchmarkRecord], path) -> None:
    lines = ["instance,method,repeat,wall_time_ms"]
    for r in records:
        lines.append(f"{r.instance},{r.method},{r.repeat},{_fmt(r.wall_time_ms)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_cdf_csv(records: Sequence[BenchmarkRecord], path) -> None:
    lines = ["method,error,fraction"]
    for method, pts in cdf_points(records).items():
        for err, frac in pts:
            lines.append(f"{method},{_fmt(err)},{_fmt(frac)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_csv(summaries: Sequence[MethodSummary], path) -> None:
    lines = ["method,runs,median_error,failure_rate,mean_time_ms"]
    for s in summaries:
        lines.append(f"{s.method},{s.runs},{_fmt(s.median_error)},"
                     f"{_fmt(s.failure_rate)},{_fmt(s.mean_time_ms)}")
    Path(path).write_text("\n".join(lines) + "\n")


def format_summary_text(summaries: Sequence[MethodSummary]) -> str:
    header = f"{'method':<24}{'runs':>6}{'median_err':>12}{'fail_rate':>11}{'time_ms':>10}"
    rows = [header, "-" * len(header)]
    for s in summaries:
        rows.append(f"{s.method:<24}{s.runs:>6}{_fmt(s.median_error):>12}"
                    f"{_fmt(s.failure_rate):>11}{_fmt(s.mean_time_ms):>10}")
    return "\n".join(rows) + "\n"
