"""Project latent trajectories to 2-D with a from-scratch UMAP pipeline.

Stages: exact k-nearest neighbours, fuzzy neighbourhood graph (per-point
bandwidths found by binary search), least-squares fit of the low-dimensional
similarity curve, then a seeded, single-threaded stochastic layout. Every
stage is deterministic given the seed, so paired trajectories embedded
together can be compared run to run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np
from scipy.optimize import curve_fit

from . import rng
from .sampler import Trajectory

SIGMA_TOLERANCE = 1e-5
SIGMA_MAX_ITER = 64
REPULSION_EPSILON = 0.001
GRADIENT_CLIP = 4.0
INIT_RANGE = 10.0


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class PointSet:
    """Flattened latents, one row per (trajectory, step)."""

    points: np.ndarray  # n x d float32
    labels: tuple[tuple[str, int], ...]  # (trajectory id, step index) per row

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[0] < 2:
            raise ProjectionError(
                f"need a 2-D matrix with at least 2 rows, got {self.points.shape}"
            )
        if len(self.labels) != self.points.shape[0]:
            raise ProjectionError("one label per point required")
        if not np.isfinite(self.points).all():
            raise ProjectionError("points contain non-finite entries")


@dataclass(frozen=True)
class FuzzyGraph:
    """Symmetric weighted neighbourhood graph with per-point rho and sigma."""

    edges: tuple[tuple[int, int, float], ...]  # i < j, weight in (0, 1]
    rhos: np.ndarray
    sigmas: np.ndarray


@dataclass(frozen=True)
class LayoutParams:
    n_neighbors: int = 15
    min_dist: float = 0.1
    spread: float = 1.0
    epochs: int = 500
    negative_sample_rate: int = 5
    learning_rate: float = 1.0
    repulsion_strength: float = 1.0
    a: float | None = None
    b: float | None = None

    def resolved(self) -> "LayoutParams":
        if self.a is not None and self.b is not None:
            return self
        a, b = fit_ab(self.min_dist, self.spread)
        return replace(self, a=a, b=b)

    def metadata(self) -> dict:
        return {
            "n_neighbors": self.n_neighbors,
            "min_dist": self.min_dist,
            "spread": self.spread,
            "epochs": self.epochs,
            "negative_sample_rate": self.negative_sample_rate,
            "a": self.a,
            "b": self.b,
        }


@dataclass(frozen=True)
class Embedding2D:
    coords: np.ndarray  # n x 2 float32
    rng_seed: int
    params: LayoutParams


def knn(points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact Euclidean k-nearest neighbours; ties broken by lower index.

    Distances are computed from explicit coordinate differences (row by row)
    so translating every point by the same exactly-representable vector leaves
    them bit-identical.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if not (1 <= k <= n - 1):
        raise ProjectionError(f"k must be in [1, {n - 1}], got {k}")
    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k), dtype=np.float64)
    for i in range(n):
        diff = pts - pts[i]
        d = np.sqrt((diff * diff).sum(axis=1))
        d[i] = np.inf  # exclude self
        order = np.argsort(d, kind="stable")[:k]
        indices[i] = order
        distances[i] = d[order]
    return indices, distances


def _smooth_sigma(dists: np.ndarray, rho: float, target: float) -> float:
    """Binary search for the bandwidth whose weight sum hits the target."""
    lo, hi, mid = 0.0, math.inf, 1.0
    for _ in range(SIGMA_MAX_ITER):
        total = 0.0
        for d in dists:
            gap = d - rho
            total += math.exp(-gap / mid) if gap > 0 else 1.0
        if abs(total - target) < SIGMA_TOLERANCE:
            break
        if total > target:
            hi = mid
            mid = (lo + hi) / 2.0
        else:
            lo = mid
            mid = mid * 2.0 if hi == math.inf else (lo + hi) / 2.0
    return mid


def fuzzy_graph(indices: np.ndarray, distances: np.ndarray, k: int) -> FuzzyGraph:
    """Build the symmetrized fuzzy neighbourhood graph.

    Directed weights are exp(-max(0, d - rho) / sigma) with rho the nearest
    distance and sigma solving sum(weights) = log2(k); the fuzzy union
    w + w' - w*w' symmetrizes. Points whose neighbours are all at distance 0
    get weight 1 everywhere and the sentinel sigma 1.0.
    """
    n = indices.shape[0]
    target = math.log2(k)
    rhos = np.empty(n, dtype=np.float64)
    sigmas = np.empty(n, dtype=np.float64)
    directed: dict[tuple[int, int], float] = {}
    for i in range(n):
        dists = distances[i]
        rho = float(dists[0])
        rhos[i] = rho
        if dists[-1] <= 0.0:
            sigmas[i] = 1.0
            for j in indices[i]:
                directed[(i, int(j))] = 1.0
            continue
        sigma = _smooth_sigma(dists, rho, target)
        sigmas[i] = sigma
        for j, d in zip(indices[i], dists):
            gap = d - rho
            w = math.exp(-gap / sigma) if gap > 0 else 1.0
            directed[(i, int(j))] = w

    merged: dict[tuple[int, int], float] = {}
    for (i, j), w in directed.items():
        key = (i, j) if i < j else (j, i)
        if key in merged:
            continue
        w_back = directed.get((j, i), 0.0)
        merged[key] = w + w_back - w * w_back
    edges = tuple(
        (i, j, w) for (i, j), w in sorted(merged.items()) if w > 0.0
    )
    return FuzzyGraph(edges=edges, rhos=rhos, sigmas=sigmas)


def fit_ab(min_dist: float, spread: float) -> tuple[float, float]:
    """Least-squares fit of 1 / (1 + a * x^(2b)) to the membership target
    (1 below min_dist, exponential decay beyond) on a 300-point grid over
    [0, 3 * spread]; fixed initialisation keeps the fit deterministic."""
    if not (0 < min_dist < spread * 10):
        raise ProjectionError(
            f"need 0 < min_dist < 10 * spread, got {min_dist}, {spread}"
        )

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    xs = np.linspace(0.0, spread * 3.0, 300)
    ys = np.ones_like(xs)
    tail = xs >= min_dist
    ys[tail] = np.exp(-(xs[tail] - min_dist) / spread)
    (a, b), _ = curve_fit(curve, xs, ys, p0=(1.0, 1.0))
    return float(a), float(b)


@numba.njit(cache=True)
def _mix_stream(seed: numba.uint64, index: numba.uint64) -> numba.uint64:  # pragma: no cover
    golden = numba.uint64(0x9E3779B97F4A7C15)
    z = seed + (index + numba.uint64(1)) * golden
    z = (z ^ (z >> numba.uint64(30))) * numba.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> numba.uint64(27))) * numba.uint64(0x94D049BB133111EB)
    return z ^ (z >> numba.uint64(31))


@numba.njit(cache=True)
def _clip(x: float) -> float:  # pragma: no cover
    if x > GRADIENT_CLIP:
        return GRADIENT_CLIP
    if x < -GRADIENT_CLIP:
        return -GRADIENT_CLIP
    return x


@numba.njit(cache=True)
def _optimize(
    coords,
    heads,
    tails,
    epochs_per_sample,
    n_epochs,
    a,
    b,
    gamma,
    initial_lr,
    negative_sample_rate,
    neg_seed,
):  # pragma: no cover
    """Sequential stochastic layout: edges fire on their weight-proportional
    schedule; each firing attracts head toward tail and repels the head from
    sampled negatives. Returns -1, or the epoch index where coordinates
    stopped being finite."""
    n_vertices = coords.shape[0]
    n_edges = heads.shape[0]
    epoch_of_next_sample = epochs_per_sample.copy()
    epochs_per_negative = epochs_per_sample / negative_sample_rate
    epoch_of_next_negative = epochs_per_negative.copy()
    counter = numba.uint64(0)

    for epoch in range(n_epochs):
        alpha = initial_lr * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if epoch_of_next_sample[e] > epoch:
                continue
            i = heads[e]
            j = tails[e]
            dx = coords[i, 0] - coords[j, 0]
            dy = coords[i, 1] - coords[j, 1]
            rdist = dx * dx + dy * dy
            if rdist > 0.0:
                coeff = -2.0 * a * b * rdist ** (b - 1.0) / (a * rdist**b + 1.0)
            else:
                coeff = 0.0
            coords[i, 0] += alpha * _clip(coeff * dx)
            coords[i, 1] += alpha * _clip(coeff * dy)
            epoch_of_next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - epoch_of_next_negative[e]) / epochs_per_negative[e])
            for _ in range(n_neg):
                k = int(_mix_stream(neg_seed, counter) % numba.uint64(n_vertices))
                counter += numba.uint64(1)
                if k == i:
                    continue
                dx = coords[i, 0] - coords[k, 0]
                dy = coords[i, 1] - coords[k, 1]
                rdist = dx * dx + dy * dy
                if rdist > 0.0:
                    coeff = (
                        2.0
                        * gamma
                        * b
                        / ((REPULSION_EPSILON + rdist) * (a * rdist**b + 1.0))
                    )
                else:
                    coeff = 0.0
                if coeff > 0.0:
                    gx = _clip(coeff * dx)
                    gy = _clip(coeff * dy)
                else:
                    gx = GRADIENT_CLIP
                    gy = GRADIENT_CLIP
                coords[i, 0] += alpha * gx
                coords[i, 1] += alpha * gy
            epoch_of_next_negative[e] += n_neg * epochs_per_negative[e]

        for v in range(n_vertices):
            if not (
                np.isfinite(coords[v, 0]) and np.isfinite(coords[v, 1])
            ):
                return epoch
    return -1


def layout(graph: FuzzyGraph, params: LayoutParams, seed: int, n_points: int) -> Embedding2D:
    """Optimize 2-D coordinates for a fuzzy graph; bit-reproducible per seed."""
    params = params.resolved()
    if not graph.edges:
        raise ProjectionError("graph has no edges")

    init_seed = rng.substream(seed, 0)
    neg_seed = rng.substream(seed, 1)
    u = rng.uniforms(init_seed, 0, 2 * n_points)
    coords = (
        (-INIT_RANGE + 2.0 * INIT_RANGE * u).astype(np.float32).reshape(n_points, 2)
    ).astype(np.float64)

    # both directions of every undirected edge, so updates stay balanced
    heads = np.empty(2 * len(graph.edges), dtype=np.int64)
    tails = np.empty(2 * len(graph.edges), dtype=np.int64)
    weights = np.empty(2 * len(graph.edges), dtype=np.float64)
    for e, (i, j, w) in enumerate(graph.edges):
        heads[2 * e], tails[2 * e], weights[2 * e] = i, j, w
        heads[2 * e + 1], tails[2 * e + 1], weights[2 * e + 1] = j, i, w

    epochs_per_sample = weights.max() / weights
    failed_epoch = _optimize(
        coords,
        heads,
        tails,
        epochs_per_sample,
        params.epochs,
        float(params.a),
        float(params.b),
        params.repulsion_strength,
        params.learning_rate,
        float(params.negative_sample_rate),
        np.uint64(neg_seed),
    )
    if failed_epoch >= 0:
        raise ProjectionError(f"non-finite coordinates at epoch {failed_epoch}")
    return Embedding2D(
        coords=coords.astype(np.float32), rng_seed=seed, params=params
    )


def point_set_from_trajectories(trajectories: list[Trajectory], ids: list[str]) -> PointSet:
    points = []
    labels = []
    shapes = {t.latents[0].data.shape for t in trajectories}
    if len(shapes) > 1:
        raise ProjectionError(f"trajectories have mixed latent shapes: {shapes}")
    for tid, traj in zip(ids, trajectories):
        for step_index, latent in enumerate(traj.latents):
            points.append(latent.data.reshape(-1))
            labels.append((tid, step_index))
    return PointSet(points=np.stack(points), labels=tuple(labels))


def embed_points(
    points: np.ndarray, params: LayoutParams, seed: int
) -> tuple[np.ndarray, LayoutParams]:
    """Embed rows of ``points`` in 2-D; exact duplicate rows share one graph
    node, so equal inputs always land on equal outputs."""
    n = points.shape[0]
    if n < 2:
        raise ProjectionError("need at least 2 points")
    first_seen: dict[bytes, int] = {}
    representative = np.empty(n, dtype=np.int64)
    unique_rows = []
    for i in range(n):
        key = points[i].tobytes()
        if key in first_seen:
            representative[i] = first_seen[key]
        else:
            first_seen[key] = len(unique_rows)
            representative[i] = len(unique_rows)
            unique_rows.append(points[i])
    unique = np.stack(unique_rows)
    if unique.shape[0] < 2:
        raise ProjectionError("all points are identical; nothing to lay out")

    k = min(params.n_neighbors, unique.shape[0] - 1)
    params = replace(params.resolved(), n_neighbors=k)
    indices, distances = knn(unique, k)
    graph = fuzzy_graph(indices, distances, k)
    embedding = layout(graph, params, seed, unique.shape[0])
    return embedding.coords[representative], params


def project_trajectories(
    trajectories: list[Trajectory],
    ids: list[str],
    params: LayoutParams | None = None,
    seed: int = 0,
) -> dict[str, np.ndarray]:
    """Embed every latent of every trajectory into one shared 2-D space and
    return each trajectory's polyline in step order."""
    params = params or LayoutParams()
    point_set = point_set_from_trajectories(trajectories, ids)
    coords, _ = embed_points(point_set.points, params, seed)
    polylines: dict[str, np.ndarray] = {}
    cursor = 0
    for tid, traj in zip(ids, trajectories):
        steps = len(traj.latents)
        polylines[tid] = coords[cursor : cursor + steps]
        cursor += steps
    return polylines
