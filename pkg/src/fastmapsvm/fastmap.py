"""FastMap embedding with class-constrained pivot selection.

Each of the K iterations picks a pivot pair of opposite classes with the
pivot-changing heuristic, projects every object onto the line through the
pair with the cosine law, and then works in the residual space orthogonal to
that line. New objects are embedded from their distances to the 2K stored
reference objects alone.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distance import distance_name, get_distance

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-12


class InsufficientDataError(ValueError):
    pass


def project(d_ai: float, d_ab: float, d_ib: float) -> float:
    """Cosine-law coordinate of O_i on the line from O_a (at 0) to O_b (at d_ab).

    Not clamped to [0, d_ab]: distances violating the triangle inequality
    produce coordinates outside the segment.
    """
    if d_ab <= 0:
        raise ValueError("d_ab must be positive")
    return _project_sq(d_ai * d_ai, d_ab, d_ib * d_ib)


def _project_sq(d_ai_sq, d_ab, d_ib_sq):
    return (d_ai_sq + d_ab * d_ab - d_ib_sq) / (2.0 * d_ab)


def _residual_sq(d, coords_i, coords_j, k: int):
    """``d**2 - sum_{m<k} (x_i,m - x_j,m)**2`` clamped at 0.

    Works elementwise on arrays; the accumulation order is fixed so the fit
    path and the query path produce identical bits.
    """
    r = d * d
    for m in range(k):
        diff = coords_i[..., m] - coords_j[..., m]
        r = r - diff * diff
    return np.maximum(r, 0.0)


def residual_sq_distance(distance: Callable, coords_i, coords_j, o_i, o_j, k: int) -> float:
    """Squared distance between two objects after removing the first ``k`` coordinates."""
    ci = np.asarray(coords_i, dtype=np.float64)
    cj = np.asarray(coords_j, dtype=np.float64)
    if ci.shape[-1] < k or cj.shape[-1] < k:
        raise ValueError("coordinates shorter than iteration index")
    return float(_residual_sq(float(distance(o_i, o_j)), ci, cj, k))


def distance_row(distance: Callable, pivot, objects: Sequence, jobs: int = 1) -> np.ndarray:
    """``[distance(pivot, o) for o in objects]``, optionally on a thread pool."""
    if jobs <= 1 or len(objects) < 2:
        return np.array([float(distance(pivot, o)) for o in objects])
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return np.array(list(pool.map(lambda o: float(distance(pivot, o)), objects)))


@dataclass
class EmbeddingModel:
    """Fitted FastMap embedding.

    ``references`` holds the 2K pivot objects interleaved as
    ``[a_0, b_0, a_1, b_1, ...]``; ``pivot_coords`` their coordinates.
    Dimensions at or beyond ``effective_ndim`` are always zero.
    """

    ndim: int
    references: list
    reference_labels: np.ndarray
    reference_index: np.ndarray
    pivot_coords: np.ndarray
    d_ab: np.ndarray
    distance_name: str | None
    effective_ndim: int = field(default=-1)

    def __post_init__(self):
        if self.effective_ndim < 0:
            self.effective_ndim = len(self.d_ab)

    @property
    def pivot_pairs(self) -> list:
        return [(self.references[2 * k], self.references[2 * k + 1]) for k in range(self.effective_ndim)]


def _class_of(labels: np.ndarray, idx: int) -> int:
    return int(labels[idx])


def choose_pivot_pair(
    objects: Sequence,
    labels,
    residual_row: Callable[[int], np.ndarray],
    used,
    rng: np.random.Generator,
    swap_rounds: int = 1,
) -> tuple[int, int]:
    """Pivot-changing heuristic restricted to opposite-class pairs.

    Parameters
    ----------
    residual_row : callable
        ``residual_row(x)`` returns residual distances from object ``x`` to
        every object, in the current iteration's geometry.
    used : set of int
        Indices already serving as reference objects; never chosen again.
    rng : numpy Generator
        Source of the initial random pick.

    Returns
    -------
    (a, b) : indices of the chosen pair. Ties go to the lowest index.
    """
    labels = np.asarray(labels)
    n = len(objects)
    free = np.ones(n, dtype=bool)
    if used:
        free[list(used)] = False
    for c in (0, 1):
        if not np.any(free & (labels == c)):
            raise InsufficientDataError(f"no unused objects left in class {c}")

    candidates = np.flatnonzero(free)
    b = int(candidates[rng.integers(len(candidates))])
    a = b
    for _ in range(max(1, swap_rounds)):
        a = _farthest_opposite(residual_row(b), labels, free, _class_of(labels, b))
        b = _farthest_opposite(residual_row(a), labels, free, _class_of(labels, a))
    return a, b


def _farthest_opposite(row: np.ndarray, labels: np.ndarray, free: np.ndarray, cls: int) -> int:
    masked = np.where(free & (labels != cls), row, -np.inf)
    return int(np.argmax(masked))


def fit_embedding(
    objects: Sequence,
    labels,
    distance,
    ndim: int,
    seed: int = 0,
    epsilon: float = DEFAULT_EPSILON,
    swap_rounds: int = 1,
    jobs: int = 1,
) -> tuple[EmbeddingModel, np.ndarray]:
    """Embed labelled objects into R^ndim.

    Parameters
    ----------
    objects : sequence
        Anything ``distance`` accepts.
    labels : array_like of {0, 1}
    distance : callable or str
        Distance function or registry name.
    ndim : int
        Number of dimensions K. Each class needs at least K objects.
    seed : int
        Seeds the random initial pivot of every iteration.
    epsilon : float
        Pivot distances at or below this end the embedding early; the
        remaining dimensions are zero.

    Returns
    -------
    model : EmbeddingModel
    coords : ndarray, shape (N, ndim)
    """
    if isinstance(distance, str):
        name, distance = distance, get_distance(distance)
    else:
        name = distance_name(distance)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(objects)
    if ndim < 1:
        raise ValueError("ndim must be >= 1")
    if len(labels) != n:
        raise ValueError("one label per object required")
    counts = [int(np.sum(labels == c)) for c in (0, 1)]
    if min(counts) < ndim:
        raise InsufficientDataError(
            f"need at least {ndim} objects per class for {ndim} dimensions, have {counts}"
        )

    rng = np.random.default_rng(seed)
    coords = np.zeros((n, ndim))
    used: set = set()
    refs, ref_idx, d_ab_list = [], [], []
    effective = ndim

    for k in range(ndim):
        rows: dict[int, np.ndarray] = {}

        def orig_row(x: int) -> np.ndarray:
            if x not in rows:
                rows[x] = distance_row(distance, objects[x], objects, jobs)
            return rows[x]

        def residual_row(x: int) -> np.ndarray:
            return np.sqrt(_residual_sq(orig_row(x), coords, coords[x], k))

        a, b = choose_pivot_pair(objects, labels, residual_row, used, rng, swap_rounds)
        d_ab_sq = float(_residual_sq(orig_row(a)[b], coords[b], coords[a], k))
        d_ab = math.sqrt(d_ab_sq)
        if d_ab <= epsilon:
            log.info("pivot distance %.3g at dimension %d; remaining dimensions zero", d_ab, k)
            effective = k
            break
        used.update((a, b))
        ra = _residual_sq(orig_row(a), coords, coords[a], k)
        rb = _residual_sq(orig_row(b), coords, coords[b], k)
        coords[:, k] = _project_sq(ra, d_ab, rb)
        refs.extend((a, b))
        ref_idx.extend((a, b))
        d_ab_list.append(d_ab)

    if effective == 0:
        log.warning("embedding is degenerate: no dimension with a positive pivot distance")
    model = EmbeddingModel(
        ndim=ndim,
        references=[objects[i] for i in refs],
        reference_labels=labels[ref_idx] if ref_idx else np.zeros(0, dtype=np.int64),
        reference_index=np.asarray(ref_idx, dtype=np.int64),
        pivot_coords=coords[ref_idx].copy() if ref_idx else np.zeros((0, ndim)),
        d_ab=np.asarray(d_ab_list, dtype=np.float64),
        distance_name=name,
        effective_ndim=effective,
    )
    return model, coords


def embed(model: EmbeddingModel, obj, distance: Callable | None = None) -> np.ndarray:
    """Coordinates of a new object from its distances to the reference objects.

    Uses exactly ``2 * effective_ndim`` distance evaluations.
    """
    if model.effective_ndim == 0:
        raise ValueError("degenerate embedding model (effective dimension 0)")
    if distance is None:
        distance = get_distance(model.distance_name)
    x = np.zeros(model.ndim)
    for k in range(model.effective_ndim):
        pa, pb = model.pivot_coords[2 * k], model.pivot_coords[2 * k + 1]
        # Same argument order and arithmetic as fit, so training objects map back exactly.
        ra = _residual_sq(float(distance(model.references[2 * k], obj)), x, pa, k)
        rb = _residual_sq(float(distance(model.references[2 * k + 1], obj)), x, pb, k)
        x[k] = _project_sq(ra, model.d_ab[k], rb)
    return x


def embed_many(model: EmbeddingModel, objects: Sequence, distance: Callable | None = None, jobs: int = 1) -> np.ndarray:
    if jobs <= 1 or len(objects) < 2:
        rows = [embed(model, o, distance) for o in objects]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda o: embed(model, o, distance), objects))
    return np.array(rows).reshape(len(objects), model.ndim)
