"""Standardization, distances from the query point, and locality weights.

The surrogate is fitted in standardized coordinates so that coefficients are
comparable across features, and so the kernel width has one interpretable
unit: training-data standard deviations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FeatureStats

# Weights below this are clamped up to keep the (0, 1] invariant; exp()
# underflows to exactly 0.0 for distances past ~38 kernel widths.
_WEIGHT_FLOOR = np.finfo(np.float64).tiny


def default_kernel_width(num_features: int) -> float:
    """Conventional default bandwidth, 0.75 * sqrt(P)."""
    if num_features < 1:
        raise ValueError(f"num_features must be >= 1, got {num_features}")
    return 0.75 * math.sqrt(num_features)


def standardize(points: np.ndarray, stats: FeatureStats) -> np.ndarray:
    """Map column j through v -> (v - means[j]) / stds[j].

    Columns with zero standard deviation map to all zeros instead of
    dividing by zero; a constant feature carries no locality information.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-1] != stats.num_features:
        raise ValueError(
            f"points have {points.shape[-1]} columns, stats cover {stats.num_features}"
        )
    safe = np.where(stats.stds > 0, stats.stds, 1.0)
    z = (points - stats.means) / safe
    return np.where(stats.stds > 0, z, 0.0)


def distances(x_std: np.ndarray, z_points: np.ndarray) -> np.ndarray:
    """Euclidean distance of each standardized row from the standardized query point."""
    x_std = np.asarray(x_std, dtype=np.float64)
    z_points = np.asarray(z_points, dtype=np.float64)
    if z_points.shape[1] != x_std.shape[0]:
        raise ValueError(
            f"query point has {x_std.shape[0]} entries, rows have {z_points.shape[1]}"
        )
    diff = z_points - x_std
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def kernel_weights(dists: np.ndarray, kernel_width: float) -> np.ndarray:
    """Gaussian locality weights w_i = exp(-d_i^2 / kernel_width^2), in (0, 1].

    Equivalent to the sqrt(exp(-d^2/kw^2)) convention of other LIME
    implementations at kw_here = kw_there (the square root only rescales the
    exponent by the constant folded in here).
    """
    if not kernel_width > 0:
        raise ValueError(f"kernel_width must be > 0, got {kernel_width}")
    dists = np.asarray(dists, dtype=np.float64)
    w = np.exp(-np.square(dists / kernel_width))
    return np.maximum(w, _WEIGHT_FLOOR)


@dataclass(frozen=True)
class WeightedBatch:
    """Standardized points with their distances and kernel weights.

    Invariant: weights[i] is exactly kernel_weights(distances, kernel_width)[i]
    and therefore lies in (0, 1].
    """

    z_points: np.ndarray
    weights: np.ndarray
    distances: np.ndarray
    kernel_width: float

    def __post_init__(self) -> None:
        z = np.ascontiguousarray(self.z_points, dtype=np.float64)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        d = np.ascontiguousarray(self.distances, dtype=np.float64)
        n = z.shape[0]
        if w.shape != (n,) or d.shape != (n,):
            raise ValueError("weights and distances must have one entry per row")
        if (d < 0).any():
            raise ValueError("distances must be >= 0")
        if not ((w > 0).all() and (w <= 1).all()):
            raise ValueError("weights must lie in (0, 1]")
        if not np.array_equal(w, kernel_weights(d, self.kernel_width)):
            raise ValueError("weights are not the kernel image of the distances")
        for arr in (z, w, d):
            arr.setflags(write=False)
        object.__setattr__(self, "z_points", z)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "distances", d)


def build_weighted_batch(
    points: np.ndarray,
    stats: FeatureStats,
    x: np.ndarray,
    kernel_width: float,
) -> WeightedBatch:
    """Standardize a raw batch and weight it by proximity to the query point x."""
    z = standardize(points, stats)
    x_std = standardize(np.asarray(x, dtype=np.float64).reshape(1, -1), stats)[0]
    d = distances(x_std, z)
    return WeightedBatch(
        z_points=z,
        weights=kernel_weights(d, kernel_width),
        distances=d,
        kernel_width=float(kernel_width),
    )
