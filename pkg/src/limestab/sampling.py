"""Reproducible Gaussian perturbation sampling.

Perturbations are drawn feature by feature from independent normals whose
parameters come from the training data. Every batch records the seed that
produced it; the same seed always reproduces the same batch bit for bit
(PCG64 stream, ziggurat normal variates, both platform-stable in numpy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, FeatureStats


@dataclass(frozen=True)
class SampleBatch:
    """A perturbation matrix in original feature units, plus its seed."""

    points: np.ndarray
    seed_used: int

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2:
            raise ValueError(f"points must be 2-D, got ndim={points.ndim}")
        if not np.isfinite(points).all():
            raise ValueError("sample batch contains non-finite values")
        if not 0 <= self.seed_used < 2**64:
            raise ValueError(f"seed_used out of uint64 range: {self.seed_used}")
        points = np.ascontiguousarray(points)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def num_points(self) -> int:
        return self.points.shape[0]


def infer_feature_stats(dataset: Dataset) -> FeatureStats:
    """Per-column mean and sample (n-1) standard deviation of the training data."""
    means = dataset.rows.mean(axis=0)
    stds = dataset.rows.std(axis=0, ddof=1)
    return FeatureStats(means=means, stds=stds)


def sample_perturbations(stats: FeatureStats, n: int, seed: int) -> SampleBatch:
    """Draw n rows, entry (i, j) ~ Normal(means[j], stds[j]^2), independently.

    A zero standard deviation gives a constant column at the mean. The stream
    is a fresh PCG64 generator keyed by seed, so batches never share draws.
    """
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal((n, stats.num_features))
    points = stats.means + noise * stats.stds
    return SampleBatch(points=points, seed_used=int(seed))


def derive_repeat_seeds(master_seed: int, repeats: int) -> tuple[int, ...]:
    """Split one master seed into `repeats` independent per-repeat seeds.

    Uses numpy's SeedSequence spawning arithmetic, so the derived streams are
    statistically independent and the mapping (master_seed, i) -> seed_i is
    fixed for all time. Changing the order or count of repeats never silently
    reuses a stream.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    words = np.random.SeedSequence(master_seed).generate_state(repeats, dtype=np.uint64)
    return tuple(int(w) for w in words)
