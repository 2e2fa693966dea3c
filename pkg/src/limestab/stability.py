"""Stability indices over an ensemble of repeated local surrogate fits.

Two complementary scores, both percentages:

* the variables index asks whether repeated runs keep choosing the same
  features, counting pairwise support-set agreement;
* the coefficients index asks whether, for each feature the runs share, the
  95% confidence intervals of its coefficient overlap pair by pair.

A feature that shows up in fewer than two models has no pair to compare, so
it is excluded from the coefficients index and reported separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterable, Sequence

from .core import LocalModel
from .wridge import ConfidenceInterval, conf_int


class CsiUndefinedError(RuntimeError):
    """No feature appeared in two or more models; no overlap rate exists."""


@dataclass(frozen=True)
class ModelEnsemble:
    """m repeated surrogate fits, each retaining exactly p features."""

    models: tuple[LocalModel, ...]
    p: int

    def __post_init__(self) -> None:
        models = tuple(self.models)
        if len(models) < 2:
            raise ValueError(f"need at least 2 models, got {len(models)}")
        for i, model in enumerate(models):
            if model.p_used != self.p:
                raise ValueError(
                    f"model {i} retains {model.p_used} features, expected {self.p}"
                )
        object.__setattr__(self, "models", models)

    @classmethod
    def from_models(cls, models: Sequence[LocalModel]) -> "ModelEnsemble":
        models = tuple(models)
        if not models:
            raise ValueError("empty ensemble")
        return cls(models=models, p=models[0].p_used)

    @property
    def m(self) -> int:
        return len(self.models)


@dataclass(frozen=True)
class IntervalSet:
    """All confidence intervals one feature received across the ensemble."""

    feature_index: int
    intervals: tuple[ConfidenceInterval, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "intervals", tuple(self.intervals))


def concordance(set_a: Iterable[int], set_b: Iterable[int]) -> int:
    """Number of features two supports share."""
    return len(frozenset(set_a) & frozenset(set_b))


def vsi(ensemble: ModelEnsemble) -> float:
    """Mean pairwise support agreement, as a percentage of p."""
    supports = [model.support for model in ensemble.models]
    total = 0.0
    for a, b in combinations(supports, 2):
        total += concordance(a, b) / ensemble.p
    return 100.0 * (total / comb(ensemble.m, 2))


def overlap(ci_a: ConfidenceInterval, ci_b: ConfidenceInterval) -> bool:
    """Closed-interval intersection test; touching endpoints count as overlap."""
    return max(ci_a.lower, ci_b.lower) <= min(ci_a.upper, ci_b.upper)


def partial_index(interval_set: IntervalSet) -> float:
    """Fraction of interval pairs that overlap, in [0, 1].

    Needs at least two intervals; callers exclude features seen fewer times.
    """
    intervals = interval_set.intervals
    if len(intervals) < 2:
        raise ValueError(
            f"feature {interval_set.feature_index} has {len(intervals)} interval(s); "
            "a pairwise rate needs at least 2"
        )
    hits = 0
    for a, b in combinations(intervals, 2):
        if overlap(a, b):
            hits += 1
    return hits / comb(len(intervals), 2)


def interval_sets(ensemble: ModelEnsemble) -> tuple[IntervalSet, ...]:
    """Per-feature interval collections, ascending by feature index.

    A model contributes an interval for a feature exactly when its support
    contains the feature; the fitted value may be zero and still counts,
    because the surrogate did retain the feature.
    """
    seen: set[int] = set()
    for model in ensemble.models:
        seen.update(model.support)
    sets = []
    for feature in sorted(seen):
        intervals = tuple(
            conf_int(model.coefficients[feature], model.coef_variances[feature])
            for model in ensemble.models
            if feature in model.coefficients
        )
        sets.append(IntervalSet(feature_index=feature, intervals=intervals))
    return tuple(sets)


def partial_indices(
    ensemble: ModelEnsemble,
) -> tuple[dict[int, float], tuple[int, ...]]:
    """Split features into scored (rate per feature) and excluded (seen once)."""
    scored: dict[int, float] = {}
    excluded: list[int] = []
    for iset in interval_sets(ensemble):
        if len(iset.intervals) < 2:
            excluded.append(iset.feature_index)
        else:
            scored[iset.feature_index] = partial_index(iset)
    return scored, tuple(excluded)


def csi(ensemble: ModelEnsemble) -> float:
    """Mean per-feature overlap rate, as a percentage.

    Raises CsiUndefinedError when every feature was seen at most once.
    """
    scored, _ = partial_indices(ensemble)
    if not scored:
        raise CsiUndefinedError(
            "every feature appears in at most one model; "
            "no confidence-interval pair exists to compare"
        )
    return 100.0 * (sum(scored.values()) / len(scored))
