"""Shared domain types, dataset ingestion, and validation.

Everything downstream (sampling, locality weighting, surrogate fitting,
stability scoring) works on the types defined here. All types are frozen
dataclasses whose array payloads are marked read-only, so instances can be
shared freely across threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np


class DataError(ValueError):
    """A dataset file or its contents violate the ingestion contract."""


class ConfigError(ValueError):
    """An ExplainerConfig is internally inconsistent or incompatible with a dataset."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """A fully numeric tabular dataset.

    Attributes:
        feature_names: P unique, non-empty column names, in file order.
        rows: float64 matrix of shape (n_train, P), all finite.
        target: optional response vector of length n_train. Only needed when a
            model is trained or evaluated on the data; explanation itself never
            reads it.
        target_name: name of the split-out target column, when present.
    """

    feature_names: tuple[str, ...]
    rows: np.ndarray
    target: np.ndarray | None = None
    target_name: str | None = None

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise DataError(f"rows must be a 2-D matrix, got ndim={rows.ndim}")
        n, p = rows.shape
        if p < 1:
            raise DataError("dataset needs at least one feature column")
        if n < 2:
            raise DataError(f"dataset needs at least 2 rows, got {n}")
        if len(self.feature_names) != p:
            raise DataError(
                f"{len(self.feature_names)} feature names for {p} columns"
            )
        if any(not name for name in self.feature_names):
            raise DataError("feature names must be non-empty")
        if len(set(self.feature_names)) != p:
            raise DataError("feature names must be unique")
        if not np.isfinite(rows).all():
            raise DataError("dataset contains non-finite values")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "rows", _readonly(rows))
        if self.target is not None:
            target = np.asarray(self.target, dtype=np.float64)
            if target.shape != (n,):
                raise DataError(
                    f"target length {target.shape} does not match {n} rows"
                )
            if not np.isfinite(target).all():
                raise DataError("target contains non-finite values")
            object.__setattr__(self, "target", _readonly(target))

    @property
    def num_features(self) -> int:
        return self.rows.shape[1]

    @property
    def num_rows(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature location and scale inferred from training data.

    Drives both perturbation sampling and standardization, so the surrogate
    always sees coordinates in units of training-data standard deviations.
    """

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self) -> None:
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        if means.ndim != 1 or stds.ndim != 1 or means.shape != stds.shape:
            raise ValueError("means and stds must be 1-D vectors of equal length")
        if not (np.isfinite(means).all() and np.isfinite(stds).all()):
            raise ValueError("feature stats must be finite")
        if (stds < 0).any():
            raise ValueError("standard deviations must be >= 0")
        object.__setattr__(self, "means", _readonly(means))
        object.__setattr__(self, "stds", _readonly(stds))

    @property
    def num_features(self) -> int:
        return self.means.shape[0]


@dataclass(frozen=True)
class ExplainerConfig:
    """All tunables of one explanation run.

    Invariants (enforced by :func:`validate_config` against a dataset):
    num_features <= P, num_samples > num_features, kernel_width > 0,
    ridge_penalty >= 0, repeats >= 2, master_seed a 64-bit unsigned int.
    """

    num_samples: int = 5000
    num_features: int = 7
    kernel_width: float = 1.0
    ridge_penalty: float = 1.0
    repeats: int = 10
    master_seed: int = 42


@dataclass(frozen=True)
class LocalModel:
    """One fitted local surrogate: a sparse linear model over selected features.

    Coefficients live on the standardized-feature scale. coef_variances holds
    the diagonal of the coefficient covariance matrix, keyed like coefficients.
    """

    coefficients: Mapping[int, float]
    intercept: float
    coef_variances: Mapping[int, float]
    sigma2_hat: float
    n_used: int
    p_used: int
    lambda_used: float

    def __post_init__(self) -> None:
        coeffs = dict(self.coefficients)
        variances = dict(self.coef_variances)
        if len(coeffs) != self.p_used:
            raise ValueError(
                f"expected {self.p_used} coefficients, got {len(coeffs)}"
            )
        if set(coeffs) != set(variances):
            raise ValueError("coefficient and variance key sets differ")
        if any(v < 0 for v in variances.values()):
            raise ValueError("coefficient variances must be >= 0")
        if self.sigma2_hat < 0:
            raise ValueError("sigma2_hat must be >= 0")
        object.__setattr__(self, "coefficients", MappingProxyType(coeffs))
        object.__setattr__(self, "coef_variances", MappingProxyType(variances))

    @property
    def support(self) -> frozenset[int]:
        """Indices of the features this surrogate uses."""
        return frozenset(self.coefficients)


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of repeated explanation runs plus the two stability indices.

    vsi and csi are percentages in [0, 100]. par maps each feature that
    appeared in at least two runs to its pairwise confidence-interval overlap
    rate in [0, 1]; features seen exactly once are listed in excluded_features
    and do not enter csi.
    """

    models: tuple[LocalModel, ...]
    vsi: float
    csi: float
    par: Mapping[int, float]
    excluded_features: tuple[int, ...]
    wall_time_seconds: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.vsi <= 100.0:
            raise ValueError(f"vsi out of range: {self.vsi}")
        if not 0.0 <= self.csi <= 100.0:
            raise ValueError(f"csi out of range: {self.csi}")
        par = dict(self.par)
        if any(not 0.0 <= v <= 1.0 for v in par.values()):
            raise ValueError("every par value must lie in [0, 1]")
        if par:
            expected = 100.0 * (sum(par.values()) / len(par))
            if abs(expected - self.csi) > 1e-9:
                raise ValueError(
                    f"csi {self.csi} is not the percent mean of par values ({expected})"
                )
        object.__setattr__(self, "par", MappingProxyType(par))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(
            self, "excluded_features", tuple(self.excluded_features)
        )


def _parse_cell(text: str, line_no: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"non-numeric cell at line {line_no}, column '{column}': {text!r}"
        ) from None
    if not math.isfinite(value):
        raise DataError(
            f"non-finite cell at line {line_no}, column '{column}': {text!r}"
        )
    return value


def load_dataset(path: str | Path, target_column: str | None = None) -> Dataset:
    """Load an RFC-4180-style CSV with a mandatory header into a Dataset.

    All body cells must parse as finite floats ('.' decimal separator).
    When target_column is given, that column is split out as the target and
    the remaining columns, order preserved, become the features.

    Raises DataError on a missing file, duplicate or empty header names, an
    empty body, ragged rows, or any non-numeric / non-finite cell (the error
    names the offending line and column).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty, header row required") from None
        header = [name.strip() for name in header]
        if any(not name for name in header):
            raise DataError(f"{path}: header contains an empty column name")
        if len(set(header)) != len(header):
            dupes = sorted({n for n in header if header.count(n) > 1})
            raise DataError(f"{path}: duplicate header names {dupes}")
        rows: list[list[float]] = []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(
                    f"{path}: line {line_no} has {len(record)} cells, expected {len(header)}"
                )
            rows.append(
                [
                    _parse_cell(cell, line_no, header[j])
                    for j, cell in enumerate(record)
                ]
            )
    if not rows:
        raise DataError(f"{path}: no data rows after the header")
    matrix = np.array(rows, dtype=np.float64)
    if target_column is None:
        return Dataset(feature_names=tuple(header), rows=matrix)
    if target_column not in header:
        raise DataError(f"{path}: target column '{target_column}' not in header")
    t_idx = header.index(target_column)
    feature_idx = [j for j in range(len(header)) if j != t_idx]
    names = tuple(header[j] for j in feature_idx)
    return Dataset(
        feature_names=names,
        rows=matrix[:, feature_idx],
        target=matrix[:, t_idx],
        target_name=target_column,
    )


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a Dataset back to CSV so that load_dataset round-trips bit-identically.

    Floats are serialized with repr, which is exact under re-parsing. The
    target, when present, is appended as the last column.
    """
    path = Path(path)
    header = list(dataset.feature_names)
    if dataset.target is not None:
        header.append(dataset.target_name or "target")
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.num_rows):
            record = [repr(float(v)) for v in dataset.rows[i]]
            if dataset.target is not None:
                record.append(repr(float(dataset.target[i])))
            writer.writerow(record)


def validate_config(config: ExplainerConfig, dataset: Dataset) -> ExplainerConfig:
    """Check a config against a dataset and return it unchanged.

    Pure and idempotent. Raises ConfigError on the first violated invariant.
    """
    return validate_config_for_features(config, dataset.num_features)


def validate_config_for_features(
    config: ExplainerConfig, num_features: int
) -> ExplainerConfig:
    """Same checks as validate_config, against a bare feature count."""
    P = num_features
    if not isinstance(config.num_samples, int) or config.num_samples < 1:
        raise ConfigError(f"num_samples must be a positive integer, got {config.num_samples}")
    if not isinstance(config.num_features, int) or config.num_features < 1:
        raise ConfigError(f"num_features must be a positive integer, got {config.num_features}")
    if config.num_features > P:
        raise ConfigError(
            f"num_features ({config.num_features}) exceeds dataset feature count ({P})"
        )
    if config.num_samples <= config.num_features:
        raise ConfigError(
            f"num_samples ({config.num_samples}) must exceed num_features "
            f"({config.num_features}); the residual-variance denominator n - p must be positive"
        )
    if not math.isfinite(config.kernel_width) or config.kernel_width <= 0:
        raise ConfigError(f"kernel_width must be > 0, got {config.kernel_width}")
    if not math.isfinite(config.ridge_penalty) or config.ridge_penalty < 0:
        raise ConfigError(f"ridge_penalty must be >= 0, got {config.ridge_penalty}")
    if not isinstance(config.repeats, int) or config.repeats < 2:
        raise ConfigError(f"repeats must be an integer >= 2, got {config.repeats}")
    if not isinstance(config.master_seed, int) or not 0 <= config.master_seed < 2**64:
        raise ConfigError(
            f"master_seed must be a 64-bit unsigned integer, got {config.master_seed}"
        )
    return config
