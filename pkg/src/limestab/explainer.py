"""End-to-end pipeline: one local explanation, and repeated-run stability.

explain_once performs a single pass (sample, query the black box,
standardize, weight by proximity, select p features, fit the weighted ridge
surrogate). stability_run repeats it m times with independently derived
seeds, each repeat drawing a fresh perturbation batch, and scores the
ensemble. Sharing one batch across repeats would make both indices trivially
100, so every repeat samples anew and all run-to-run disagreement is
attributable to sampling alone.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from .blackbox import Predictor, predict
from .core import (
    ExplainerConfig,
    FeatureStats,
    LocalModel,
    StabilityReport,
    validate_config_for_features,
)
from .feature_selection import select_features
from .locality import build_weighted_batch, standardize
from .sampling import derive_repeat_seeds, sample_perturbations
from .stability import ModelEnsemble, csi, partial_indices, vsi
from .wridge import weighted_ridge_inference


@dataclass(frozen=True)
class Explanation:
    """One fitted surrogate, unpacked for presentation.

    feature_contributions maps feature name to coefficient times the
    standardized query-point value, so the intercept plus the contributions
    reproduces the surrogate's prediction at the query point exactly.
    """

    local_model: LocalModel
    feature_contributions: Mapping[str, float]
    lime_prediction: float
    query_point: np.ndarray

    def __post_init__(self) -> None:
        contributions = dict(self.feature_contributions)
        total = self.local_model.intercept
        for value in contributions.values():
            total += value
        if abs(total - self.lime_prediction) > 1e-9:
            raise ValueError(
                f"lime_prediction {self.lime_prediction} is not intercept plus "
                f"contributions ({total})"
            )
        x = np.ascontiguousarray(self.query_point, dtype=np.float64)
        x.setflags(write=False)
        object.__setattr__(self, "feature_contributions", MappingProxyType(contributions))
        object.__setattr__(self, "query_point", x)


def _tagged(stage: str, exc: Exception) -> Exception:
    # Prefix the failing stage while preserving the exception type and any
    # attached attributes, so callers can still catch precisely.
    if exc.args and isinstance(exc.args[0], str) and exc.args[0].startswith(stage):
        return exc
    first = f"{stage}: {exc.args[0]}" if exc.args else stage
    exc.args = (first,) + tuple(exc.args[1:])
    return exc


def _resolve_names(
    feature_names: Sequence[str] | None, num_features: int
) -> tuple[str, ...]:
    if feature_names is None:
        return tuple(f"f{j}" for j in range(num_features))
    names = tuple(feature_names)
    if len(names) != num_features:
        raise ValueError(
            f"{len(names)} feature names for {num_features} features"
        )
    return names


def explain_once(
    predictor: Predictor,
    stats: FeatureStats,
    x: np.ndarray,
    config: ExplainerConfig,
    seed: int,
    feature_names: Sequence[str] | None = None,
    include_query_point: bool = False,
    unweighted_selection: bool = False,
) -> Explanation:
    """Run the full pipeline once; deterministic given the seed.

    include_query_point replaces the first drawn sample with x itself
    (off by default: injecting x biases the variance estimate).
    unweighted_selection drops locality weights in the selection stage only,
    for sensitivity studies.
    """
    P = stats.num_features
    validate_config_for_features(config, P)
    names = _resolve_names(feature_names, P)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (P,):
        raise ValueError(f"query point shape {x.shape} does not match P={P}")
    if not np.isfinite(x).all():
        raise ValueError("query point contains non-finite values")

    try:
        batch = sample_perturbations(stats, config.num_samples, seed)
        points = batch.points
        if include_query_point:
            points = points.copy()
            points[0] = x
    except Exception as exc:
        raise _tagged("sampling", exc)

    try:
        y = predict(predictor, points)
    except Exception as exc:
        raise _tagged("prediction", exc)

    try:
        weighted = build_weighted_batch(points, stats, x, config.kernel_width)
    except Exception as exc:
        raise _tagged("locality", exc)

    try:
        selection_weights = (
            np.ones_like(weighted.weights) if unweighted_selection else weighted.weights
        )
        subset = select_features(
            weighted.z_points, y, selection_weights, config.num_features
        )
    except Exception as exc:
        raise _tagged("feature selection", exc)

    try:
        design = weighted.z_points[:, subset.indices]
        fit = weighted_ridge_inference(design, y, weighted.weights, config.ridge_penalty)
    except Exception as exc:
        raise _tagged("surrogate fit", exc)

    assert fit.covariance is not None and fit.sigma2_hat is not None
    variances = np.diag(fit.covariance)
    model = LocalModel(
        coefficients={idx: float(b) for idx, b in zip(subset.indices, fit.beta_hat)},
        intercept=float(fit.intercept),
        coef_variances={
            idx: float(v) for idx, v in zip(subset.indices, variances)
        },
        sigma2_hat=float(fit.sigma2_hat),
        n_used=config.num_samples,
        p_used=config.num_features,
        lambda_used=float(config.ridge_penalty),
    )
    x_std = standardize(x.reshape(1, -1), stats)[0]
    contributions = {
        names[idx]: float(model.coefficients[idx] * x_std[idx])
        for idx in subset.indices
    }
    lime_prediction = model.intercept
    for value in contributions.values():
        lime_prediction += value
    return Explanation(
        local_model=model,
        feature_contributions=contributions,
        lime_prediction=lime_prediction,
        query_point=x,
    )


def stability_run(
    predictor: Predictor,
    stats: FeatureStats,
    x: np.ndarray,
    config: ExplainerConfig,
    feature_names: Sequence[str] | None = None,
    include_query_point: bool = False,
    unweighted_selection: bool = False,
    jobs: int = 1,
    predictor_factory: Callable[[], Predictor] | None = None,
    repeat_seeds: Sequence[int] | None = None,
) -> StabilityReport:
    """Repeat explain_once m times and score the ensemble.

    Per-repeat seeds are derived from config.master_seed, so the report is a
    pure function of (predictor, stats, x, config, flags). repeat_seeds
    overrides the derivation and exists for diagnostics only; forcing all
    seeds equal must produce both indices at exactly 100. predictor_factory,
    when given, builds a private predictor per repeat (external processes
    that should not share one channel); otherwise all repeats share
    `predictor`, whose access contract handles serialization.
    """
    P = stats.num_features
    validate_config_for_features(config, P)
    if repeat_seeds is None:
        seeds = derive_repeat_seeds(config.master_seed, config.repeats)
    else:
        seeds = tuple(int(s) for s in repeat_seeds)
        if len(seeds) != config.repeats:
            raise ValueError(
                f"{len(seeds)} repeat seeds for {config.repeats} repeats"
            )

    def one_repeat(seed: int) -> LocalModel:
        if predictor_factory is not None:
            with predictor_factory() as fresh:
                explanation = explain_once(
                    fresh, stats, x, config, seed,
                    feature_names=feature_names,
                    include_query_point=include_query_point,
                    unweighted_selection=unweighted_selection,
                )
        else:
            explanation = explain_once(
                predictor, stats, x, config, seed,
                feature_names=feature_names,
                include_query_point=include_query_point,
                unweighted_selection=unweighted_selection,
            )
        return explanation.local_model

    started = time.perf_counter()
    models: list[LocalModel] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(one_repeat, seed) for seed in seeds]
            for i, future in enumerate(futures):
                try:
                    models.append(future.result())
                except Exception as exc:
                    raise _tagged(f"repeat {i}", exc)
    else:
        for i, seed in enumerate(seeds):
            try:
                models.append(one_repeat(seed))
            except Exception as exc:
                raise _tagged(f"repeat {i}", exc)

    ensemble = ModelEnsemble.from_models(models)
    vsi_value = vsi(ensemble)
    par, excluded = partial_indices(ensemble)
    csi_value = csi(ensemble)
    wall = time.perf_counter() - started
    return StabilityReport(
        models=tuple(models),
        vsi=vsi_value,
        csi=csi_value,
        par=par,
        excluded_features=excluded,
        wall_time_seconds=wall,
    )
