"""Weighted Lasso screening: reduce P candidate features to exactly p.

Runs cyclic coordinate descent along a geometrically decreasing penalty
path, starting just below the smallest penalty that zeroes every
coefficient, and stops at the first path point whose active set reaches the
requested size. Selection sees the same locality weights as the final fit,
otherwise the chosen support would not be local.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRID_DECAY = 0.95
COORD_TOL = 1e-7
MAX_SWEEPS = 10_000
MAX_GRID_STEPS = 1_000


class SelectionError(RuntimeError):
    """Penalty path exhausted before the active set reached the requested size.

    Carries the final active set so callers can report how far selection got.
    """

    def __init__(self, message: str, active_set: tuple[int, ...] = ()) -> None:
        super().__init__(message)
        self.active_set = tuple(active_set)


@dataclass(frozen=True)
class FeatureSubset:
    """Exactly p selected feature indices plus the penalty path that found them.

    indices are ascending and duplicate-free. selection_path records
    (penalty, active-set size) per visited path point, for diagnostics.
    """

    indices: tuple[int, ...]
    selection_path: tuple[tuple[float, int], ...]

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate indices in subset: {idx}")
        if any(i < 0 for i in idx):
            raise ValueError(f"negative feature index in subset: {idx}")
        if tuple(sorted(idx)) != idx:
            raise ValueError("subset indices must be ascending")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(
            self,
            "selection_path",
            tuple((float(a), int(s)) for a, s in self.selection_path),
        )


def _soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _trim_to_p(active: np.ndarray, beta: np.ndarray, p: int) -> tuple[int, ...]:
    # A single path step can activate several features at once; keep the
    # strongest p, preferring larger |coefficient| then smaller index.
    ranked = sorted(active.tolist(), key=lambda j: (-abs(beta[j]), j))
    return tuple(sorted(ranked[:p]))


def select_features(
    z_points: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    p: int,
) -> FeatureSubset:
    """Pick exactly p features by weighted Lasso on standardized points.

    Minimizes sum_i w_i * (y_i - b0 - z_i . b)^2 + penalty * ||b||_1 with an
    unpenalized intercept (handled by weighted centering). The response is
    rescaled to unit weighted RMS before the path, so the selected subset is
    invariant to positive rescaling of y.

    Degenerate case: when y carries no signal at all (constant response, or
    zero correlation with every column), no penalty level can distinguish
    features; the lowest p indices are returned as a documented fallback so
    downstream fitting still produces a (zero-coefficient) model.

    Raises SelectionError when the path ends with fewer than p features
    active, which happens only for pathological designs (for example a
    column that is identically zero).
    """
    z = np.asarray(z_points, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"z_points must be 2-D, got ndim={z.ndim}")
    n, P = z.shape
    if y.shape != (n,) or w.shape != (n,):
        raise ValueError("y and weights must have one entry per row")
    if not (w > 0).all():
        raise ValueError("weights must all be positive")
    if not 1 <= p <= P:
        raise ValueError(f"p must be in [1, {P}], got {p}")
    if n <= p:
        raise ValueError(f"need more rows than selected features, got n={n}, p={p}")

    if p == P:
        return FeatureSubset(indices=tuple(range(P)), selection_path=((0.0, P),))

    w_sum = w.sum()
    z_means = (w @ z) / w_sum
    y_mean = (w @ y) / w_sum
    zc = z - z_means
    yc = y - y_mean
    y_scale = float(np.sqrt((w @ np.square(yc)) / w_sum))
    # Centering a constant response leaves rounding noise of order 1e-16
    # relative to its magnitude, so the no-signal cutoff must be relative too.
    if y_scale <= 1e-12 * max(1.0, abs(y_mean)):
        return FeatureSubset(indices=tuple(range(p)), selection_path=((0.0, p),))
    yn = yc / y_scale

    gram = zc.T @ (zc * w[:, None])
    corr = zc.T @ (w * yn)
    diag = np.diag(gram).copy()
    usable = diag > 0
    alpha_max = 2.0 * float(np.max(np.abs(corr[usable]))) if usable.any() else 0.0
    if alpha_max <= 1e-300:
        return FeatureSubset(indices=tuple(range(p)), selection_path=((0.0, p),))

    beta = np.zeros(P)
    gram_beta = np.zeros(P)
    path: list[tuple[float, int]] = []
    alpha = alpha_max
    for _ in range(MAX_GRID_STEPS):
        alpha *= GRID_DECAY
        half = alpha / 2.0
        for _ in range(MAX_SWEEPS):
            max_step = 0.0
            for j in range(P):
                if not usable[j]:
                    continue
                rho = corr[j] - gram_beta[j] + diag[j] * beta[j]
                updated = _soft_threshold(rho, half) / diag[j]
                step = updated - beta[j]
                if step != 0.0:
                    beta[j] = updated
                    gram_beta += gram[j] * step
                    max_step = max(max_step, abs(step))
            if max_step <= COORD_TOL:
                break
        active = np.flatnonzero(beta)
        path.append((alpha, int(active.size)))
        if active.size >= p:
            if active.size == p:
                chosen = tuple(int(i) for i in active)
            else:
                chosen = _trim_to_p(active, beta, p)
            return FeatureSubset(indices=chosen, selection_path=tuple(path))

    final = tuple(int(i) for i in np.flatnonzero(beta))
    raise SelectionError(
        f"feature selection: penalty path exhausted with {len(final)} of {p} "
        f"features active after {MAX_GRID_STEPS} steps",
        active_set=final,
    )
