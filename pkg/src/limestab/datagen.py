"""Synthetic credit-like dataset generator and access to the bundled copy.

Twenty numeric account features drawn from independent normals, plus a
binary default flag whose log-odds are a sparse linear function of the
standardized drivers. Values are rounded to 4 decimals so the CSV is
compact; the bundled file ships inside the package and is regenerated
bit-identically by `limestab generate-data` with the default seed.
"""

from __future__ import annotations

from importlib.resources import as_file, files
from pathlib import Path

import numpy as np
from scipy.special import expit

from .core import Dataset

DEFAULT_ROWS = 2000
DEFAULT_SEED = 1105
TARGET_NAME = "default_flag"

# name, mean, standard deviation (original units)
FEATURES: tuple[tuple[str, float, float], ...] = (
    ("age", 43.0, 11.5),
    ("annual_income", 52000.0, 18000.0),
    ("debt_to_income", 0.32, 0.11),
    ("credit_utilization", 0.45, 0.21),
    ("num_open_accounts", 6.2, 2.8),
    ("num_late_payments", 1.1, 1.4),
    ("employment_years", 8.5, 6.0),
    ("loan_amount", 14000.0, 7500.0),
    ("loan_term_months", 48.0, 16.0),
    ("interest_rate", 0.11, 0.04),
    ("monthly_expenses", 2400.0, 850.0),
    ("savings_balance", 7600.0, 5200.0),
    ("checking_balance", 2100.0, 1600.0),
    ("num_credit_inquiries", 1.8, 1.6),
    ("oldest_account_years", 15.0, 7.5),
    ("num_mortgages", 0.6, 0.7),
    ("residual_income", 1300.0, 700.0),
    ("card_balance", 3200.0, 2400.0),
    ("overdraft_count", 0.9, 1.2),
    ("region_risk_score", 0.5, 0.18),
)

# log-odds weight per standardized feature; everything absent is irrelevant
TRUE_EFFECTS: dict[str, float] = {
    "num_late_payments": 1.1,
    "debt_to_income": 0.9,
    "credit_utilization": 0.8,
    "savings_balance": -0.7,
    "interest_rate": 0.6,
    "employment_years": -0.6,
    "num_credit_inquiries": 0.5,
}
LOGIT_SHIFT = -1.6
LATENT_NOISE_STD = 0.35


def generate(num_rows: int = DEFAULT_ROWS, seed: int = DEFAULT_SEED) -> Dataset:
    """Draw the synthetic dataset; deterministic for a given seed."""
    if num_rows < 2:
        raise ValueError(f"num_rows must be >= 2, got {num_rows}")
    rng = np.random.Generator(np.random.PCG64(seed))
    names = tuple(name for name, _, _ in FEATURES)
    means = np.array([mu for _, mu, _ in FEATURES])
    stds = np.array([sd for _, _, sd in FEATURES])
    standardized = rng.standard_normal((num_rows, len(FEATURES)))
    rows = np.round(means + standardized * stds, 4)
    beta = np.array([TRUE_EFFECTS.get(name, 0.0) for name in names])
    logits = (
        standardized @ beta
        + LOGIT_SHIFT
        + rng.normal(0.0, LATENT_NOISE_STD, size=num_rows)
    )
    target = rng.binomial(1, expit(logits)).astype(np.float64)
    return Dataset(
        feature_names=names, rows=rows, target=target, target_name=TARGET_NAME
    )


def bundled_path() -> Path:
    """Filesystem path of the packaged CSV copy."""
    resource = files("limestab").joinpath("data/synthetic_credit.csv")
    with as_file(resource) as path:
        return Path(path)


def load_bundled() -> Dataset:
    """The packaged dataset with the default flag split out as the target."""
    from .core import load_dataset

    return load_dataset(bundled_path(), target_column=TARGET_NAME)
