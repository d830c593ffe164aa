"""Goodness-of-fit scoring for hydraulic model calibration: Nash-Sutcliffe
efficiency and R-squared, with the acceptance threshold of 0.5 on both."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .ingest import FlowPair

ACCEPTANCE_THRESHOLD = 0.5


@dataclass(frozen=True)
class CalibrationScore:
    catchment_id: str
    nse: float
    r2: float
    accepted: bool            # both metrics strictly above 0.5
    negative_slope: bool = False  # anticorrelated fit masked by squaring


def nse(pair: FlowPair) -> float:
    """Nash-Sutcliffe efficiency: one minus residual variance over observed
    variance. Equals 1 only for a perfect fit and is unbounded below."""
    obs, sim = pair.observed, pair.simulated
    residual = float(np.sum((obs - sim) ** 2))
    spread = float(np.sum((obs - obs.mean()) ** 2))
    if spread == 0:
        raise DataError("constant observed series: NSE undefined")
    return 1.0 - residual / spread


def r_squared(pair: FlowPair, method: str = "pearson") -> float:
    """R-squared between observed and simulated flows.

    The default is the squared Pearson correlation, which is symmetric and
    invariant under affine rescaling of either series. method="identity"
    instead measures agreement with the 1:1 line (the NSE formula), which
    can go negative.
    """
    obs, sim = pair.observed, pair.simulated
    if np.ptp(sim) == 0:
        raise DataError("constant simulated series: R^2 undefined")
    if method == "identity":
        return nse(pair)
    if method != "pearson":
        raise DataError(f"unknown R^2 method {method!r}")
    do = obs - obs.mean()
    ds = sim - sim.mean()
    r = float(np.sum(do * ds) / np.sqrt(np.sum(do ** 2) * np.sum(ds ** 2)))
    return min(r * r, 1.0)


def evaluate(pair: FlowPair, r2_method: str = "pearson") -> CalibrationScore:
    """Score one catchment. The calibration is accepted when NSE and R^2
    are both strictly above 0.5; a negative correlation slope is flagged
    because squaring would otherwise hide it."""
    value_nse = nse(pair)
    value_r2 = r_squared(pair, method=r2_method)
    do = pair.observed - pair.observed.mean()
    ds = pair.simulated - pair.simulated.mean()
    slope_negative = float(np.sum(do * ds)) < 0
    return CalibrationScore(
        catchment_id=pair.catchment_id,
        nse=value_nse,
        r2=value_r2,
        accepted=bool(value_nse > ACCEPTANCE_THRESHOLD and value_r2 > ACCEPTANCE_THRESHOLD),
        negative_slope=slope_negative)
