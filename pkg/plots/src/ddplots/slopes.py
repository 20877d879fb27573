"""Log-log slope fitting shared by the figure kinds."""

from __future__ import annotations

import numpy as np

ZERO_FLOOR = 1e-14


def fit_loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of log|y| against log(x).

    Returns (slope, rms residual in log space); (nan, nan) when any |y|
    sits at or below the zero floor.
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if x.size < 2 or np.any(y <= ZERO_FLOOR):
        return float("nan"), float("nan")
    lx, ly = np.log(x), np.log(y)
    coeffs = np.polyfit(lx, ly, 1)
    resid = ly - np.polyval(coeffs, lx)
    return float(coeffs[0]), float(np.sqrt(np.mean(resid ** 2)))
