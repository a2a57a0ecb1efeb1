"""Closed-form cos^2 fringe fit for analyzer sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Cos2Fit", "fit_cos2"]


@dataclass(frozen=True)
class Cos2Fit:
    """``counts(theta) = amplitude * cos^2(theta - theta0) + offset``.

    ``contrast`` is (max - min) / (max + min) of the fitted curve. The sigmas
    propagate Poisson variances of the counts through the linear fit.
    """

    theta0: float
    amplitude: float
    offset: float
    contrast: float
    theta0_sigma: float
    contrast_sigma: float


def fit_cos2(thetas_deg, counts) -> Cos2Fit | None:
    """Least-squares fit on the first harmonic of 2*theta.

    Rewrites the model as ``c0 + c1 cos(2 theta) + c2 sin(2 theta)``, which
    is linear in the coefficients, so there is no iterative solver. Returns
    None when the angles do not determine all three coefficients.
    """
    th = np.radians(np.asarray(thetas_deg, dtype=float))
    y = np.asarray(counts, dtype=float)
    if th.size < 3:
        return None
    x = np.column_stack([np.ones_like(th), np.cos(2 * th), np.sin(2 * th)])
    xtx = x.T @ x
    if np.linalg.matrix_rank(xtx) < 3:
        return None
    xtx_inv = np.linalg.inv(xtx)
    c0, c1, c2 = xtx_inv @ (x.T @ y)
    # Poisson: var(y_i) = y_i
    cov = xtx_inv @ (x.T * y) @ x @ xtx_inv

    r = math.hypot(c1, c2)
    theta0 = (math.degrees(math.atan2(c2, c1)) / 2.0) % 180.0
    if c0 == 0.0 or r <= 1e-12 * abs(c0):
        # no fringe: the angle is undefined
        return Cos2Fit(theta0, 0.0, c0, 0.0, float("nan"), float("nan"))

    contrast = r / c0
    g_c = np.array([-r / c0**2, c1 / (r * c0), c2 / (r * c0)])
    # theta0 = atan2(c2, c1) / 2
    g_t = np.array([0.0, -c2 / r**2, c1 / r**2]) / 2.0
    contrast_sigma = math.sqrt(max(g_c @ cov @ g_c, 0.0))
    theta0_sigma = math.degrees(math.sqrt(max(g_t @ cov @ g_t, 0.0)))
    return Cos2Fit(theta0, 2 * r, c0 - r, contrast, theta0_sigma, contrast_sigma)
