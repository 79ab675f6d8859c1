"""Proportional-fairness reward shared by all BSs."""

import math
from typing import Union

import numpy as np

from spectrum.exceptions import ContractViolation

ArrayLike = Union[float, np.ndarray]


def smooth_rate(xbar_prev: ArrayLike, rate: ArrayLike, tau: float) -> ArrayLike:
    """Exponential smoothing X[n] = (1 - 1/tau) X[n-1] + R[n] / tau."""
    return (1.0 - 1.0 / tau) * xbar_prev + np.asarray(rate) / tau


def per_ue_reward(rate: ArrayLike, xbar_prev: ArrayLike, tau: float) -> ArrayLike:
    """
    Per-UE PF reward log((1 - 1/tau)(1 + R / ((tau - 1) X[n-1]))).

    Equals log X[n] - log X[n-1] under smooth_rate, so summing it over an
    episode telescopes to the log of the final smoothed rates.

    Args:
        rate: R_j[n] in bits/s
        xbar_prev: X_j[n-1] in bits/s, > 0
        tau: Smoothing constant, > 1

    Returns:
        Reward (float for scalar input)
    """
    if tau <= 1.0:
        raise ContractViolation(f"tau must be > 1, got {tau}")
    x = np.asarray(xbar_prev, dtype=float)
    if np.any(x <= 0):
        raise ContractViolation("xbar_prev must be strictly positive")
    r = np.asarray(rate, dtype=float)
    value = math.log1p(-1.0 / tau) + np.log1p(r / ((tau - 1.0) * x))
    return float(value) if np.ndim(value) == 0 else value


def initial_reward(xbar0: np.ndarray) -> float:
    """Reward of the first slot: sum of log X_j[0]."""
    x = np.asarray(xbar0, dtype=float)
    if np.any(x <= 0):
        raise ContractViolation("Initial smoothed rates must be strictly positive")
    return float(np.sum(np.log(x)))
