"""Genie modulation: pick the scheme with the best expected bits per symbol."""

import numpy as np

from spectrum.modem.constellation import MOD_ORDERS, MOD_SCHEMES, ModScheme
from spectrum.modem.ser import ser_analytic


def modulation_scores(sinr) -> np.ndarray:
    """(1 - SER) log2 M of every scheme; shape (..., 7)."""
    s = np.asarray(sinr, dtype=float)
    return np.stack([(1.0 - ser_analytic(scheme, s)) * scheme.bits for scheme in MOD_SCHEMES], axis=-1)


def genie_orders(sinr) -> np.ndarray:
    """Vectorized genie choice; ties go to the lower order."""
    # argmax returns the first maximum and schemes are sorted by order
    return np.asarray(MOD_ORDERS)[np.argmax(modulation_scores(sinr), axis=-1)]


def genie_modulation(sinr: float) -> ModScheme:
    """
    Scheme maximizing (1 - SER(M, sinr)) log2 M for a known SINR.

    Squaring the score would not change the argmax, so the plain score is used.

    Args:
        sinr: Realized linear SINR, >= 0

    Returns:
        ModScheme
    """
    if sinr < 0:
        raise ValueError("sinr must be non-negative")
    scores = modulation_scores(float(sinr))
    return MOD_SCHEMES[int(np.argmax(scores))]
