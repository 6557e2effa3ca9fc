"""Standard normal distribution helpers.

Thin wrappers over ``scipy.special``: ``ndtr`` is evaluated through the
complementary error function, so the lower tail keeps full relative accuracy.
"""

import numpy as np
from scipy import special

from .exceptions import InvalidParameterError


def normal_cdf(x):
    out = special.ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def normal_sf(x):
    """Upper tail ``1 - Phi(x)`` without cancellation."""
    out = special.ndtr(np.negative(x))
    return float(out) if np.ndim(out) == 0 else out


def normal_pdf(x):
    out = np.exp(-0.5 * np.square(x)) / np.sqrt(2 * np.pi)
    return float(out) if np.ndim(out) == 0 else out


def normal_quantile(q):
    q_arr = np.asarray(q, dtype=float)
    if np.any((q_arr <= 0) | (q_arr >= 1)) or np.any(np.isnan(q_arr)):
        raise InvalidParameterError("normal_quantile needs q strictly inside (0, 1)")
    out = special.ndtri(q_arr)
    return float(out) if np.ndim(out) == 0 else out


#: Phi^{-1}(0.75); the MAD-to-standard-deviation conversion constant.
PHI_INV_075 = float(special.ndtri(0.75))
