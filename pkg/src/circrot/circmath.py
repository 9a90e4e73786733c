"""Angle arithmetic on the circle.

All public functions take and return degrees. Scalars and numpy arrays are
both accepted; the return type follows the input (a Python float for scalar
input, an ndarray otherwise).
"""

from __future__ import annotations

import numpy as np

FULL_TURN = 360.0
HALF_TURN = 180.0


class DegenerateInputError(ValueError):
    """Raised when an angle cannot be recovered from the given input."""


def _as_output(result, like):
    if np.ndim(like) == 0:
        return float(result)
    return result


def normalize(raw):
    """Map ``raw`` degrees onto the canonical range ``[0, 360)``.

    Uses floored modulo, so ``normalize(-1) == 359``. Non-finite input raises
    ``ValueError``.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("angle must be finite")
    out = np.mod(arr, FULL_TURN)
    # np.mod can return exactly 360.0 for tiny negative inputs
    out = np.where(out >= FULL_TURN, 0.0, out)
    return _as_output(out, raw)


def circular_distance(a, b):
    """Shortest angular separation between ``a`` and ``b``, in ``[0, 180]``.

    Inputs need not be canonical; they are reduced modulo 360 first so that
    the result only depends on the orientations.

    >>> circular_distance(359.0, 1.0)
    2.0
    """
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    diff = np.abs(normalize(a_arr) - normalize(b_arr))
    out = np.minimum(diff, FULL_TURN - diff)
    if a_arr.ndim == 0 and b_arr.ndim == 0:
        return float(out)
    return out


def signed_difference(a, b):
    """Signed shortest rotation taking ``b`` to ``a``, in ``[-180, 180)``."""
    d = np.mod(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64) + HALF_TURN, FULL_TURN) - HALF_TURN
    return _as_output(d, np.asarray(a) + np.asarray(b))


def angle_from_components(sin_part, cos_part):
    """Recover the angle whose sine and cosine are proportional to the inputs.

    Quadrant-correct (two-argument arctangent). A zero vector has no
    direction and raises ``DegenerateInputError``.
    """
    s = np.asarray(sin_part, dtype=np.float64)
    c = np.asarray(cos_part, dtype=np.float64)
    if np.any((s == 0.0) & (c == 0.0)):
        raise DegenerateInputError("zero vector has no direction")
    out = normalize(np.degrees(np.arctan2(s, c)))
    return _as_output(out, s + c)
