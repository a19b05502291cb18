"""Sobol sequence generator from the Joe-Kuo direction numbers.

Direction numbers are the first rows of the published new-joe-kuo-6
table (primitive polynomial degree s, coefficient bits a, initial
values m_1..m_s). Dimension 1 is the van der Corput sequence in base 2.
Only dimensions up to MAX_DIMENSION are shipped.
"""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedDimensionError

MAX_DIMENSION = 16

# (s, a, (m_1, ..., m_s)) for dimensions 2..16 of the new-joe-kuo-6 table.
_JOE_KUO = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
)

_MAXBIT = 30
_SCALE = float(1 << _MAXBIT)


def _direction_integers(dim: int) -> np.ndarray:
    """Direction integers v_1..v_MAXBIT for one dimension (1-based dim)."""
    v = np.zeros(_MAXBIT + 1, dtype=np.int64)
    if dim == 1:
        for k in range(1, _MAXBIT + 1):
            v[k] = 1 << (_MAXBIT - k)
        return v
    s, a, m_init = _JOE_KUO[dim - 2]
    m = list(m_init)
    for k in range(s, _MAXBIT):
        new = m[k - s] ^ (m[k - s] << s)
        for t in range(1, s):
            if (a >> (s - 1 - t)) & 1:
                new ^= m[k - t] << t
        m.append(new)
    for k in range(1, _MAXBIT + 1):
        v[k] = m[k - 1] << (_MAXBIT - k)
    return v


def sobol_points(count: int, dim: int, skip: int = 1) -> np.ndarray:
    """First `count` Sobol points in [0,1)^dim after dropping `skip` terms.

    Gray-code ordering; with the default skip the all-zero leading term
    of the raw sequence is omitted, so the first point is (0.5, ..., 0.5).
    """
    if dim < 1:
        raise UnsupportedDimensionError("dimension must be >= 1")
    if dim > MAX_DIMENSION:
        raise UnsupportedDimensionError(
            f"Sobol direction numbers shipped for d <= {MAX_DIMENSION}, got d = {dim}"
        )
    v = np.stack([_direction_integers(j + 1) for j in range(dim)])
    total = count + skip
    if total >= (1 << _MAXBIT):
        raise UnsupportedDimensionError(
            f"Sobol sequence supports fewer than 2^{_MAXBIT} points"
        )
    out = np.empty((total, dim), dtype=np.float64)
    state = np.zeros(dim, dtype=np.int64)
    out[0] = 0.0
    for n in range(1, total):
        c = 1
        val = n - 1
        while val & 1:
            val >>= 1
            c += 1
        state ^= v[:, c]
        out[n] = state
    out /= _SCALE
    return out[skip:]
