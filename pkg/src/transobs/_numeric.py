"""Array coercion that keeps extended precision when the caller asks for it."""

import numpy as np

EXTENDED = np.longdouble


def real(x) -> np.ndarray:
    """float64 array, or long double if ``x`` already is one."""
    a = np.asarray(x)
    return a if a.dtype == EXTENDED else a.astype(float, copy=False)
