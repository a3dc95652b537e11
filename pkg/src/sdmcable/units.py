"""Unit conversions and physical constants.

Every dB/dBm conversion in the package goes through this module; the rest of
the code works in linear SI units. Scalars come back as ``float``, array-likes
as ``numpy.ndarray``.
"""

from __future__ import annotations

import numpy as np

PLANCK_J_S = 6.62607015e-34
LIGHT_SPEED_M_S = 299792458.0


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def db_to_linear(value_db):
    return _out(np.power(10.0, np.asarray(value_db, dtype=float) / 10.0))


def linear_to_db(value):
    return _out(10.0 * np.log10(np.asarray(value, dtype=float)))


def dbm_to_watts(value_dbm):
    return _out(np.power(10.0, np.asarray(value_dbm, dtype=float) / 10.0) * 1e-3)


def watts_to_dbm(value_w):
    return _out(10.0 * np.log10(np.asarray(value_w, dtype=float) * 1e3))
