# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
"""Standard normal special functions.

Everything here is float64. The Gaussian tail goes through the Cephes
complementary error function shipped with scipy (max relative error around
1e-15 on the range we use), never through 1 - CDF, so the deep tail that
high-SNR predictions live in keeps its relative accuracy.
"""
import math

import numpy as np
from scipy import special

from boxrelax.errors import DomainError

# A probability is a float in [0, 1]; the alias documents intent
Probability = float

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Smallest positive double. The true tail drops below what float64 can hold
# around x = 38.5; it is floored here so Q stays strictly positive.
TAIL_FLOOR = np.nextafter(0.0, 1.0)


def _check_finite(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} requires a finite argument, got {x!r}")
    return arr


def _unwrap(arr, x):
    if np.ndim(x) == 0:
        return float(arr)
    return arr


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x).

    Accepts a scalar (returns float) or an array (returns ndarray)."""
    arr = _check_finite(x, "q_function")
    res = np.maximum(0.5 * special.erfc(arr / SQRT2), TAIL_FLOOR)
    return _unwrap(res, x)


def normal_pdf(x):
    arr = _check_finite(x, "normal_pdf")
    return _unwrap(INV_SQRT_2PI * np.exp(-0.5 * arr * arr), x)

