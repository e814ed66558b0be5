# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
"""Independent oracles the testsets compare the library against, plus a
helper that runs the command line in-process."""
import contextlib
import csv
import io
import itertools
import math

import numpy as np
from scipy import integrate
from scipy.optimize import lsq_linear
from scipy.special import erfc


def s_term_by_quadrature(alpha, ell):
    """alpha * E[(h - ell/alpha)_+^2], h ~ N(0, 1), integrated numerically."""
    t = ell / alpha

    def integrand(h):
        return (h - t) ** 2 * math.exp(-0.5 * h * h) / math.sqrt(2 * math.pi)

    value, _ = integrate.quad(integrand, t, math.inf,
                              epsabs=1e-14, epsrel=1e-13, limit=200)
    return alpha * value


def central_difference(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def f_bpsk_vectorized(tau, delta, snr):
    tau = np.asarray(tau, dtype=np.float64)
    t = 2.0 / tau
    q = 0.5 * erfc(t / math.sqrt(2.0))
    s = (tau + 4.0 / tau) * q \
        - 2.0 * np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    return tau * (delta - 0.5) + 1.0 / (snr * tau) + s


def grid_argmin(f, lo, hi, step):
    """Brute-force minimizer of a vectorized f over lo, lo + step, ..., hi."""
    grid = np.arange(lo, hi + step, step)
    values = f(grid)
    return float(grid[int(np.argmin(values))])


def box_objective(a, y, x):
    r = y - a @ x
    return 0.5 * float(r @ r)


def active_set_oracle(a, y, bound):
    """Exact minimum of (1/2)||y - A x||^2 over the box [-bound, bound]^n.

    Every coordinate is either pinned at -bound, pinned at +bound or free;
    for each of the 3^n patterns the free coordinates are solved by least
    squares and the point is kept when it lies in the box. The optimum is
    feasible for its own pattern, so the smallest feasible objective is the
    minimum. Exponential, only for n up to about 8."""
    m, n = a.shape
    best = math.inf
    best_x = None
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        pattern = np.array(pattern)
        free = pattern == 0
        x = pattern * float(bound)
        if free.any():
            rhs = y - a[:, ~free] @ x[~free]
            sol, *_ = np.linalg.lstsq(a[:, free], rhs, rcond=None)
            if np.any(np.abs(sol) > bound * (1 + 1e-12)):
                continue
            x[free] = sol
        value = box_objective(a, y, x)
        if value < best:
            best, best_x = value, x
    return best, best_x


def bvls_oracle(a, y, bound):
    """Bounded-variable least squares (an active set method that terminates
    at the exact optimum up to rounding)."""
    res = lsq_linear(a, y, bounds=(-bound, bound), method='bvls', tol=1e-14,
                     max_iter=10 * a.shape[1] + 100)
    return box_objective(a, y, res.x), res.x


def normal_equations_zf(a, y):
    return np.linalg.solve(a.T @ a, a.T @ y)


def run_cli(args):
    """Run the boxrelax command line in-process; (exit code, stdout, stderr).
    """
    from boxrelax import cli, util
    saved = dict(util.config)
    out = io.StringIO()
    err = io.StringIO()
    try:
        util.config['colors'] = False
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            try:
                code = cli.main([str(a) for a in args])
            except SystemExit as e:
                # argparse rejects bad flags and handles --version this way
                code = e.code
    finally:
        util.config.clear()
        util.config.update(saved)
    return code, out.getvalue(), err.getvalue()


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text, newline='')))


def csv_float(cell):
    return None if cell == '' else float(cell)
