# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
"""Symbol detectors for y = A x0 + z with x0 drawn from M-PAM.

 * bro_solve    box-relaxed least squares, then rounding
 * zf_solve     unconstrained least squares (zero forcing), then rounding
 * ml_solve     exhaustive maximum likelihood, small instances only
 * mfb_detect   matched filter for a single symbol with all others known
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from boxrelax.errors import ConvergenceError, DomainError, \
    RankDeficientError, SearchSpaceError, UnsupportedError
from boxrelax.theory import check_order
from boxrelax.util import maybe_print

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 50000
POWER_ITERATION_RTOL = 1e-10
POWER_ITERATION_MAX_ITER = 20000
ML_SEARCH_LIMIT = 2 ** 20
ML_CHUNK = 4096
RANK_RTOL = 1e-10


def constellation(M):
    M = check_order(M)
    return np.arange(-(M - 1), M, 2, dtype=np.int64)


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChannelInstance:
    matrix_a: np.ndarray
    observation_y: np.ndarray
    constellation_order: int = 2

    def __post_init__(self):
        a = _frozen(self.matrix_a)
        y = _frozen(self.observation_y)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise DomainError(f"channel matrix must be a non-empty m x n "
                              f"matrix, got shape {a.shape}")
        if y.shape != (a.shape[0],):
            raise DomainError(f"observation must have length {a.shape[0]}, "
                              f"got shape {y.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(y))):
            raise DomainError("channel instance has non-finite entries")
        object.__setattr__(self, 'matrix_a', a)
        object.__setattr__(self, 'observation_y', y)
        object.__setattr__(self, 'constellation_order',
                           check_order(self.constellation_order))

    @property
    def m(self):
        return self.matrix_a.shape[0]

    @property
    def n(self):
        return self.matrix_a.shape[1]

    @property
    def M(self):
        return self.constellation_order

    @property
    def bound(self):
        return float(self.M - 1)


@dataclass(frozen=True)
class DecodeOutput:
    relaxed_x: np.ndarray
    symbols_x: np.ndarray
    iterations: int
    kkt_residual: float
    converged: bool = True
    objective_trace: Optional[Tuple[float, ...]] = None


def objective(instance, x):
    r = instance.observation_y - instance.matrix_a @ x
    return 0.5 * float(r @ r)


def threshold_symbols(relaxed_x, M):
    """Round every coordinate to the nearest point of {+-1, ..., +-(M-1)}.

    Ties (x exactly midway) go to the point of smaller magnitude, so for BPSK
    sign(0) is +1."""
    M = check_order(M)
    x = np.asarray(relaxed_x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("cannot threshold non-finite values")
    bound = M - 1
    v = np.clip(x, -bound, bound)
    # Nearest odd integer, with even v mapped to v + 1
    c = 2.0 * np.floor(v / 2.0) + 1.0
    ties_above_zero = (v == c - 1.0) & (c > 1.0)
    c = np.where(ties_above_zero, c - 2.0, c)
    return np.clip(c, -bound, bound).astype(np.int64)


def lipschitz_constant(gram, rtol=POWER_ITERATION_RTOL,
                       max_iter=POWER_ITERATION_MAX_ITER):
    """Largest eigenvalue of the PSD matrix `gram` by power iteration."""
    n = gram.shape[0]
    v = np.linspace(1.0, 2.0, n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for i in range(max_iter):
        w = gram @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - estimate) <= rtol * norm:
            return norm
        estimate = norm
    maybe_print(f"power iteration did not settle in {max_iter} steps, "
                f"inflating estimate {estimate:.6g} by 1%")
    return 1.01 * estimate


def kkt_residual(grad, x, bound):
    """Worst violation of the box KKT conditions.

    Free coordinates need a zero gradient, coordinates at -bound a
    non-negative one and coordinates at +bound a non-positive one."""
    r = np.abs(grad)
    r = np.where(x <= -bound, np.maximum(0.0, -grad), r)
    r = np.where(x >= bound, np.maximum(0.0, grad), r)
    return float(r.max()) if r.size else 0.0


def bro_solve(instance, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
              record_objective=False):
    """min ||y - A x||_2 over the box [-(M-1), M-1]^n, then rounding.

    Accelerated projected gradient with step 1/L on (1/2)||y - A x||^2 and
    a monotone restart: whenever the momentum step would increase the
    objective, the momentum is dropped and a plain projected gradient step
    is taken from the current iterate instead. Stops once the norm of the
    gradient map falls to tol * (1 + ||A^T y||) / 2; the returned point is
    one more projected gradient step, whose KKT residual is then within
    tol * (1 + ||A^T y||)."""
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")
    a = instance.matrix_a
    bound = instance.bound
    gram = a.T @ a
    aty = a.T @ instance.observation_y
    lipschitz = lipschitz_constant(gram)
    if lipschitz == 0.0:
        raise DomainError("box relaxation requires a nonzero channel matrix")
    step = 1.0 / lipschitz
    scale = 1.0 + float(np.linalg.norm(aty))
    target = 0.5 * tol * scale

    def f(x):
        return 0.5 * float(x @ (gram @ x)) - float(aty @ x)

    def grad(x):
        return gram @ x - aty

    def project(x):
        return np.clip(x, -bound, bound)

    x = np.zeros(instance.n)
    fx = f(x)
    z = x
    t = 1.0
    trace = [fx] if record_objective else None
    converged = False
    iterations = 0
    gx = grad(x)
    while iterations < max_iter:
        iterations += 1
        x_new = project(z - step * grad(z))
        f_new = f(x_new)
        if f_new > fx:
            t = 1.0
            x_new = project(x - step * gx)
            f_new = f(x_new)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, fx, t = x_new, f_new, t_new
        if record_objective:
            trace.append(fx)
        gx = grad(x)
        gradient_map = lipschitz * (x - project(x - step * gx))
        if np.linalg.norm(gradient_map) <= target:
            converged = True
            break

    polished = project(x - step * gx)
    residual = kkt_residual(grad(polished), polished, bound)
    output = DecodeOutput(relaxed_x=polished,
                          symbols_x=threshold_symbols(polished, instance.M),
                          iterations=iterations,
                          kkt_residual=residual,
                          converged=converged,
                          objective_trace=tuple(trace)
                          if record_objective else None)
    if not converged:
        raise ConvergenceError(
            f"box relaxation did not converge in {max_iter} iterations "
            f"(kkt residual {residual:.3g}, target {tol * scale:.3g})",
            best=output)
    maybe_print(f"box relaxation converged in {iterations} iterations "
                f"(L={lipschitz:.6g}, kkt residual {residual:.3g})")
    return output


def zf_solve(instance):
    """Zero forcing: least squares through a Householder QR of A, then
    rounding. The relaxed solution is not clamped to the box."""
    a = instance.matrix_a
    m, n = a.shape
    if m < n:
        raise RankDeficientError(
            f"zero-forcing requires m >= n (got m={m}, n={n})")
    q, r = linalg.qr(a, mode='economic')
    diag = np.abs(np.diag(r))
    if diag.min() <= RANK_RTOL * np.linalg.norm(a):
        raise RankDeficientError("zero-forcing requires a full column rank "
                                 "channel matrix")
    x = linalg.solve_triangular(r, q.T @ instance.observation_y)
    normal_residual = a.T @ (a @ x - instance.observation_y)
    return DecodeOutput(relaxed_x=x,
                        symbols_x=threshold_symbols(x, instance.M),
                        iterations=0,
                        kkt_residual=float(np.abs(normal_residual).max()))


def ml_search_space(n, M):
    return check_order(M) ** n


def ml_solve(instance):
    """Exhaustive search of argmin ||y - A x|| over the constellation.

    Candidates are visited in lexicographic order of the symbol vector and
    the first minimizer wins, which fixes ties deterministically."""
    M = instance.M
    n = instance.n
    total = ml_search_space(n, M)
    if total > ML_SEARCH_LIMIT:
        raise SearchSpaceError(f"ML search space {M}^{n} exceeds "
                               f"{ML_SEARCH_LIMIT} candidates")
    a = instance.matrix_a
    y = instance.observation_y
    powers = M ** np.arange(n - 1, -1, -1, dtype=np.int64)
    best_index = 0
    best_value = math.inf
    for start in range(0, total, ML_CHUNK):
        idx = np.arange(start, min(start + ML_CHUNK, total), dtype=np.int64)
        candidates = 2 * ((idx[:, None] // powers) % M) - (M - 1)
        residuals = candidates @ a.T - y
        values = np.einsum('ij,ij->i', residuals, residuals)
        k = int(np.argmin(values))
        if values[k] < best_value:
            best_value = float(values[k])
            best_index = int(idx[k])
    return 2 * ((best_index // powers) % M) - (M - 1)


def mfb_detect(column_a, isolated_obs):
    """sign(a^T y~) for y~ = x a + z, with sign(0) = +1."""
    a = np.asarray(column_a, dtype=np.float64)
    y = np.asarray(isolated_obs, dtype=np.float64)
    if a.shape != y.shape:
        raise DomainError(f"column and observation shapes differ: "
                          f"{a.shape} vs {y.shape}")
    if not np.any(a):
        raise DomainError("matched filter requires a nonzero column")
    return 1 if float(a @ y) >= 0.0 else -1


def mfb_detect_all(instance, x0):
    """Matched filter decision for every symbol with all the others known.

    The isolated observation of symbol i is y - sum_{j != i} a_j x0_j, so its
    matched filter output is a_i^T (y - A x0) + ||a_i||^2 x0_i."""
    a = instance.matrix_a
    col_sq = np.einsum('ij,ij->j', a, a)
    if np.any(col_sq == 0.0):
        raise DomainError("matched filter requires nonzero columns")
    x0 = np.asarray(x0, dtype=np.float64)
    stats = a.T @ (instance.observation_y - a @ x0) + col_sq * x0
    estimate = stats / col_sq
    return DecodeOutput(relaxed_x=estimate,
                        symbols_x=threshold_symbols(estimate, instance.M),
                        iterations=0,
                        kkt_residual=0.0)


def decode(instance, decoder, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    if decoder == 'bro':
        return bro_solve(instance, tol=tol, max_iter=max_iter)
    if decoder == 'zf':
        return zf_solve(instance)
    if decoder == 'ml':
        symbols = ml_solve(instance)
        return DecodeOutput(relaxed_x=symbols.astype(np.float64),
                            symbols_x=symbols,
                            iterations=ml_search_space(instance.n,
                                                       instance.M),
                            kkt_residual=0.0)
    raise UnsupportedError(f"unknown decoder '{decoder}'")
