# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
"""Monte Carlo campaigns over random channel instances.

Reproducibility contract: trial i of a campaign draws everything from its
own generator, PCG64 seeded with hash64(master_seed, i), where hash64 is the
first 8 bytes (little endian) of BLAKE2b over both values packed as unsigned
64-bit little-endian integers. Within a trial the draws happen in a fixed
order: channel matrix (row major), symbols, noise. Gaussians come from the
inverse CDF applied to 53-bit uniforms, u = (k + 1/2) / 2^53. A campaign is
therefore a pure function of its configuration, no matter how many worker
processes run it or in which order the trials finish.
"""
import hashlib
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np
from scipy import special

from boxrelax.decoders import ChannelInstance, decode, \
    mfb_detect_all, constellation, DEFAULT_TOL, DEFAULT_MAX_ITER
from boxrelax.errors import CampaignError, \
    ConvergenceError, DomainError, UnsupportedError
from boxrelax.theory import check_order, snr_from_sigma, \
    sigma_sq_from_snr, snr_db_to_linear
from boxrelax.util import maybe_print

SIGNAL_MODES = ('all_ones', 'uniform_random')
DECODERS = ('bro', 'zf', 'ml', 'mfb')
MAX_FAILURE_FRACTION = 0.01
UINT64_MASK = (1 << 64) - 1
UNIFORM_BITS = 53


def substream_seed(master_seed, trial_index):
    packed = struct.pack('<QQ', master_seed & UINT64_MASK,
                         trial_index & UINT64_MASK)
    digest = hashlib.blake2b(packed, digest_size=8).digest()
    return int.from_bytes(digest, 'little')


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def trial_rng(master_seed, trial_index):
    return make_rng(substream_seed(master_seed, trial_index))


def gaussian(rng, shape):
    k = rng.integers(0, 1 << UNIFORM_BITS, size=shape, dtype=np.int64)
    return special.ndtri((k + 0.5) / float(1 << UNIFORM_BITS))


def receive_antennas(n, delta):
    # round half up, so m does not depend on banker's rounding
    return max(1, int(math.floor(delta * n + 0.5)))


def sample_channel(n, delta, rng):
    """m x n matrix with iid N(0, 1/n) entries, m = round(delta n)."""
    if n < 1 or not delta > 0:
        raise DomainError(f"channel needs n >= 1 and delta > 0 "
                          f"(got n={n}, delta={delta})")
    m = receive_antennas(n, delta)
    return gaussian(rng, (m, n)) / math.sqrt(n)


def sample_noise(m, sigma_sq, rng):
    if sigma_sq < 0:
        raise DomainError(f"sigma_sq must be non-negative, got {sigma_sq}")
    return math.sqrt(sigma_sq) * gaussian(rng, (m,))


def sample_symbols(n, M, mode, rng):
    M = check_order(M)
    if mode == 'all_ones':
        if M != 2:
            raise DomainError("signal mode all_ones is only valid for M=2")
        return np.ones(n, dtype=np.int64)
    if mode == 'uniform_random':
        return constellation(M)[rng.integers(0, M, size=n)]
    raise DomainError(f"unknown signal mode '{mode}', expected one of "
                      f"{', '.join(SIGNAL_MODES)}")


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    delta: float
    sigma_sq: float
    M: int = 2
    trials: int = 1
    master_seed: int = 0
    signal_mode: str = 'uniform_random'
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    eps_atom_scale: float = 1e-6

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise DomainError(f"delta must be positive, got {self.delta}")
        # sigma_sq = 0 is the noiseless channel; the theory needs > 0
        if not (math.isfinite(self.sigma_sq) and self.sigma_sq >= 0):
            raise DomainError(f"sigma_sq must be >= 0, got {self.sigma_sq}")
        check_order(self.M)
        if self.signal_mode not in SIGNAL_MODES:
            raise DomainError(f"unknown signal mode '{self.signal_mode}'")
        if self.signal_mode == 'all_ones' and self.M != 2:
            raise DomainError("signal mode all_ones is only valid for M=2")

    @classmethod
    def from_snr_db(cls, n, delta, snr_db, M=2, **kwargs):
        sigma_sq = sigma_sq_from_snr(snr_db_to_linear(snr_db), M)
        return cls(n=n, delta=delta, sigma_sq=sigma_sq, M=M, **kwargs)

    @property
    def m(self):
        return receive_antennas(self.n, self.delta)

    @property
    def delta_effective(self):
        return self.m / self.n

    @property
    def snr(self):
        return math.inf if self.sigma_sq == 0 else \
            snr_from_sigma(self.sigma_sq, self.M)

    @property
    def eps_atom(self):
        return self.eps_atom_scale * (self.M - 1)


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    ser: float
    symbol_errors: int
    error_vector: np.ndarray
    iterations: int
    kkt_residual: float

    def joint_error_freq(self, k):
        """n^-k times the number of k-tuples of erroneous coordinates.

        The joint indicator over a tuple factorizes, so the sum over all n^k
        tuples is just (error count)^k."""
        return self.ser ** k


@dataclass(frozen=True)
class TrialFailure:
    trial_index: int
    message: str


class CampaignResult(NamedTuple):
    mean_ser: float
    std_error: float
    per_trial: List[TrialResult]
    failures: List[TrialFailure]


def run_trial(config, trial_index, decoder='bro'):
    """One draw of (A, x0, z), y = A x0 + z, decoded and scored."""
    rng = trial_rng(config.master_seed, trial_index)
    a = sample_channel(config.n, config.delta, rng)
    x0 = sample_symbols(config.n, config.M, config.signal_mode, rng)
    z = sample_noise(a.shape[0], config.sigma_sq, rng)
    instance = ChannelInstance(a, a @ x0 + z, config.M)
    if decoder == 'mfb':
        output = mfb_detect_all(instance, x0)
    else:
        try:
            output = decode(instance, decoder, tol=config.tol,
                            max_iter=config.max_iter)
        except ConvergenceError as e:
            raise e.with_trial(trial_index)
    errors = int(np.count_nonzero(output.symbols_x != x0))
    return TrialResult(trial_index=trial_index,
                       ser=errors / config.n,
                       symbol_errors=errors,
                       error_vector=output.relaxed_x - x0,
                       iterations=output.iterations,
                       kkt_residual=output.kkt_residual)


def _guarded_trial(args):
    config, trial_index, decoder = args
    try:
        return run_trial(config, trial_index, decoder)
    except ConvergenceError as e:
        return TrialFailure(trial_index, str(e))


def run_trials(config, decoder='bro', workers=1):
    """Every trial of the campaign, ordered by trial index."""
    if decoder not in DECODERS:
        raise UnsupportedError(f"unknown decoder '{decoder}', expected one "
                               f"of {', '.join(DECODERS)}")
    jobs = [(config, i, decoder) for i in range(config.trials)]
    if workers is None or workers <= 1 or config.trials == 1:
        outcomes = [_guarded_trial(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_guarded_trial, jobs,
                                     chunksize=max(1, config.trials //
                                                   (4 * workers))))
    results = [o for o in outcomes if isinstance(o, TrialResult)]
    failures = [o for o in outcomes if isinstance(o, TrialFailure)]
    for f in failures:
        maybe_print(f"trial {f.trial_index} failed: {f.message}")
    if len(failures) > MAX_FAILURE_FRACTION * config.trials:
        raise CampaignError(f"{len(failures)} of {config.trials} trials "
                            f"failed to converge", failures)
    return results, failures


def mean_and_std_error(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return math.nan, math.nan
    mean = float(values.mean())
    if values.size == 1:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def monte_carlo(config, decoder='bro', workers=1):
    """Mean and standard error of the per-trial SER (an estimate of the
    symbol error probability)."""
    results, failures = run_trials(config, decoder, workers)
    mean, std_error = mean_and_std_error([r.ser for r in results])
    maybe_print(f"{decoder}: n={config.n} m={config.m} "
                f"sigma^2={config.sigma_sq:.6g} trials={config.trials} "
                f"-> SER {mean:.6g} +- {std_error:.3g}")
    return CampaignResult(mean, std_error, results, failures)


def _require_bpsk_all_ones(config, what):
    if config.M != 2 or config.signal_mode != 'all_ones':
        raise UnsupportedError(f"{what} requires M=2 and signal mode "
                               f"all_ones")


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Pooled empirical law of the entries of x_hat - x0 over a campaign.

    Entries within eps of 0 or -2 count towards the atoms and are snapped
    onto them in `samples`; the rest is histogrammed on [-2, 0]."""
    atom_zero_freq: float
    atom_minus_two_freq: float
    bin_edges: np.ndarray
    bin_mass: np.ndarray
    samples: np.ndarray = field(repr=False)

    @property
    def interior_histogram(self):
        """(bin edges, probability mass per bin) over [-2, 0]."""
        return self.bin_edges, self.bin_mass

    def cdf(self, w):
        """Empirical P(W <= w) over every pooled entry."""
        counts = np.searchsorted(self.samples, w, side='right')
        res = counts / self.samples.size
        return float(res) if np.ndim(res) == 0 else res


def pool_error_distribution(error_vectors, eps_atom, bins=50):
    pooled = np.concatenate([np.asarray(v, dtype=np.float64)
                             for v in error_vectors])
    total = pooled.size
    at_zero = np.abs(pooled) < eps_atom
    at_minus_two = np.abs(pooled + 2.0) < eps_atom
    interior = pooled[~(at_zero | at_minus_two)]
    edges = np.linspace(-2.0, 0.0, bins + 1)
    counts, _ = np.histogram(interior, bins=edges)
    snapped = np.where(at_zero, 0.0, np.where(at_minus_two, -2.0, pooled))
    return EmpiricalDistribution(
        atom_zero_freq=int(at_zero.sum()) / total,
        atom_minus_two_freq=int(at_minus_two.sum()) / total,
        bin_edges=edges,
        bin_mass=counts / total,
        samples=np.sort(snapped))


def empirical_error_distribution(config, bins=50, workers=1):
    _require_bpsk_all_ones(config, "the error vector distribution")
    results, _ = run_trials(config, 'bro', workers)
    return pool_error_distribution([r.error_vector for r in results],
                                   config.eps_atom, bins)


def cdf_sup_distance(empirical, limiting, grid_points=2001):
    """Kolmogorov distance between the pooled empirical law and the
    limiting one, over a grid of [-2, 0] plus both sides of every jump of
    the empirical CDF."""
    grid = np.linspace(-2.0, 0.0, grid_points)
    s = empirical.samples
    interior = s[(s > -2.0) & (s < 0.0)]
    right = np.concatenate([grid, interior])
    distance = float(np.max(np.abs(empirical.cdf(right)
                                   - limiting.cdf(right))))
    if interior.size:
        left = np.searchsorted(s, interior, side='left') / s.size
        distance = max(distance, float(np.max(np.abs(
            left - limiting.cdf(interior)))))
    return distance


def empirical_expected_value(config, psi, workers=1):
    """Trial-averaged (1/n) sum_i psi(w_i): the finite-n counterpart of
    E[psi(W)]."""
    results, _ = run_trials(config, 'bro', workers)
    return mean_and_std_error([float(np.mean(psi(r.error_vector)))
                               for r in results])


class IndependenceResult(NamedTuple):
    joint_freq: float
    product_of_marginals: float
    std_error: float
    trials: int


def independence_statistic(config, order_k, workers=1):
    """Joint error frequency over k-tuples of coordinates against the k-th
    power of the marginal error rate, both averaged over trials."""
    _require_bpsk_all_ones(config, "the independence statistic")
    if order_k not in (2, 3):
        raise UnsupportedError(f"order k must be 2 or 3, got {order_k}")
    results, _ = run_trials(config, 'bro', workers)
    joint, std_error = mean_and_std_error(
        [r.joint_error_freq(order_k) for r in results])
    marginal, _ = mean_and_std_error([r.ser for r in results])
    return IndependenceResult(joint, marginal ** order_k, std_error,
                              len(results))


def isolated_mfb_error_rate(m, n, sigma_sq, trials, seed=0, chunk=2000):
    """Error rate of the matched filter on isolated BPSK transmissions.

    Every trial draws a fresh column a ~ N(0, I/n) of length m and noise
    z ~ N(0, sigma_sq I), sends +1 and decides sign(a^T (a + z)), with
    sign(0) = +1."""
    if m < 1 or n < 1 or trials < 1:
        raise DomainError(f"need m, n, trials >= 1 "
                          f"(got {m}, {n}, {trials})")
    errors = 0
    for c, start in enumerate(range(0, trials, chunk)):
        size = min(chunk, trials - start)
        rng = trial_rng(seed, c)
        a = gaussian(rng, (size, m)) / math.sqrt(n)
        z = math.sqrt(sigma_sq) * gaussian(rng, (size, m))
        stats = np.einsum('ij,ij->i', a, a + z)
        errors += int(np.count_nonzero(stats < 0.0))
    rate = errors / trials
    return rate, math.sqrt(rate * (1.0 - rate) / trials)
