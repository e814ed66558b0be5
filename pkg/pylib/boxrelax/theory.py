# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
"""Deterministic large-system predictions for the box-relaxation decoder.

The asymptotic symbol error rate is 2(1 - 1/M) Q(1/tau*), where tau* is the
unique positive minimizer of a scalar strictly convex objective: F for BPSK
and F_M for M-PAM. Everything else here (closed-form bounds, the high-SNR
approximation, matched filter and zero-forcing baselines, the limiting law of
the error vector) hangs off tau* or off closed-form expressions.

All SNRs are linear unless a name says `_db`.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.stats import chi2

from boxrelax.errors import DomainError, InfeasibleRegimeError, \
    UnsupportedError
from boxrelax.specfns import Probability, q_function, normal_pdf, \
    INV_SQRT_2PI
from boxrelax.util import maybe_print

FEASIBILITY_MARGIN = 1e-9
BRACKET_RTOL = 1e-12
MAX_BISECTIONS = 500
MAX_BRACKET_EXPANSIONS = 200


def check_order(M):
    if isinstance(M, bool) or int(M) != M or M < 2 or (int(M) & (int(M) - 1)):
        raise DomainError(f"constellation order must be a power of two >= 2, "
                          f"got {M}")
    return int(M)


def _check_positive(value, name):
    if not (isinstance(value, (int, float, np.floating, np.integer))
            and math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a finite positive number, "
                          f"got {value!r}")
    return float(value)


def snr_db_to_linear(snr_db):
    return 10.0 ** (float(snr_db) / 10.0)


def snr_linear_to_db(snr):
    return 10.0 * math.log10(_check_positive(snr, "snr"))


def snr_from_sigma(sigma_sq, M):
    """SNR of an M-PAM transmission with noise variance sigma_sq.

    The average symbol power of a uniform M-PAM constellation is
    (M^2 - 1)/3, so this is 1/sigma_sq for BPSK."""
    sigma_sq = _check_positive(sigma_sq, "sigma_sq")
    M = check_order(M)
    return (M * M - 1) / (3.0 * sigma_sq)


def sigma_sq_from_snr(snr, M):
    snr = _check_positive(snr, "snr")
    M = check_order(M)
    return (M * M - 1) / (3.0 * snr)


def feasibility_threshold(M):
    return 1.0 - 1.0 / check_order(M)


def _feasibility_condition(M):
    return "requires delta > 1/2" if M == 2 else \
        f"requires delta > 1 - 1/M = {1.0 - 1.0 / M:g}"


@dataclass(frozen=True)
class AsymptoticRegime:
    """Proportional-growth regime: m/n -> delta, fixed SNR, M-PAM symbols."""
    delta: float
    snr: float
    constellation_order: int = 2

    def __post_init__(self):
        _check_positive(self.delta, "delta")
        _check_positive(self.snr, "snr")
        check_order(self.constellation_order)

    @classmethod
    def from_db(cls, delta, snr_db, constellation_order=2):
        return cls(delta, snr_db_to_linear(snr_db), constellation_order)

    @classmethod
    def from_sigma(cls, delta, sigma_sq, constellation_order=2):
        return cls(delta, snr_from_sigma(sigma_sq, constellation_order),
                   constellation_order)

    @property
    def M(self):
        return self.constellation_order

    @property
    def sigma_sq(self):
        return sigma_sq_from_snr(self.snr, self.M)

    @property
    def snr_db(self):
        return snr_linear_to_db(self.snr)

    @property
    def feasible(self):
        return self.delta > feasibility_threshold(self.M) + FEASIBILITY_MARGIN

    def require_feasible(self):
        if not self.feasible:
            raise InfeasibleRegimeError(
                f"theory for M={self.M} {_feasibility_condition(self.M)} "
                f"(got delta={self.delta:g}); tau* diverges otherwise")
        return self


def _check_alpha_ell(alpha, ell):
    return _check_positive(alpha, "alpha"), _check_positive(ell, "ell")


def s_term(alpha, ell):
    """S(alpha; ell) = (alpha + ell^2/alpha) Q(ell/alpha)
                       - ell/sqrt(2 pi) exp(-ell^2 / (2 alpha^2)).

    Equivalently alpha * E[(h - ell/alpha)_+^2] for h ~ N(0, 1)."""
    alpha, ell = _check_alpha_ell(alpha, ell)
    t = ell / alpha
    return (alpha + ell * ell / alpha) * q_function(t) \
        - ell * INV_SQRT_2PI * math.exp(-0.5 * t * t)


def s_term_derivatives(alpha, ell):
    """First and second derivatives of S(.; ell) with respect to alpha.

    The second derivative is 2 (ell^2/alpha^3) Q(ell/alpha); it is strictly
    positive, which is what makes the objectives strictly convex."""
    alpha, ell = _check_alpha_ell(alpha, ell)
    t = ell / alpha
    q = q_function(t)
    first = t * INV_SQRT_2PI * math.exp(-0.5 * t * t) + (1.0 - t * t) * q
    second = 2.0 * t * t * q / alpha
    return first, second


def g_function(u):
    """G(u) = sqrt(2/pi) u exp(-2u^2) + (1 - 4u^2) Q(2u), i.e. S'(1/u; 2)."""
    u = _check_positive(u, "u")
    return math.sqrt(2.0 / math.pi) * u * math.exp(-2.0 * u * u) \
        + (1.0 - 4.0 * u * u) * q_function(2.0 * u)


def _require_order(regime, M, what):
    if regime.M != M:
        raise UnsupportedError(f"{what} is defined for M={M} only "
                               f"(got M={regime.M})")


def f_bpsk(tau, regime):
    """F(tau) = tau (delta - 1/2) + (1/SNR)/tau + S(tau; 2)."""
    tau = _check_positive(tau, "tau")
    _require_order(regime, 2, "F")
    return tau * (regime.delta - 0.5) + 1.0 / (regime.snr * tau) \
        + s_term(tau, 2.0)


def f_bpsk_derivative(tau, regime):
    tau = _check_positive(tau, "tau")
    _require_order(regime, 2, "F")
    return regime.delta - 0.5 - 1.0 / (regime.snr * tau * tau) \
        + s_term_derivatives(tau, 2.0)[0]


def _mpam_offsets(M):
    return [float(k) for k in range(2, 2 * (M - 1) + 1, 2)]


def f_mpam(tau, regime, sigma_sq=None):
    """F_M(tau) = (tau/2)(delta - (M-1)/M) + sigma^2/(2 tau)
                  + (1/M) sum_{k = 2, 4, ..., 2(M-1)} S(tau; k)."""
    tau = _check_positive(tau, "tau")
    sigma_sq = _resolve_sigma_sq(regime, sigma_sq)
    M = regime.M
    return 0.5 * tau * (regime.delta - (M - 1) / M) \
        + sigma_sq / (2.0 * tau) \
        + sum(s_term(tau, k) for k in _mpam_offsets(M)) / M


def f_mpam_derivative(tau, regime, sigma_sq=None):
    tau = _check_positive(tau, "tau")
    sigma_sq = _resolve_sigma_sq(regime, sigma_sq)
    M = regime.M
    return 0.5 * (regime.delta - (M - 1) / M) \
        - sigma_sq / (2.0 * tau * tau) \
        + sum(s_term_derivatives(tau, k)[0] for k in _mpam_offsets(M)) / M


def _resolve_sigma_sq(regime, sigma_sq):
    if sigma_sq is None:
        return regime.sigma_sq
    return _check_positive(sigma_sq, "sigma_sq")


def bpsk_first_order_residual(tau, regime):
    """delta - 1/2 - (1/SNR)/tau^2 + G(1/tau); zero exactly at tau*."""
    tau = _check_positive(tau, "tau")
    u = 1.0 / tau
    return regime.delta - 0.5 - u * u / regime.snr + g_function(u)


@dataclass(frozen=True)
class TheoryResult:
    regime: AsymptoticRegime
    sigma_sq: float
    tau_star: float
    predicted_ser: Probability
    lower_bound: Optional[Probability]
    upper_bound: Probability
    high_snr_ser: Probability
    objective_at_min: float
    mfb_ser: Optional[Probability] = None
    zf_ser: Optional[Probability] = None
    residual: float = 0.0
    iterations: int = 0


def solve_tau_star(regime, sigma_sq=None):
    """Find tau* and assemble every prediction for `regime`.

    BPSK bisects the first-order condition on u = 1/tau inside the bracket
    (sqrt((delta - 1/2) SNR), sqrt(delta SNR)), where it changes sign. M-PAM
    has no closed-form bracket: starting from the high-SNR guess, the bracket
    is doubled outwards until the derivative of F_M changes sign, then
    bisected."""
    regime.require_feasible()
    if sigma_sq is not None:
        sigma_sq = _check_positive(sigma_sq, "sigma_sq")
        if not math.isclose(sigma_sq, regime.sigma_sq, rel_tol=1e-9):
            raise DomainError(f"sigma_sq={sigma_sq:g} does not match "
                              f"SNR={regime.snr:g} for M={regime.M}")
    sigma_sq = regime.sigma_sq
    M = regime.M

    if M == 2:
        u, iterations = _solve_bpsk(regime)
        tau = 1.0 / u
        residual = bpsk_first_order_residual(tau, regime)
        objective = f_bpsk(tau, regime)
        lower, upper = ser_bounds_bpsk(regime)
        mfb = mfb_ser(regime)
        zf = zf_ser(regime) if regime.delta > 1 else None
    else:
        tau, iterations = _solve_mpam(regime, sigma_sq)
        u = 1.0 / tau
        residual = f_mpam_derivative(tau, regime, sigma_sq)
        objective = f_mpam(tau, regime, sigma_sq)
        lower = None
        upper = high_snr_ser(regime)
        mfb = None
        zf = None

    maybe_print(f"tau* = {tau:.17g} for {regime} after {iterations} "
                f"bisections (residual {residual:.3g})")
    return TheoryResult(regime=regime,
                        sigma_sq=sigma_sq,
                        tau_star=tau,
                        predicted_ser=2.0 * (1.0 - 1.0 / M)
                        * q_function(u),
                        lower_bound=lower,
                        upper_bound=upper,
                        high_snr_ser=high_snr_ser(regime),
                        objective_at_min=objective,
                        mfb_ser=mfb,
                        zf_ser=zf,
                        residual=residual,
                        iterations=iterations)


def _solve_bpsk(regime):
    # The residual is decreasing in u: positive at lo, negative at hi.
    # Bisect to float exhaustion: Q(u) amplifies a relative error in u
    # about u^2 times
    lo = math.sqrt((regime.delta - 0.5) * regime.snr)
    hi = math.sqrt(regime.delta * regime.snr)
    iterations = 0
    while iterations < MAX_BISECTIONS:
        iterations += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if bpsk_first_order_residual(1.0 / mid, regime) > 0:
            lo = mid
        else:
            hi = mid
    # The midpoint never falls below the initial lo, so Q(u) never exceeds
    # the closed-form upper bound even after rounding
    return 0.5 * (lo + hi), iterations


def _solve_mpam(regime, sigma_sq):
    def derivative(tau):
        return f_mpam_derivative(tau, regime, sigma_sq)

    guess = math.sqrt(sigma_sq / (regime.delta - 1.0 + 1.0 / regime.M))
    lo = hi = guess
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if derivative(lo) <= 0:
            break
        lo /= 2.0
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if derivative(hi) >= 0:
            break
        hi *= 2.0

    iterations = 0
    while hi - lo >= BRACKET_RTOL * (1.0 + hi) and \
            iterations < MAX_BISECTIONS:
        iterations += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if derivative(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), iterations


def ser_bounds_bpsk(regime):
    """Q(sqrt(delta SNR)) < Q(1/tau*) <= Q(sqrt((delta - 1/2) SNR))."""
    _require_order(regime, 2, "closed-form SER bounds")
    regime.require_feasible()
    lower = q_function(math.sqrt(regime.delta * regime.snr))
    upper = q_function(math.sqrt((regime.delta - 0.5) * regime.snr))
    return lower, upper


def high_snr_ser(regime):
    """2(1 - 1/M) Q(sqrt((delta - 1 + 1/M) (3/(M^2 - 1)) SNR)).

    Upper bound on the asymptotic SER, tight as SNR grows; for BPSK this is
    Q(sqrt((delta - 1/2) SNR))."""
    regime.require_feasible()
    M = regime.M
    arg = (regime.delta - 1.0 + 1.0 / M) * (3.0 / (M * M - 1)) * regime.snr
    return 2.0 * (1.0 - 1.0 / M) * q_function(math.sqrt(arg))


def mfb_ser(regime):
    """Matched filter bound Q(sqrt(delta SNR)): error probability of one
    symbol detected with every other symbol known."""
    _require_order(regime, 2, "the matched filter bound")
    return q_function(math.sqrt(regime.delta * regime.snr))


def zf_ser(regime):
    """Large-system zero-forcing SER Q(sqrt((delta - 1) SNR))."""
    _require_order(regime, 2, "the zero-forcing prediction")
    if regime.delta <= 1.0:
        raise InfeasibleRegimeError(
            f"zero-forcing requires delta > 1 (got delta={regime.delta:g})")
    return q_function(math.sqrt((regime.delta - 1.0) * regime.snr))


def zf_ser_finite(n, m, snr):
    """Exact zero-forcing error probability for an m x n channel.

    n R_nn^2 is chi-square with m - n + 1 degrees of freedom, so the SER is
    E[Q(sqrt(X SNR / n))] for X ~ chi2(m - n + 1)."""
    snr = _check_positive(snr, "snr")
    if n < 1 or m < n:
        raise InfeasibleRegimeError(
            f"zero-forcing requires m >= n (got m={m}, n={n})")
    dof = m - n + 1

    def integrand(x):
        return chi2.pdf(x, dof) * q_function(math.sqrt(x * snr / n))

    upper = chi2.isf(1e-16, dof)
    value, _ = integrate.quad(integrand, 0.0, upper, limit=200,
                              epsabs=1e-15, epsrel=1e-12)
    return min(max(value, 0.0), 1.0)


def mfb_gap_db(delta):
    """Worst-case SNR gap of the box relaxation to the matched filter bound:
    10 log10(delta / (delta - 1/2)), 3.0103 dB for a square system."""
    delta = _check_positive(delta, "delta")
    if delta <= 0.5:
        raise InfeasibleRegimeError(_feasibility_condition(2))
    return 10.0 * math.log10(delta / (delta - 0.5))


def zf_gap_db(delta):
    """Minimum SNR advantage of the box relaxation over zero-forcing:
    10 log10((delta - 1/2) / (delta - 1))."""
    delta = _check_positive(delta, "delta")
    if delta <= 1.0:
        raise InfeasibleRegimeError("zero-forcing requires delta > 1")
    return 10.0 * math.log10((delta - 0.5) / (delta - 1.0))


@dataclass(frozen=True)
class LimitingDistribution:
    """Law of W = theta(g), g ~ N(0, 1), the limit of the empirical
    distribution of x_hat - x0 when x0 = +1.

    theta clips tau* g to [-2, 0]: an atom of mass 1/2 at 0, an atom of mass
    Q(2/tau*) at -2 and the density (1/tau*) phi(w/tau*) in between."""
    tau_star: float
    atom_at_zero: Probability = field(init=False)
    atom_at_minus_two: Probability = field(init=False)

    def __post_init__(self):
        _check_positive(self.tau_star, "tau_star")
        object.__setattr__(self, 'atom_at_zero', 0.5)
        object.__setattr__(self, 'atom_at_minus_two',
                           q_function(2.0 / self.tau_star))

    @property
    def interior_mass(self):
        return 0.5 - self.atom_at_minus_two

    def interior_density(self, w):
        w = np.asarray(w, dtype=np.float64)
        inside = (w > -2.0) & (w < 0.0)
        dens = np.where(inside,
                        normal_pdf(np.where(inside, w, 0.0) / self.tau_star)
                        / self.tau_star,
                        0.0)
        return float(dens) if dens.ndim == 0 else dens

    def cdf(self, w):
        """P(W <= w). Between the atoms this is Q(-w/tau*)."""
        w = np.asarray(w, dtype=np.float64)
        clipped = np.clip(w, -2.0, 0.0)
        res = np.where(w < -2.0, 0.0,
                       np.where(w >= 0.0, 1.0,
                                q_function(-clipped / self.tau_star)))
        return float(res) if res.ndim == 0 else res

    def total_mass(self):
        interior, _ = integrate.quad(self.interior_density, -2.0, 0.0,
                                     epsabs=1e-13, epsrel=1e-13)
        return self.atom_at_zero + self.atom_at_minus_two + interior

    def expected_value(self, psi: Callable[[float], float]):
        """E[psi(W)], the limit of (1/n) sum psi(w_i) for Lipschitz psi."""
        interior, _ = integrate.quad(
            lambda w: psi(w) * self.interior_density(w), -2.0, 0.0,
            epsabs=1e-13, epsrel=1e-12, limit=200)
        return self.atom_at_zero * psi(0.0) \
            + self.atom_at_minus_two * psi(-2.0) + interior

    def error_probability(self):
        """P(W <= -1) = Q(1/tau*), the asymptotic BPSK symbol error rate."""
        return self.cdf(-1.0)


def limiting_distribution(regime, sigma_sq=None):
    _require_order(regime, 2, "the limiting error distribution")
    return LimitingDistribution(solve_tau_star(regime, sigma_sq).tau_star)


def predicted_mse(limiting):
    """E[W^2]: asymptotic per-coordinate squared error of x_hat."""
    return limiting.expected_value(lambda w: w * w)
