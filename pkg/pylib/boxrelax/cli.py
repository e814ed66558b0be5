# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.

# Command line front end. Every command writes CSV (RFC 4180, 17 significant
# digits) to --out or stdout; a YAML manifest is written next to every CSV
# file.
#
#   boxrelax predict --delta 1 --snr-db 10 --m 2
#   boxrelax sweep --config fig1.conf --out fig1.csv
#   boxrelax dist --delta 0.7 --n 256 --trials 200 --snr-db 6.0206
#   boxrelax independence --delta 1 --trials 200 --k 2
#
# Exit codes: 0 success, 1 runtime failure, 2 bad or infeasible input.

import argparse
import csv
import math
import sys

import numpy as np
import yaml

from boxrelax import __version__, util
from boxrelax.decoders import ML_SEARCH_LIMIT, ml_search_space
from boxrelax.errors import BoxRelaxError, CampaignError, DomainError, \
    InfeasibleRegimeError, UnsupportedError, exit_code
from boxrelax.manifest import build_manifest, write_manifest
from boxrelax.runconfig import read_config_file, resolve, SIM_DECODERS
from boxrelax.sim import empirical_error_distribution, \
    independence_statistic, monte_carlo
from boxrelax.specfns import q_function
from boxrelax.theory import AsymptoticRegime, LimitingDistribution, \
    high_snr_ser, mfb_ser, solve_tau_star, zf_ser
from boxrelax.util import format_real, maybe_print, red, status

PREDICT_COLUMNS = ['delta', 'M', 'snr_db', 'snr_linear', 'sigma_sq',
                   'tau_star', 'predicted_ser', 'lower_bound', 'upper_bound',
                   'high_snr_ser', 'mfb_ser', 'zf_ser', 'objective_at_min']

SWEEP_COLUMNS = ['decoder', 'n', 'm', 'delta_effective', 'M', 'snr_db',
                 'snr_linear', 'sigma_sq', 'trials', 'mean_ser', 'std_err',
                 'theory_ser', 'tau_star', 'status']

DIST_COLUMNS = ['snr_db', 'kind', 'w_left', 'w_right', 'w_center',
                'empirical', 'theory', 'theory_density']

INDEPENDENCE_COLUMNS = ['n', 'm', 'delta_effective', 'snr_db', 'trials', 'k',
                        'joint_freq', 'product_of_marginals', 'theory_joint',
                        'std_err', 'z_score']


def csv_cell(v):
    if v is None:
        return ''
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_real(v)
    return str(v)


class CsvOutput:
    """CSV rows to a file or to stdout. The manifest goes next to a file;
    for stdout it is only echoed to stderr in verbose mode."""

    def __init__(self, command, run_config, argv, out=None):
        self.command = command
        self.run_config = run_config
        self.argv = argv
        self.path = out
        self.file = None
        self.writer = None

    def __enter__(self):
        if self.path is None:
            self.file = sys.stdout
        else:
            try:
                self.file = open(self.path, 'w', newline='')
            except OSError as e:
                raise DomainError(f"cannot write {self.path}: {e.strerror}")
        self.writer = csv.writer(self.file, lineterminator='\r\n')
        return self

    def header(self, columns):
        self.writer.writerow(columns)

    def row(self, values):
        self.writer.writerow([csv_cell(v) for v in values])
        self.file.flush()

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            if self.path is not None:
                self.file.close()
            return False
        if self.path is None:
            self.file.flush()
            if util.config['verbose']:
                status(yaml.safe_dump(build_manifest(self.command,
                                                     self.run_config,
                                                     self.argv),
                                      sort_keys=True), show_time=False)
            return False
        self.file.close()
        manifest = write_manifest(self.path, self.command, self.run_config,
                                  self.argv)
        maybe_print(f"wrote {self.path} and {manifest}")
        return False


def _regime_for(sim_config):
    """Theory regime matching a finite simulation: delta is the effective
    m/n, not the requested ratio."""
    return AsymptoticRegime.from_sigma(sim_config.delta_effective,
                                       sim_config.sigma_sq, sim_config.M)


def cmd_predict(run_config, output):
    regimes = [AsymptoticRegime.from_db(run_config.delta, snr_db,
                                        run_config.M)
               for snr_db in run_config.snr_db]
    for regime in regimes:
        regime.require_feasible()
    output.header(PREDICT_COLUMNS)
    for snr_db, regime in zip(run_config.snr_db, regimes):
        res = solve_tau_star(regime)
        output.row([regime.delta, regime.M, snr_db, regime.snr,
                    res.sigma_sq, res.tau_star, res.predicted_ser,
                    res.lower_bound, res.upper_bound, res.high_snr_ser,
                    res.mfb_ser, res.zf_ser, res.objective_at_min])
    return 0


class SweepPoint:
    """All rows of a sweep at one SNR value."""

    def __init__(self, run_config, snr_db):
        self.run_config = run_config
        self.snr_db = snr_db
        self.sim = run_config.simulation_config(snr_db)
        self.regime = None
        self.theory = None
        self.theory_status = 'no theory for the noiseless channel'
        self.failed = False
        if self.sim.sigma_sq > 0:
            self.regime = _regime_for(self.sim)
            try:
                self.theory = solve_tau_star(self.regime)
                self.theory_status = 'ok'
            except InfeasibleRegimeError as e:
                self.theory_status = f'infeasible: {e}'

    def _row(self, decoder, trials=None, mean=None, std_err=None,
             theory_ser=None, status_text='ok'):
        sim = self.sim
        return [decoder, sim.n, sim.m, sim.delta_effective, sim.M,
                self.snr_db, sim.snr, sim.sigma_sq, trials, mean, std_err,
                theory_ser,
                self.theory.tau_star if self.theory is not None else None,
                status_text]

    def theory_value(self, decoder):
        """(value, status) of a closed-form prediction for `decoder`."""
        if self.regime is None:
            return None, self.theory_status
        try:
            if decoder in ('bro', 'theory-bro'):
                if self.theory is None:
                    return None, self.theory_status
                return self.theory.predicted_ser, 'ok'
            if decoder in ('zf', 'theory-zf'):
                return zf_ser(self.regime), 'ok'
            if decoder in ('mfb', 'theory-mfb'):
                return mfb_ser(self.regime), 'ok'
            if decoder == 'theory-high-snr':
                return high_snr_ser(self.regime), 'ok'
        except InfeasibleRegimeError as e:
            return None, f'infeasible: {e}'
        except UnsupportedError as e:
            return None, f'unsupported: {e}'
        return None, 'ok'

    def simulate(self, decoder):
        """Row for a Monte Carlo decoder, and whether the campaign failed."""
        sim = self.sim
        theory_ser, _ = self.theory_value(decoder)
        if decoder == 'ml' and ml_search_space(sim.n, sim.M) > ML_SEARCH_LIMIT:
            return self._row(decoder, theory_ser=theory_ser,
                             status_text=f'skipped: ML search space '
                                         f'{sim.M}^{sim.n} exceeds '
                                         f'{ML_SEARCH_LIMIT}'), False
        if decoder == 'zf' and sim.m < sim.n:
            return self._row(decoder, theory_ser=theory_ser,
                             status_text=f'skipped: zero-forcing requires '
                                         f'm >= n (m={sim.m}, n={sim.n})'), \
                False
        try:
            res = monte_carlo(sim, decoder, self.run_config.workers)
        except (CampaignError, DomainError) as e:
            return self._row(decoder, trials=sim.trials,
                             theory_ser=theory_ser,
                             status_text=f'failed: {e}'), True
        text = 'ok'
        if res.failures:
            text = f'ok ({len(res.failures)} of {sim.trials} trials failed ' \
                   f'to converge and were dropped)'
        return self._row(decoder, trials=len(res.per_trial),
                         mean=res.mean_ser, std_err=res.std_error,
                         theory_ser=theory_ser, status_text=text), False

    def rows(self):
        failed = False
        for decoder in self.run_config.decoders:
            maybe_print(f"sweep: {decoder} at {self.snr_db:g} dB")
            if decoder in SIM_DECODERS:
                row, point_failed = self.simulate(decoder)
                failed = failed or point_failed
            else:
                value, text = self.theory_value(decoder)
                row = self._row(decoder, theory_ser=value, status_text=text)
            yield row
        self.failed = failed


def cmd_sweep(run_config, output):
    points = [SweepPoint(run_config, snr_db) for snr_db in run_config.snr_db]
    output.header(SWEEP_COLUMNS)
    failed = False
    for point in points:
        for row in point.rows():
            output.row(row)
        failed = failed or point.failed
    return 1 if failed else 0


def _dist_limiting(sim):
    if sim.sigma_sq == 0:
        return None
    regime = _regime_for(sim)
    regime.require_feasible()
    return LimitingDistribution(solve_tau_star(regime).tau_star)


def cmd_dist(run_config, output):
    sims = [run_config.simulation_config(snr_db, default_mode='all_ones')
            for snr_db in run_config.snr_db]
    limits = [_dist_limiting(sim) for sim in sims]
    output.header(DIST_COLUMNS)
    for snr_db, sim, limiting in zip(run_config.snr_db, sims, limits):
        empirical = empirical_error_distribution(sim, run_config.bins,
                                                 run_config.workers)
        theory = limiting is not None
        output.row([snr_db, 'atom_zero', 0.0, 0.0, 0.0,
                    empirical.atom_zero_freq,
                    limiting.atom_at_zero if theory else None, None])
        output.row([snr_db, 'atom_minus_two', -2.0, -2.0, -2.0,
                    empirical.atom_minus_two_freq,
                    limiting.atom_at_minus_two if theory else None, None])
        edges, bin_mass = empirical.interior_histogram
        centers = 0.5 * (edges[:-1] + edges[1:])
        if theory:
            tau = limiting.tau_star
            # interior mass of (a, b) is Q(-b/tau) - Q(-a/tau)
            masses = q_function(-edges[1:] / tau) - q_function(-edges[:-1] / tau)
            densities = limiting.interior_density(centers)
        for i in range(len(centers)):
            output.row([snr_db, 'bin', edges[i], edges[i + 1], centers[i],
                        bin_mass[i],
                        masses[i] if theory else None,
                        densities[i] if theory else None])
    return 0


def _z_score(observed, expected, std_err):
    if std_err > 0:
        return (observed - expected) / std_err
    if observed == expected:
        return 0.0
    return math.copysign(math.inf, observed - expected)


def cmd_independence(run_config, output):
    sims = [run_config.simulation_config(snr_db, default_mode='all_ones')
            for snr_db in run_config.snr_db]
    thetas = []
    for sim in sims:
        if sim.sigma_sq == 0:
            raise DomainError("the independence check needs sigma_sq > 0")
        regime = _regime_for(sim)
        regime.require_feasible()
        thetas.append(solve_tau_star(regime).tau_star)
    k = run_config.order_k
    output.header(INDEPENDENCE_COLUMNS)
    for snr_db, sim, tau in zip(run_config.snr_db, sims, thetas):
        res = independence_statistic(sim, k, run_config.workers)
        theory_joint = q_function(1.0 / tau) ** k
        output.row([sim.n, sim.m, sim.delta_effective, snr_db, res.trials, k,
                    res.joint_freq, res.product_of_marginals, theory_joint,
                    res.std_error,
                    _z_score(res.joint_freq, theory_joint, res.std_error)])
    return 0


COMMANDS = {'predict': cmd_predict,
            'sweep': cmd_sweep,
            'dist': cmd_dist,
            'independence': cmd_independence}

# argparse dest -> RunConfig field
FLAG_FIELDS = ['delta', 'n', 'M', 'snr_db', 'trials', 'decoders', 'seed',
               'signal_mode', 'tol', 'max_iter', 'workers', 'bins',
               'order_k', 'out']


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', dest='config', metavar='PATH',
                        help='key = value configuration file')
    common.add_argument('--delta', dest='delta',
                        help='ratio m/n of receive to transmit antennas')
    common.add_argument('--n', dest='n', help='number of transmit antennas')
    common.add_argument('--m-order', '--m', '-M', dest='M',
                        help='constellation order (power of two)')
    snr = common.add_mutually_exclusive_group()
    snr.add_argument('--snr-db', dest='snr_db',
                     help='SNR in dB, or a comma separated list')
    snr.add_argument('--snr-db-range', dest='snr_db',
                     metavar='START:STOP:STEP', help='inclusive SNR range')
    common.add_argument('--trials', dest='trials')
    common.add_argument('--decoders', dest='decoders',
                        help='comma separated, from bro, zf, mfb, ml, '
                             'theory-bro, theory-zf, theory-mfb, '
                             'theory-high-snr')
    common.add_argument('--seed', dest='seed', help='64-bit master seed')
    common.add_argument('--signal-mode', dest='signal_mode',
                        help='all_ones or uniform_random')
    common.add_argument('--workers', dest='workers')
    common.add_argument('--tol', dest='tol')
    common.add_argument('--max-iter', dest='max_iter')
    common.add_argument('--bins', dest='bins')
    common.add_argument('--k', dest='order_k',
                        help='tuple order for the independence check')
    common.add_argument('--out', dest='out', metavar='PATH',
                        help='CSV output file (default: stdout)')
    common.add_argument('--verbose', '-v', dest='verbose',
                        action='store_true')
    common.add_argument('--colors', dest='colors', type=int, choices=[0, 1])

    parser = argparse.ArgumentParser(
        prog='boxrelax',
        description='Box-relaxation MIMO detection: asymptotic predictions '
                    'and Monte Carlo campaigns.')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('predict', parents=[common],
                   help='asymptotic SER predictions')
    sub.add_parser('sweep', parents=[common],
                   help='Monte Carlo and theory over an SNR grid')
    sub.add_parser('dist', parents=[common],
                   help='distribution of the error vector')
    sub.add_parser('independence', parents=[common],
                   help='joint error frequency over tuples')
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = make_parser().parse_args(argv)
    if args.verbose:
        util.config['verbose'] = True
    if args.colors is not None:
        util.config['colors'] = bool(args.colors)

    try:
        file_values = read_config_file(args.config) if args.config else {}
        flags = {f: getattr(args, f) for f in FLAG_FIELDS}
        run_config = resolve(file_values, flags)
        maybe_print(f"{args.command}: {run_config}")
        with CsvOutput(args.command, run_config, argv,
                       run_config.out) as output:
            return COMMANDS[args.command](run_config, output)
    except BoxRelaxError as e:
        code = exit_code(e)
        status(red(f"boxrelax {args.command}: {e}"), show_time=False)
        if code == 1 and util.config['verbose']:
            util.print_traceback()
        return code
    except KeyboardInterrupt:
        return 1
    except Exception as e:
        status(red(f"boxrelax {args.command}: unexpected failure: "
                   f"{type(e).__name__}: {e}"), show_time=False)
        if util.config['verbose']:
            util.print_traceback()
        return 1


if __name__ == '__main__':
    sys.exit(main())
