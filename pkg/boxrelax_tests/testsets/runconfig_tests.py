# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
import math

import testlib
from testlib import assert_close, assert_eq, assert_in, assert_raises

from boxrelax.errors import ConfigError
from boxrelax.manifest import build_manifest, manifest_path, read_manifest, \
    write_manifest
from boxrelax.runconfig import SEED_ENV, RunConfig, parse_decoders, \
    parse_snr_range, read_config_file, resolve


class RunConfigTests(testlib.BaseTestSet):

    @staticmethod
    def requirements():
        return testlib.TestRequirements(scale='quick')

    def setup(self):
        pass

    def teardown(self):
        pass

    def write_config(self, text):
        path = self.env.scratch_path(f'{testlib.random_str(8)}.conf')
        with open(path, 'w') as f:
            f.write(text)
        return path

    def snr_range_test(self):
        assert_eq(parse_snr_range('0:10:2.5'), (0.0, 2.5, 5.0, 7.5, 10.0))
        assert_eq(parse_snr_range('0:1:0.1')[-1], 1.0)
        assert_eq(len(parse_snr_range('0:1:0.1')), 11)
        assert_eq(parse_snr_range('5, 10,15'), (5.0, 10.0, 15.0))
        assert_eq(parse_snr_range('7'), (7.0,))
        assert_eq(parse_snr_range('inf'), (math.inf,))
        for bad in ['0:10', '0:10:0', '0:10:-1', 'a,b', '', '1:x:2']:
            assert_raises(ConfigError, parse_snr_range, bad)

    def decoders_test(self):
        assert_eq(parse_decoders('bro, zf,theory-bro'),
                  ('bro', 'zf', 'theory-bro'))
        e = assert_raises(ConfigError, parse_decoders, 'bro,sphere')
        assert_in("unknown decoder 'sphere'", str(e))
        assert_raises(ConfigError, parse_decoders, ' , ')

    def defaults_test(self):
        cfg = resolve(env={})
        assert_eq(cfg, RunConfig())
        assert_eq(cfg.decoders, ('bro', 'theory-bro'))
        assert cfg.signal_mode is None

    def file_parsing_test(self):
        path = self.write_config(
            "# sweep over a square system\n"
            "delta = 0.7\n"
            "\n"
            "n=128   # transmit antennas\n"
            "m_order = 4\n"
            "snr_db_range = 0:20:5\n"
            "decoders = 'bro,zf, theory-bro'\n"
            "seed = 0x10\n"
            "n = 64\n")
        values = read_config_file(path)
        assert_eq(values, {'delta': '0.7', 'n': '64', 'M': '4',
                           'snr_db': '0:20:5', 'decoders': 'bro,zf, theory-bro',
                           'seed': '0x10'})
        cfg = resolve(values, env={})
        assert_eq(cfg.delta, 0.7)
        assert_eq(cfg.n, 64)
        assert_eq(cfg.M, 4)
        assert_eq(cfg.snr_db, (0.0, 5.0, 10.0, 15.0, 20.0))
        assert_eq(cfg.decoders, ('bro', 'zf', 'theory-bro'))
        assert_eq(cfg.seed, 16)

    def file_errors_test(self):
        e = assert_raises(ConfigError, read_config_file,
                          self.write_config("delta = 1\nbogus = 3\n"))
        assert_in("unknown configuration key 'bogus'", str(e))
        e = assert_raises(ConfigError, read_config_file,
                          self.write_config("delta 1\n"))
        assert_in(":1: expected 'key = value'", str(e))
        assert_raises(ConfigError, read_config_file,
                      self.write_config("decoders = 'bro\n"))
        assert_raises(ConfigError, read_config_file,
                      self.env.scratch_path('missing.conf'))

    def precedence_test(self):
        path = self.write_config("delta = 2\nseed = 5\ntrials = 7\n")
        file_values = read_config_file(path)
        env = {SEED_ENV: '99'}
        cfg = resolve(file_values, {'delta': '1.5', 'trials': None}, env=env)
        assert_eq(cfg.delta, 1.5, 'flag over file')
        assert_eq(cfg.trials, 7, 'file over default')
        assert_eq(cfg.seed, 5, 'file over environment')
        assert_eq(resolve({}, {}, env=env).seed, 99, 'environment')
        assert_eq(resolve({}, {'seed': '3'}, env=env).seed, 3, 'flag')
        assert_eq(resolve({}, {}, env={SEED_ENV: ''}).seed, 0)

    def invalid_values_test(self):
        for key, value in [('delta', '-1'), ('n', '0'), ('M', '3'),
                           ('trials', 'x'), ('seed', '-1'),
                           ('seed', str(1 << 64)), ('signal_mode', 'gray'),
                           ('tol', '0'), ('workers', '0')]:
            assert_raises(ConfigError, resolve, {key: value}, env={})
        assert_raises(ConfigError, resolve, {}, {'nonsense': '1'}, env={})

    def simulation_config_test(self):
        cfg = RunConfig(n=20, delta=0.75, M=4, trials=3, seed=11)
        sim = cfg.simulation_config(10.0)
        assert_eq((sim.n, sim.m, sim.M, sim.trials, sim.master_seed),
                  (20, 15, 4, 3, 11))
        assert_eq(sim.signal_mode, 'uniform_random')
        assert_close(sim.sigma_sq, 0.5, rel_tol=1e-14)
        assert_eq(cfg.simulation_config(math.inf).sigma_sq, 0.0)
        assert_raises(ConfigError, cfg.simulation_config, 10.0, 'all_ones')
        sim = RunConfig(n=20, delta=0.75, M=2, seed=11).simulation_config(0.0, 'all_ones')
        assert_eq(sim.signal_mode, 'all_ones')

    def manifest_test(self):
        cfg = RunConfig(snr_db=(1.0, 2.0), seed=1234)
        csv_path = self.env.scratch_path('run.csv')
        path = write_manifest(csv_path, 'sweep', cfg, ['sweep', '--seed',
                                                      '1234'])
        assert_eq(path, manifest_path(csv_path))
        manifest = read_manifest(path)
        assert_eq(manifest['command'], 'sweep')
        assert_eq(manifest['master_seed'], 1234)
        assert_eq(manifest['config']['snr_db'], [1.0, 2.0])
        assert_eq(manifest['argv'], ['sweep', '--seed', '1234'])
        assert_eq(set(manifest), set(build_manifest('sweep', cfg)))
