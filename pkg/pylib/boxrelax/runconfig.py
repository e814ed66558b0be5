# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
"""Run configuration: `key = value` files, command line flags, environment.

Precedence, highest first: flag, config file, BOXRELAX_SEED (seed only),
built-in default. The file grammar is documented in doc/config-file.txt.
"""
import math
import os
import shlex
from dataclasses import dataclass, asdict
from typing import Optional, Tuple

from boxrelax.decoders import DEFAULT_MAX_ITER, DEFAULT_TOL
from boxrelax.errors import BoxRelaxError, ConfigError, DomainError
from boxrelax.sim import SimulationConfig, SIGNAL_MODES
from boxrelax.theory import check_order

SEED_ENV = 'BOXRELAX_SEED'

SIM_DECODERS = ('bro', 'zf', 'mfb', 'ml')
THEORY_DECODERS = ('theory-bro', 'theory-zf', 'theory-mfb', 'theory-high-snr')
ALL_DECODERS = SIM_DECODERS + THEORY_DECODERS


def parse_snr_range(text):
    """'start:stop:step' (stop included) or a comma separated list."""
    text = str(text).strip()
    try:
        if ':' in text:
            parts = text.split(':')
            if len(parts) != 3:
                raise ConfigError(f"invalid SNR range '{text}', expected "
                                  f"start:stop:step")
            start, stop, step = (float(p) for p in parts)
            if step <= 0:
                raise ConfigError(f"SNR range step must be positive, "
                                  f"got {step:g}")
            values = []
            i = 0
            while start + i * step <= stop + 1e-9:
                values.append(round(start + i * step, 10))
                i += 1
        else:
            values = [float(v) for v in text.split(',') if v.strip()]
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"invalid SNR specification '{text}'")
    if not values:
        raise ConfigError(f"SNR specification '{text}' is empty")
    return tuple(values)


def parse_decoders(text):
    names = tuple(d.strip() for d in str(text).split(',') if d.strip())
    for name in names:
        if name not in ALL_DECODERS:
            raise ConfigError(f"unknown decoder '{name}', expected one of "
                              f"{', '.join(ALL_DECODERS)}")
    if not names:
        raise ConfigError("at least one decoder is required")
    return names


def _positive_int(v):
    i = int(v)
    if i < 1:
        raise ValueError(v)
    return i


def _positive_float(v):
    f = float(v)
    if not f > 0:
        raise ValueError(v)
    return f


def _order(v):
    return check_order(int(v))


def _signal_mode(v):
    if v not in SIGNAL_MODES:
        raise ValueError(v)
    return v


def _seed(v):
    seed = int(str(v), 0)
    if seed < 0 or seed >= 1 << 64:
        raise ValueError(v)
    return seed


CONVERTERS = {
    'delta': _positive_float,
    'n': _positive_int,
    'M': _order,
    'snr_db': parse_snr_range,
    'trials': _positive_int,
    'decoders': parse_decoders,
    'seed': _seed,
    'signal_mode': _signal_mode,
    'tol': _positive_float,
    'max_iter': _positive_int,
    'workers': _positive_int,
    'bins': _positive_int,
    'order_k': int,
    'eps_atom_scale': _positive_float,
    'out': str,
}

# Config file spellings that differ from field names
ALIASES = {'m_order': 'M', 'k': 'order_k', 'm-order': 'M', 'snr-db': 'snr_db',
           'snr_db_range': 'snr_db', 'snr-db-range': 'snr_db',
           'signal-mode': 'signal_mode', 'max-iter': 'max_iter'}


@dataclass(frozen=True)
class RunConfig:
    delta: float = 1.0
    n: int = 256
    M: int = 2
    snr_db: Tuple[float, ...] = (10.0,)
    trials: int = 20
    decoders: Tuple[str, ...] = ('bro', 'theory-bro')
    seed: int = 0
    signal_mode: Optional[str] = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    workers: int = 1
    bins: int = 50
    order_k: int = 2
    eps_atom_scale: float = 1e-6
    out: Optional[str] = None

    def as_dict(self):
        d = asdict(self)
        d['snr_db'] = list(self.snr_db)
        d['decoders'] = list(self.decoders)
        return d

    def simulation_config(self, snr_db, default_mode='uniform_random'):
        """SimulationConfig for one SNR point; snr_db = inf is the
        noiseless channel."""
        common = dict(n=self.n, delta=self.delta, M=self.M,
                      trials=self.trials, master_seed=self.seed,
                      signal_mode=self.signal_mode or default_mode,
                      tol=self.tol, max_iter=self.max_iter,
                      eps_atom_scale=self.eps_atom_scale)
        try:
            if math.isinf(snr_db) and snr_db > 0:
                return SimulationConfig(sigma_sq=0.0, **common)
            return SimulationConfig.from_snr_db(snr_db=snr_db, **common)
        except BoxRelaxError as e:
            raise ConfigError(str(e))


def canonical_key(key):
    key = key.strip()
    key = ALIASES.get(key, key)
    if key not in CONVERTERS:
        raise ConfigError(f"unknown configuration key '{key}'")
    return key


def read_config_file(path):
    """Parse `key = value` lines; '#' starts a comment, values may be quoted
    (shell rules). A repeated key keeps its last value."""
    values = {}
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}")
    for lineno, line in enumerate(lines, start=1):
        try:
            tokens = shlex.split(line, comments=True)
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: {e}")
        if not tokens:
            continue
        joined = ' '.join(tokens)
        if '=' not in joined:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got '{line.strip()}'")
        k, v = joined.split('=', 1)
        values[canonical_key(k)] = v.strip()
    return values


def resolve(file_values=None, flag_values=None, env=None):
    """Merge file values and flags (flags win) into a RunConfig. `env`
    defaults to os.environ and only contributes the seed."""
    if env is None:
        env = os.environ
    merged = {}
    if SEED_ENV in env and env[SEED_ENV] != '':
        merged['seed'] = env[SEED_ENV]
    for source in (file_values or {}), (flag_values or {}):
        for k, v in source.items():
            if v is not None:
                merged[canonical_key(k)] = v
    converted = {}
    for k, v in merged.items():
        try:
            converted[k] = CONVERTERS[k](v)
        except ConfigError:
            raise
        except DomainError as e:
            raise ConfigError(f"invalid value for '{k}': {e}")
        except (ValueError, TypeError):
            raise ConfigError(f"invalid value for '{k}': {v!r}")
    return RunConfig(**converted)
