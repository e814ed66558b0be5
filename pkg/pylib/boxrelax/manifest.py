# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
"""Run manifests: a YAML file next to every CSV recording how it was made,
so any row can be regenerated bit for bit."""
from datetime import datetime, timezone

import yaml

from boxrelax import __version__

MANIFEST_SUFFIX = '.manifest.yaml'


def manifest_path(csv_path):
    return f'{csv_path}{MANIFEST_SUFFIX}'


def build_manifest(command, run_config, argv=None):
    return {'command': command,
            'argv': list(argv) if argv is not None else None,
            'config': run_config.as_dict(),
            'master_seed': run_config.seed,
            'version': __version__,
            'created': datetime.now(timezone.utc).isoformat()}


def write_manifest(csv_path, command, run_config, argv=None):
    path = manifest_path(csv_path)
    with open(path, 'w') as f:
        yaml.safe_dump(build_manifest(command, run_config, argv), f,
                       sort_keys=True, default_flow_style=False)
    return path


def read_manifest(path):
    with open(path) as f:
        return yaml.safe_load(f)
