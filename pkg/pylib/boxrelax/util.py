# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
import math
import sys
from datetime import datetime

import traceback_with_variables as traceback


def support_colors():
    return hasattr(sys.stderr, 'isatty') and sys.stderr.isatty()


config = {'colors': support_colors(),
          'verbose': False,
          'quiet': False,
          'report_time': True}


def maybe_print(s, verbose=None, print_fun=None):
    if print_fun is None:
        print_fun = status
    if verbose is None:
        verbose = config['verbose']
    if verbose:
        print_fun(s)


# Status lines go to stderr: stdout may be carrying CSV
def status(msg, show_time=True):
    if config['quiet']:
        return
    if show_time and config['report_time']:
        local_time = datetime.now().strftime('%H:%M:%S')
        msg = f'{local_time} {msg}'
    print(msg, file=sys.stderr, flush=True)


def red(str):
    return maybe_color(str, 31)


def maybe_color(str, code):
    if config['colors']:
        return f"\033[{code}m{str}\033[0m"
    else:
        return str


# 17 significant digits round-trip any float64
def format_real(x):
    if x is None:
        return ''
    x = float(x)
    if math.isnan(x):
        return 'nan'
    if math.isinf(x):
        return 'inf' if x > 0 else '-inf'
    return '%.17g' % x


def print_traceback():
    cscheme = None if config['colors'] else traceback.ColorSchemes.none
    traceback.print_exc(fmt=traceback.Format(color_scheme=cscheme),
                        file_=sys.stderr)
