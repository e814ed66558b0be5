# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
"""Box-relaxation detection for massive-MIMO channels: asymptotic symbol
error rate predictions, concrete decoders and Monte Carlo campaigns that
check one against the other."""

__version__ = "1.0.0"
