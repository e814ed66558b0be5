# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.


class BoxRelaxError(Exception):
    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def __str__(self):
        return self.message


class DomainError(BoxRelaxError, ValueError):
    pass


class RankDeficientError(DomainError):
    pass


class InfeasibleRegimeError(BoxRelaxError):
    pass


class UnsupportedError(BoxRelaxError):
    pass


class SearchSpaceError(BoxRelaxError):
    pass


class ConvergenceError(BoxRelaxError):
    """Raised when an iterative solver runs out of iterations.

    `best` holds the best iterate found so far (a DecodeOutput for the box
    solver), so callers may still inspect or use it.
    """
    def __init__(self, message, best=None, trial_index=None):
        super().__init__(message)
        self.best = best
        self.trial_index = trial_index

    def with_trial(self, trial_index):
        return ConvergenceError(f"trial {trial_index}: {self.message}",
                                best=self.best, trial_index=trial_index)


class CampaignError(BoxRelaxError):
    def __init__(self, message, failures):
        super().__init__(message)
        self.failures = failures


class ConfigError(DomainError):
    pass


def exit_code(error):
    # Bad input is 2 (same as bad_args_exit), everything else is a runtime
    # failure
    if isinstance(error, (DomainError, InfeasibleRegimeError,
                          UnsupportedError, SearchSpaceError)):
        return 2
    return 1
