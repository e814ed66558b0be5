# @author Couchbase <info@couchbase.com>
# @copyright 2024-Present Couchbase, Inc.
#
# Use of this software is governed by the Business Source License included in
# the file licenses/BSL-Couchbase.txt.  As of the Change Date specified in that
# file, in accordance with the Business Source License, use of this software
# will be governed by the Apache License, Version 2.0, included in the file
# licenses/APL2.txt.
import os
from abc import ABC, abstractmethod

from testlib.testlib import SCALES


class TestRequirements:
    def __init__(self, scale=None, min_cpus=None):

        def maybe(ReqClass, *args):
            if all(x is None for x in args):
                return None
            return ReqClass(*args)
        self.requirements = \
            {
                'scale': maybe(Scale, scale),
                'min_cpus': maybe(MinCpus, min_cpus)
            }

    def __str__(self):
        all_reqs = sorted(self.as_list(), key=lambda x: x.__class__.__name__)
        return ','.join([str(req) for req in all_reqs])

    def __repr__(self):
        return str(self)

    def as_list(self):
        return list(filter(lambda x: x is not None, self.requirements.values()))

    def scale_is_met(self, env):
        scale = self.requirements['scale']
        return scale is None or scale.is_met(env)

    def get_unmet_requirements(self, env):
        return [r for r in self.as_list() if not r.is_met(env)]


class Requirement(ABC):
    def __init__(self, **kwargs):
        # In order to provide a string representation of the requirement, we
        # need to be provided with a names and values in the form of kwargs
        self._kwargs = kwargs

    def __str__(self):
        return ",".join([f"{key}={value}"
                        for key, value in self._kwargs.items()
                        if value is not None])

    def __repr__(self):
        return self.__dict__.__repr__()

    def __eq__(self, other):
        return str(self) == str(other)

    @abstractmethod
    def is_met(self, env):
        raise NotImplementedError()


class Scale(Requirement):
    """quick testsets run in seconds; desk ones are Monte Carlo campaigns
    that take minutes and only run with --scale desk."""

    def __init__(self, scale):
        super().__init__(scale=scale)
        if scale not in SCALES:
            raise ValueError(f"Scale must be in {SCALES}")
        self.scale = scale

    def is_met(self, env):
        return env.allows(self.scale)


class MinCpus(Requirement):
    def __init__(self, min_cpus):
        super().__init__(min_cpus=min_cpus)
        self.min_cpus = min_cpus

    def is_met(self, env):
        return (os.cpu_count() or 1) >= self.min_cpus
