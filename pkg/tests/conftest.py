"""Shared builders for the test suite."""

import random

import pytest

from vmplace import (
    DELL_R620,
    IBM_X3250,
    HostSpec,
    ProblemInstance,
    VmRequest,
)


def ibm_host(host_id: int) -> HostSpec:
    return HostSpec(host_id, 4, 2933.0, IBM_X3250)


def dell_host(host_id: int) -> HostSpec:
    return HostSpec(host_id, 16, 2200.0, DELL_R620)


def worked_example_instance() -> ProblemInstance:
    """4 IBM + 1 Dell hosts, 16 concurrent single-PE full-core VMs.

    With per-core demand capping, the 16 VMs exactly saturate either four IBM
    hosts (4 x 2933 each) or the one Dell host (16 x 2200).
    """
    hosts = tuple(ibm_host(i) for i in range(4)) + (dell_host(4),)
    vms = tuple(VmRequest(f"vm{i:02d}", 1, 2933.0, 0, 8100) for i in range(16))
    return ProblemInstance(vms, hosts, cap_demand_to_core=True)


def random_small_instance(seed: int, max_vms: int = 6, max_hosts: int = 3) -> ProblemInstance:
    """A small mixed-fleet instance; may be infeasible for some draws."""
    rng = random.Random(seed)
    n = rng.randint(2, max_vms)
    m = rng.randint(2, max_hosts)
    hosts = tuple(
        ibm_host(h) if rng.random() < 0.5 else dell_host(h) for h in range(m)
    )
    vms = tuple(
        VmRequest(
            f"v{i}",
            rng.randint(1, 2),
            float(rng.randint(5, 22)) * 100.0,
            rng.randrange(0, 4) * 900,
            rng.randrange(1, 4) * 900,
        )
        for i in range(n)
    )
    return ProblemInstance(vms, hosts)


@pytest.fixture
def worked_example() -> ProblemInstance:
    return worked_example_instance()
