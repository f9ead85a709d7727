import random

import pytest

from ddnsim import (
    DeviceKind,
    Geometry,
    LatencyLedger,
    MetricsCollector,
    NvmController,
    NvmDevice,
    parse_policy,
)

# 2 slots per page, 32 slots total, 12-bit (3 hex digit) payloads
SMALL = Geometry(
    blocks=4,
    pages_per_block=4,
    cells_per_page=8,
    bits_per_cell=3,
    cells_per_cache_slot=4,
)


@pytest.fixture
def small_geometry():
    return SMALL


@pytest.fixture
def make_device():
    def build(geometry=SMALL, kind=DeviceKind.NON_OVERWRITABLE, **kwargs):
        return NvmDevice(geometry=geometry, kind=kind, **kwargs)

    return build


@pytest.fixture
def make_controller():
    def build(
        policy="DdnRandom",
        seed=7,
        geometry=SMALL,
        kind=DeviceKind.NON_OVERWRITABLE,
        t_secure=None,
        nop_limit=4,
    ):
        ledger = LatencyLedger()
        collector = MetricsCollector(ledger)
        device = NvmDevice(
            geometry=geometry, kind=kind, nop_limit=nop_limit, ledger=ledger
        )
        pol = parse_policy(policy)
        if t_secure is not None:
            from dataclasses import replace

            pol = replace(pol, t_secure=t_secure)
        return NvmController(device, pol, random.Random(seed), collector)

    return build
