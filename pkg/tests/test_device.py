import pytest

from ddnsim import (
    AddressError,
    DataWord,
    DeviceFull,
    DeviceKind,
    Geometry,
    LatencyParams,
    MonotoneViolation,
    NoFreePages,
    NopExceeded,
    NvmDevice,
    PageStatus,
    PhysAddr,
    UnknownCacheId,
)

from conftest import SMALL


def w(*levels):
    return DataWord(tuple(levels), 3)


def test_geometry_validation():
    with pytest.raises(ValueError):
        Geometry(blocks=0)
    with pytest.raises(ValueError):
        Geometry(cells_per_page=10, cells_per_cache_slot=4)
    g = SMALL
    assert g.slots_per_page == 2
    assert g.total_slots == 32
    assert g.max_level == 7
    assert g.slot_bits == 12


def test_latency_defaults_and_derived():
    lat = LatencyParams()
    assert (lat.t_read_us, lat.t_program_us, lat.t_gen_us, lat.t_erase_us) == (
        49.0,
        600.0,
        100.0,
        4000.0,
    )
    assert lat.gc_migration_per_page_us == 649.0
    with pytest.raises(ValueError):
        LatencyParams(t_read_us=-1)


def test_address_errors(make_device):
    device = make_device()
    with pytest.raises(AddressError):
        device.read_slot(PhysAddr(9, 0, 0))
    with pytest.raises(AddressError):
        device.read_slot(PhysAddr(0, 0, 2))
    with pytest.raises(AddressError):
        device.erase_block(4)


def test_read_after_program(make_device):
    device = make_device()
    addr = PhysAddr(0, 0, 0)
    device.program_slot(addr, w(1, 2, 3, 4))
    assert device.read_slot(addr) == w(1, 2, 3, 4)


def test_read_free_page_is_all_zero_and_charged(make_device):
    device = make_device()
    assert device.read_slot(PhysAddr(1, 2, 1)) == w(0, 0, 0, 0)
    assert device.ledger.read_us == 49.0


def test_program_charges_and_read_charges(make_device):
    device = make_device()
    addr = PhysAddr(0, 0, 0)
    device.program_slot(addr, w(1, 1, 1, 1))
    assert device.ledger.program_us == 600.0
    device.read_slot(addr)
    assert device.ledger.read_us == 49.0
    assert device.ledger.total_us == 649.0


def test_nand_upward_program_ok(make_device):
    device = make_device()
    addr = PhysAddr(0, 0, 0)
    device.program_slot(addr, w(4, 4, 4, 4))
    device.program_slot(addr, w(5, 7, 4, 6))
    assert device.peek_slot(addr) == w(5, 7, 4, 6)


def test_nand_downward_program_rejected_without_mutation(make_device):
    device = make_device()
    addr = PhysAddr(0, 0, 0)
    device.program_slot(addr, w(5, 5, 5, 5))
    before_ledger = device.ledger.total_us
    with pytest.raises(MonotoneViolation):
        device.program_slot(addr, w(4, 6, 5, 5))
    assert device.peek_slot(addr) == w(5, 5, 5, 5)
    assert device.ledger.total_us == before_ledger


def test_overwritable_accepts_any_levels(make_device):
    device = make_device(kind=DeviceKind.OVERWRITABLE)
    addr = PhysAddr(0, 0, 0)
    device.program_slot(addr, w(5, 5, 5, 5))
    device.program_slot(addr, w(0, 0, 0, 0))
    assert device.peek_slot(addr) == w(0, 0, 0, 0)


def test_partial_program_budget(make_device):
    device = make_device(nop_limit=2)
    addr = PhysAddr(0, 0, 0)
    device.program_slot(addr, w(0, 0, 0, 0))  # full program of a free page
    page = device.blocks[0][0]
    assert page.partial_program_count == 0
    device.partial_program(addr, w(1, 1, 1, 1))
    device.partial_program(addr, w(2, 2, 2, 2))
    assert page.partial_program_count == 2
    with pytest.raises(NopExceeded):
        device.partial_program(addr, w(3, 3, 3, 3))
    assert device.peek_slot(addr) == w(2, 2, 2, 2)


def test_overwritable_ignores_nop_budget(make_device):
    device = make_device(kind=DeviceKind.OVERWRITABLE, nop_limit=0)
    addr = PhysAddr(0, 0, 0)
    for level in range(5):
        device.program_slot(addr, w(level, level, level, level))
    assert device.peek_slot(addr) == w(4, 4, 4, 4)


def test_partial_program_leaves_other_slots_identical(make_device):
    device = make_device()
    a, b = PhysAddr(0, 0, 0), PhysAddr(0, 0, 1)
    device.program_slot(a, w(1, 2, 3, 4))
    device.program_slot(b, w(5, 6, 7, 0))
    snapshot = list(device.blocks[0][0].cells)
    device.partial_program(a, w(2, 3, 4, 5))
    after = device.blocks[0][0].cells
    assert after[4:] == snapshot[4:]  # slot b untouched
    assert device.peek_slot(b) == w(5, 6, 7, 0)


def test_wrong_slot_width_rejected(make_device):
    device = make_device()
    with pytest.raises(ValueError):
        device.program_slot(PhysAddr(0, 0, 0), DataWord((1, 2), 3))
    with pytest.raises(ValueError):
        device.program_slot(PhysAddr(0, 0, 0), DataWord((1, 2, 3, 4), 2))


def test_erase_block(make_device):
    device = make_device()
    addr = PhysAddr(1, 0, 0)
    device.program_slot(addr, w(3, 3, 3, 3))
    device.partial_program(addr, w(4, 4, 4, 4))
    before = device.ledger.total_us
    device.erase_block(1)
    assert device.ledger.total_us - before == 4000.0
    assert device.erase_counts[1] == 1
    assert device.total_erases == 1
    for page in device.blocks[1]:
        assert page.status is PageStatus.FREE
        assert page.partial_program_count == 0
        assert page.cells == [0] * 8
    assert device.peek_slot(addr) == w(0, 0, 0, 0)


def test_set_valid_bit(make_device):
    device = make_device()
    addr = device.allocate_slot()
    device.program_slot(addr, w(1, 1, 1, 1))
    device.cache_table.register(7, addr, now=3)
    entry = device.cache_table.get(7)
    assert entry.valid and entry.written_at == 3
    device.set_valid_bit(7, False, now=9)
    assert not entry.valid
    assert entry.invalidated_at == 9
    device.set_valid_bit(7, False, now=12)  # idempotent; keeps the first stamp
    assert entry.invalidated_at == 9
    with pytest.raises(UnknownCacheId):
        device.set_valid_bit(99, False, now=1)


def test_allocate_first_fit_order(make_device):
    device = make_device()
    addrs = [device.allocate_slot() for _ in range(4)]
    assert addrs == [
        PhysAddr(0, 0, 0),
        PhysAddr(0, 0, 1),
        PhysAddr(0, 1, 0),
        PhysAddr(0, 1, 1),
    ]
    device.erase_block(0)
    assert device.allocate_slot() == PhysAddr(0, 0, 0)


def test_allocate_skips_pages_out_of_budget(make_device):
    device = make_device(nop_limit=0)
    first = device.allocate_slot()
    device.program_slot(first, w(1, 1, 1, 1))
    # the sibling slot's page has no reprogram budget left, so skip it
    assert device.allocate_slot() == PhysAddr(0, 1, 0)


def test_allocate_until_full():
    geometry = Geometry(
        blocks=1, pages_per_block=1, cells_per_page=4, bits_per_cell=3,
        cells_per_cache_slot=4,
    )
    device = NvmDevice(geometry=geometry)
    device.allocate_slot()
    with pytest.raises(DeviceFull):
        device.allocate_slot()


def _stage_valid(device, cache_id, addr, word):
    device._allocated[device._linear(addr)] = True
    device.program_slot(addr, word)
    device.cache_table.register(cache_id, addr, now=0)


def test_gc_cost_empty_victim(make_device):
    device = make_device()
    before = device.ledger.snapshot()
    device.garbage_collect(2)
    delta = device.ledger.snapshot() - before
    assert delta.erase_us == 4000.0
    assert delta.gc_us == 0.0
    assert delta.total_us == 4000.0


def test_gc_cost_three_valid_pages(make_device):
    # 3 migrated pages at (49 + 600) each, plus the erase: 5947 in total
    device = make_device()
    _stage_valid(device, 1, PhysAddr(0, 0, 0), w(1, 2, 3, 4))
    _stage_valid(device, 2, PhysAddr(0, 1, 1), w(2, 3, 4, 5))
    _stage_valid(device, 3, PhysAddr(0, 3, 0), w(3, 4, 5, 6))
    before = device.ledger.snapshot()
    device.garbage_collect(0)
    delta = device.ledger.snapshot() - before
    assert delta.gc_us == 3 * 649.0 == 1947.0
    assert delta.erase_us == 4000.0
    assert delta.total_us == 5947.0


def test_gc_preserves_valid_payloads_and_drops_invalid(make_device):
    device = make_device()
    _stage_valid(device, 1, PhysAddr(0, 0, 0), w(1, 2, 3, 4))
    _stage_valid(device, 2, PhysAddr(0, 0, 1), w(5, 6, 7, 0))
    _stage_valid(device, 3, PhysAddr(0, 2, 0), w(7, 7, 7, 7))
    device.set_valid_bit(2, False, now=1)
    stale_addr = device.cache_table.get(2).addr
    payloads = device.valid_payloads()
    device.garbage_collect(0)
    assert device.valid_payloads() == payloads
    for cid in (1, 3):
        assert device.cache_table.get(cid).addr.block != 0
    # the invalidated neighbor was not migrated; its old location is erased
    assert device.peek_slot(stale_addr) == w(0, 0, 0, 0)
    assert device.page_status(stale_addr) is PageStatus.FREE


def test_gc_no_free_pages_raises_before_mutation():
    geometry = Geometry(
        blocks=2, pages_per_block=1, cells_per_page=4, bits_per_cell=3,
        cells_per_cache_slot=4,
    )
    device = NvmDevice(geometry=geometry)
    _stage_valid(device, 1, PhysAddr(0, 0, 0), w(1, 2, 3, 4))
    _stage_valid(device, 2, PhysAddr(1, 0, 0), w(4, 3, 2, 1))
    with pytest.raises(NoFreePages):
        device.garbage_collect(0)
    assert device.peek_slot(PhysAddr(0, 0, 0)) == w(1, 2, 3, 4)
    assert device.erase_counts == [0, 0]


def test_ledger_replay_identical(make_device):
    def replay(device):
        device.program_slot(PhysAddr(0, 0, 0), w(1, 1, 1, 1))
        device.read_slot(PhysAddr(0, 0, 0))
        device.partial_program(PhysAddr(0, 0, 0), w(2, 2, 2, 2))
        device.erase_block(0)
        return (
            device.ledger.read_us,
            device.ledger.program_us,
            device.ledger.erase_us,
            device.ledger.total_us,
        )

    assert replay(make_device()) == replay(make_device())


def test_reclaim_reuses_invalid_slots(make_device):
    device = make_device(kind=DeviceKind.OVERWRITABLE, reclaim_invalid_slots=True)
    addr = device.allocate_slot()
    device.program_slot(addr, w(1, 2, 3, 4))
    device.cache_table.register(5, addr, now=0)
    device.set_valid_bit(5, False, now=1)
    assert device.allocate_slot() == addr
    assert device.cache_table.get(5) is None


def test_no_reclaim_by_default(make_device):
    device = make_device(kind=DeviceKind.OVERWRITABLE)
    addr = device.allocate_slot()
    device.program_slot(addr, w(1, 2, 3, 4))
    device.cache_table.register(5, addr, now=0)
    device.set_valid_bit(5, False, now=1)
    assert device.allocate_slot() != addr
