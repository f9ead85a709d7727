import pytest

from ddnsim import (
    DataWord,
    Host,
    RequestKind,
    TraceError,
    TraceEvent,
    parse_trace,
    word_from_hex,
)


def w(*levels):
    return DataWord(tuple(levels), 3)


def ev_w(cache_id, payload="0xABC", line=0):
    return TraceEvent("W", cache_id=cache_id, payload=word_from_hex(payload, 4, 3), line=line)


def ev_u(cache_id, payload="0x123", line=0):
    return TraceEvent("U", cache_id=cache_id, payload=word_from_hex(payload, 4, 3), line=line)


@pytest.fixture
def host(make_controller):
    return Host(make_controller("DdnRandom"), capacity=64, flush_idle_threshold=10)


# -- parsing ----------------------------------------------------------------


def test_parse_trace_grammar():
    text = "\n".join(
        [
            "# a comment",
            "",
            "W 5 0xABC",
            "T 3",
            "F",
            "U 5 0x123",
            "I 5",
            "D 5",
        ]
    )
    events = parse_trace(text, 4, 3)
    assert [e.kind for e in events] == ["W", "T", "F", "U", "I", "D"]
    assert events[0].payload == word_from_hex("0xABC", 4, 3)
    assert events[1].ticks == 3
    assert events[3].cache_id == 5
    assert events[0].line == 3


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("Q 1", "unknown event"),
        ("W 5", "needs <id> <hexpayload>"),
        ("W x 0xABC", "decimal integer"),
        ("W -1 0xABC", "decimal integer"),
        ("W 5 0xAB", "bits"),
        ("W 5 0xZZZ", "hex"),
        ("U 9 0x111", "before any W"),
        ("T x", "tick count"),
        ("T", "tick count"),
        ("F 1", "no arguments"),
        ("I", "needs <id>"),
    ],
)
def test_parse_trace_rejects_malformed_lines(line, fragment):
    with pytest.raises(TraceError) as err:
        parse_trace(f"# leading comment\n{line}\n", 4, 3)
    assert "line 2" in str(err.value)
    assert fragment in str(err.value)


def test_parse_trace_u_after_w_is_fine():
    events = parse_trace("W 9 0xABC\nU 9 0x111\n", 4, 3)
    assert [e.kind for e in events] == ["W", "U"]


# -- protocol ---------------------------------------------------------------


def test_flush_then_update_emits_exactly_one_request(host):
    assert host.apply_event(ev_w(5)) == []
    host.apply_event(TraceEvent("F"))
    reqs = host.apply_event(ev_u(5))
    assert len(reqs) == 1
    assert reqs[0].cache_id == 5 and reqs[0].kind is RequestKind.INVALIDATE
    # the flushed copy is already invalid; a second update emits nothing
    assert host.apply_event(ev_u(5, "0x456")) == []
    # but a re-flush arms it again
    host.apply_event(TraceEvent("F"))
    assert len(host.apply_event(ev_u(5, "0x789"))) == 1


def test_update_without_flush_emits_nothing(host):
    host.apply_event(ev_w(5))
    assert host.apply_event(ev_u(5)) == []
    assert host.request_log == []


def test_update_unknown_id_is_a_trace_error(host):
    with pytest.raises(TraceError):
        host.apply_event(ev_u(9, line=4))


def test_time_advances_without_dirty_slots(host):
    host.apply_event(TraceEvent("T", ticks=7))
    assert host.now == 7
    assert host.request_log == []


def test_flush_idle_inclusive_boundary(host):
    host.apply_event(ev_w(5))
    host.apply_event(TraceEvent("T", ticks=9))
    assert host.controller.entry(5) is None  # 9 < threshold 10
    host.apply_event(TraceEvent("T", ticks=1))
    entry = host.controller.entry(5)
    assert entry is not None and entry.valid
    assert entry.written_at == 10
    assert not host.slots[5].dirty


def test_clean_slots_never_reflushed(host):
    host.apply_event(ev_w(5))
    host.apply_event(TraceEvent("F"))
    programs = host.controller.device.ledger.program_us
    host.apply_event(TraceEvent("T", ticks=50))
    assert host.controller.device.ledger.program_us == programs


def test_idle_flush_order_is_ascending(host):
    host.apply_event(ev_w(9))
    host.apply_event(ev_w(2, "0x222"))
    assert host.flush_idle(host.now + 10) == [2, 9]


def test_flush_all_is_immediate(host):
    host.apply_event(ev_w(1))
    host.apply_event(ev_w(2, "0x222"))
    host.apply_event(TraceEvent("F"))
    assert host.controller.entry(1).valid and host.controller.entry(2).valid


def test_invalidate_and_deidentify_events(host):
    host.apply_event(ev_w(5))
    host.apply_event(TraceEvent("F"))
    (req,) = host.apply_event(TraceEvent("I", cache_id=5))
    assert req.kind is RequestKind.INVALIDATE
    assert not host.controller.entry(5).valid
    # DRAM copy is untouched by the NVM-side deletion
    assert host.read_cache(5) == word_from_hex("0xABC", 4, 3)
    host.apply_event(ev_w(6, "0x321"))
    host.apply_event(TraceEvent("F"))
    (req,) = host.apply_event(TraceEvent("D", cache_id=6))
    assert req.kind is RequestKind.DE_IDENTIFY


def test_invalidate_requires_flushed_copy(host):
    host.apply_event(ev_w(5))
    with pytest.raises(TraceError):
        host.apply_event(TraceEvent("I", cache_id=5, line=2))
    with pytest.raises(TraceError):
        host.apply_event(TraceEvent("I", cache_id=99, line=3))


def test_double_invalidate_is_rejected(host):
    host.apply_event(ev_w(5))
    host.apply_event(TraceEvent("F"))
    host.apply_event(TraceEvent("I", cache_id=5))
    with pytest.raises(TraceError):
        host.apply_event(TraceEvent("I", cache_id=5, line=9))


def test_capacity_eviction_flushes_dirty_lru(make_controller):
    host = Host(make_controller("MarkOnly"), capacity=2, flush_idle_threshold=10)
    host.apply_event(ev_w(1, "0x111"))
    host.apply_event(ev_w(2, "0x222"))
    host.apply_event(ev_w(3, "0x333"))
    assert len(host.slots) == 2
    assert 1 not in host.slots  # LRU tie broken by smallest id
    entry = host.controller.entry(1)
    assert entry is not None and entry.valid
    # the evicted payload is still readable through the NVM copy
    assert host.read_cache(1) == word_from_hex("0x111", 4, 3)


def test_update_after_eviction_reinserts_and_invalidates(make_controller):
    host = Host(make_controller("MarkOnly"), capacity=1, flush_idle_threshold=10)
    host.apply_event(ev_w(1, "0x111"))
    host.apply_event(ev_w(2, "0x222"))  # evicts and flushes id 1
    reqs = host.apply_event(ev_u(1, "0x123"))
    assert [r.cache_id for r in reqs] == [1]
    assert host.read_cache(1) == word_from_hex("0x123", 4, 3)


def test_dram_is_authoritative(host):
    host.apply_event(ev_w(5, "0xAAA"))
    host.apply_event(TraceEvent("F"))
    host.apply_event(ev_u(5, "0xBBB"))
    assert host.read_cache(5) == word_from_hex("0xBBB", 4, 3)
    with pytest.raises(KeyError):
        host.read_cache(404)


def test_secure_scrub_through_trace(make_controller):
    controller = make_controller("DdnRandom", t_secure=10)
    host = Host(controller, capacity=8, flush_idle_threshold=1)
    events = parse_trace("W 1 0x0AB\nF\nT 15\n", 4, 3)
    host.run_trace(events)
    assert not controller.entry(1).valid
    (outcome,) = controller.collector.deletions
    assert outcome.tick == 10
    assert outcome.action == "secure-scrub"


def test_request_log_replays_identically(make_controller):
    text = "W 1 0x111\nW 2 0x222\nF\nU 1 0x123\nT 12\nU 2 0x456\nI 1\n"

    def requests():
        host = Host(make_controller("DdnRandom", seed=3), capacity=8, flush_idle_threshold=5)
        host.run_trace(parse_trace(text, 4, 3))
        return host.request_log

    assert requests() == requests()
