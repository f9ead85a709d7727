"""Composition root: replay one trace under each policy and render reports.

Each policy gets a fresh device, controller, host, and random stream built
from the same seed, so runs are independent and the whole report is a pure
function of (config, trace, seed).
"""

import random
import hashlib
from dataclasses import dataclass

from .cells import word_to_hex
from .config import RunConfig
from .controller import NvmController
from .device import NvmDevice
from .host import Host, TraceEvent
from .metrics import (
    LatencyLedger,
    MetricsCollector,
    PolicyRun,
    comparison_rows,
    render_comparison_csv,
    render_deletions_jsonl,
)


@dataclass
class RunReport:
    runs: list
    rows: list
    csv_text: str
    jsonl_text: str


def canonical_event(event: TraceEvent) -> str:
    if event.kind in ("W", "U"):
        return f"{event.kind} {event.cache_id} {word_to_hex(event.payload)}"
    if event.kind in ("I", "D"):
        return f"{event.kind} {event.cache_id}"
    if event.kind == "T":
        return f"T {event.ticks}"
    return event.kind


def trace_fingerprint(events) -> str:
    digest = hashlib.sha256()
    for event in events:
        digest.update(canonical_event(event).encode())
        digest.update(b"\n")
    return digest.hexdigest()


def run_policy(config: RunConfig, policy, events) -> MetricsCollector:
    """Replay the events under one policy on fresh state; return its metrics."""
    ledger = LatencyLedger()
    collector = MetricsCollector(ledger)
    device = NvmDevice(
        geometry=config.geometry(),
        kind=config.device_kind,
        latency=config.latency(),
        nop_limit=config.nop_limit,
        ledger=ledger,
        reclaim_invalid_slots=config.reclaim_invalid_slots,
    )
    controller = NvmController(device, policy, random.Random(config.seed), collector)
    host = Host(
        controller,
        capacity=config.dram_capacity,
        flush_idle_threshold=config.flush_idle_threshold,
    )
    host.run_trace(events)
    return collector


def run(config: RunConfig, events) -> RunReport:
    """Run every configured policy over the same events and build reports."""
    config.validate()
    fingerprint = trace_fingerprint(events)
    runs = [
        PolicyRun(policy.label, run_policy(config, policy, events), fingerprint)
        for policy in config.run_policies()
    ]
    return RunReport(
        runs=runs,
        rows=comparison_rows(runs),
        csv_text=render_comparison_csv(runs),
        jsonl_text=render_deletions_jsonl(runs),
    )


def synthetic_trace(
    count: int,
    update_ratio: float,
    seed: int,
    cells_per_slot: int,
    bits_per_cell: int,
) -> str:
    """Generate a write/flush/update workload as trace text.

    Every line is written and flushed; a fraction ``update_ratio`` of them is
    then updated, which invalidates the flushed copy. Payloads are uniform
    random bits, so cell levels are uniform over the level range.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if not 0.0 <= update_ratio <= 1.0:
        raise ValueError(f"update_ratio must be in [0, 1], got {update_ratio}")
    slot_bits = cells_per_slot * bits_per_cell
    if slot_bits % 4:
        raise ValueError(f"slot width {slot_bits} bits is not hex-addressable")
    digits = slot_bits // 4
    rng = random.Random(seed)
    lines = [f"# synthetic workload: {count} writes, update ratio {update_ratio}"]
    for i in range(count):
        lines.append(f"W {i} 0x{rng.getrandbits(slot_bits):0{digits}X}")
        lines.append("F")
        if rng.random() < update_ratio:
            lines.append(f"U {i} 0x{rng.getrandbits(slot_bits):0{digits}X}")
    return "\n".join(lines) + "\n"
