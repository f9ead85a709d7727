"""CPU/DRAM front-end: applies trace events and talks to the NVM controller.

Writes land in DRAM. Dirty lines that sit unused for the idle threshold are
flushed to NVM; updating a line whose flushed copy is still valid sends the
controller an invalidation request for that copy. The host owns the tick
clock: ``T n`` advances it one tick at a time, running idle flushes and (when
configured) secure-mode scrubs at every tick.

Trace grammar, one event per line (``#`` starts a comment):

    W <id> <hexpayload>   write a cache line into DRAM
    U <id> <hexpayload>   update a line; invalidates a valid flushed copy
    I <id>                invalidate the flushed copy
    D <id>                de-identification request for the flushed copy
    T <n>                 advance time n ticks
    F                     flush all dirty lines now

``<id>`` is a decimal integer; ``<hexpayload>`` is 0x-prefixed hex exactly
as wide as one cache slot.
"""

from dataclasses import dataclass

from .cells import DataWord, word_from_hex
from .controller import (
    InvalidationRequest,
    NvmController,
    ProtocolError,
    RequestKind,
)


class TraceError(Exception):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    cache_id: int | None = None
    payload: DataWord | None = None
    ticks: int | None = None
    line: int = 0


def _parse_id(token: str, lineno: int) -> int:
    if not token.isdigit():
        raise TraceError(f"cache id must be a decimal integer, got {token!r}", lineno)
    return int(token)


def parse_trace(text: str, cells_per_slot: int, bits_per_cell: int) -> list:
    """Parse trace text into events, rejecting malformed lines by number."""
    events = []
    written = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        op = parts[0]
        if op in ("W", "U"):
            if len(parts) != 3:
                raise TraceError(f"{op} needs <id> <hexpayload>", lineno)
            cache_id = _parse_id(parts[1], lineno)
            try:
                payload = word_from_hex(parts[2], cells_per_slot, bits_per_cell)
            except ValueError as exc:
                raise TraceError(str(exc), lineno) from exc
            if op == "U" and cache_id not in written:
                raise TraceError(f"U for cache id {cache_id} before any W", lineno)
            written.add(cache_id)
            events.append(TraceEvent(op, cache_id=cache_id, payload=payload, line=lineno))
        elif op in ("I", "D"):
            if len(parts) != 2:
                raise TraceError(f"{op} needs <id>", lineno)
            events.append(
                TraceEvent(op, cache_id=_parse_id(parts[1], lineno), line=lineno)
            )
        elif op == "T":
            if len(parts) != 2 or not parts[1].isdigit():
                raise TraceError("T needs a non-negative tick count", lineno)
            events.append(TraceEvent("T", ticks=int(parts[1]), line=lineno))
        elif op == "F":
            if len(parts) != 1:
                raise TraceError("F takes no arguments", lineno)
            events.append(TraceEvent("F", line=lineno))
        else:
            raise TraceError(f"unknown event {op!r}", lineno)
    return events


@dataclass
class DramSlot:
    payload: DataWord
    dirty: bool
    last_used: int


class Host:
    """Single-threaded event applier owning the DRAM cache and tick clock."""

    def __init__(
        self,
        controller: NvmController,
        capacity: int = 65536,
        flush_idle_threshold: int = 10,
    ):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        if flush_idle_threshold < 0:
            raise ValueError("flush_idle_threshold must be >= 0")
        self.controller = controller
        self.capacity = capacity
        self.flush_idle_threshold = flush_idle_threshold
        self.slots = {}
        self._dirty = set()  # ids with slot.dirty, kept in sync for O(dirty) flushes
        self.now = 0
        self.request_log = []

    # -- trace replay -------------------------------------------------------

    def run_trace(self, events):
        for event in events:
            self.apply_event(event)

    def apply_event(self, event: TraceEvent) -> list:
        """Apply one event; returns the invalidation requests it emitted."""
        try:
            return self._apply(event)
        except ProtocolError as exc:
            raise TraceError(str(exc), event.line) from exc

    def _apply(self, event: TraceEvent) -> list:
        kind = event.kind
        if kind == "W":
            self._write(event.cache_id, event.payload)
            return []
        if kind == "U":
            known = event.cache_id in self.slots or self.controller.entry(event.cache_id)
            if not known:
                raise TraceError(f"U for unknown cache id {event.cache_id}", event.line)
            self._write(event.cache_id, event.payload)
            req = self._invalidate_if_valid(event.cache_id, RequestKind.INVALIDATE)
            return [req] if req else []
        if kind in ("I", "D"):
            if self.controller.entry(event.cache_id) is None:
                raise TraceError(
                    f"no flushed copy for cache id {event.cache_id}", event.line
                )
            req_kind = RequestKind.INVALIDATE if kind == "I" else RequestKind.DE_IDENTIFY
            req = InvalidationRequest(event.cache_id, req_kind, self.now)
            self.request_log.append(req)
            self.controller.handle_invalidation(req, self.now)
            return [req]
        if kind == "T":
            secure = self.controller.policy.t_secure is not None
            for _ in range(event.ticks):
                self.now += 1
                self.flush_idle(self.now)
                if secure:
                    self.controller.secure_tick(self.now)
            return []
        if kind == "F":
            self.flush_all(self.now)
            return []
        raise TraceError(f"unhandled event kind {kind!r}", event.line)

    # -- DRAM side ----------------------------------------------------------

    def _write(self, cache_id: int, payload: DataWord):
        slot = self.slots.get(cache_id)
        if slot is None:
            if len(self.slots) >= self.capacity:
                self._evict_one()
            self.slots[cache_id] = DramSlot(payload, True, self.now)
        else:
            slot.payload = payload
            slot.dirty = True
            slot.last_used = self.now
        self._dirty.add(cache_id)

    def _evict_one(self):
        # LRU victim; ties go to the smallest id for determinism.
        victim = min(self.slots.items(), key=lambda kv: (kv[1].last_used, kv[0]))[0]
        if self.slots[victim].dirty:
            self._flush(victim, self.now)
        del self.slots[victim]
        self._dirty.discard(victim)

    def _invalidate_if_valid(self, cache_id: int, req_kind: RequestKind):
        entry = self.controller.entry(cache_id)
        if entry is None or not entry.valid:
            return None
        req = InvalidationRequest(cache_id, req_kind, self.now)
        self.request_log.append(req)
        self.controller.handle_invalidation(req, self.now)
        return req

    def _flush(self, cache_id: int, now: int):
        slot = self.slots[cache_id]
        self.controller.flush_write(cache_id, slot.payload, now)
        slot.dirty = False
        self._dirty.discard(cache_id)

    def flush_idle(self, now: int) -> list:
        """Flush dirty lines idle for at least the threshold, ascending id."""
        due = sorted(
            cid
            for cid in self._dirty
            if now - self.slots[cid].last_used >= self.flush_idle_threshold
        )
        for cid in due:
            self._flush(cid, now)
        return due

    def flush_all(self, now: int) -> list:
        """Flush every dirty line immediately, ascending id."""
        due = sorted(self._dirty)
        for cid in due:
            self._flush(cid, now)
        return due

    def read_cache(self, cache_id: int) -> DataWord:
        """Latest payload for an id: DRAM copy first, else the flushed copy."""
        slot = self.slots.get(cache_id)
        if slot is not None:
            return slot.payload
        entry = self.controller.entry(cache_id)
        if entry is None:
            raise KeyError(f"cache id {cache_id} unknown to host and NVM")
        return self.controller.device.read_slot(entry.addr)
