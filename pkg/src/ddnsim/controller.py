"""NVM-side deletion controller: invalidation handling and overwrite scrubs.

The controller owns one device and one deletion policy. An invalidation
request always clears the target's valid bit; what happens to the physical
data depends on the policy:

* ``MarkOnly``      - nothing, the data stays put.
* ``EraseBased``    - garbage-collect and erase the containing block.
* ``DdnRandom``     - overwrite the slot with generated random data.
* ``DdnNonRandom``  - overwrite the slot with a fixed fill pattern.

With a secure-mode residence limit configured, even valid data is scrubbed
once it has sat in NVM for that many ticks.
"""

import re
from enum import Enum
from dataclasses import dataclass

from .cells import (
    ALL_MAX,
    DataWord,
    FillKind,
    gen_fill_word,
    gen_uniform_word,
    gen_upward_word,
)
from .device import (
    DeviceKind,
    MonotoneViolation,
    NoFreePages,
    NopExceeded,
    NvmDevice,
    PageStatus,
    PhysAddr,
)


class ProtocolError(Exception):
    """Request the controller cannot honor (unknown id, double invalidate...)."""


class RequestKind(Enum):
    INVALIDATE = "invalidate"
    DE_IDENTIFY = "de-identify"


@dataclass(frozen=True)
class InvalidationRequest:
    cache_id: int
    kind: RequestKind = RequestKind.INVALIDATE
    issued_at: int = 0


class PolicyKind(Enum):
    MARK_ONLY = "MarkOnly"
    ERASE_BASED = "EraseBased"
    DDN_RANDOM = "DdnRandom"
    DDN_NON_RANDOM = "DdnNonRandom"


@dataclass(frozen=True)
class DeletionPolicy:
    """Base deletion policy plus optional secure-mode residence limit."""

    kind: PolicyKind
    fill: FillKind | None = None
    t_secure: int | None = None

    def __post_init__(self):
        if self.kind is PolicyKind.DDN_NON_RANDOM:
            if self.fill is None:
                object.__setattr__(self, "fill", ALL_MAX)
        elif self.fill is not None:
            raise ValueError(f"{self.kind.value} takes no fill pattern")
        if self.t_secure is not None and self.t_secure < 1:
            raise ValueError(f"t_secure must be >= 1, got {self.t_secure}")

    @property
    def label(self) -> str:
        if self.kind is PolicyKind.DDN_NON_RANDOM:
            return f"{self.kind.value}({self.fill.label})"
        return self.kind.value


_POLICY_NAMES = {
    "markonly": PolicyKind.MARK_ONLY,
    "erasebased": PolicyKind.ERASE_BASED,
    "ddnrandom": PolicyKind.DDN_RANDOM,
    "ddnnonrandom": PolicyKind.DDN_NON_RANDOM,
}


def parse_policy(text: str) -> DeletionPolicy:
    """Parse a policy name like ``MarkOnly`` or ``DdnNonRandom(Level=3)``.

    Case, spaces, hyphens and underscores in the name are ignored. The
    optional fill argument (``(...)`` or ``:...``) is ``AllMax`` or a level.
    """
    m = re.fullmatch(
        r"\s*([A-Za-z _\-]+?)\s*(?:[:(]\s*([^()]*?)\s*\)?)?\s*", text
    )
    if not m:
        raise ValueError(f"unparseable policy: {text!r}")
    name, fill_spec = m.groups()
    key = re.sub(r"[\s_\-]", "", name).lower()
    kind = _POLICY_NAMES.get(key)
    if kind is None:
        known = ", ".join(sorted(_POLICY_NAMES))
        raise ValueError(f"unknown policy {name!r} (known: {known})")
    if kind is not PolicyKind.DDN_NON_RANDOM:
        if fill_spec:
            raise ValueError(f"policy {name!r} takes no argument")
        return DeletionPolicy(kind)
    fill = ALL_MAX
    if fill_spec:
        spec = fill_spec.replace(" ", "").lower()
        if spec in ("", "allmax"):
            fill = ALL_MAX
        elif spec.startswith("level="):
            fill = FillKind(int(spec[len("level="):]))
        elif spec.lstrip("-").isdigit():
            fill = FillKind(int(spec))
        else:
            raise ValueError(f"unknown fill pattern {fill_spec!r}")
    return DeletionPolicy(kind, fill)


@dataclass
class DeletionOutcome:
    """What one deletion did: action taken, cost by category, residual data.

    ``residual_cells`` counts cells of the deleted slot that still hold their
    pre-deletion level afterwards; a slot whose page was erased retains
    nothing.
    """

    cache_id: int
    tick: int
    policy: str
    action: str
    rd_us: float = 0.0
    wr_us: float = 0.0
    gen_us: float = 0.0
    erase_us: float = 0.0
    gc_us: float = 0.0
    residual_cells: int = 0
    slot_cells: int = 0
    fallback: bool = False
    error: str | None = None

    @property
    def total_us(self) -> float:
        return self.rd_us + self.wr_us + self.gen_us + self.erase_us + self.gc_us


class NvmController:
    """Handles invalidation requests and secure-mode scrubs, one at a time."""

    def __init__(self, device: NvmDevice, policy: DeletionPolicy, rng, collector=None):
        self.device = device
        self.policy = policy
        self.rng = rng
        self.collector = collector

    # -- host-facing --------------------------------------------------------

    def entry(self, cache_id: int):
        return self.device.cache_table.get(cache_id)

    def flush_write(self, cache_id: int, payload: DataWord, now: int) -> PhysAddr:
        """Store a flushed cache line: allocate, program, register as valid."""
        addr = self.device.allocate_slot()
        self.device.program_slot(addr, payload)
        self.device.cache_table.register(cache_id, addr, now)
        return addr

    def handle_invalidation(self, req: InvalidationRequest, now: int) -> DeletionOutcome:
        """Clear the valid bit, then apply the configured deletion policy.

        De-identification requests carry no data transform here; they are
        handled exactly like plain invalidations.
        """
        entry = self.device.cache_table.get(req.cache_id)
        if entry is None:
            raise ProtocolError(f"invalidation of unknown cache_id {req.cache_id}")
        if not entry.valid:
            raise ProtocolError(f"cache_id {req.cache_id} is already invalid")
        return self._scrub(req.cache_id, entry, now, secure=False)

    def secure_tick(self, now: int) -> list:
        """Scrub every valid entry that has resided at least t_secure ticks.

        Scrubbed entries go invalid, so each is scrubbed exactly once.
        Outcomes come back in ascending cache_id order.
        """
        if self.policy.t_secure is None:
            raise ProtocolError("secure mode not configured")
        due = [
            (cid, entry)
            for cid, entry in self.device.cache_table.valid_entries()
            if now - entry.written_at >= self.policy.t_secure
        ]
        return [self._scrub(cid, entry, now, secure=True) for cid, entry in due]

    # -- deletion machinery -------------------------------------------------

    def ddn_process(self, addr: PhysAddr) -> DataWord:
        """Overwrite the slot at addr with generated data; return what was
        written.

        Overwritable devices take a full-range uniform random word. NAND-like
        devices are read first so the replacement can be drawn upward from the
        current levels. A fixed fill pattern skips both the read and the
        generation.
        """
        dev = self.device
        if dev.page_status(addr) is not PageStatus.PROGRAMMED:
            raise ProtocolError(f"ddn_process on unprogrammed page at {addr}")
        g = dev.geometry
        fill = self.policy.fill if self.policy.kind is PolicyKind.DDN_NON_RANDOM else None
        if fill is not None:
            word = gen_fill_word(fill, g.cells_per_cache_slot, g.bits_per_cell)
            if dev.kind is DeviceKind.OVERWRITABLE:
                dev.program_slot(addr, word)
            else:
                dev.partial_program(addr, word)
        elif dev.kind is DeviceKind.OVERWRITABLE:
            dev.ledger.charge_gen(dev.latency.t_gen_us)
            word = gen_uniform_word(g.cells_per_cache_slot, g.bits_per_cell, self.rng)
            dev.program_slot(addr, word)
        else:
            current = dev.read_slot(addr)
            dev.ledger.charge_gen(dev.latency.t_gen_us)
            word = gen_upward_word(current, self.rng)
            dev.partial_program(addr, word)
        return word

    def _scrub(self, cache_id: int, entry, now: int, secure: bool) -> DeletionOutcome:
        dev = self.device
        addr = entry.addr
        pre = dev.peek_slot(addr)
        dev.set_valid_bit(cache_id, False, now)
        before = dev.ledger.snapshot()
        fallback = False
        error = None
        kind = self.policy.kind
        if secure or kind in (PolicyKind.DDN_RANDOM, PolicyKind.DDN_NON_RANDOM):
            action = "secure-scrub" if secure else "ddn-overwrite"
            try:
                self.ddn_process(addr)
            except NopExceeded:
                # Out of in-place reprogram budget: physically delete instead.
                action = "erase-fallback"
                fallback = True
                try:
                    dev.garbage_collect(addr.block)
                except NoFreePages as exc:
                    error = str(exc)
            except (MonotoneViolation, NoFreePages) as exc:
                error = str(exc)
        elif kind is PolicyKind.MARK_ONLY:
            action = "mark-only"
        else:  # PolicyKind.ERASE_BASED
            action = "gc-erase"
            try:
                dev.garbage_collect(addr.block)
            except NoFreePages as exc:
                error = str(exc)
        delta = dev.ledger.snapshot() - before
        if dev.page_status(addr) is PageStatus.FREE:
            residual = 0
        else:
            post = dev.peek_slot(addr)
            residual = sum(1 for a, b in zip(pre.levels, post.levels) if a == b)
        outcome = DeletionOutcome(
            cache_id=cache_id,
            tick=now,
            policy=self.policy.label,
            action=action,
            rd_us=delta.rd_us,
            wr_us=delta.wr_us,
            gen_us=delta.gen_us,
            erase_us=delta.erase_us,
            gc_us=delta.gc_us,
            residual_cells=residual,
            slot_cells=len(pre),
            fallback=fallback,
            error=error,
        )
        if self.collector is not None:
            self.collector.record_deletion(outcome)
        return outcome
