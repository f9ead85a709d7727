"""Device-time accounting and remanence reporting for deletion-policy runs.

The ledger tracks microseconds per operation category. A collector owns one
ledger plus the per-deletion records a run produced, and the report helpers
turn a set of per-policy collectors into a comparison table (CSV) and a
deletion log (JSON lines). All rendering is deterministic byte-for-byte for
identical runs.
"""

import json
from dataclasses import dataclass


class ReportError(Exception):
    """Raised when report inputs are inconsistent (e.g. different traces)."""


@dataclass(frozen=True)
class CostBreakdown:
    """Microseconds per operation category."""

    rd_us: float = 0.0
    wr_us: float = 0.0
    gen_us: float = 0.0
    erase_us: float = 0.0
    gc_us: float = 0.0

    @property
    def total_us(self) -> float:
        return self.rd_us + self.wr_us + self.gen_us + self.erase_us + self.gc_us

    def __sub__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(
            self.rd_us - other.rd_us,
            self.wr_us - other.wr_us,
            self.gen_us - other.gen_us,
            self.erase_us - other.erase_us,
            self.gc_us - other.gc_us,
        )


class LatencyLedger:
    """Running per-category device-time totals in microseconds."""

    def __init__(self):
        self.read_us = 0.0
        self.program_us = 0.0
        self.gen_us = 0.0
        self.erase_us = 0.0
        self.gc_migration_us = 0.0

    def charge_read(self, us: float):
        self.read_us += us

    def charge_program(self, us: float):
        self.program_us += us

    def charge_gen(self, us: float):
        self.gen_us += us

    def charge_erase(self, us: float):
        self.erase_us += us

    def charge_gc_migration(self, us: float):
        self.gc_migration_us += us

    @property
    def total_us(self) -> float:
        return (
            self.read_us
            + self.program_us
            + self.gen_us
            + self.erase_us
            + self.gc_migration_us
        )

    def snapshot(self) -> CostBreakdown:
        return CostBreakdown(
            self.read_us,
            self.program_us,
            self.gen_us,
            self.erase_us,
            self.gc_migration_us,
        )


@dataclass(frozen=True)
class RemanenceSample:
    """Cumulative recoverability at one tick: residual cells / deleted cells."""

    tick: int
    invalidated_cells_total: int
    residual_cells: int
    remanence_rate: float


class MetricsCollector:
    """Accumulates one policy run: ledger, deletion records, remanence counts."""

    def __init__(self, ledger: LatencyLedger):
        self.ledger = ledger
        self.deletions = []
        self.invalidated_cells_total = 0
        self.residual_cells = 0
        self._curve = {}  # tick -> cumulative sample after the tick's last deletion

    def record_deletion(self, outcome):
        self.deletions.append(outcome)
        self.invalidated_cells_total += outcome.slot_cells
        self.residual_cells += outcome.residual_cells
        rate = self.residual_cells / self.invalidated_cells_total
        self._curve[outcome.tick] = RemanenceSample(
            outcome.tick, self.invalidated_cells_total, self.residual_cells, rate
        )

    def remanence_curve(self):
        return [self._curve[t] for t in sorted(self._curve)]

    @property
    def final_remanence_rate(self) -> float:
        if not self.invalidated_cells_total:
            return 0.0
        return self.residual_cells / self.invalidated_cells_total

    def mean_costs(self) -> CostBreakdown:
        """Mean per-deletion cost over the recorded deletions."""
        n = len(self.deletions)
        if not n:
            return CostBreakdown()
        return CostBreakdown(
            sum(d.rd_us for d in self.deletions) / n,
            sum(d.wr_us for d in self.deletions) / n,
            sum(d.gen_us for d in self.deletions) / n,
            sum(d.erase_us for d in self.deletions) / n,
            sum(d.gc_us for d in self.deletions) / n,
        )


@dataclass
class PolicyRun:
    """One policy's finished run, keyed by the trace it replayed."""

    label: str
    collector: MetricsCollector
    trace_fingerprint: str


def _fmt(x: float) -> str:
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return s or "0"


def comparison_rows(runs) -> list:
    """One row per policy: mean per-deletion cost by category, run total,
    final remanence rate. All runs must have replayed the same trace."""
    runs = list(runs)
    if not runs:
        raise ReportError("no policy runs to compare")
    fingerprints = {r.trace_fingerprint for r in runs}
    if len(fingerprints) > 1:
        raise ReportError("policy runs replayed different traces")
    rows = []
    for r in runs:
        mean = r.collector.mean_costs()
        rows.append(
            {
                "policy": r.label,
                "rd_us": mean.rd_us,
                "wr_us": mean.wr_us,
                "gen_us": mean.gen_us,
                "erase_us": mean.erase_us,
                "gc_us": mean.gc_us,
                "total_us": r.collector.ledger.total_us,
                "remanence": r.collector.final_remanence_rate,
            }
        )
    return rows


def render_comparison_csv(runs) -> str:
    lines = ["POLICY,RD,WR,GEN,ERASE,GC,TOTAL_US,REMANENCE"]
    for row in comparison_rows(runs):
        lines.append(
            ",".join(
                [
                    row["policy"],
                    _fmt(row["rd_us"]),
                    _fmt(row["wr_us"]),
                    _fmt(row["gen_us"]),
                    _fmt(row["erase_us"]),
                    _fmt(row["gc_us"]),
                    _fmt(row["total_us"]),
                    _fmt(row["remanence"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def render_deletions_jsonl(runs) -> str:
    """One JSON object per deletion record, grouped by policy in run order."""
    lines = []
    for r in runs:
        for d in r.collector.deletions:
            lines.append(
                json.dumps(
                    {
                        "tick": d.tick,
                        "cache_id": d.cache_id,
                        "policy": r.label,
                        "rd_us": d.rd_us,
                        "wr_us": d.wr_us,
                        "gen_us": d.gen_us,
                        "erase_us": d.erase_us,
                        "gc_us": d.gc_us,
                        "residual_cells": d.residual_cells,
                        "slot_cells": d.slot_cells,
                    }
                )
            )
    return "\n".join(lines) + ("\n" if lines else "")
