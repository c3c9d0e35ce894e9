"""Bank-level configuration, communication cost constants, and the energy ledger."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .cluster import MAC_DELAY_NS, MAC_ENERGY_NOMINAL_PJ

UJ_TO_PJ = 1e6

INTRA_DELAY_NS = 63.0
INTRA_ENERGY_UJ = 0.028
INTER_DELAY_NS = {1: 148.5, 7: 196.5, 15: 260.5}
INTER_ENERGY_UJ = {1: 0.09, 7: 0.12, 15: 0.17}
HOP_CLASSES = (1, 7, 15)


class HopClassError(ValueError):
    """Hop count outside the published inter-subarray classes."""


@dataclass(frozen=True)
class SystemConfig:
    cluster_count: int = 256
    clusters_per_subarray: int = 16
    precision_bits: int = 8

    def __post_init__(self):
        if self.cluster_count < 1:
            raise ValueError("cluster_count must be >= 1")
        if self.clusters_per_subarray < 1 or self.cluster_count % self.clusters_per_subarray:
            raise ValueError("clusters_per_subarray must divide cluster_count")
        if self.precision_bits not in (4, 8, 16):
            raise ValueError("precision_bits must be one of {4, 8, 16}")


@dataclass(frozen=True)
class CommProfile:
    intra_delay_ns: float = INTRA_DELAY_NS
    intra_energy_uj: float = INTRA_ENERGY_UJ
    inter_delay_ns: dict = field(default_factory=lambda: dict(INTER_DELAY_NS))
    inter_energy_uj: dict = field(default_factory=lambda: dict(INTER_ENERGY_UJ))


def hop_class(hops: int) -> int:
    """Map a hop count UP to the next published class (no interpolation)."""
    if hops < 1:
        raise HopClassError(f"hop count must be >= 1, got {hops}")
    for cls in HOP_CLASSES:
        if hops <= cls:
            return cls
    raise HopClassError(f"hop count {hops} exceeds the largest published class (15)")


@dataclass
class EnergyLedger:
    """Event-sourced time/energy totals; totals always equal the event-log sums."""

    compute_ns: float = 0.0
    comm_ns: float = 0.0
    compute_pj: float = 0.0
    comm_pj: float = 0.0
    events: list[tuple[str, int, float, float]] = field(default_factory=list)

    def account_macs(self, cfg: SystemConfig, mac_count: int) -> "EnergyLedger":
        """Charge mac_count MACs spread evenly over all clusters (ceiling on stragglers)."""
        if mac_count < 0:
            raise ValueError("mac_count must be nonnegative")
        if mac_count == 0:
            return self
        ns = math.ceil(mac_count / cfg.cluster_count) * MAC_DELAY_NS
        pj = mac_count * MAC_ENERGY_NOMINAL_PJ
        self.compute_ns += ns
        self.compute_pj += pj
        self.events.append(("mac", mac_count, ns, pj))
        return self

    def account_transfer(self, kind: str, hops: int | None = None) -> "EnergyLedger":
        if kind == "intra":
            ns, pj = INTRA_DELAY_NS, INTRA_ENERGY_UJ * UJ_TO_PJ
            label = "intra"
        elif kind == "inter":
            cls = hop_class(1 if hops is None else hops)
            ns, pj = INTER_DELAY_NS[cls], INTER_ENERGY_UJ[cls] * UJ_TO_PJ
            label = f"inter[{cls}]"
        else:
            raise ValueError(f"unknown transfer kind {kind!r}")
        self.comm_ns += ns
        self.comm_pj += pj
        self.events.append((label, 1, ns, pj))
        return self

    @property
    def mac_count(self) -> int:
        return sum(n for cat, n, _, _ in self.events if cat == "mac")

    def event_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for cat, n, _, _ in self.events:
            counts[cat] = counts.get(cat, 0) + n
        return counts

    def summary(self) -> dict:
        """Exact totals plus per-category breakdown; idempotent."""
        breakdown: dict[str, dict] = {}
        for cat, n, ns, pj in self.events:
            slot = breakdown.setdefault(cat, {"count": 0, "ns": 0.0, "pj": 0.0})
            slot["count"] += n
            slot["ns"] += ns
            slot["pj"] += pj
        return {
            "total_ns": self.compute_ns + self.comm_ns,
            "total_pj": self.compute_pj + self.comm_pj,
            "compute_ns": self.compute_ns,
            "comm_ns": self.comm_ns,
            "compute_pj": self.compute_pj,
            "comm_pj": self.comm_pj,
            "breakdown": breakdown,
        }

    def to_csv(self) -> str:
        """Per-category export: category, count, ns, pJ."""
        lines = ["category,count,ns,pj"]
        for cat, slot in sorted(self.summary()["breakdown"].items()):
            lines.append(f"{cat},{slot['count']},{slot['ns']!r},{slot['pj']!r}")
        return "\n".join(lines) + "\n"

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        """Fold another run's event log into this ledger."""
        for cat, n, ns, pj in other.events:
            self.events.append((cat, n, ns, pj))
            if cat == "mac":
                self.compute_ns += ns
                self.compute_pj += pj
            else:
                self.comm_ns += ns
                self.comm_pj += pj
        return self
