"""Nine-core cluster: router, microprogram interpreter, and the 8-step 8-bit MAC.

The MAC decomposes a*b into four 4x4-bit partial products computed in parallel
(step 1) followed by seven nibble-serial addition steps, filling the published
6.4 ns / 0.8 ns-per-step budget exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lut_core import (
    CORE_DELAY_NS,
    FunctionTable,
    LutCore,
    OpTag,
    UnprogrammedCoreError,
    build_function_table,
)

CLUSTER_CORES = 9
MAC_STEPS = 8
MAC_DELAY_NS = 6.4
CLUSTER_POWER_MW_LOW = 8.2
CLUSTER_POWER_MW_HIGH = 11.0
CLUSTER_POWER_MW_NOMINAL = (CLUSTER_POWER_MW_LOW + CLUSTER_POWER_MW_HIGH) / 2
CLUSTER_AREA_UM2 = 37769.81

ACCUMULATOR_BITS = 32
_ACC_LIMIT = 1 << ACCUMULATOR_BITS


class AccumulatorOverflowError(RuntimeError):
    """32-bit cluster accumulator exceeded; simulation must halt."""


class MicroprogramError(ValueError):
    """Malformed microprogram: bad core index, step conflict, or operand source."""


@dataclass(frozen=True)
class ClusterTimingProfile:
    mac_delay_ns: float = MAC_DELAY_NS
    power_mw_range: tuple[float, float] = (CLUSTER_POWER_MW_LOW, CLUSTER_POWER_MW_HIGH)
    power_mw_nominal: float = CLUSTER_POWER_MW_NOMINAL
    area_um2: float = CLUSTER_AREA_UM2


@dataclass(frozen=True)
class MacEnergy:
    nominal_pj: float
    low_pj: float
    high_pj: float


def mac_energy_pj(profile: ClusterTimingProfile | None = None) -> MacEnergy:
    """Per-MAC energy from published power x delay (nominal = range midpoint)."""
    p = profile or ClusterTimingProfile()
    lo, hi = p.power_mw_range
    return MacEnergy(
        nominal_pj=p.power_mw_nominal * p.mac_delay_ns,
        low_pj=lo * p.mac_delay_ns,
        high_pj=hi * p.mac_delay_ns,
    )


MAC_ENERGY_NOMINAL_PJ = mac_energy_pj().nominal_pj


# Operand sources: ("in", name) reads a nibble of the program inputs,
# ("core", idx, "lo"|"hi") reads a nibble of core idx's last output,
# ("imm", v) is a literal nibble.
Src = tuple


def _fmt_src(src: Src) -> str:
    if src[0] == "in":
        return f"in:{src[1]}"
    if src[0] == "core":
        return f"core:{src[1]}.{src[2]}"
    if src[0] == "imm":
        return f"imm:{src[1]}"
    raise MicroprogramError(f"unknown source {src!r}")


def _parse_src(text: str) -> Src:
    kind, _, rest = text.partition(":")
    if kind == "in":
        return ("in", rest)
    if kind == "core":
        idx, _, nib = rest.partition(".")
        return ("core", int(idx), nib)
    if kind == "imm":
        return ("imm", int(rest))
    raise MicroprogramError(f"unparseable source {text!r}")


@dataclass(frozen=True)
class CoreOp:
    core: int
    table: OpTag
    src_a: Src
    src_b: Src


@dataclass(frozen=True)
class ClusterMicroprogram:
    """Ordered schedule of parallel core lookups plus the output nibble list."""

    steps: tuple[tuple[CoreOp, ...], ...]
    outputs: tuple[Src, ...]

    def __post_init__(self):
        for n, step in enumerate(self.steps):
            seen = set()
            for op in step:
                if not 0 <= op.core < CLUSTER_CORES:
                    raise MicroprogramError(f"step {n}: core {op.core} out of range")
                if op.core in seen:
                    raise MicroprogramError(f"step {n}: core {op.core} used twice")
                seen.add(op.core)

    def to_text(self) -> str:
        lines = []
        for n, step in enumerate(self.steps):
            for op in step:
                lines.append(
                    f"{n};{op.core};{op.table.value};"
                    f"{_fmt_src(op.src_a)};{_fmt_src(op.src_b)}"
                )
        for src in self.outputs:
            lines.append(f"out;{_fmt_src(src)}")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "ClusterMicroprogram":
        by_step: dict[int, list[CoreOp]] = {}
        outputs = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(";")
            if parts[0] == "out":
                outputs.append(_parse_src(parts[1]))
                continue
            step, core, tag, a, b = parts
            by_step.setdefault(int(step), []).append(
                CoreOp(int(core), OpTag(tag), _parse_src(a), _parse_src(b))
            )
        steps = tuple(tuple(by_step[k]) for k in sorted(by_step))
        return cls(steps=steps, outputs=tuple(outputs))


@dataclass
class RouterState:
    """Any-to-any core interconnect; logs every routed operand byte."""

    transfer_log: list[tuple[int, int, int]] = field(default_factory=list)

    def route(self, src_core: int, dst_core: int, byte: int) -> None:
        self.transfer_log.append((src_core, dst_core, byte))


@dataclass
class Cluster:
    """Nine LUT cores, a router, and a 32-bit accumulator register."""

    cores: list[LutCore] = field(default_factory=lambda: [LutCore() for _ in range(CLUSTER_CORES)])
    router: RouterState = field(default_factory=RouterState)
    accumulator: int = 0
    step_counter: int = 0
    timing: ClusterTimingProfile = field(default_factory=ClusterTimingProfile)
    _tables: dict[OpTag, FunctionTable] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.cores) != CLUSTER_CORES:
            raise MicroprogramError(f"cluster requires exactly {CLUSTER_CORES} cores")

    def _table(self, tag: OpTag) -> FunctionTable:
        if tag not in self._tables:
            self._tables[tag] = build_function_table(tag)
        return self._tables[tag]

    @property
    def busy_ns(self) -> float:
        return self.step_counter * CORE_DELAY_NS

    def _resolve(self, src: Src, inputs: dict[str, int], op_core: int | None) -> int:
        kind = src[0]
        if kind == "in":
            try:
                return inputs[src[1]]
            except KeyError:
                raise MicroprogramError(f"undefined input operand {src[1]!r}") from None
        if kind == "core":
            _, idx, nib = src
            core = self.cores[idx]
            if not core.programmed:
                raise UnprogrammedCoreError(f"core {idx} read before any lookup")
            out = core.table.assemble((core.reg_a << 4) | core.reg_b)
            if op_core is not None and idx != op_core:
                self.router.route(idx, op_core, out)
            return (out >> 4) & 15 if nib == "hi" else out & 15
        if kind == "imm":
            return src[1] & 15
        raise MicroprogramError(f"unknown operand source {src!r}")

    def run_microprogram(
        self, prog: ClusterMicroprogram, inputs: dict[str, int]
    ) -> list[int]:
        """Execute steps in order; within a step all lookups read pre-step state."""
        for step in prog.steps:
            # Resolve every operand before any core latches its new output.
            resolved = [
                (op, self._resolve(op.src_a, inputs, op.core),
                 self._resolve(op.src_b, inputs, op.core))
                for op in step
            ]
            for op, a, b in resolved:
                core = self.cores[op.core]
                if core.table is None or core.table.op_tag != op.table:
                    core.program(self._table(op.table))
                core.lookup(a, b)
            self.step_counter += 1
        return [self._resolve(src, inputs, None) for src in prog.outputs]


def mac_microprogram() -> ClusterMicroprogram:
    """The 8-step MAC: 4 parallel MUL4 partial products, then carry-chained ADD4s.

    With a = (AH, AL) and b = (BH, BL):
      P0..P3 = AL*BL, AH*BL, AL*BH, AH*BH            (cores 0-3, step 1)
      A1 = P1.lo + P2.lo ; B1 = P1.hi + P2.hi        (cores 4, 5)
      A2 = P0.hi + A1.lo  -> result nibble 1         (core 6)
      B2 = B1.lo + P3.lo                             (core 7)
      C1 = A1.hi + A2.hi                             (core 4)
      B3 = B2.lo + C1.lo  -> result nibble 2         (core 8)
      C2 = B1.hi + B2.hi                             (core 5)
      C3 = C2.lo + B3.hi                             (core 7)
      R3 = P3.hi + C3.lo  -> result nibble 3         (core 4)
    Result nibble 0 is P0.lo.
    """
    mul = OpTag.MUL4
    add = OpTag.ADD4
    steps = (
        (
            CoreOp(0, mul, ("in", "AL"), ("in", "BL")),
            CoreOp(1, mul, ("in", "AH"), ("in", "BL")),
            CoreOp(2, mul, ("in", "AL"), ("in", "BH")),
            CoreOp(3, mul, ("in", "AH"), ("in", "BH")),
        ),
        (
            CoreOp(4, add, ("core", 1, "lo"), ("core", 2, "lo")),
            CoreOp(5, add, ("core", 1, "hi"), ("core", 2, "hi")),
        ),
        (
            CoreOp(6, add, ("core", 0, "hi"), ("core", 4, "lo")),
            CoreOp(7, add, ("core", 5, "lo"), ("core", 3, "lo")),
        ),
        (CoreOp(4, add, ("core", 4, "hi"), ("core", 6, "hi")),),
        (CoreOp(8, add, ("core", 7, "lo"), ("core", 4, "lo")),),
        (CoreOp(5, add, ("core", 5, "hi"), ("core", 7, "hi")),),
        (CoreOp(7, add, ("core", 5, "lo"), ("core", 8, "hi")),),
        (CoreOp(4, add, ("core", 3, "hi"), ("core", 7, "lo")),),
    )
    outputs = (
        ("core", 0, "lo"),
        ("core", 6, "lo"),
        ("core", 8, "lo"),
        ("core", 4, "lo"),
    )
    return ClusterMicroprogram(steps=steps, outputs=outputs)


_MAC_PROG = mac_microprogram()


def mac8(cluster: Cluster, a: int, b: int) -> int:
    """Accumulate a*b exactly in 8 core-steps; returns the new accumulator."""
    if not (0 <= a <= 255 and 0 <= b <= 255):
        raise ValueError(f"mac8 operands must be 8-bit, got a={a}, b={b}")
    nibbles = cluster.run_microprogram(
        _MAC_PROG,
        {"AH": a >> 4, "AL": a & 15, "BH": b >> 4, "BL": b & 15},
    )
    product = nibbles[0] | (nibbles[1] << 4) | (nibbles[2] << 8) | (nibbles[3] << 12)
    acc = cluster.accumulator + product
    if acc >= _ACC_LIMIT:
        raise AccumulatorOverflowError(
            f"accumulator overflow: {acc} exceeds {ACCUMULATOR_BITS}-bit range"
        )
    cluster.accumulator = acc
    return acc
