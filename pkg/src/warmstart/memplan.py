"""Training-memory calculator: weights, gradients, optimizer states.

Byte accounting for a given parameter count under a precision mode and an
optional optimizer offload to CPU memory, plus an interconnect comparison
and a rule-based fit recommendation. All totals are exact integers;
fractions stay rational. Activation memory is out of model and every report
says so.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .errors import WarmstartError

OPTIMIZER_VALUES_PER_PARAM = 2  # two extra values per parameter
OPTIMIZER_STATE_BYTES_PER_VALUE = 4  # moments kept in full precision
NVLINK_BANDWIDTH_GBPS = (50.0, 100.0)  # range depends on GPU generation
PCIE4_BANDWIDTH_GBPS = 31.5


class MemplanError(WarmstartError):
    pass


class PrecisionMode(Enum):
    FULL_32BIT = ("fp32", 4)
    HALF_16BIT = ("fp16", 2)
    BRAIN_16BIT = ("bf16", 2)

    @property
    def flag(self) -> str:
        return self.value[0]

    @property
    def bytes_per_value(self) -> int:
        return self.value[1]

    @classmethod
    def parse(cls, s: str) -> "PrecisionMode":
        for mode in cls:
            if mode.flag == s:
                return mode
        raise MemplanError(
            f"unknown precision {s!r}; expected one of "
            + ", ".join(m.flag for m in cls)
        )


class OptimizerLocation(Enum):
    GPU = "gpu"
    CPU = "cpu"


@dataclass(frozen=True)
class ModelSpec:
    param_count: int

    def __post_init__(self):
        if self.param_count <= 0:
            raise MemplanError(f"param_count must be positive, got {self.param_count}")


@dataclass(frozen=True)
class HardwareSpec:
    gpu_count: int
    gpu_memory_bytes: int
    system_ram_bytes: int
    nvlink_pairs: bool = False
    pcie_generation: int = 4

    def __post_init__(self):
        if self.gpu_count < 1:
            raise MemplanError(f"gpu_count must be positive, got {self.gpu_count}")
        if self.gpu_memory_bytes <= 0 or self.system_ram_bytes <= 0:
            raise MemplanError("memory sizes must be positive")
        if self.pcie_generation < 1:
            raise MemplanError("pcie_generation must be positive")


@dataclass
class MemoryReport:
    weights_bytes: int
    gradients_bytes: int
    optimizer_bytes: int
    optimizer_location: OptimizerLocation
    gpu_total_bytes: int
    cpu_total_bytes: int
    per_gpu_bytes: int
    fits: Optional[bool]
    headroom_fraction: Optional[Fraction]
    notes: list[str] = field(default_factory=list)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


_STANDING_NOTES = [
    "activation memory is excluded from every figure; leave headroom for it",
    "optimizer moments are counted at 4 bytes per value regardless of weight precision",
    "optimizer cost is the literal two-additional-values-per-parameter rule, "
    "not a 2x-of-weight-bytes rule",
]


def estimate(
    model: ModelSpec,
    precision: PrecisionMode,
    offload: bool,
    hardware: Optional[HardwareSpec] = None,
) -> MemoryReport:
    """Byte footprint of one training replica.

    Weights and gradients each cost param_count * bytes-per-value at the
    chosen precision; the optimizer holds two extra full-precision values
    per parameter, charged to CPU memory when offloaded. With a hardware
    spec the GPU total is split evenly (ceiling division) across its GPUs
    and checked against per-GPU capacity.
    """
    p = model.param_count
    weights = p * precision.bytes_per_value
    gradients = p * precision.bytes_per_value
    optimizer = p * OPTIMIZER_VALUES_PER_PARAM * OPTIMIZER_STATE_BYTES_PER_VALUE
    gpu_total = weights + gradients + (0 if offload else optimizer)
    cpu_total = optimizer if offload else 0
    notes = list(_STANDING_NOTES)
    gpus = hardware.gpu_count if hardware is not None else 1
    per_gpu = _ceil_div(gpu_total, gpus)
    fits: Optional[bool] = None
    headroom: Optional[Fraction] = None
    if hardware is not None:
        fits = per_gpu <= hardware.gpu_memory_bytes
        headroom = Fraction(
            hardware.gpu_memory_bytes - per_gpu, hardware.gpu_memory_bytes
        )
        if offload and cpu_total > hardware.system_ram_bytes:
            notes.append(
                f"offloaded optimizer state ({cpu_total} B) exceeds system "
                f"RAM ({hardware.system_ram_bytes} B)"
            )
    if offload:
        notes.append("optimizer state charged to CPU memory (offload enabled)")
    return MemoryReport(
        weights_bytes=weights,
        gradients_bytes=gradients,
        optimizer_bytes=optimizer,
        optimizer_location=OptimizerLocation.CPU if offload else OptimizerLocation.GPU,
        gpu_total_bytes=gpu_total,
        cpu_total_bytes=cpu_total,
        per_gpu_bytes=per_gpu,
        fits=fits,
        headroom_fraction=headroom,
        notes=notes,
    )


@dataclass(frozen=True)
class InterconnectReport:
    applicable: bool
    gpu_to_gpu_path: Optional[str]
    nvlink_min_gb_s: float
    nvlink_max_gb_s: float
    pcie4_gb_s: float
    advantage_ratio_range: Optional[tuple[float, float]]
    notes: tuple[str, ...]


def interconnect_compare(hardware: HardwareSpec) -> InterconnectReport:
    """Per-link bandwidth of the GPU-to-GPU path on this machine."""
    lo, hi = NVLINK_BANDWIDTH_GBPS
    if hardware.gpu_count == 1:
        return InterconnectReport(
            applicable=False,
            gpu_to_gpu_path=None,
            nvlink_min_gb_s=lo,
            nvlink_max_gb_s=hi,
            pcie4_gb_s=PCIE4_BANDWIDTH_GBPS,
            advantage_ratio_range=None,
            notes=("single GPU: no GPU-to-GPU traffic",),
        )
    notes: list[str] = []
    if hardware.nvlink_pairs:
        path = "nvlink"
        notes.append(
            f"NVLink pairs move GPU-to-GPU traffic at {lo:g}-{hi:g} GB/s "
            f"(generation dependent) versus {PCIE4_BANDWIDTH_GBPS} GB/s "
            f"for PCIe 4.0"
        )
    else:
        path = "pcie"
        notes.append(
            f"no NVLink: GPU-to-GPU traffic rides PCIe at "
            f"{PCIE4_BANDWIDTH_GBPS} GB/s (the slower path)"
        )
    if hardware.pcie_generation != 4:
        notes.append(
            f"PCIe reference figure is for generation 4; this machine "
            f"reports generation {hardware.pcie_generation}"
        )
    return InterconnectReport(
        applicable=True,
        gpu_to_gpu_path=path,
        nvlink_min_gb_s=lo,
        nvlink_max_gb_s=hi,
        pcie4_gb_s=PCIE4_BANDWIDTH_GBPS,
        advantage_ratio_range=(lo / PCIE4_BANDWIDTH_GBPS, hi / PCIE4_BANDWIDTH_GBPS),
        notes=tuple(notes),
    )


@dataclass
class Recommendation:
    actions: list[str]
    fits: bool
    final_report: MemoryReport
    steps: list[tuple[str, MemoryReport]]
    notes: list[str]


_GUIDANCE_NOTES = [
    "prioritize GPU memory capacity over raw compute speed",
    "prefer NVLink-bridged GPU pairs: 50-100 GB/s GPU-to-GPU versus "
    "31.5 GB/s over PCIe 4.0",
    "plan for 512 GB of system memory or more so optimizer offload has room",
    "keep spare PCIe slots available for adding GPUs later",
]


def recommend(model: ModelSpec, hardware: HardwareSpec) -> Recommendation:
    """Deterministic fit chain, least invasive change first.

    Full precision on one GPU, then optimizer offload, then 16-bit weights
    and gradients, then an even model-parallel split across all GPUs. Each
    stage is kept only if the previous one does not fit. The static hardware
    guidance notes are always attached.
    """
    mem = hardware.gpu_memory_bytes
    steps: list[tuple[str, MemoryReport]] = []
    actions: list[str] = []

    base = estimate(model, PrecisionMode.FULL_32BIT, offload=False)
    steps.append(("full precision, optimizer on GPU", base))
    final = base
    fits = base.gpu_total_bytes <= mem
    if not fits:
        actions.append("offload optimizer state to CPU memory")
        offloaded = estimate(model, PrecisionMode.FULL_32BIT, offload=True)
        steps.append(("full precision, optimizer offloaded", offloaded))
        final = offloaded
        fits = offloaded.gpu_total_bytes <= mem
    if not fits:
        actions.append("store weights and gradients in 16-bit precision")
        halved = estimate(model, PrecisionMode.HALF_16BIT, offload=True)
        steps.append(("16-bit weights and gradients, optimizer offloaded", halved))
        final = halved
        fits = halved.gpu_total_bytes <= mem
    if not fits and hardware.gpu_count > 1:
        actions.append(
            f"split the model evenly across {hardware.gpu_count} GPUs"
        )
        split = estimate(model, PrecisionMode.HALF_16BIT, offload=True, hardware=hardware)
        steps.append((f"even split across {hardware.gpu_count} GPUs", split))
        final = split
        fits = split.per_gpu_bytes <= mem
    if not fits:
        actions.append(
            "model does not fit under any supported configuration; add GPU "
            "memory or more GPUs"
        )

    notes = list(_GUIDANCE_NOTES)
    if final.cpu_total_bytes > hardware.system_ram_bytes:
        notes.append(
            f"offloaded optimizer state ({final.cpu_total_bytes} B) exceeds "
            f"system RAM ({hardware.system_ram_bytes} B)"
        )
    return Recommendation(
        actions=actions, fits=fits, final_report=final, steps=steps, notes=notes
    )
