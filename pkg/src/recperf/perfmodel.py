"""Analytical timing and energy model for the three design points.

All timing is derived from event-log byte/FLOP totals and a set of platform
calibration constants; nothing here depends on host wall-clock behavior, so
every number is reproducible.  Latencies decompose into the reporting
categories idx (sparse index fetch), emb (gathers + reductions), dnf (dense
feature transfer), mlp (GEMM execution) and a fixed "others" overhead.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .engine.events import TILE_FLOPS, EventTotals
from .textcfg import ConfigError, parse_float, parse_kv_file, parse_size
from .workload import Model, generate_batch

DESIGN_POINTS = ("cpu_only", "cpu_gpu", "centaur")
GB = 1e9  # throughput is reported in decimal GB/s

# Effective CPU memory throughput for embedding gathers as a function of the
# total bytes gathered in one inference.  Piecewise-linear calibration table:
# small transfers are latency-bound far below peak, throughput grows with the
# amount gathered, exceeds 50 GB/s only for batch-2048-scale transfers, and
# clamps at the 77 GB/s channel peak.
DEFAULT_CPU_BW_CURVE: tuple[tuple[float, float], ...] = (
    (4 * 2**10, 0.35 * GB),
    (16 * 2**10, 0.35 * GB),
    (64 * 2**10, 0.40 * GB),
    (256 * 2**10, 0.50 * GB),
    (2**20, 0.95 * GB),
    (4 * 2**20, 2.3 * GB),
    (16 * 2**20, 4.1 * GB),
    (64 * 2**20, 8.9 * GB),
    (256 * 2**20, 18.0 * GB),
    (2**30, 48.0 * GB),
    (4 * 2**30, 77.0 * GB),
)


def _default_power() -> dict[str, float]:
    return {"cpu_only": 80.0, "cpu_gpu_cpu": 91.0, "cpu_gpu_gpu": 56.0, "centaur": 74.0}


@dataclass(frozen=True)
class PlatformParams:
    """Calibration constants for the three design points (see README for the
    provenance of each default)."""

    cpu_peak_mem_bw: float = 77.0 * GB
    cpu_eff_bw_curve: tuple[tuple[float, float], ...] = DEFAULT_CPU_BW_CURVE
    link_bw_raw: float = 28.8 * GB
    link_bw_eff: float = 17.5 * GB
    centaur_gather_eff: float = 0.68
    gather_pipeline_fill_s: float = 2e-6
    pe_peak_flops: float = 313e9
    pe_clock: float = 200e6
    active_pes: int = 20
    cpu_gemm_flops: float = 12.5e9
    cpu_gemm_overhead_s: float = 10e-6
    gpu_gemm_flops: float = 200e9
    gpu_gemm_overhead_s: float = 18e-6
    pcie_bw: float = 12.0 * GB
    pcie_latency_s: float = 50e-6
    other_overhead_s: float = 5e-6
    power_watts: dict[str, float] = field(default_factory=_default_power)

    def __post_init__(self):
        object.__setattr__(self, "cpu_eff_bw_curve",
                           tuple((float(b), float(v)) for b, v in self.cpu_eff_bw_curve))
        self.validate()

    def validate(self) -> None:
        rates = {
            "cpu_peak_mem_bw": self.cpu_peak_mem_bw,
            "link_bw_raw": self.link_bw_raw,
            "link_bw_eff": self.link_bw_eff,
            "pe_peak_flops": self.pe_peak_flops,
            "pe_clock": self.pe_clock,
            "cpu_gemm_flops": self.cpu_gemm_flops,
            "gpu_gemm_flops": self.gpu_gemm_flops,
            "pcie_bw": self.pcie_bw,
        }
        for key, value in rates.items():
            if value <= 0:
                raise ConfigError(f"{key}: must be positive, got {value}")
        for key in ("centaur_gather_eff",):
            if not 0 < getattr(self, key) <= 1:
                raise ConfigError(f"{key}: must be in (0, 1], got {getattr(self, key)}")
        for key in ("gather_pipeline_fill_s", "cpu_gemm_overhead_s", "gpu_gemm_overhead_s",
                    "pcie_latency_s", "other_overhead_s"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key}: must be >= 0")
        if self.active_pes < 1:
            raise ConfigError("active_pes: must be >= 1")
        if self.link_bw_eff > self.link_bw_raw:
            raise ConfigError("link_bw_eff must not exceed link_bw_raw")
        curve = self.cpu_eff_bw_curve
        if not curve:
            raise ConfigError("cpu_eff_bw_curve: must have at least one point")
        if any(b2 <= b1 for (b1, _), (b2, _) in zip(curve, curve[1:])):
            raise ConfigError("cpu_eff_bw_curve: byte anchors must be strictly increasing")
        if any(v2 < v1 for (_, v1), (_, v2) in zip(curve, curve[1:])):
            raise ConfigError("cpu_eff_bw_curve: values must be non-decreasing")
        if any(v <= 0 or v > self.cpu_peak_mem_bw for _, v in curve):
            raise ConfigError("cpu_eff_bw_curve: values must be in (0, cpu_peak_mem_bw]")
        expected = set(_default_power())
        if set(self.power_watts) != expected or any(v <= 0 for v in self.power_watts.values()):
            raise ConfigError(f"power_watts: need positive entries for {sorted(expected)}")

    @property
    def centaur_gather_bw(self) -> float:
        """Effective gather bandwidth of the streaming unit (bytes/s)."""
        return self.centaur_gather_eff * self.link_bw_eff

    @property
    def tile_cycles(self) -> float:
        """Cycles one PE spends on a 32x32x32 tile, sized so a fully occupied
        PE complex sustains exactly pe_peak_flops."""
        per_pe_flops_per_cycle = self.pe_peak_flops / self.pe_clock / self.active_pes
        return TILE_FLOPS / per_pe_flops_per_cycle

    def cpu_eff_bw(self, gathered_bytes: float) -> float:
        """Interpolated effective CPU bandwidth (bytes/s), clamped at both ends."""
        xs = [b for b, _ in self.cpu_eff_bw_curve]
        ys = [v for _, v in self.cpu_eff_bw_curve]
        return float(np.interp(gathered_bytes, xs, ys))

    def scaled(self, factor: float) -> "PlatformParams":
        """Scale every rate by ``factor`` and every fixed latency by its
        inverse; speedup ratios are invariant under this."""
        if factor <= 0:
            raise ConfigError("scale factor must be positive")
        return replace(
            self,
            cpu_peak_mem_bw=self.cpu_peak_mem_bw * factor,
            cpu_eff_bw_curve=tuple((b, v * factor) for b, v in self.cpu_eff_bw_curve),
            link_bw_raw=self.link_bw_raw * factor,
            link_bw_eff=self.link_bw_eff * factor,
            pe_peak_flops=self.pe_peak_flops * factor,
            pe_clock=self.pe_clock * factor,
            cpu_gemm_flops=self.cpu_gemm_flops * factor,
            gpu_gemm_flops=self.gpu_gemm_flops * factor,
            pcie_bw=self.pcie_bw * factor,
            gather_pipeline_fill_s=self.gather_pipeline_fill_s / factor,
            cpu_gemm_overhead_s=self.cpu_gemm_overhead_s / factor,
            gpu_gemm_overhead_s=self.gpu_gemm_overhead_s / factor,
            pcie_latency_s=self.pcie_latency_s / factor,
            other_overhead_s=self.other_overhead_s / factor,
        )


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-stage seconds; ``total`` is always the exact sum of the parts."""

    idx: float
    emb: float
    dnf: float
    mlp: float
    others: float
    total: float

    @classmethod
    def from_parts(cls, idx: float, emb: float, dnf: float, mlp: float,
                   others: float) -> "LatencyBreakdown":
        return cls(idx=idx, emb=emb, dnf=dnf, mlp=mlp, others=others,
                   total=idx + emb + dnf + mlp + others)


@dataclass(frozen=True)
class EnergyReport:
    design_point: str
    latency_s: float
    power_w: float
    energy_j: float


def effective_embedding_throughput(gathered_bytes: float, emb_latency_s: float) -> float:
    """Useful gathered bytes divided by embedding-stage latency, in GB/s."""
    if emb_latency_s <= 0:
        raise ConfigError(f"emb latency must be positive, got {emb_latency_s}")
    return gathered_bytes / emb_latency_s / GB


def _totals(event_log) -> EventTotals:
    if isinstance(event_log, EventTotals):
        return event_log
    return event_log.totals()


def time_centaur(event_log, params: PlatformParams) -> LatencyBreakdown:
    """Accelerator timing: index fetch and dense features ride the raw link,
    gathers run at the streaming unit's effective share of it (with a
    pipeline-fill floor), GEMMs run on the PE complex at padded-tile cost."""
    t = _totals(event_log)
    idx = t.index_bytes / params.link_bw_eff
    if t.gather_bytes:
        emb = max(t.gather_bytes / params.centaur_gather_bw, params.gather_pipeline_fill_s)
    else:
        emb = 0.0
    dnf = t.dense_bytes / params.link_bw_eff
    mlp = t.padded_tiles * params.tile_cycles / params.pe_clock / params.active_pes
    return LatencyBreakdown.from_parts(idx, emb, dnf, mlp, params.other_overhead_s)


def time_cpu_only(event_log, params: PlatformParams) -> LatencyBreakdown:
    """CPU baseline: gathers at the calibrated effective bandwidth for that
    byte volume, GEMMs at the CPU rate plus a fixed per-GEMM software cost.
    Indices and dense features are already resident, so idx = dnf = 0."""
    t = _totals(event_log)
    emb = t.gather_bytes / params.cpu_eff_bw(t.gather_bytes) if t.gather_bytes else 0.0
    mlp = t.raw_flops / params.cpu_gemm_flops + t.gemm_calls * params.cpu_gemm_overhead_s
    return LatencyBreakdown.from_parts(0.0, emb, 0.0, mlp, params.other_overhead_s)


def time_cpu_gpu(event_log, params: PlatformParams) -> LatencyBreakdown:
    """CPU gathers as in cpu_only, then the reduced embeddings cross PCIe
    (attributed to dnf) and the MLPs run on the GPU."""
    t = _totals(event_log)
    cpu = time_cpu_only(event_log, params)
    dnf = t.reduced_bytes / params.pcie_bw + params.pcie_latency_s
    mlp = t.raw_flops / params.gpu_gemm_flops + t.gemm_calls * params.gpu_gemm_overhead_s
    return LatencyBreakdown.from_parts(0.0, cpu.emb, dnf, mlp, params.other_overhead_s)


_TIMERS = {"cpu_only": time_cpu_only, "cpu_gpu": time_cpu_gpu, "centaur": time_centaur}


def time_design_point(design_point: str, event_log, params: PlatformParams) -> LatencyBreakdown:
    try:
        timer = _TIMERS[design_point]
    except KeyError:
        raise ConfigError(f"unknown design point {design_point!r}; "
                          f"choose from {DESIGN_POINTS}") from None
    return timer(event_log, params)


def energy(breakdown: LatencyBreakdown, params: PlatformParams,
           design_point: str) -> EnergyReport:
    """Energy = power x end-to-end latency.  The CPU-GPU point draws both
    sockets for the whole inference (CPU plus GPU power summed)."""
    if design_point == "cpu_only":
        power = params.power_watts["cpu_only"]
    elif design_point == "centaur":
        power = params.power_watts["centaur"]
    elif design_point == "cpu_gpu":
        power = params.power_watts["cpu_gpu_cpu"] + params.power_watts["cpu_gpu_gpu"]
    else:
        raise ConfigError(f"unknown design point {design_point!r}; "
                          f"choose from {DESIGN_POINTS}")
    return EnergyReport(
        design_point=design_point,
        latency_s=breakdown.total,
        power_w=power,
        energy_j=power * breakdown.total,
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    """One (model, batch, design point) cell of a sweep."""

    model: str
    batch: int
    design_point: str
    idx_us: float
    emb_us: float
    dnf_us: float
    mlp_us: float
    other_us: float
    total_us: float
    eff_gbps: float
    energy_j: float
    speedup_vs_cpu: float


RESULT_COLUMNS = tuple(ResultRow.__dataclass_fields__)


def _row(model_name: str, batch: int, point: str, bd: LatencyBreakdown,
         totals: EventTotals, params: PlatformParams, cpu_total: float) -> ResultRow:
    parts_us = [bd.idx * 1e6, bd.emb * 1e6, bd.dnf * 1e6, bd.mlp * 1e6, bd.others * 1e6]
    return ResultRow(
        model=model_name,
        batch=batch,
        design_point=point,
        idx_us=parts_us[0],
        emb_us=parts_us[1],
        dnf_us=parts_us[2],
        mlp_us=parts_us[3],
        other_us=parts_us[4],
        total_us=parts_us[0] + parts_us[1] + parts_us[2] + parts_us[3] + parts_us[4],
        eff_gbps=(effective_embedding_throughput(totals.gather_bytes, bd.emb)
                  if bd.emb > 0 else 0.0),
        energy_j=energy(bd, params, point).energy_j,
        speedup_vs_cpu=cpu_total / bd.total,
    )


def sweep_totals(model: Model, batch_size: int, seed: int,
                 distribution: str = "uniform") -> EventTotals:
    """Run one accelerated inference and return its event totals."""
    from .engine import infer_accelerated

    batch = generate_batch(model, batch_size, distribution, seed=seed)
    _, log = infer_accelerated(model, batch)
    return log.totals()


def sweep(models: list[Model], batches: list[int], params: PlatformParams | None = None,
          seed: int = 0, design_points: tuple[str, ...] = DESIGN_POINTS,
          distribution: str = "uniform") -> list[ResultRow]:
    """Time every (model, batch, design point) cell.

    Event totals come from actually executing the accelerated pipeline on a
    seeded batch, so gather/FLOP accounting is measured, not assumed.  Rows
    are ordered by the given model order, then batch, then design point.
    """
    if not models or not batches:
        raise ConfigError("sweep needs at least one model and one batch size")
    params = params or PlatformParams()
    for point in design_points:
        if point not in DESIGN_POINTS:
            raise ConfigError(f"unknown design point {point!r}; choose from {DESIGN_POINTS}")
    rows: list[ResultRow] = []
    for mi, model in enumerate(models):
        for batch_size in batches:
            cell_seed = int(np.random.SeedSequence([seed, mi, batch_size]).generate_state(1)[0])
            totals = sweep_totals(model, batch_size, seed=cell_seed,
                                  distribution=distribution)
            cpu_total = time_cpu_only(totals, params).total
            for point in design_points:
                bd = time_design_point(point, totals, params)
                rows.append(_row(model.config.name, batch_size, point, bd, totals,
                                 params, cpu_total))
    return rows


def summarize(rows: list[ResultRow]) -> dict[str, float]:
    """Headline comparisons: Centaur speedup/efficiency band vs CPU-only and
    the CPU-only vs CPU-GPU averages."""
    by_cell: dict[tuple[str, int], dict[str, ResultRow]] = {}
    for row in rows:
        by_cell.setdefault((row.model, row.batch), {})[row.design_point] = row
    speedups, efficiencies, gpu_speedups, gpu_eff = [], [], [], []
    for cell in by_cell.values():
        cpu = cell.get("cpu_only")
        if cpu is None:
            continue
        if "centaur" in cell:
            speedups.append(cpu.total_us / cell["centaur"].total_us)
            efficiencies.append(cpu.energy_j / cell["centaur"].energy_j)
        if "cpu_gpu" in cell:
            gpu_speedups.append(cell["cpu_gpu"].total_us / cpu.total_us)
            gpu_eff.append(cell["cpu_gpu"].energy_j / cpu.energy_j)
    out: dict[str, float] = {}
    if speedups:
        out["centaur_speedup_min"] = min(speedups)
        out["centaur_speedup_max"] = max(speedups)
        out["centaur_efficiency_min"] = min(efficiencies)
        out["centaur_efficiency_max"] = max(efficiencies)
    if gpu_speedups:
        out["cpu_over_cpugpu_speedup_mean"] = sum(gpu_speedups) / len(gpu_speedups)
        out["cpu_over_cpugpu_efficiency_mean"] = sum(gpu_eff) / len(gpu_eff)
    return out


# ---------------------------------------------------------------------------
# Params files
# ---------------------------------------------------------------------------

_FLOAT_KEYS = (
    "cpu_peak_mem_bw", "link_bw_raw", "link_bw_eff", "centaur_gather_eff",
    "gather_pipeline_fill_s", "pe_peak_flops", "pe_clock", "cpu_gemm_flops",
    "cpu_gemm_overhead_s", "gpu_gemm_flops", "gpu_gemm_overhead_s", "pcie_bw",
    "pcie_latency_s", "other_overhead_s",
)


def params_from_file(path: str | Path, base: PlatformParams | None = None) -> PlatformParams:
    """Override fields of ``base`` (default params) from a key=value file.

    Bandwidths/FLOP rates are plain numbers (per second); the curve is
    ``cpu_eff_bw_curve = 64K:0.38, 1M:0.82, ...`` with values in GB/s;
    powers are ``power_cpu_only``, ``power_cpu_gpu_cpu``, ``power_cpu_gpu_gpu``
    and ``power_centaur``.
    """
    base = base or PlatformParams()
    fields = parse_kv_file(path)
    updates: dict = {}
    power = dict(base.power_watts)
    for key, value in fields.items():
        if key in _FLOAT_KEYS:
            updates[key] = parse_float(value, key)
        elif key == "active_pes":
            updates[key] = int(parse_float(value, key))
        elif key == "cpu_eff_bw_curve":
            points = []
            for pair in value.split(","):
                if not pair.strip():
                    continue
                try:
                    size_txt, bw_txt = pair.split(":")
                except ValueError:
                    raise ConfigError(
                        f"cpu_eff_bw_curve: expected 'bytes:GBps' pairs, got {pair!r}") from None
                points.append((parse_size(size_txt, key), parse_float(bw_txt, key) * GB))
            updates[key] = tuple(points)
        elif key.startswith("power_"):
            name = key[len("power_"):]
            if name not in power:
                raise ConfigError(f"{key}: unknown design point power")
            power[name] = parse_float(value, key)
        else:
            raise ConfigError(f"{path}: unknown key {key!r}")
    updates["power_watts"] = power
    return replace(base, **updates)
