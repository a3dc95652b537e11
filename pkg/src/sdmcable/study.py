"""Declarative study configs and deterministic result tables.

A study config is a YAML document. Physical quantities carry their unit in
the key name (``loss_db_per_km``, ``total_length_km``, ``voltage_kv``) and
unknown keys are rejected, so a typo never silently falls back to a
default. Running a study writes one CSV table plus a JSON metadata record.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .cable import (
    AVAILABILITY_MODELS,
    PER_REPEATER,
    CableBaseline,
    PowerFeedSpec,
    calibrate_feed,
    design_sweep,
    with_feed,
)
from .capacity import DistributionQuery, required_snr_m, required_snr_m_approx
from .errors import ConfigError, SdmCableError
from .optimizer import distributed_span_curve, max_gsnr_curve, span_count_for
from .photonic import AmplifierSpec, FiberSpec, LinkGeometry, WdmGrid
from .rates import DEFAULT_CODE_GAP_DB, best_rate_plan
from .units import db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm

STUDY_KINDS = ("snr-distribution", "gsnr-vs-span", "span-vs-length", "cable-sweep", "rate-plan")

# Blocks each study kind needs beyond the shared ones.
REQUIRED_BLOCKS = {
    "snr-distribution": {"distribution", "sweep"},
    "gsnr-vs-span": {"link", "sweep"},
    "span-vs-length": {"link", "distribution", "sweep"},
    "cable-sweep": {"cable", "feed", "sweep"},
    "rate-plan": {"rates", "sweep"},
}
OPTIONAL_BLOCKS = {
    "snr-distribution": set(),
    "gsnr-vs-span": {"fiber", "amplifier", "grid"},
    "span-vs-length": {"fiber", "amplifier", "grid"},
    "cable-sweep": {"fiber", "amplifier", "grid", "calibration"},
    "rate-plan": {"grid"},
}
SHARED_BLOCKS = {"study_kind", "output", "execution"}

COLUMNS = {
    "snr-distribution": (
        "snr1_db", "snr1_linear", "m", "snr_m_linear", "snr_m_db", "snr_m_approx_linear", "snr_m_approx_db",
    ),
    "gsnr-vs-span": (
        "span_km", "span_count", "actual_span_km", "total_length_km", "backoff_db",
        "launch_power_w", "launch_power_dbm", "gsnr_linear", "gsnr_db", "status",
    ),
    "span-vs-length": (
        "total_length_km", "m", "baseline_span_km", "baseline_gsnr_db", "target_gsnr_db", "span_km",
        "span_count", "launch_power_w", "launch_power_dbm", "achieved_gsnr_db", "status",
    ),
    "cable-sweep": (
        "fiber_pairs", "m", "required_gsnr_db", "span_km", "repeater_count", "amplifier_count",
        "launch_power_w", "launch_power_dbm", "per_fiber_gsnr_db", "cable_capacity_tbps",
        "power_available_w", "power_required_w", "power_margin_w", "power_feasible", "marker", "status",
    ),
    "rate-plan": (
        "snr_db", "format", "entropy_bits", "fec_overhead", "code_rate", "rate_bits", "mi_bits",
        "net_throughput_gbps", "net_throughput_bps", "achievable",
    ),
}


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SweepRange(_Block):
    start: float
    stop: float
    step: float = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop < self.start:
            raise ValueError(f"stop ({self.stop}) must not be below start ({self.start})")
        return self

    def values(self) -> list[float]:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [float(x) for x in np.round(self.start + self.step * np.arange(n), 12)]


SweepValues = Union[list[float], SweepRange]


def _expand(v: SweepValues) -> list[float]:
    return v.values() if isinstance(v, SweepRange) else [float(x) for x in v]


def _check_sweep(v):
    if isinstance(v, list):
        if not v:
            raise ValueError("sweep list is empty")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("sweep list must be strictly increasing")
    return v


class OutputBlock(_Block):
    table_path: str
    metadata_path: str | None = None

    def resolved_metadata_path(self) -> str:
        return self.metadata_path or str(Path(self.table_path).with_suffix(".meta.json"))


class ExecutionBlock(_Block):
    workers: int = Field(1, ge=1)


class FiberBlock(_Block):
    loss_db_per_km: float = Field(0.155, gt=0)
    gamma_per_w_km: float = Field(0.715, ge=0)
    dispersion_ps_nm_km: float = 22.0
    reference_wavelength_nm: float = Field(1550.0, gt=1200, lt=1700)

    def build(self) -> FiberSpec:
        return FiberSpec(
            self.loss_db_per_km, self.gamma_per_w_km, self.dispersion_ps_nm_km, self.reference_wavelength_nm * 1e-9
        )


class AmplifierBlock(_Block):
    noise_figure_db: float = 4.5

    def build(self) -> AmplifierSpec:
        return AmplifierSpec(self.noise_figure_db)


class GridBlock(_Block):
    channel_count: int = Field(117, ge=1)
    symbol_rate_gbaud: float = Field(32.0, gt=0)
    channel_spacing_ghz: float = Field(32.0, gt=0)
    center_frequency_thz: float = Field(193.4, gt=0)

    @model_validator(mode="after")
    def _fits(self):
        if self.symbol_rate_gbaud > self.channel_spacing_ghz:
            raise ValueError("symbol_rate_gbaud must not exceed channel_spacing_ghz")
        return self

    def build(self) -> WdmGrid:
        return WdmGrid(
            self.channel_count, self.symbol_rate_gbaud * 1e9, self.channel_spacing_ghz * 1e9, self.center_frequency_thz * 1e12
        )


class LinkBlock(_Block):
    total_length_km: float | None = Field(None, gt=0)
    backoff_db: float = Field(0.0, ge=0)
    b2b_snr_db: float | None = None
    loop_noise_power_dbm: float | None = None
    loop_turn_km: float = Field(300.0, gt=0)
    excess_loss_db_per_span: float = Field(0.0, ge=0)


class DistributionBlock(_Block):
    snr1_db: SweepValues | None = None
    m: float | str = 2.0
    baseline_span_km: float = Field(50.0, gt=0)
    snap_span_count: bool = False

    @field_validator("m")
    @classmethod
    def _positive_m(cls, v):
        value = Fraction(v) if isinstance(v, str) else v
        if not value > 0:
            raise ValueError("m must be positive")
        return v

    def multiplier(self):
        return Fraction(self.m) if isinstance(self.m, str) else self.m


class SweepBlock(_Block):
    m: SweepValues | None = None
    span_length_km: SweepValues | None = None
    total_length_km: SweepValues | None = None
    fiber_pairs: SweepValues | None = None
    snr_db: SweepValues | None = None

    _sweep_ok = field_validator("m", "span_length_km", "total_length_km", "fiber_pairs", "snr_db")(_check_sweep)


class CableBlock(_Block):
    fiber_pairs: int = Field(12, ge=1)
    span_length_km: float = Field(84.0, gt=0)
    total_length_km: float = Field(6611.0, gt=0)
    backoff_db: float = Field(2.0, ge=0)


class FeedBlock(_Block):
    voltage_kv: float = Field(15.0, gt=0)
    cable_resistance_ohm_per_km: float = Field(1.0, gt=0)
    control_fraction: float = Field(0.10, ge=0, lt=1)
    eo_efficiency: float = Field(0.02, ge=0, le=1)
    availability_model: Literal[AVAILABILITY_MODELS] = PER_REPEATER  # type: ignore[valid-type]

    def build(self, voltage_kv: float | None = None) -> PowerFeedSpec:
        return PowerFeedSpec(
            (voltage_kv or self.voltage_kv) * 1e3,
            self.cable_resistance_ohm_per_km,
            self.control_fraction,
            self.eo_efficiency,
            self.availability_model,
        )


class CalibrationBlock(_Block):
    voltage_kv: float = Field(15.0, gt=0)
    boundary_fiber_pairs: int = Field(19, ge=1)
    backoff_db: float = Field(2.0, ge=0)


class RatesBlock(_Block):
    code_gap_db: float = Field(DEFAULT_CODE_GAP_DB, ge=0)
    margin_bits: float = Field(0.0, ge=0)


class StudyConfig(_Block):
    study_kind: Literal[STUDY_KINDS]  # type: ignore[valid-type]
    output: OutputBlock
    execution: ExecutionBlock = ExecutionBlock()
    fiber: FiberBlock = FiberBlock()
    amplifier: AmplifierBlock = AmplifierBlock()
    grid: GridBlock = GridBlock()
    link: LinkBlock | None = None
    distribution: DistributionBlock | None = None
    sweep: SweepBlock | None = None
    cable: CableBlock | None = None
    feed: FeedBlock | None = None
    calibration: CalibrationBlock | None = None
    rates: RatesBlock | None = None

    def geometry(self, span_km: float = 50.0, span_count: float = 1) -> LinkGeometry:
        link = self.link or LinkBlock()
        return LinkGeometry(
            fiber=self.fiber.build(),
            amplifier=self.amplifier.build(),
            grid=self.grid.build(),
            span_length_km=span_km,
            span_count=span_count,
            b2b_snr_linear=None if link.b2b_snr_db is None else db_to_linear(link.b2b_snr_db),
            loop_noise_power_w=None if link.loop_noise_power_dbm is None else dbm_to_watts(link.loop_noise_power_dbm),
            loop_turn_km=link.loop_turn_km,
            excess_loss_db_per_span=link.excess_loss_db_per_span,
        )


# Sweep keys each kind reads.
SWEEP_KEYS = {
    "snr-distribution": {"m"},
    "gsnr-vs-span": {"span_length_km"},
    "span-vs-length": {"total_length_km"},
    "cable-sweep": {"fiber_pairs"},
    "rate-plan": {"snr_db"},
}


def _loc(loc) -> str:
    return ".".join(str(p) for p in loc if not (isinstance(p, str) and p in ("list[float]", "SweepRange")))


def _kind_problems(raw: dict) -> list[str]:
    kind = raw.get("study_kind")
    if kind not in STUDY_KINDS:
        return []  # reported by the schema
    problems = []
    allowed = SHARED_BLOCKS | REQUIRED_BLOCKS[kind] | OPTIONAL_BLOCKS[kind]
    for block in sorted(REQUIRED_BLOCKS[kind] - raw.keys()):
        problems.append(f"{block}: block is required for study_kind {kind!r}")
    for block in sorted(raw.keys() - allowed):
        if block in StudyConfig.model_fields:
            problems.append(f"{block}: block is not used by study_kind {kind!r}")
    sweep = raw.get("sweep")
    if isinstance(sweep, dict):
        for key in sorted(SWEEP_KEYS[kind] - sweep.keys()):
            problems.append(f"sweep.{key}: required for study_kind {kind!r}")
        for key in sorted(sweep.keys() - SWEEP_KEYS[kind]):
            if key in SweepBlock.model_fields:
                problems.append(f"sweep.{key}: not used by study_kind {kind!r}")
    if kind == "snr-distribution":
        dist = raw.get("distribution")
        if isinstance(dist, dict) and "snr1_db" not in dist:
            problems.append("distribution.snr1_db: required for study_kind 'snr-distribution'")
    return problems


def validate_config(text: str) -> StudyConfig:
    """Parse and validate a YAML study config.

    Raises ``ConfigError`` listing every problem: a syntax error with its
    line and column, or all schema and cross-block violations at once.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ConfigError([f"syntax error at {where}{exc.problem or exc}"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a mapping at the top level"])

    problems = _kind_problems(raw)
    config = None
    try:
        config = StudyConfig.model_validate(raw)
    except ValidationError as exc:
        for err in exc.errors():
            where = _loc(err["loc"]) or "<root>"
            if err["type"] == "extra_forbidden":
                problems.append(f"{where}: unknown key")
            else:
                problems.append(f"{where}: {err['msg']}")
    if problems:
        raise ConfigError(sorted(set(problems), key=problems.index))
    return config


def load_config(path: str | Path) -> StudyConfig:
    return validate_config(Path(path).read_text())


class AnchorError(SdmCableError):
    """A point the whole study depends on (baseline, calibration) is infeasible."""


@dataclass
class StudyReport:
    kind: str
    columns: tuple[str, ...]
    rows: list[dict]
    table_text: str
    metadata: dict = field(default_factory=dict)
    table_path: Path | None = None
    metadata_path: Path | None = None


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_table(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def read_table(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def _db(x):
    if x is None:
        return None
    return -math.inf if x <= 0 else linear_to_db(x)


def _run_snr_distribution(cfg: StudyConfig):
    rows = []
    for snr1_db in _expand(cfg.distribution.snr1_db):
        snr1 = db_to_linear(snr1_db)
        for m in _expand(cfg.sweep.m):
            q = DistributionQuery(snr1, m)
            exact = required_snr_m(q)
            approx = required_snr_m_approx(q) if m >= 1 else None
            rows.append(
                dict(
                    snr1_db=snr1_db, snr1_linear=snr1, m=m, snr_m_linear=exact, snr_m_db=_db(exact),
                    snr_m_approx_linear=approx, snr_m_approx_db=_db(approx),
                )
            )
    return rows, {}


def _run_gsnr_vs_span(cfg: StudyConfig):
    link = cfg.link
    if link.total_length_km is None:
        raise ConfigError(["link.total_length_km: required for study_kind 'gsnr-vs-span'"])
    points = max_gsnr_curve(
        cfg.geometry(), _expand(cfg.sweep.span_length_km), link.total_length_km, link.backoff_db,
        workers=cfg.execution.workers,
    )
    rows = []
    for p in points:
        gsnr = None if p.gsnr_db is None else db_to_linear(p.gsnr_db)
        rows.append(
            dict(
                span_km=p.span_km, span_count=p.span_count, actual_span_km=p.actual_span_km,
                total_length_km=link.total_length_km, backoff_db=link.backoff_db,
                launch_power_w=p.optimal_power_w,
                launch_power_dbm=None if p.optimal_power_w is None else watts_to_dbm(p.optimal_power_w),
                gsnr_linear=gsnr, gsnr_db=p.gsnr_db, status=p.error or "ok",
            )
        )
    return rows, {}


def _run_span_vs_length(cfg: StudyConfig):
    dist = cfg.distribution
    points = distributed_span_curve(
        cfg.geometry(), _expand(cfg.sweep.total_length_km), dist.multiplier(), dist.baseline_span_km,
        cfg.link.backoff_db, snap=dist.snap_span_count, workers=cfg.execution.workers,
    )
    rows = []
    for p in points:
        s = p.solve
        rows.append(
            dict(
                total_length_km=p.total_length_km, m=p.m, baseline_span_km=p.baseline_span_km,
                baseline_gsnr_db=p.baseline_gsnr_db, target_gsnr_db=p.target_gsnr_db,
                span_km=s and s.span_length_km, span_count=s and s.span_count,
                launch_power_w=s and s.launch_power_w,
                launch_power_dbm=s and watts_to_dbm(s.launch_power_w),
                achieved_gsnr_db=s and s.achieved_gsnr_db, status=p.error or "ok",
            )
        )
    return rows, {}


def _baseline(cfg: StudyConfig) -> CableBaseline:
    c = cfg.cable
    return CableBaseline(
        fiber_pairs=c.fiber_pairs, span_length_km=c.span_length_km, total_length_km=c.total_length_km,
        fiber=cfg.fiber.build(), amplifier=cfg.amplifier.build(), grid=cfg.grid.build(),
    )


def _fp_range(cfg: StudyConfig) -> list[int]:
    values = _expand(cfg.sweep.fiber_pairs)
    bad = [v for v in values if v != int(v)]
    if bad:
        raise ConfigError([f"sweep.fiber_pairs: values must be integers, got {bad}"])
    return [int(v) for v in values]


def calibrated_feed(cfg: StudyConfig):
    """Feed spec for the study, fitted first when a calibration block is present."""
    feed = cfg.feed.build()
    if cfg.calibration is None:
        return feed, None
    cal = cfg.calibration
    try:
        result = calibrate_feed(
            _baseline(cfg), cfg.feed.build(cal.voltage_kv), cal.boundary_fiber_pairs, cal.backoff_db,
            _fp_range(cfg), workers=cfg.execution.workers,
        )
    except SdmCableError as exc:
        raise AnchorError(f"feed calibration failed: {exc}") from exc
    return result.feed.at_voltage(feed.voltage_v), result


def _run_cable_sweep(cfg: StudyConfig):
    baseline = _baseline(cfg)
    feed, cal = calibrated_feed(cfg)
    if cal is not None and cal.sweep.backoff_db == cfg.cable.backoff_db:
        sweep = with_feed(cal.sweep, feed)
    else:
        try:
            sweep = design_sweep(baseline, feed, _fp_range(cfg), cfg.cable.backoff_db, workers=cfg.execution.workers)
        except SdmCableError as exc:
            raise AnchorError(f"baseline operating point is infeasible: {exc}") from exc
    if not sweep.designs[0].valid and sweep.designs[0].fiber_pairs == baseline.fiber_pairs:
        raise AnchorError(f"baseline design is infeasible: {sweep.designs[0].error}")

    selected = sweep.selected
    min_amp = sweep.min_amplifier
    limit = sweep.power_limit_fiber_pairs
    rows = []
    for d in sweep.designs:
        marks = []
        if d.fiber_pairs == baseline.fiber_pairs:
            marks.append("baseline")
        if selected is not None and d.fiber_pairs == selected.fiber_pairs:
            marks.append("selected")
        if min_amp is not None and d.fiber_pairs == min_amp.fiber_pairs:
            marks.append("min-amplifiers")
        if d.fiber_pairs == limit:
            marks.append("power-limit")
        rows.append(
            dict(
                fiber_pairs=d.fiber_pairs, m=d.fiber_pairs / baseline.fiber_pairs, required_gsnr_db=d.required_gsnr_db,
                span_km=d.span_length_km, repeater_count=d.repeater_count, amplifier_count=d.amplifier_count,
                launch_power_w=d.per_channel_power_w,
                launch_power_dbm=None if d.per_channel_power_w is None else watts_to_dbm(d.per_channel_power_w),
                per_fiber_gsnr_db=d.per_fiber_gsnr_db,
                cable_capacity_tbps=None if d.cable_capacity_bps is None else d.cable_capacity_bps / 1e12,
                power_available_w=d.power_available_w, power_required_w=d.power_required_w,
                power_margin_w=d.power_margin_w, power_feasible=d.power_feasible if d.valid else None,
                marker=";".join(marks), status=d.error or "ok",
            )
        )
    derived = {
        "baseline_repeater_count": baseline.repeater_count,
        "baseline_gsnr_db": sweep.baseline_gsnr_db,
        "target_capacity_tbps": sweep.target_capacity_bps / 1e12,
        "feed": {
            "voltage_kv": feed.voltage_v / 1e3,
            "cable_resistance_ohm_per_km": feed.cable_resistance_ohm_per_km,
            "control_fraction": feed.control_fraction,
            "eo_efficiency": feed.eo_efficiency,
            "availability_model": feed.availability_model,
        },
        "selected_fiber_pairs": selected and selected.fiber_pairs,
        "min_amplifier_fiber_pairs": min_amp and min_amp.fiber_pairs,
        "power_limit_fiber_pairs": limit,
    }
    if cal is not None:
        derived["calibration"] = {
            "voltage_kv": cfg.calibration.voltage_kv,
            "boundary_fiber_pairs": cal.boundary_fiber_pairs,
            "backoff_db": cfg.calibration.backoff_db,
            "eo_efficiency_min": cal.eo_efficiency_min,
            "eo_efficiency_max": cal.eo_efficiency_max,
            "eo_efficiency_fitted": cal.feed.eo_efficiency,
        }
    return rows, derived


def _run_rate_plan(cfg: StudyConfig):
    rates = cfg.rates
    rs = cfg.grid.symbol_rate_gbaud * 1e9
    rows = []
    for snr_db in _expand(cfg.sweep.snr_db):
        plan = best_rate_plan(db_to_linear(snr_db), rs, code_gap_db=rates.code_gap_db, margin_bits=rates.margin_bits)
        rows.append(
            dict(
                snr_db=snr_db, format=plan.format, entropy_bits=plan.entropy_bits if plan.achievable else None,
                fec_overhead=plan.fec_overhead if plan.achievable else None,
                code_rate=plan.code_rate if plan.achievable else None,
                rate_bits=plan.rate_bits if plan.achievable else None,
                mi_bits=plan.mi_bits if plan.achievable else None,
                net_throughput_gbps=plan.net_throughput_bps / 1e9, net_throughput_bps=plan.net_throughput_bps,
                achievable=plan.achievable,
            )
        )
    return rows, {"code_gap_db": rates.code_gap_db, "margin_bits": rates.margin_bits, "symbol_rate_hz": rs}


_RUNNERS = {
    "snr-distribution": _run_snr_distribution,
    "gsnr-vs-span": _run_gsnr_vs_span,
    "span-vs-length": _run_span_vs_length,
    "cable-sweep": _run_cable_sweep,
    "rate-plan": _run_rate_plan,
}


def run_study(config: StudyConfig, *, write: bool = True, base_dir: str | Path | None = None) -> StudyReport:
    """Run a validated study and (optionally) write its table and metadata.

    Relative output paths resolve against ``base_dir`` when given. The table
    depends only on the config; timing lives in the metadata record.
    """
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    rows, derived = _RUNNERS[config.study_kind](config)
    columns = COLUMNS[config.study_kind]
    table = render_table(columns, rows)
    metadata = {
        "tool": "sdmcable",
        "version": __version__,
        "study_kind": config.study_kind,
        "columns": list(columns),
        "row_count": len(rows),
        "config": config.model_dump(mode="json"),
        "derived": derived,
        "started_utc": started.isoformat(),
        "wall_time_s": time.perf_counter() - t0,
    }
    report = StudyReport(config.study_kind, columns, rows, table, metadata)
    if write:
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        table_path = base / config.output.table_path
        meta_path = base / config.output.resolved_metadata_path()
        table_path.parent.mkdir(parents=True, exist_ok=True)
        meta_path.parent.mkdir(parents=True, exist_ok=True)
        table_path.write_text(table)
        meta_path.write_text(json.dumps(metadata, indent=2, sort_keys=True, default=str) + "\n")
        report.table_path, report.metadata_path = table_path, meta_path
    return report
