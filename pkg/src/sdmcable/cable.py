"""Whole-cable redesign under a shore-end power-feed budget.

A baseline cable (fibre-pair count, repeater spacing, length) fixes a
target capacity. Each candidate fibre-pair count gets the longest repeater
spacing that still carries that capacity, and is then checked against the
electrical power a feed voltage can deliver to every repeater.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import partial

from ._parallel import ordered_map
from .capacity import DistributionQuery, required_snr_m, shannon_capacity
from .errors import CalibrationError, DomainError, SdmCableError
from .optimizer import optimize_launch_power, solve_span_for_target, span_count_for
from .photonic import AmplifierSpec, FiberSpec, LinkGeometry, WdmGrid
from .units import linear_to_db

PER_REPEATER = "per-repeater"
PER_SPAN_PER_REPEATER = "per-span-per-repeater"
AVAILABILITY_MODELS = (PER_REPEATER, PER_SPAN_PER_REPEATER)

MAX_FIBER_PAIRS = 64


@dataclass(frozen=True)
class PowerFeedSpec:
    """Shore-end power feed and repeater electrical conversion.

    ``availability_model`` selects how the deliverable power is shared:

    * ``"per-repeater"``: ``V^2 / (4 L R0 N_rep)``, the matched-load power of
      the cable conductor split evenly over the repeaters (default).
    * ``"per-span-per-repeater"``: ``V^2 / (4 N_sp L R0 N_rep)``, which
      additionally divides by the span count.
    """

    voltage_v: float
    cable_resistance_ohm_per_km: float = 1.0
    control_fraction: float = 0.10
    eo_efficiency: float = 0.02
    availability_model: str = PER_REPEATER

    def __post_init__(self):
        if not self.voltage_v > 0:
            raise DomainError(f"voltage_v must be > 0, got {self.voltage_v}")
        if not self.cable_resistance_ohm_per_km > 0:
            raise DomainError("cable_resistance_ohm_per_km must be > 0")
        if not 0 <= self.control_fraction < 1:
            raise DomainError(f"control_fraction must lie in [0, 1), got {self.control_fraction}")
        if not 0 <= self.eo_efficiency <= 1:
            raise DomainError(f"eo_efficiency must lie in [0, 1], got {self.eo_efficiency}")
        if self.availability_model not in AVAILABILITY_MODELS:
            raise DomainError(f"availability_model must be one of {AVAILABILITY_MODELS}")

    def at_voltage(self, voltage_v: float) -> "PowerFeedSpec":
        return replace(self, voltage_v=voltage_v)


def repeater_power_available(feed: PowerFeedSpec, n_sp: float, total_length_km: float, n_rep: float) -> float:
    """Electrical power the feed can deliver to each repeater, in watts."""
    if not (n_sp > 0 and total_length_km > 0 and n_rep > 0):
        raise DomainError("n_sp, total_length_km and n_rep must be positive")
    denom = 4.0 * total_length_km * feed.cable_resistance_ohm_per_km * n_rep
    if feed.availability_model == PER_SPAN_PER_REPEATER:
        denom *= n_sp
    return feed.voltage_v**2 / denom


def repeater_power_required(n_fp: int, n_ch: int, p_ch_w: float, feed: PowerFeedSpec) -> float:
    """Electrical power one repeater draws to drive ``2 n_fp`` amplifiers."""
    if not (n_fp > 0 and n_ch > 0 and p_ch_w > 0):
        raise DomainError("n_fp, n_ch and p_ch_w must be positive")
    efficiency = (1.0 - feed.control_fraction) * feed.eo_efficiency
    if efficiency == 0.0:
        return math.inf
    return 2.0 * n_fp * n_ch * p_ch_w / efficiency


def max_fiber_pairs(
    feed: PowerFeedSpec, n_sp: float, total_length_km: float, n_rep: float, n_ch: int, p_ch_w: float
) -> int:
    """Largest fibre-pair count whose repeaters stay within the available power."""
    available = repeater_power_available(feed, n_sp, total_length_km, n_rep)
    per_pair = repeater_power_required(1, n_ch, p_ch_w, feed)
    if not math.isfinite(per_pair):
        return 0
    k = int(math.floor(available / per_pair))
    # floor of a rounded quotient can be one off the direct comparison
    while repeater_power_required(k + 1, n_ch, p_ch_w, feed) <= available:
        k += 1
    while k > 0 and repeater_power_required(k, n_ch, p_ch_w, feed) > available:
        k -= 1
    return max(k, 0)


@dataclass(frozen=True)
class CableBaseline:
    """The cable being redesigned and the link physics shared by all designs."""

    fiber_pairs: int = 12
    span_length_km: float = 84.0
    total_length_km: float = 6611.0
    fiber: FiberSpec = FiberSpec.scuba()
    amplifier: AmplifierSpec = AmplifierSpec()
    grid: WdmGrid = WdmGrid.c_band()
    polarizations: int = 2

    def __post_init__(self):
        if int(self.fiber_pairs) != self.fiber_pairs or self.fiber_pairs < 1:
            raise DomainError("fiber_pairs must be a positive integer")
        if not (self.span_length_km > 0 and self.total_length_km > 0):
            raise DomainError("span and total lengths must be positive")

    @property
    def repeater_count(self) -> int:
        return span_count_for(self.total_length_km, self.span_length_km)

    def geometry(self) -> LinkGeometry:
        n = self.repeater_count
        return LinkGeometry(self.fiber, self.amplifier, self.grid, self.total_length_km / n, n)

    def fiber_capacity_bps(self, gsnr_linear: float) -> float:
        return shannon_capacity(gsnr_linear, self.grid.total_bandwidth_hz, self.polarizations)


@dataclass(frozen=True)
class CableDesign:
    fiber_pairs: int
    repeater_count: int | None
    span_length_km: float | None
    span_count: int | None
    per_channel_power_w: float | None
    amplifier_count: int | None
    per_fiber_gsnr_db: float | None
    required_gsnr_db: float | None
    cable_capacity_bps: float | None
    power_available_w: float | None
    power_required_w: float | None
    power_margin_w: float | None
    power_feasible: bool
    error: str | None = None

    @property
    def valid(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class CableSweep:
    baseline: CableBaseline
    feed: PowerFeedSpec
    backoff_db: float
    baseline_gsnr_db: float
    target_capacity_bps: float
    designs: tuple[CableDesign, ...]

    def _valid(self):
        return [d for d in self.designs if d.valid]

    @property
    def selected(self) -> CableDesign | None:
        """Feasible design with fewest repeaters, then fewest amplifiers, then fewest pairs."""
        feasible = [d for d in self._valid() if d.power_feasible]
        if not feasible:
            return None
        return min(feasible, key=lambda d: (d.repeater_count, d.amplifier_count, d.fiber_pairs))

    @property
    def min_amplifier(self) -> CableDesign | None:
        valid = self._valid()
        if not valid:
            return None
        return min(valid, key=lambda d: (d.amplifier_count, d.fiber_pairs))

    @property
    def power_limit_fiber_pairs(self) -> int:
        """Largest fibre-pair count in the sweep that the feed can power (0 if none)."""
        feasible = [d.fiber_pairs for d in self._valid() if d.power_feasible]
        return max(feasible, default=0)

    def design_for(self, fiber_pairs: int) -> CableDesign:
        for d in self.designs:
            if d.fiber_pairs == fiber_pairs:
                return d
        raise KeyError(fiber_pairs)


def _baseline_operating_point(baseline: CableBaseline, backoff_db: float):
    return optimize_launch_power(baseline.geometry(), backoff_db)


def _design(baseline: CableBaseline, feed: PowerFeedSpec, backoff_db: float, snr1: float, n_fp: int) -> CableDesign:
    target = required_snr_m(DistributionQuery(snr1, Fraction(n_fp, baseline.fiber_pairs)))
    try:
        solve = solve_span_for_target(baseline.geometry(), baseline.total_length_km, target, backoff_db, snap=True)
    except SdmCableError as exc:
        return CableDesign(
            n_fp, None, None, None, None, None, None, linear_to_db(target), None, None, None, None, False,
            f"{type(exc).__name__}: {exc}",
        )
    n_rep = int(solve.span_count)
    p_ch = solve.launch_power_w
    available = repeater_power_available(feed, n_rep, baseline.total_length_km, n_rep)
    required = repeater_power_required(n_fp, baseline.grid.channel_count, p_ch, feed)
    margin = available - required
    return CableDesign(
        fiber_pairs=n_fp,
        repeater_count=n_rep,
        span_length_km=solve.span_length_km,
        span_count=n_rep,
        per_channel_power_w=p_ch,
        amplifier_count=2 * n_fp * n_rep,
        per_fiber_gsnr_db=solve.achieved_gsnr_db,
        required_gsnr_db=linear_to_db(target),
        cable_capacity_bps=n_fp * baseline.fiber_capacity_bps(solve.achieved_gsnr_linear),
        power_available_w=available,
        power_required_w=required,
        power_margin_w=margin,
        power_feasible=margin >= 0,
    )


def design_sweep(
    baseline: CableBaseline,
    feed: PowerFeedSpec,
    fp_range=None,
    backoff_db: float = 2.0,
    *,
    workers: int = 1,
) -> CableSweep:
    """Redesign the cable for each fibre-pair count in ``fp_range``.

    Every design keeps the baseline capacity: the per-fibre GSNR target comes
    from splitting the baseline Shannon capacity over ``N_fp / N_fp0`` as many
    fibres. Repeaters sit at every span (``N_rep = N_sp``), so a repeater
    houses ``2 N_fp`` amplifiers.
    """
    if fp_range is None:
        fp_range = range(baseline.fiber_pairs, 31)
    fp_list = sorted({int(n) for n in fp_range})
    if not fp_list:
        raise DomainError("fp_range is empty")
    if fp_list[0] < baseline.fiber_pairs or fp_list[-1] > MAX_FIBER_PAIRS:
        raise DomainError(f"fp_range must lie within [{baseline.fiber_pairs}, {MAX_FIBER_PAIRS}]")

    base = _baseline_operating_point(baseline, backoff_db)
    snr1 = base.operating_gsnr_linear
    target_capacity = baseline.fiber_pairs * baseline.fiber_capacity_bps(snr1)
    designs = ordered_map(partial(_design, baseline, feed, backoff_db, snr1), fp_list, workers)
    return CableSweep(
        baseline=baseline,
        feed=feed,
        backoff_db=float(backoff_db),
        baseline_gsnr_db=linear_to_db(snr1),
        target_capacity_bps=target_capacity,
        designs=tuple(designs),
    )


def with_feed(sweep: CableSweep, feed: PowerFeedSpec) -> CableSweep:
    """Re-evaluate power feasibility of an existing sweep under another feed.

    The optical designs do not depend on the feed, so this avoids re-solving.
    """
    designs = []
    for d in sweep.designs:
        if not d.valid:
            designs.append(d)
            continue
        available = repeater_power_available(feed, d.span_count, sweep.baseline.total_length_km, d.repeater_count)
        required = repeater_power_required(d.fiber_pairs, sweep.baseline.grid.channel_count, d.per_channel_power_w, feed)
        designs.append(
            replace(
                d,
                power_available_w=available,
                power_required_w=required,
                power_margin_w=available - required,
                power_feasible=available - required >= 0,
            )
        )
    return replace(sweep, feed=feed, designs=tuple(designs))


@dataclass(frozen=True)
class FeedCalibration:
    feed: PowerFeedSpec
    boundary_fiber_pairs: int
    eo_efficiency_min: float
    eo_efficiency_max: float
    sweep: CableSweep


def calibrate_feed(
    baseline: CableBaseline,
    feed: PowerFeedSpec,
    boundary_fiber_pairs: int = 19,
    backoff_db: float = 2.0,
    fp_range=None,
    *,
    workers: int = 1,
) -> FeedCalibration:
    """Fit the electrical-to-optical efficiency so the power limit falls at ``boundary_fiber_pairs``.

    Resistance and control fraction stay fixed; only ``eo_efficiency`` moves.
    Every efficiency in ``[lo, hi)`` puts the largest feasible pair count at
    the boundary; the geometric midpoint is returned.
    """
    sweep = design_sweep(baseline, feed, fp_range, backoff_db, workers=workers)
    unit = replace(feed, eo_efficiency=1.0)

    def needed(d: CableDesign) -> float:
        avail = repeater_power_available(unit, d.span_count, baseline.total_length_km, d.repeater_count)
        return repeater_power_required(d.fiber_pairs, baseline.grid.channel_count, d.per_channel_power_w, unit) / avail

    valid = [d for d in sweep.designs if d.valid]
    at = [d for d in valid if d.fiber_pairs == boundary_fiber_pairs]
    above = [needed(d) for d in valid if d.fiber_pairs > boundary_fiber_pairs]
    if not at:
        raise CalibrationError(f"no valid design with {boundary_fiber_pairs} fibre pairs in the sweep")
    if not above:
        raise CalibrationError("the sweep must extend past the boundary to bound the efficiency from above")
    lo, hi = needed(at[0]), min(above)
    if not lo < hi:
        raise CalibrationError(
            f"{boundary_fiber_pairs} pairs need more power than a larger design; no efficiency puts the limit there"
        )
    eta = math.sqrt(lo * hi)
    if eta > 1.0:
        raise CalibrationError(f"fitted efficiency {eta:.3g} exceeds 1")
    fitted = replace(feed, eo_efficiency=eta)
    return FeedCalibration(fitted, boundary_fiber_pairs, lo, hi, with_feed(sweep, fitted))
