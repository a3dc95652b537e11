"""Launch-power and span-length optimisation on top of the GN link model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.optimize import brentq

from ._parallel import ordered_map
from .capacity import DistributionQuery, required_snr_m
from .errors import InfeasibleGeometryError, SdmCableError, TargetTooHighError
from .photonic import GsnrBreakdown, LinkGeometry, evaluate_gsnr, gsnr_for_powers
from .units import db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm

POWER_MIN_DBM = -12.0
POWER_MAX_DBM = 12.0
POWER_STEP_DB = 0.25
REFINE_TOL_DB = 0.01
MIN_SPAN_KM = 25.0
MAX_SPAN_KM = 400.0
SPAN_TOL_KM = 0.1
# Relative slack when comparing a GSNR against a target computed from the
# same model, so that exact ties are not lost to rounding.
TARGET_RTOL = 1e-9

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PowerSweepResult:
    optimal_power_w: float
    optimal_gsnr: GsnrBreakdown
    samples: tuple[tuple[float, float], ...]
    backoff_db: float
    operating_power_w: float
    operating_gsnr: GsnrBreakdown

    @property
    def peak_gsnr_linear(self) -> float:
        return self.optimal_gsnr.gsnr_modified_linear

    @property
    def operating_gsnr_linear(self) -> float:
        return self.operating_gsnr.gsnr_modified_linear


@dataclass(frozen=True)
class SpanSolveResult:
    span_length_km: float
    span_count: float
    achieved_gsnr_db: float
    launch_power_w: float
    backoff_db: float
    target_gsnr_db: float

    @property
    def achieved_gsnr_linear(self) -> float:
        return db_to_linear(self.achieved_gsnr_db)


@dataclass(frozen=True)
class SpanPoint:
    """One point of the peak-GSNR-versus-span-length curve."""

    span_km: float
    span_count: int
    actual_span_km: float
    optimal_power_w: float | None
    gsnr_db: float | None
    error: str | None = None


@dataclass(frozen=True)
class DistributionPoint:
    """Span length that lets ``m`` fibres carry the baseline capacity."""

    total_length_km: float
    m: float
    baseline_span_km: float
    baseline_gsnr_db: float | None
    target_gsnr_db: float | None
    solve: SpanSolveResult | None
    error: str | None = None


def _gsnr_at_dbm(geometry: LinkGeometry, p_dbm: float) -> float:
    return float(gsnr_for_powers(geometry, dbm_to_watts(p_dbm)))


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return c if fc >= fd else d


def optimize_launch_power(
    geometry: LinkGeometry,
    backoff_db: float = 0.0,
    *,
    power_min_dbm: float = POWER_MIN_DBM,
    power_max_dbm: float = POWER_MAX_DBM,
    step_db: float = POWER_STEP_DB,
    refine_tol_db: float = REFINE_TOL_DB,
) -> PowerSweepResult:
    """Find the GSNR-maximising per-channel power, then back off if asked.

    A grid scan locates the peak, golden-section search refines it. With
    ``backoff_db > 0`` the operating point is the power below the peak at
    which the GSNR has dropped by exactly ``backoff_db``.
    """
    if backoff_db < 0:
        raise ValueError(f"backoff_db must be >= 0, got {backoff_db}")
    geometry = geometry.geometry()
    n = int(round((power_max_dbm - power_min_dbm) / step_db)) + 1
    grid_dbm = np.linspace(power_min_dbm, power_max_dbm, n)
    gsnr = gsnr_for_powers(geometry, dbm_to_watts(grid_dbm))
    if not np.any(gsnr > 0):
        raise InfeasibleGeometryError(
            f"no launch power in [{power_min_dbm}, {power_max_dbm}] dBm sustains "
            f"{geometry.span_count:g} spans of {geometry.span_length_km:g} km"
        )
    i = int(np.argmax(gsnr))
    lo = grid_dbm[max(i - 1, 0)]
    hi = grid_dbm[min(i + 1, n - 1)]
    peak_dbm = _golden_max(partial(_gsnr_at_dbm, geometry), lo, hi, refine_tol_db)
    if _gsnr_at_dbm(geometry, peak_dbm) < gsnr[i]:
        peak_dbm = float(grid_dbm[i])
    peak_w = dbm_to_watts(peak_dbm)
    peak = evaluate_gsnr(geometry.with_power(peak_w))

    with np.errstate(divide="ignore"):
        samples = tuple(
            (float(p), float(g))
            for p, g in zip(dbm_to_watts(grid_dbm), np.where(gsnr > 0, 10 * np.log10(gsnr), -np.inf))
        )

    if backoff_db == 0:
        return PowerSweepResult(peak_w, peak, samples, 0.0, peak_w, peak)

    target = peak.gsnr_modified_linear / db_to_linear(backoff_db)
    low = peak_dbm - step_db
    while _gsnr_at_dbm(geometry, low) >= target:
        low -= 5.0
        if low < -60.0:
            raise InfeasibleGeometryError("could not bracket the backed-off operating point")
    op_dbm = brentq(lambda x: _gsnr_at_dbm(geometry, x) - target, low, peak_dbm, xtol=1e-9, rtol=1e-12)
    op_w = dbm_to_watts(op_dbm)
    return PowerSweepResult(peak_w, peak, samples, float(backoff_db), op_w, evaluate_gsnr(geometry.with_power(op_w)))


def span_count_for(total_length_km: float, span_km: float) -> int:
    return max(1, int(round(total_length_km / span_km)))


def _span_point(geometry: LinkGeometry, total_length_km: float, backoff_db: float, span_km: float) -> SpanPoint:
    count = span_count_for(total_length_km, span_km)
    actual = total_length_km / count
    try:
        res = optimize_launch_power(geometry.with_spans(actual, count), backoff_db)
    except SdmCableError as exc:
        return SpanPoint(span_km, count, actual, None, None, f"{type(exc).__name__}: {exc}")
    return SpanPoint(span_km, count, actual, res.operating_power_w, linear_to_db(res.operating_gsnr_linear))


def max_gsnr_curve(
    geometry: LinkGeometry,
    span_lengths_km,
    total_length_km: float,
    backoff_db: float = 0.0,
    *,
    workers: int = 1,
) -> list[SpanPoint]:
    """Peak GSNR for each span length, with ``round(total/span)`` spans.

    Infeasible points are returned with ``error`` set instead of raising.
    """
    fn = partial(_span_point, geometry, total_length_km, backoff_db)
    return ordered_map(fn, [float(s) for s in span_lengths_km], workers)


def _achievable(geometry: LinkGeometry, total_length_km: float, backoff_db: float, span_km: float, span_count=None):
    count = total_length_km / span_km if span_count is None else span_count
    return optimize_launch_power(geometry.with_spans(span_km, count), backoff_db)


def solve_span_for_target(
    geometry: LinkGeometry,
    total_length_km: float,
    target_gsnr_linear: float,
    backoff_db: float = 0.0,
    *,
    min_span_km: float = MIN_SPAN_KM,
    max_span_km: float = MAX_SPAN_KM,
    tol_km: float = SPAN_TOL_KM,
    snap: bool = True,
) -> SpanSolveResult:
    """Longest span whose achievable GSNR (at ``backoff_db``) still meets the target.

    Bisection runs on a continuous span count ``total/span``. With ``snap``
    the result is rounded to the integer span count ``ceil(total/span)`` (and
    one fewer span is tried in case the bisection tolerance pushed it over),
    after which the launch power is re-optimised.
    """
    need = target_gsnr_linear * (1.0 - TARGET_RTOL)

    def meets(span_km, count=None):
        try:
            return _achievable(geometry, total_length_km, backoff_db, span_km, count).operating_gsnr_linear >= need
        except InfeasibleGeometryError:
            return False

    if not meets(min_span_km):
        raise TargetTooHighError(
            f"target {linear_to_db(target_gsnr_linear):.3f} dB is not reachable with "
            f"{min_span_km:g} km spans over {total_length_km:g} km"
        )
    if meets(max_span_km):
        span = max_span_km
    else:
        lo, hi = min_span_km, max_span_km
        while hi - lo > tol_km:
            mid = 0.5 * (lo + hi)
            if meets(mid):
                lo = mid
            else:
                hi = mid
        span = lo

    if snap:
        count = max(1, math.ceil(total_length_km / span - 1e-9))
        while count > 1 and meets(total_length_km / (count - 1), count - 1):
            count -= 1
        span = total_length_km / count
        res = _achievable(geometry, total_length_km, backoff_db, span, count)
    else:
        count = total_length_km / span
        res = _achievable(geometry, total_length_km, backoff_db, span)

    return SpanSolveResult(
        span_length_km=span,
        span_count=count,
        achieved_gsnr_db=linear_to_db(res.operating_gsnr_linear),
        launch_power_w=res.operating_power_w,
        backoff_db=float(backoff_db),
        target_gsnr_db=linear_to_db(target_gsnr_linear),
    )


def _distribution_point(geometry, m, baseline_span_km, backoff_db, snap, total_length_km):
    try:
        count = span_count_for(total_length_km, baseline_span_km)
        base = optimize_launch_power(geometry.with_spans(total_length_km / count, count), backoff_db)
        g1 = base.operating_gsnr_linear
        target = required_snr_m(DistributionQuery(g1, m))
        solve = solve_span_for_target(geometry, total_length_km, target, backoff_db, snap=snap)
    except SdmCableError as exc:
        return DistributionPoint(total_length_km, float(m), baseline_span_km, None, None, None, f"{type(exc).__name__}: {exc}")
    return DistributionPoint(
        total_length_km, float(m), baseline_span_km, linear_to_db(g1), linear_to_db(target), solve
    )


def distributed_span_curve(
    geometry: LinkGeometry,
    total_lengths_km,
    m=2,
    baseline_span_km: float = 50.0,
    backoff_db: float = 0.0,
    *,
    snap: bool = False,
    workers: int = 1,
) -> list[DistributionPoint]:
    """Span length for ``m`` fibres carrying what one fibre with ``baseline_span_km`` carries.

    The default ``snap=False`` reports the continuous optimum, which is what a
    span-versus-distance curve shows; short links otherwise jump between
    integer span counts (500 km can only be split into 2 or 3 spans).
    """
    fn = partial(_distribution_point, geometry, m, baseline_span_km, backoff_db, snap)
    return ordered_map(fn, [float(x) for x in total_lengths_km], workers)


def peak_power_dbm(geometry: LinkGeometry) -> float:
    return watts_to_dbm(optimize_launch_power(geometry).optimal_power_w)
