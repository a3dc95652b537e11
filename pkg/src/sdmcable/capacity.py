"""Capacity bookkeeping when a fixed throughput is spread over more fibres."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .errors import DomainError


def as_multiplier(m) -> Fraction | float:
    """Keep rational multipliers exact; ``Fraction(19, 12)`` stays ``19/12``."""
    if isinstance(m, Rational):
        return Fraction(m)
    return float(m)


@dataclass(frozen=True)
class DistributionQuery:
    """Baseline SNR and the factor ``m`` by which the fibre count grows.

    ``m`` may be fractional, e.g. ``Fraction(19, 12)`` when a 12-pair cable is
    redesigned with 19 pairs.
    """

    snr1_linear: float
    m: Fraction | float
    bandwidth_hz: float = 1.0

    def __post_init__(self):
        if not self.snr1_linear >= 0:
            raise DomainError(f"snr1_linear must be >= 0, got {self.snr1_linear}")
        if not self.m > 0:
            raise DomainError(f"m must be > 0, got {self.m}")
        object.__setattr__(self, "m", as_multiplier(self.m))

    @classmethod
    def from_fiber_pairs(cls, snr1_linear: float, new_pairs: int, base_pairs: int, bandwidth_hz: float = 1.0):
        return cls(snr1_linear, Fraction(new_pairs, base_pairs), bandwidth_hz)


def shannon_capacity(snr_linear: float, bandwidth_hz: float = 1.0, polarizations: int = 1) -> float:
    if snr_linear < 0:
        raise DomainError(f"SNR must be >= 0, got {snr_linear}")
    return polarizations * bandwidth_hz * math.log2(1.0 + snr_linear)


def required_snr_m(q: DistributionQuery) -> float:
    """Per-fibre SNR that keeps the total capacity when split over ``m`` fibres."""
    if q.m == 1:
        return q.snr1_linear
    return math.expm1(math.log1p(q.snr1_linear) / float(q.m))


def required_snr_m_approx(q: DistributionQuery) -> float:
    """Large-``m`` form, ``ln(1 + SNR_1)/m``; never above the exact value."""
    if q.m < 1:
        raise DomainError(f"the large-m approximation needs m >= 1, got {q.m}")
    return math.log1p(q.snr1_linear) / float(q.m)


def amplifier_ratio(m, span_m_km: float, span_1_km: float) -> float:
    """``N_amp,m / N_amp,1 = m L_1 / L_m``; below 1 means amplifiers are saved."""
    if not (m > 0 and span_m_km > 0 and span_1_km > 0):
        raise DomainError("m and both span lengths must be positive")
    return float(m) * span_1_km / span_m_km


def saves_amplifiers(m, span_m_km: float, span_1_km: float) -> bool:
    return amplifier_ratio(m, span_m_km, span_1_km) < 1.0
