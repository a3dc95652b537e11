"""Rate adaptation with Maxwell-Boltzmann shaped QAM on an AWGN channel.

A rate plan is a (format, entropy, FEC overhead) triple. Its net rate per
polarisation is ``H(X) - m (1 - R)`` with ``m = log2 M``. A plan is judged
achievable when that rate does not exceed the mutual information of the
shaped constellation at the operating SNR, less an implementation gap that
stands in for a real decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import bisect
from scipy.special import logsumexp, xlogy

from .errors import DomainError, InfeasibleEntropyError
from .units import db_to_linear

FORMATS = {"16QAM": 16, "64QAM": 64}
# FEC overhead -> code rate
CODE_RATES = {0.20: Fraction(5, 6), 0.25: Fraction(4, 5), 0.33: Fraction(3, 4)}
ENTROPY_STEP = Fraction(1, 2)
ENTROPY_MIN = Fraction(2)
DEFAULT_CODE_GAP_DB = 1.0
QUADRATURE_ORDER = 24
ENTROPY_TOL = 1e-10


def square_qam(m: int) -> np.ndarray:
    """Unit-energy square M-QAM points, sorted by energy."""
    k = int(round(math.sqrt(m)))
    if k * k != m or k < 2 or k % 2:
        raise DomainError(f"{m}-QAM is not a square constellation")
    levels = np.arange(-(k - 1), k, 2, dtype=float)
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    order = np.lexsort((pts.imag, pts.real, np.round(np.abs(pts) ** 2, 9)))
    pts = pts[order]
    return pts / math.sqrt(np.mean(np.abs(pts) ** 2))


def _entropy_bits(p: np.ndarray) -> float:
    return float(-xlogy(p, p).sum() / math.log(2.0))


def _mb_pmf(energy: np.ndarray, nu: float) -> np.ndarray:
    logits = -nu * (energy - energy.min())
    p = np.exp(logits - logsumexp(logits))
    return p / p.sum()


@dataclass(frozen=True, eq=False)
class MbConstellation:
    format: str
    points: np.ndarray
    probabilities: np.ndarray
    nu: float
    entropy_bits: float

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(len(self.points))))

    @property
    def mean_energy(self) -> float:
        return float(np.sum(self.probabilities * np.abs(self.points) ** 2))


def mb_constellation(fmt: str, nu: float) -> MbConstellation:
    """Shaped constellation for a given Maxwell-Boltzmann scale, renormalised to unit energy."""
    base = square_qam(_order(fmt))
    energy = np.abs(base) ** 2
    p = _mb_pmf(energy, nu)
    pts = base / math.sqrt(np.sum(p * energy))
    return MbConstellation(fmt, pts, p, float(nu), _entropy_bits(p))


def _order(fmt: str) -> int:
    try:
        return FORMATS[fmt]
    except KeyError:
        raise DomainError(f"unknown format {fmt!r}; expected one of {sorted(FORMATS)}") from None


def entropy_bounds(fmt: str) -> tuple[float, float]:
    """Entropy range reachable by MB shaping: innermost ring only, up to uniform."""
    m = _order(fmt)
    energy = np.abs(square_qam(m)) ** 2
    n_inner = int(np.sum(np.isclose(energy, energy.min())))
    return math.log2(n_inner), math.log2(m)


def mb_pmf_for_entropy(fmt: str, target_entropy_bits: float) -> MbConstellation:
    """MB-shaped constellation whose entropy equals the target.

    The entropy falls monotonically with ``nu`` from ``log2 M`` towards the
    entropy of the innermost ring, so ``nu`` is found by bisection. A target
    at the lower bound itself is met to within ``ENTROPY_TOL`` by a large
    ``nu``.
    """
    h_min, h_max = entropy_bounds(fmt)
    target = float(target_entropy_bits)
    if target > h_max + ENTROPY_TOL or target < h_min - ENTROPY_TOL:
        raise InfeasibleEntropyError(
            f"{fmt} with MB shaping reaches entropies in [{h_min:g}, {h_max:g}] bits, not {target:g}"
        )
    if target >= h_max - ENTROPY_TOL:
        return mb_constellation(fmt, 0.0)

    energy = np.abs(square_qam(_order(fmt))) ** 2

    def excess(nu):
        return _entropy_bits(_mb_pmf(energy, nu)) - target

    hi = 1.0
    while excess(hi) > 0:
        if excess(hi) <= ENTROPY_TOL:
            return mb_constellation(fmt, hi)
        hi *= 2.0
        if hi > 1e6:
            raise InfeasibleEntropyError(f"could not bracket entropy {target:g} for {fmt}")
    nu = bisect(excess, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=400)
    return mb_constellation(fmt, nu)


def _mi_quadrature(points, probs, snr, order):
    sigma2 = 1.0 / snr
    t, w = hermgauss(order)
    noise = math.sqrt(sigma2) * (t[:, None] + 1j * t[None, :]).ravel()
    weights = (w[:, None] * w[None, :]).ravel() / math.pi
    log_p = np.log(probs)
    diff = points[:, None] - points[None, :]
    total = 0.0
    for i in range(len(points)):
        if probs[i] == 0.0:
            continue
        d = diff[i][:, None] + noise[None, :]
        arg = log_p[:, None] - (np.abs(d) ** 2 - np.abs(noise[None, :]) ** 2) / sigma2
        total += probs[i] * np.dot(weights, logsumexp(arg, axis=0))
    return -total / math.log(2.0)


def _mi_monte_carlo(points, probs, snr, samples, seed, chunk=50_000):
    rng = np.random.default_rng(seed)
    sigma2 = 1.0 / snr
    log_p = np.log(np.where(probs > 0, probs, 1.0))
    log_p[probs == 0] = -np.inf
    acc = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        idx = rng.choice(len(points), size=n, p=probs)
        noise = math.sqrt(sigma2 / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        y = points[idx] + noise
        arg = log_p[None, :] - (np.abs(y[:, None] - points[None, :]) ** 2 - np.abs(noise[:, None]) ** 2) / sigma2
        acc += float(np.sum(logsumexp(arg, axis=1)))
        done += n
    return -acc / samples / math.log(2.0)


def awgn_mi(
    constellation: MbConstellation,
    snr_linear: float,
    *,
    method: str = "quadrature",
    order: int = QUADRATURE_ORDER,
    samples: int = 1_000_000,
    seed: int = 0,
) -> float:
    """Mutual information in bits per complex symbol over AWGN.

    ``snr_linear`` is symbol energy over complex noise variance; the
    constellation has unit mean energy. ``method`` is ``"quadrature"``
    (Gauss-Hermite, ``order`` nodes per dimension) or ``"monte-carlo"``.
    """
    if not snr_linear > 0:
        raise DomainError(f"snr must be > 0, got {snr_linear}")
    pts = np.asarray(constellation.points)
    probs = np.asarray(constellation.probabilities)
    if method == "quadrature":
        if order < 10:
            raise DomainError("quadrature order must be at least 10")
        mi = _mi_quadrature(pts, probs, snr_linear, order)
    elif method == "monte-carlo":
        mi = _mi_monte_carlo(pts, probs, snr_linear, samples, seed)
    else:
        raise DomainError(f"unknown MI method {method!r}")
    return float(min(max(mi, 0.0), constellation.entropy_bits))


@dataclass(frozen=True)
class RatePlan:
    format: str | None
    entropy_bits: float
    fec_overhead: float
    code_rate: float
    net_throughput_bps: float
    achievable: bool
    mi_bits: float = 0.0
    rate_bits: float = 0.0

    @property
    def net_throughput_gbps(self) -> float:
        return self.net_throughput_bps / 1e9


def net_throughput(symbol_rate_hz: float, entropy_bits, fmt: str, code_rate) -> float:
    """``R_s (H - m (1 - R)) 2`` evaluated in exact rationals, then rounded once."""
    m = int(round(math.log2(_order(fmt))))
    rate = Fraction(entropy_bits) - m * (1 - Fraction(code_rate))
    return float(Fraction(symbol_rate_hz) * rate * 2)


def entropy_grid(fmt: str) -> list[Fraction]:
    top = Fraction(int(round(math.log2(_order(fmt)))))
    n = int((top - ENTROPY_MIN) / ENTROPY_STEP)
    return [ENTROPY_MIN + k * ENTROPY_STEP for k in range(n + 1)]


@lru_cache(maxsize=512)
def _cached_mi(fmt: str, entropy: Fraction, snr_linear: float, order: int) -> float:
    return awgn_mi(mb_pmf_for_entropy(fmt, float(entropy)), snr_linear, order=order)


def candidate_plans(
    snr_linear: float,
    symbol_rate_hz: float = 32e9,
    *,
    code_gap_db: float = DEFAULT_CODE_GAP_DB,
    margin_bits: float = 0.0,
    formats=tuple(FORMATS),
    order: int = QUADRATURE_ORDER,
) -> list[RatePlan]:
    """Every (format, entropy, overhead) triple with its achievability flag."""
    if not snr_linear > 0:
        raise DomainError(f"snr must be > 0, got {snr_linear}")
    effective_snr = snr_linear / db_to_linear(code_gap_db)
    plans = []
    for fmt in formats:
        m = int(round(math.log2(_order(fmt))))
        for h in entropy_grid(fmt):
            mi = _cached_mi(fmt, h, effective_snr, order)
            for oh, rate in CODE_RATES.items():
                air = h - m * (1 - rate)
                ok = air > 0 and float(air) <= mi - margin_bits
                plans.append(
                    RatePlan(
                        format=fmt,
                        entropy_bits=float(h),
                        fec_overhead=oh,
                        code_rate=float(rate),
                        net_throughput_bps=net_throughput(symbol_rate_hz, h, fmt, rate) if ok else 0.0,
                        achievable=ok,
                        mi_bits=mi,
                        rate_bits=float(air),
                    )
                )
    return plans


def best_rate_plan(
    snr_linear: float,
    symbol_rate_hz: float = 32e9,
    *,
    code_gap_db: float = DEFAULT_CODE_GAP_DB,
    margin_bits: float = 0.0,
    formats=tuple(FORMATS),
    order: int = QUADRATURE_ORDER,
) -> RatePlan:
    """Highest-throughput achievable plan.

    Ties go to the lower entropy, then the smaller constellation, then the
    higher code rate. When nothing is achievable the returned plan has
    ``achievable=False`` and zero throughput.
    """
    plans = [
        p
        for p in candidate_plans(
            snr_linear, symbol_rate_hz, code_gap_db=code_gap_db, margin_bits=margin_bits, formats=formats, order=order
        )
        if p.achievable
    ]
    if not plans:
        return RatePlan(None, 0.0, 0.0, 0.0, 0.0, False)
    return min(plans, key=lambda p: (-p.net_throughput_bps, p.entropy_bits, FORMATS[p.format], -p.code_rate))
