import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_grid_mi, entropy_sum, square_qam_oracle
from sdmcable.errors import DomainError, InfeasibleEntropyError
from sdmcable.rates import (
    CODE_RATES,
    FORMATS,
    awgn_mi,
    best_rate_plan,
    candidate_plans,
    entropy_bounds,
    entropy_grid,
    mb_constellation,
    mb_pmf_for_entropy,
    net_throughput,
    square_qam,
)
from sdmcable.units import db_to_linear


# -- constellations ------------------------------------------------------------


@pytest.mark.parametrize("m", [4, 16, 64])
def test_square_qam_matches_lattice(m):
    pts = square_qam(m)
    ref = square_qam_oracle(m)
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, rel=1e-14)
    assert sorted(np.round(pts, 12), key=lambda z: (z.real, z.imag)) == sorted(
        np.round(ref, 12), key=lambda z: (z.real, z.imag)
    )
    assert np.all(np.diff(np.abs(pts) ** 2) >= -1e-12)


def test_square_qam_rejects_non_square():
    with pytest.raises(DomainError):
        square_qam(32)


@pytest.mark.parametrize("fmt", list(FORMATS))
@pytest.mark.parametrize("nu", [0.0, 0.3, 1.7, 6.0])
def test_mb_constellation_invariants(fmt, nu):
    c = mb_constellation(fmt, nu)
    assert c.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    assert c.mean_energy == pytest.approx(1.0, rel=1e-12)
    assert c.entropy_bits <= math.log2(FORMATS[fmt]) + 1e-12


def test_zero_scale_is_uniform():
    for fmt, m in FORMATS.items():
        c = mb_pmf_for_entropy(fmt, math.log2(m))
        assert c.nu == 0.0
        np.testing.assert_allclose(c.probabilities, np.full(m, 1 / m), rtol=1e-15)
        assert c.entropy_bits == pytest.approx(math.log2(m), abs=1e-12)


@pytest.mark.parametrize("fmt,target", [("64QAM", 5.0), ("64QAM", 3.5), ("16QAM", 2.5), ("16QAM", 3.0), ("64QAM", 2.0)])
def test_entropy_solve_against_summation(fmt, target):
    c = mb_pmf_for_entropy(fmt, target)
    assert entropy_sum(c.probabilities) == pytest.approx(target, abs=1e-6)
    if target > 2.0:
        assert c.nu > 0


def test_entropy_bounds_and_errors():
    assert entropy_bounds("16QAM") == (2.0, 4.0)
    assert entropy_bounds("64QAM") == (2.0, 6.0)
    with pytest.raises(InfeasibleEntropyError):
        mb_pmf_for_entropy("16QAM", 4.5)
    with pytest.raises(InfeasibleEntropyError):
        mb_pmf_for_entropy("64QAM", 1.5)
    with pytest.raises(DomainError):
        mb_pmf_for_entropy("8PSK", 2.0)


# -- mutual information --------------------------------------------------------


def test_uniform_16qam_mi_against_dense_grid_at_10db():
    c = mb_constellation("16QAM", 0.0)
    snr = db_to_linear(10.0)
    assert awgn_mi(c, snr) == pytest.approx(dense_grid_mi(c.points, c.probabilities, snr), abs=2e-3)


@pytest.mark.parametrize("fmt", ["16QAM", "64QAM"])
@pytest.mark.parametrize("snr_db", [0.0, 10.0, 20.0])
def test_uniform_mi_spot_values(fmt, snr_db):
    c = mb_constellation(fmt, 0.0)
    snr = db_to_linear(snr_db)
    assert awgn_mi(c, snr) == pytest.approx(dense_grid_mi(c.points, c.probabilities, snr), abs=0.02)


def test_shaped_mi_against_dense_grid():
    c = mb_pmf_for_entropy("64QAM", 4.5)
    snr = db_to_linear(11.0)
    assert awgn_mi(c, snr) == pytest.approx(dense_grid_mi(c.points, c.probabilities, snr), abs=2e-3)


@pytest.mark.parametrize("fmt,entropy,snr_db", [("16QAM", 4.0, 10.0), ("64QAM", 5.0, 12.5), ("16QAM", 3.0, 5.0)])
def test_quadrature_and_monte_carlo_agree(fmt, entropy, snr_db):
    c = mb_pmf_for_entropy(fmt, entropy)
    snr = db_to_linear(snr_db)
    q = awgn_mi(c, snr)
    mc = awgn_mi(c, snr, method="monte-carlo", samples=1_000_000, seed=7)
    assert abs(q - mc) < 0.01


def test_monte_carlo_is_seeded():
    c = mb_constellation("16QAM", 0.0)
    a = awgn_mi(c, 10.0, method="monte-carlo", samples=20_000, seed=3)
    b = awgn_mi(c, 10.0, method="monte-carlo", samples=20_000, seed=3)
    assert a == b


def test_mi_limits():
    c = mb_pmf_for_entropy("64QAM", 5.0)
    assert awgn_mi(c, 1e6) == pytest.approx(c.entropy_bits, abs=1e-6)
    assert awgn_mi(c, 1e-6) < 1e-5


@settings(max_examples=60, deadline=None)
@given(
    fmt=st.sampled_from(list(FORMATS)),
    nu=st.floats(min_value=0.0, max_value=5.0),
    snr_db=st.floats(min_value=-10.0, max_value=30.0),
)
def test_mi_below_shannon_and_entropy(fmt, nu, snr_db):
    c = mb_constellation(fmt, nu)
    snr = db_to_linear(snr_db)
    mi = awgn_mi(c, snr)
    assert 0.0 <= mi <= c.entropy_bits + 1e-12
    assert mi <= math.log2(1 + snr) + 1e-9


def test_mi_method_validation():
    c = mb_constellation("16QAM", 0.0)
    with pytest.raises(DomainError):
        awgn_mi(c, 0.0)
    with pytest.raises(DomainError):
        awgn_mi(c, 10.0, order=5)
    with pytest.raises(DomainError):
        awgn_mi(c, 10.0, method="guess")


# -- rate plans ----------------------------------------------------------------


def test_throughput_formula_is_exact():
    assert net_throughput(32e9, 5, "64QAM", Fraction(4, 5)) == 243.2e9
    assert net_throughput(32e9, 3, "16QAM", Fraction(3, 4)) == 128e9
    assert 32e9 * (5 - 6 * (1 - 0.8)) * 2 == pytest.approx(243.2e9, rel=1e-15)


def test_entropy_grid_steps():
    assert entropy_grid("16QAM") == [Fraction(x, 2) for x in range(4, 9)]
    assert entropy_grid("64QAM")[-1] == 6
    assert len(entropy_grid("64QAM")) == 9


def test_plans_at_reference_snrs():
    hi = best_rate_plan(db_to_linear(12.5))
    assert (hi.format, hi.fec_overhead, hi.entropy_bits) == ("64QAM", 0.25, 5.0)
    assert hi.net_throughput_bps == 243.2e9
    lo = best_rate_plan(db_to_linear(6.6))
    assert (lo.format, lo.fec_overhead, lo.entropy_bits) == ("16QAM", 0.33, 3.0)
    assert lo.net_throughput_bps == 128e9


def test_nothing_achievable_at_minus_10db():
    plan = best_rate_plan(db_to_linear(-10.0))
    assert not plan.achievable
    assert plan.net_throughput_bps == 0.0


def test_candidate_enumeration_covers_every_triple():
    plans = candidate_plans(db_to_linear(9.0))
    assert len(plans) == (5 + 9) * len(CODE_RATES)
    for p in plans:
        if p.achievable:
            m = math.log2(FORMATS[p.format])
            assert p.rate_bits == pytest.approx(p.entropy_bits - m * (1 - p.code_rate), abs=1e-12)
            assert p.rate_bits <= p.mi_bits
            assert p.net_throughput_bps == pytest.approx(32e9 * p.rate_bits * 2, rel=1e-12)


@pytest.mark.parametrize("snr_db", [7.0, 10.0, 10.5, 13.0])
def test_best_plan_is_the_tie_broken_maximum(snr_db):
    plans = [p for p in candidate_plans(db_to_linear(snr_db)) if p.achievable]
    best = best_rate_plan(db_to_linear(snr_db))
    top = max(p.net_throughput_bps for p in plans)
    assert best.net_throughput_bps == top
    tied = [p for p in plans if p.net_throughput_bps == top]
    assert best.entropy_bits == min(p.entropy_bits for p in tied)
    lowest = [p for p in tied if p.entropy_bits == best.entropy_bits]
    assert FORMATS[best.format] == min(FORMATS[p.format] for p in lowest)


def test_margin_only_removes_plans():
    snr = db_to_linear(11.0)
    free = best_rate_plan(snr)
    strict = best_rate_plan(snr, margin_bits=0.3)
    assert strict.net_throughput_bps <= free.net_throughput_bps


def test_throughput_non_decreasing_in_snr():
    values = [best_rate_plan(db_to_linear(x)).net_throughput_bps for x in np.arange(0.0, 20.01, 1.0)]
    assert np.all(np.diff(values) >= 0)
    assert values[-1] == pytest.approx(32e9 * (6 - 6 / 6) * 2)
