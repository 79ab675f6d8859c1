"""
Test Modem - constellations, the closed-form SER against an independent
Q-function and the Monte-Carlo LS+ML detector, and link throughput.
"""

import math

import numpy as np
import pytest

from spectrum.exceptions import ConfigurationError, ContractViolation
from spectrum.modem.constellation import (
    MOD_ORDERS,
    MOD_SCHEMES,
    ModulationFamily,
    build_constellation,
    scheme_for_order,
    write_constellation_csv,
)
from spectrum.modem.ser import ser_analytic, ser_curve, ser_monte_carlo, throughput
from spectrum.utils.rng import stream
from spectrum.utils.serialization import read_csv_rows


def q_oracle(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def ser_oracle(order: int, sinr: float) -> float:
    family = scheme_for_order(order).family
    if family == ModulationFamily.SQUARE_QAM:
        rail = 2.0 * (1.0 - 1.0 / math.sqrt(order)) * q_oracle(math.sqrt(3.0 * sinr / (order - 1)))
        return 1.0 - (1.0 - rail) ** 2
    if family == ModulationFamily.PSK:
        return min(1.0, 2.0 * q_oracle(math.sqrt(2.0 * sinr) * math.sin(math.pi / order)))
    return min(1.0, 4.0 * q_oracle(math.sqrt(3.0 * sinr / (order - 1))))


# SINR points (dB) where each scheme's SER lies roughly between 1e-3 and 0.1
ORACLE_POINTS_DB = {
    4: [2.0, 4.0, 6.0, 8.0, 10.0],
    8: [10.0, 11.5, 13.0, 14.5, 16.0],
    16: [9.0, 11.0, 13.0, 15.0, 17.0],
    32: [12.0, 14.0, 16.0, 18.0, 20.0],
    64: [15.0, 17.0, 19.0, 21.0, 23.0],
    128: [18.0, 20.0, 22.0, 24.0, 26.0],
    256: [21.0, 23.0, 25.0, 27.0, 29.0],
}


class TestConstellation:
    def test_orders_and_families(self):
        assert MOD_ORDERS == (4, 8, 16, 32, 64, 128, 256)
        families = {s.order: s.family for s in MOD_SCHEMES}
        assert families[8] == ModulationFamily.PSK
        assert families[32] == families[128] == ModulationFamily.CROSS_QAM

    @pytest.mark.parametrize("scheme", MOD_SCHEMES, ids=str)
    def test_unit_power_and_distinct_points(self, scheme):
        c = build_constellation(scheme)
        assert c.points.size == scheme.order
        assert c.mean_power == pytest.approx(1.0, abs=1e-12)
        assert c.min_distance() > 0.0

    def test_square_qam_grid_spacing(self):
        c = build_constellation(scheme_for_order(16))
        assert c.min_distance() == pytest.approx(2.0 * math.sqrt(3.0 / 30.0))

    def test_cross_qam_has_no_corners(self):
        c = build_constellation(scheme_for_order(32))
        # 6x6 grid minus 4 corner points; symmetric under 90 degree rotation
        rotated = np.sort_complex(np.round(c.points * 1j, 12))
        assert np.allclose(rotated, np.sort_complex(np.round(c.points, 12)))
        assert np.max(np.abs(c.points.real)) < np.max(np.abs(c.points)) - 1e-9

    def test_unsupported_order(self):
        with pytest.raises(ConfigurationError):
            scheme_for_order(512)

    def test_csv_dump(self, tmp_path):
        path = write_constellation_csv(tmp_path / "c.csv", build_constellation(scheme_for_order(8)))
        rows = read_csv_rows(path)
        assert len(rows) == 8
        assert float(rows[0]["I"]) == pytest.approx(1.0)


class TestSerAnalytic:
    @pytest.mark.parametrize("order", MOD_ORDERS)
    def test_matches_independent_formula(self, order):
        for sinr_db in (0.0, 10.0, 20.0, 30.0):
            sinr = 10.0 ** (sinr_db / 10.0)
            expected = ser_oracle(order, sinr)
            assert ser_analytic(scheme_for_order(order), sinr) == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_qpsk_at_zero_sinr(self):
        assert ser_analytic(scheme_for_order(4), 0.0) == pytest.approx(0.75)

    @pytest.mark.parametrize("scheme", MOD_SCHEMES, ids=str)
    def test_monotone_and_bounded(self, scheme):
        sinr = 10.0 ** (np.linspace(-10.0, 40.0, 400) / 10.0)
        ser = ser_analytic(scheme, sinr)
        assert np.all((ser >= 0.0) & (ser <= 1.0))
        assert np.all(np.diff(ser) <= 0.0)

    def test_scalar_in_scalar_out(self):
        assert isinstance(ser_analytic(scheme_for_order(16), 10.0), float)


def _assert_mc_agrees(order: int, n_symbols: int, sigmas: float):
    scheme = scheme_for_order(order)
    rng = stream(99, "ser-oracle", order)
    for sinr_db in ORACLE_POINTS_DB[order]:
        sinr = 10.0 ** (sinr_db / 10.0)
        analytic = ser_analytic(scheme, sinr)
        mc = ser_monte_carlo(scheme, sinr, n_symbols, rng)
        sigma = math.sqrt(max(analytic * (1.0 - analytic), 1e-12) / n_symbols)
        if scheme.family == ModulationFamily.CROSS_QAM:
            # The closed form overcounts cross-QAM neighbours
            assert mc <= analytic + sigmas * sigma
            assert analytic <= 2.0 * mc + sigmas * sigma
        else:
            assert abs(mc - analytic) <= sigmas * sigma, (order, sinr_db, mc, analytic)


class TestSerMonteCarlo:
    @pytest.mark.parametrize("order", [4, 16, 32])
    def test_quick_agreement(self, order):
        _assert_mc_agrees(order, 200_000, sigmas=4.0)

    @pytest.mark.slow
    @pytest.mark.parametrize("order", MOD_ORDERS)
    def test_full_agreement(self, order):
        _assert_mc_agrees(order, 1_000_000, sigmas=3.0)

    def test_noiseless_link_has_no_errors(self, rng):
        assert ser_monte_carlo(scheme_for_order(256), np.inf, 10_000, rng) == 0.0

    def test_zero_sinr_is_a_guess(self, rng):
        assert ser_monte_carlo(scheme_for_order(16), 0.0, 10, rng) == pytest.approx(15.0 / 16.0)

    def test_needs_symbols(self, rng):
        with pytest.raises(ContractViolation):
            ser_monte_carlo(scheme_for_order(4), 1.0, 0, rng)

    def test_curve_rows(self, rng):
        rows = ser_curve(scheme_for_order(64), np.array([10.0, 20.0]), 0, rng)
        assert [r["sinr_db"] for r in rows] == [10.0, 20.0]
        assert all(math.isnan(r["ser_mc"]) for r in rows)


class TestThroughput:
    def test_silent_link(self):
        assert throughput(0, None, 1.0, 20e6) == 0.0

    def test_transmitting_link(self):
        assert throughput(1, scheme_for_order(16), 0.1, 1e6) == pytest.approx(3.6e6)

    def test_transmit_without_scheme(self):
        with pytest.raises(ContractViolation):
            throughput(1, None, 0.0, 1e6)

    def test_bad_decision(self):
        with pytest.raises(ContractViolation):
            throughput(2, scheme_for_order(4), 0.0, 1e6)
