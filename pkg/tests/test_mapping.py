import numpy as np
import pytest

from uwofdm import mapping
from uwofdm.numerics import rng_from_key

# Documented oracle grid: both constellations, unit gain, sigma_w^2 = 0.5,
# r on a 9x9 grid over [-1.5, 1.5]^2, three residual-phase variances.
ORACLE_SIGMA_W_SQ = 0.5
ORACLE_GRID = np.linspace(-1.5, 1.5, 9)
ORACLE_SIGMA_THETA = (1e-4, 1e-2, 1e-1)


class TestConstellations:
    @pytest.mark.parametrize("const", [mapping.QPSK, mapping.QAM16])
    def test_unit_average_energy(self, const):
        assert np.mean(np.abs(const.points) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_qpsk_labeling_anchor(self):
        assert mapping.map_bits(np.array([0, 0], dtype=np.uint8), mapping.QPSK)[0] == \
            pytest.approx((1 + 1j) / np.sqrt(2))

    @pytest.mark.parametrize("const", [mapping.QPSK, mapping.QAM16])
    def test_gray_adjacency(self, const):
        # nearest geometric neighbours differ in exactly one label bit
        pts = const.points
        k = const.bits_per_symbol
        dmin = np.min([abs(a - b) for i, a in enumerate(pts) for b in pts[:i]])
        for i, a in enumerate(pts):
            for j, b in enumerate(pts):
                if i < j and abs(a - b) < dmin * 1.001:
                    assert bin(i ^ j).count("1") == 1

    @pytest.mark.parametrize("const", [mapping.QPSK, mapping.QAM16])
    def test_map_harddemap_identity(self, const):
        rng = rng_from_key(0, const.order)
        bits = rng.integers(0, 2, 400 * const.bits_per_symbol).astype(np.uint8)
        symbols = mapping.map_bits(bits, const)
        assert np.array_equal(mapping.hard_demap(symbols, const), bits)

    def test_bit_count_check(self):
        with pytest.raises(ValueError):
            mapping.map_bits(np.array([0, 1, 0], dtype=np.uint8), mapping.QAM16)

    def test_unsupported_order(self):
        with pytest.raises(ValueError):
            mapping.Constellation(8)


class TestAwgnLlr:
    def test_qpsk_closed_form_anchor(self):
        # LLR_b = 4*Re/Im(r)/(sqrt(2)*sigma_w^2) for unit-energy Gray QPSK
        r = (1 + 1j) / np.sqrt(2)
        llrs = mapping.demap_llr_awgn(np.array([r]), 1.0, 0.5, mapping.QPSK)[0]
        assert llrs == pytest.approx([4.0, 4.0], abs=1e-9)

    def test_far_in_quadrant_strongly_positive(self):
        llrs = mapping.demap_llr_awgn(np.array([3 + 3j]), 1.0, 0.5, mapping.QPSK)[0]
        assert np.all(llrs > 10)

    def test_centroid_sign_bits_zero(self):
        # at r = 0 the sign bits are undecidable; the 16-QAM amplitude bits
        # lean toward the inner points, which sit closer to the centroid
        llr_qpsk = mapping.demap_llr_awgn(np.array([0j]), 1.0, 0.4, mapping.QPSK)[0]
        assert np.array_equal(llr_qpsk, [0.0, 0.0])
        llr16 = mapping.demap_llr_awgn(np.array([0j]), 1.0, 0.4, mapping.QAM16)[0]
        assert llr16[0] == pytest.approx(0.0, abs=1e-12)   # sign of Re
        assert llr16[2] == pytest.approx(0.0, abs=1e-12)   # sign of Im
        assert llr16[1] < 0 and llr16[3] < 0               # amplitude bits favour inner

    def test_llr_antisymmetry_qpsk(self):
        rng = rng_from_key(1)
        r = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        plus = mapping.demap_llr_awgn(r, 1.0, 0.3, mapping.QPSK)
        minus = mapping.demap_llr_awgn(-np.conj(r), 1.0, 0.3, mapping.QPSK)
        # negating Re(r) negates the first bit's LLR, leaves the second alone
        assert np.allclose(minus[:, 0], -plus[:, 0])
        assert np.allclose(minus[:, 1], plus[:, 1])

    def test_cap_applied(self):
        llrs = mapping.demap_llr_awgn(np.array([100 + 100j]), 1.0, 1e-6, mapping.QPSK)
        assert np.max(np.abs(llrs)) == mapping.LLR_CAP

    def test_zero_noise_hard_limits(self):
        llrs = mapping.demap_llr_awgn(np.array([0.9 + 0.8j]), 1.0, 0.0, mapping.QPSK)[0]
        assert np.array_equal(llrs, [mapping.LLR_CAP, mapping.LLR_CAP])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            mapping.demap_llr_awgn(np.array([np.nan + 0j]), 1.0, 0.5, mapping.QPSK)


class TestPhaseAwareLlr:
    def test_reduces_to_awgn_at_zero_sigma_theta(self):
        rng = rng_from_key(2)
        r = rng.standard_normal(200) + 1j * rng.standard_normal(200)
        params = mapping.LlrParams(np.full(200, 0.9 - 0.1j), np.full(200, 0.3), 0.0)
        quad = mapping.demap_llr(r, params, mapping.QAM16)
        awgn = mapping.demap_llr_awgn(r, 0.9 - 0.1j, 0.3, mapping.QAM16)
        assert np.max(np.abs(quad - awgn)) < 1e-9

    def test_small_sigma_theta_limit(self):
        # on the documented grid; far outside it the phase marginal genuinely
        # differs from AWGN at second order even for sigma_theta^2 = 1e-8
        r = (ORACLE_GRID[:, None] + 1j * ORACLE_GRID[None, :]).ravel()
        params = mapping.LlrParams(np.full(r.size, 1.0 + 0j), np.full(r.size, 0.5), 1e-8)
        quad = mapping.demap_llr(r, params, mapping.QAM16)
        awgn = mapping.demap_llr_awgn(r, 1.0, 0.5, mapping.QAM16)
        assert np.max(np.abs(quad - awgn)) <= 1e-6

    @pytest.mark.parametrize("sigma_theta_sq", ORACLE_SIGMA_THETA)
    @pytest.mark.parametrize("const", [mapping.QPSK, mapping.QAM16])
    def test_quadrature_matches_trapezoid_oracle(self, sigma_theta_sq, const):
        r = (ORACLE_GRID[:, None] + 1j * ORACLE_GRID[None, :]).ravel()
        params = mapping.LlrParams(np.full(r.size, 1.0 + 0j),
                                   np.full(r.size, ORACLE_SIGMA_W_SQ), sigma_theta_sq)
        quad = mapping.demap_llr(r, params, const)
        scalar = mapping.LlrParams(np.array([1.0 + 0j]),
                                   np.array([ORACLE_SIGMA_W_SQ]), sigma_theta_sq)
        oracle = np.array([mapping.demap_llr_trapezoid(z, scalar, const) for z in r])
        assert np.max(np.abs(quad - oracle)) <= 1e-6

    def test_rotated_qpsk_against_oracle(self):
        r = np.exp(1j * 0.1) * (1 + 1j) / np.sqrt(2)
        params = mapping.LlrParams(np.array([1.0 + 0j]), np.array([0.5]), 0.01)
        quad = mapping.demap_llr(np.array([r]), params, mapping.QPSK)[0]
        oracle = mapping.demap_llr_trapezoid(r, params, mapping.QPSK)
        assert np.max(np.abs(quad - oracle)) <= 1e-6

    def test_zero_input_symmetry(self):
        params = mapping.LlrParams(np.array([1.0 + 0j]), np.array([0.4]), 0.05)
        llrs = mapping.demap_llr(np.array([0j]), params, mapping.QPSK)[0]
        assert np.array_equal(llrs, [0.0, 0.0])

    def test_param_validation(self):
        with pytest.raises(ValueError):
            mapping.LlrParams(np.array([1.0 + 0j]), np.array([-0.1]), 0.0)
        with pytest.raises(ValueError):
            mapping.LlrParams(np.array([0j]), np.array([0.1]), 0.0)
