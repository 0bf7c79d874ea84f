import numpy as np
import pytest

from uwofdm import channel, config, generators, mapping, rxfront, txchain
from uwofdm.numerics import rng_from_key


@pytest.fixture(scope="module")
def uw():
    cfg = config.build_preset(config.UW_OFDM)
    sel = config.build_selection_matrices(cfg)
    gs = generators.build_generator_set(cfg, sel, generators.SYSTEMATIC)
    return cfg, sel, gs


@pytest.fixture(scope="module")
def cp():
    cfg = config.build_preset(config.CP_OFDM)
    sel = config.build_selection_matrices(cfg)
    gs = generators.build_generator_set(cfg, sel, "cp_ofdm")
    return cfg, sel, gs


def qpsk_packet(cfg, sel, gs, seed=0, x_u=None):
    rng = rng_from_key(seed)
    bits = rng.integers(0, 2, 2 * cfg.symbols_per_packet * cfg.n_data).astype(np.uint8)
    d = mapping.map_bits(bits, mapping.QPSK).reshape(cfg.symbols_per_packet, cfg.n_data)
    return txchain.build_packet_from_symbols(d, cfg, sel, gs, x_u=x_u), d


class TestFrontend:
    def test_uw_loopback(self, uw):
        cfg, sel, gs = uw
        pkt, d = qpsk_packet(cfg, sel, gs)
        rxp = rxfront.rx_frontend(pkt.stream, cfg, sel)
        assert rxp.y_full.shape == (200, 64)
        expected = (gs.g_d @ d.T + (gs.g_p @ txchain.DEFAULT_PILOTS)[:, None]).T
        assert np.max(np.abs(rxp.y_down - expected)) < 1e-10
        assert np.max(np.abs(rxp.y_down - rxp.y_full[:, sel.used])) == 0

    def test_cp_loopback(self, cp):
        cfg, sel, gs = cp
        pkt, d = qpsk_packet(cfg, sel, gs, seed=1)
        rxp = rxfront.rx_frontend(pkt.stream, cfg, sel)
        expected = (gs.g_d @ d.T + (gs.g_p @ txchain.DEFAULT_PILOTS)[:, None]).T
        assert np.max(np.abs(rxp.y_down - expected)) < 1e-10

    def test_uw_loopback_with_prefix(self, uw):
        cfg, sel, gs = uw
        x_u = txchain.barker_uw(cfg, gs, txchain.DEFAULT_PILOTS)
        pkt, d = qpsk_packet(cfg, sel, gs, seed=2, x_u=x_u)
        _, uw_down = txchain.uw_spectra(cfg, sel, x_u)
        rxp = rxfront.rx_frontend(pkt.stream, cfg, sel, pkt.prefix_len)
        expected = (gs.g_d @ d.T + (gs.g_p @ txchain.DEFAULT_PILOTS)[:, None]
                    + uw_down[:, None]).T
        assert np.max(np.abs(rxp.y_down - expected)) < 1e-10

    def test_length_check(self, uw):
        cfg, sel, _ = uw
        with pytest.raises(ValueError):
            rxfront.rx_frontend(np.zeros(100, dtype=complex), cfg, sel)


class TestCpeEstimation:
    def test_zero_at_no_cfo(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        pkt, _ = qpsk_packet(cfg, sel, gs, seed=3)
        rxp = rxfront.rx_frontend(pkt.stream, cfg, sel)
        phi = rxfront.estimate_cpe(rxp.y_down, txchain.DEFAULT_PILOTS, ch, sel)
        assert np.max(np.abs(phi)) < 1e-9

    def test_constant_offset_without_data(self, uw):
        # with d = 0 there is no data-induced jitter: phi_hat - phi_l is a
        # deterministic constant across the packet
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        d = np.zeros((cfg.symbols_per_packet, cfg.n_data), dtype=complex)
        pkt = txchain.build_packet_from_symbols(d, cfg, sel, gs)
        cfo = channel.CfoModel(0.1, 64)
        rx = channel.apply_cfo_time(pkt.stream, cfo)
        rxp = rxfront.rx_frontend(rx, cfg, sel)
        phi = rxfront.estimate_cpe(rxp.y_down, txchain.DEFAULT_PILOTS, ch, sel)
        true_phi = channel.phi_l_for_variant(cfo, np.arange(200), cfg)
        offset = np.angle(np.exp(1j * (phi - true_phi)))
        assert np.std(offset) < 1e-6

    def test_faded_pilot_is_downweighted(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        faded = channel.ChannelRealization(
            taps=ch.taps, h_full=ch.h_full, h_used=ch.h_used.copy(),
            h_pilot=ch.h_pilot.copy(), tau_rms=0.0, seed=0)
        faded.h_pilot[0] = 1e-6      # ~zero weight, and no divide-by-zero blowup
        faded.h_used[sel.pilot_pos[0]] = 1e-6
        pkt, _ = qpsk_packet(cfg, sel, gs, seed=4)
        rxp = rxfront.rx_frontend(pkt.stream, cfg, sel)
        phi = rxfront.estimate_cpe(rxp.y_down, txchain.DEFAULT_PILOTS, faded, sel)
        assert np.all(np.isfinite(phi))

    def test_zero_pilot_energy_rejected(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        with pytest.raises(ValueError, match="energy"):
            rxfront.estimate_cpe(np.zeros((2, 52)), np.zeros(4), ch, sel,
                                 weights=np.zeros(4))


class TestEpsilonEstimation:
    @pytest.mark.parametrize("eps", [0.02, 0.1, 0.3])
    def test_noise_free_exact(self, uw, eps):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        pkt, _ = qpsk_packet(cfg, sel, gs, seed=5)
        cfo = channel.CfoModel(eps, 64)
        rx = channel.apply_cfo_time(pkt.stream, cfo)
        rxp = rxfront.rx_frontend(rx, cfg, sel)
        phi = rxfront.estimate_cpe(rxp.y_down, txchain.DEFAULT_PILOTS, ch, sel)
        assert rxfront.estimate_epsilon(phi, cfg) == pytest.approx(eps, abs=2e-4)

    def test_two_symbols_exact_slope(self, uw):
        cfg, sel, _ = uw
        phi = np.array([0.2, 0.2 + 2 * np.pi * 0.05])
        assert rxfront.estimate_epsilon(phi, cfg) == pytest.approx(0.05, abs=1e-12)

    def test_unbiased_over_packets(self, uw):
        # 300 packets: the per-packet estimator scatter is ~1e-5, so fewer
        # packets cannot statistically resolve the 1e-6 bias bound
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        cfo = channel.CfoModel(0.1, 64)
        estimates = []
        for t in range(300):
            pkt, _ = qpsk_packet(cfg, sel, gs, seed=100 + t)
            rx = channel.apply_cfo_time(pkt.stream, cfo)
            rxp = rxfront.rx_frontend(rx, cfg, sel)
            phi = rxfront.estimate_cpe(rxp.y_down, txchain.DEFAULT_PILOTS, ch, sel)
            estimates.append(rxfront.estimate_epsilon(phi, cfg))
        assert np.mean(estimates) == pytest.approx(0.1, abs=1e-6)

    def test_cp_slope_scaling(self, cp):
        cfg, sel, gs = cp
        ch = channel.flat_channel(cfg, sel)
        pkt, _ = qpsk_packet(cfg, sel, gs, seed=6)
        cfo = channel.CfoModel(0.08, 64)
        rx = channel.apply_cfo_time(pkt.stream, cfo)
        rxp = rxfront.rx_frontend(rx, cfg, sel)
        phi = rxfront.estimate_cpe(rxp.y_down, txchain.DEFAULT_PILOTS, ch, sel)
        assert rxfront.estimate_epsilon(phi, cfg) == pytest.approx(0.08, abs=2e-4)

    def test_needs_two_symbols(self, uw):
        cfg, _, _ = uw
        with pytest.raises(ValueError):
            rxfront.estimate_epsilon(np.array([0.1]), cfg)


class TestOffsetSubtraction:
    def test_no_cfo_leaves_pure_data(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        pkt, d = qpsk_packet(cfg, sel, gs, seed=7)
        rxp = rxfront.rx_frontend(pkt.stream, cfg, sel)
        x_off = rxfront.offset_vector(ch, gs, txchain.DEFAULT_PILOTS)
        y = rxfront.subtract_offset(rxp.y_down, np.zeros(200), x_off)
        assert np.max(np.abs(y - d @ gs.g_d.T)) < 1e-10

    def test_zero_data_zero_residual(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        d = np.zeros((200, 32), dtype=complex)
        pkt = txchain.build_packet_from_symbols(d, cfg, sel, gs)
        rxp = rxfront.rx_frontend(pkt.stream, cfg, sel)
        x_off = rxfront.offset_vector(ch, gs, txchain.DEFAULT_PILOTS)
        y = rxfront.subtract_offset(rxp.y_down, np.zeros(200), x_off)
        assert np.max(np.abs(y)) < 1e-10

    def test_residual_grows_with_uw(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        cfo = channel.CfoModel(0.1, 64)
        residuals = {}
        for label, x_u in (("zero", None),
                           ("barker", txchain.barker_uw(cfg, gs, txchain.DEFAULT_PILOTS))):
            d = np.zeros((200, 32), dtype=complex)
            pkt = txchain.build_packet_from_symbols(d, cfg, sel, gs, x_u=x_u)
            rx = channel.apply_cfo_time(pkt.stream, cfo)
            rxp = rxfront.rx_frontend(rx, cfg, sel, pkt.prefix_len)
            phi_true = channel.phi_l_for_variant(cfo, np.arange(200), cfg, pkt.prefix_len)
            uw_down = None if x_u is None else txchain.uw_spectra(cfg, sel, x_u)[1]
            x_off = rxfront.offset_vector(ch, gs, txchain.DEFAULT_PILOTS, uw_down)
            y = rxfront.subtract_offset(rxp.y_down, phi_true, x_off)
            residuals[label] = float(np.linalg.norm(y))
        assert residuals["barker"] > residuals["zero"] > 0


class TestLmmse:
    def test_zero_noise_left_inverse(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        e = rxfront.lmmse_build(gs, ch, 0.0, 64)
        assert np.max(np.abs(e @ (ch.h_used[:, None] * gs.g_d) - np.eye(32))) < 1e-8

    def test_cp_zero_noise_is_selection_transpose(self, cp):
        cfg, sel, gs = cp
        ch = channel.flat_channel(cfg, sel)
        e = rxfront.lmmse_build(gs, ch, 0.0, 64)
        assert np.max(np.abs(e - gs.g_d.T)) < 1e-10

    def test_large_noise_shrinks_estimator(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        norms = [np.linalg.norm(rxfront.lmmse_build(gs, ch, v, 64)) for v in (1e-3, 1.0, 1e3)]
        assert norms[0] > norms[1] > norms[2]
        assert norms[2] < 1e-2


class TestCompensation:
    def test_cpe_noise_free_identity(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        pkt, d = qpsk_packet(cfg, sel, gs, seed=8)
        rxp = rxfront.rx_frontend(pkt.stream, cfg, sel)
        e = rxfront.lmmse_build(gs, ch, 0.0, 64)
        x_off = rxfront.offset_vector(ch, gs, txchain.DEFAULT_PILOTS)
        _, d_hat = rxfront.compensate_cpe(rxp.y_down, np.zeros(200), x_off, e)
        assert np.max(np.abs(d_hat - d)) < 1e-8

    def test_tier1_shows_rotation_bias(self, uw):
        # perfect CPE derotation leaves the data self-interference rotation
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        pkt, d = qpsk_packet(cfg, sel, gs, seed=9)
        cfo = channel.CfoModel(0.1, 64)
        rx = channel.apply_cfo_time(pkt.stream, cfo)
        rxp = rxfront.rx_frontend(rx, cfg, sel)
        phi_true = channel.phi_l_for_variant(cfo, np.arange(200), cfg)
        e = rxfront.lmmse_build(gs, ch, 0.0, 64)
        x_off = rxfront.offset_vector(ch, gs, txchain.DEFAULT_PILOTS)
        _, d_hat = rxfront.compensate_cpe(rxp.y_down, phi_true, x_off, e)
        mean_rotation = np.angle(np.mean(d_hat * np.conj(d)))
        assert abs(mean_rotation) > 0.01   # UW-OFDM self-rotation is visible

    def test_advanced_exact_inverts_model(self, uw):
        # synthesize the model with delta_l = 0: exact inversion recovers d
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        rng = rng_from_key(10)
        d = (rng.standard_normal((50, 32)) + 1j * rng.standard_normal((50, 32))) / np.sqrt(2)
        lam = channel.compute_lambda_stat(channel.CfoModel(0.1, 64), sel, full=False)
        phi_p = 0.02
        y = np.exp(-1j * phi_p) * (d @ gs.g_d.T @ lam.T)
        e = rxfront.lmmse_build(gs, ch, 0.0, 64)
        d_hat = rxfront.compensate_advanced(y, lam, phi_p, e, rxfront.TIER_ADV_EXACT)
        assert np.mean(np.abs(d_hat - d) ** 2) < 1e-10

    def test_hermitian_close_to_exact(self, uw):
        cfg, sel, gs = uw
        ch = channel.flat_channel(cfg, sel)
        rng = rng_from_key(11)
        d = (rng.standard_normal((50, 32)) + 1j * rng.standard_normal((50, 32))) / np.sqrt(2)
        lam = channel.compute_lambda_stat(channel.CfoModel(0.1, 64), sel, full=False)
        y = d @ gs.g_d.T @ lam.T
        e = rxfront.lmmse_build(gs, ch, 0.0, 64)
        h = rxfront.compensate_advanced(y, lam, 0.0, e, rxfront.TIER_ADV_HERMITIAN)
        assert np.mean(np.abs(h - d) ** 2) < 5e-3   # near-unitary approximation


class TestBmse:
    def test_zero_error(self):
        d = np.ones((3, 4), dtype=complex)
        assert rxfront.bmse(d, d) == 0.0

    def test_single_unit_error(self):
        d = np.zeros((1, 32), dtype=complex)
        d_hat = d.copy()
        d_hat[0, 5] = 1.0
        assert rxfront.bmse(d_hat, d) == pytest.approx(1 / 32)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rxfront.bmse(np.zeros((2, 3)), np.zeros((3, 2)))
