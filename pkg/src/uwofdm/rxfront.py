"""Receiver front end: DFT, CPE/CFO estimation, compensation tiers, LMMSE.

Processing is batched over the packet: symbol-indexed quantities are (L, .)
arrays.  The compensation tiers build on each other:

* ``cpe``            derotate by the per-symbol pilot estimate phi_hat_l and
                     subtract the known pilot/UW offset, then LMMSE;
* ``cpe_offset``     additionally derotate by the calibrated constant offset
                     phi_off_hat = (m_d - m_p) * eps_hat;
* ``advanced_exact`` undo the pilot self-interference phase and invert the
                     estimated static ICI matrix before the LMMSE stage;
* ``advanced_hermitian``  same, with the Hermitian transpose standing in for
                     the inverse (the static ICI matrix is close to unitary),
                     costing one matrix-vector product per symbol.

Perfect channel knowledge and perfect timing are assumed throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import CP_OFDM, SelectionMatrices, SystemConfig
from .channel import ChannelRealization, freq_noise_var
from .generators import GeneratorSet
from .numerics import solve_hpd

TIER_CPE = "cpe"
TIER_CPE_OFFSET = "cpe_offset"
TIER_ADV_HERMITIAN = "advanced_hermitian"
TIER_ADV_EXACT = "advanced_exact"
TIERS = (TIER_CPE, TIER_CPE_OFFSET, TIER_ADV_HERMITIAN, TIER_ADV_EXACT)


@dataclass
class RxPacket:
    """Per-packet receiver state; arrays are (L, .) over the symbol index."""

    y_full: np.ndarray             # (L, N) raw DFT outputs
    y_down: np.ndarray             # (L, N - N_z) used subcarriers
    y_comp: np.ndarray | None = None   # after CPE derotation and offset subtraction
    d_hat: np.ndarray | None = None    # (L, N_d) data estimates


@dataclass(frozen=True)
class CpeTrack:
    phi_hat: np.ndarray            # per-symbol CPE estimates (wrapped)
    epsilon_hat: float
    phi_off_hat: float
    weights: np.ndarray            # pilot weighting w_p = |H_p|^2


def rx_frontend(stream: np.ndarray, cfg: SystemConfig, sel: SelectionMatrices,
                prefix_len: int = 0) -> RxPacket:
    """Per-symbol DFT (dropping the CP for CP-OFDM) and zero-bin removal."""
    sps = cfg.samples_per_symbol
    expected = prefix_len + cfg.symbols_per_packet * sps
    if len(stream) != expected:
        raise ValueError(f"stream has {len(stream)} samples, expected {expected}")
    blocks = stream[prefix_len:].reshape(cfg.symbols_per_packet, sps)
    if cfg.variant == CP_OFDM:
        blocks = blocks[:, cfg.n_guard:]
    y_full = np.fft.fft(blocks, axis=-1)
    return RxPacket(y_full=y_full, y_down=y_full[:, sel.used])


def pilot_weights(ch: ChannelRealization) -> np.ndarray:
    """Diagonal CPE weighting |H_p|^2 (cancels the zero-forcing division)."""
    return np.abs(ch.h_pilot) ** 2


def estimate_cpe(y_down: np.ndarray, pilots: np.ndarray, ch: ChannelRealization,
                 sel: SelectionMatrices, weights: np.ndarray | None = None) -> np.ndarray:
    """Weighted pilot-correlation CPE estimate per symbol.

    Pilot estimates use zero-forcing per-bin equalization at the pilot bins;
    with the |H_p|^2 weighting a faded pilot contributes proportionally less,
    so deep fades cannot blow up the estimate.
    """
    if weights is None:
        weights = pilot_weights(ch)
    if np.all(weights * np.abs(pilots) == 0):
        raise ValueError("pilot correlation has no energy")
    p_hat = np.atleast_2d(y_down)[:, sel.pilot_pos] / ch.h_pilot[None, :]
    corr = p_hat @ (weights * np.conj(pilots))
    phi = np.angle(corr)
    return phi if np.asarray(y_down).ndim == 2 else float(phi[0])


def estimate_epsilon(phi_hat: np.ndarray, cfg: SystemConfig) -> float:
    """Least-squares slope of the unwrapped CPE track, once per packet.

    The per-symbol phase advance is 2 pi eps s / N with s samples per symbol,
    so unwrapping is unambiguous only for |eps| < N / (2 s): half a subcarrier
    spacing for UW-OFDM, correspondingly less for CP-OFDM.
    """
    phi = np.unwrap(np.asarray(phi_hat))
    if len(phi) < 2:
        raise ValueError("epsilon estimation needs at least two symbols")
    l = np.arange(len(phi))
    slope = np.polyfit(l, phi, 1)[0]
    return float(slope * cfg.n_dft / (2 * np.pi * cfg.samples_per_symbol))


def offset_vector(ch: ChannelRealization, gs: GeneratorSet, pilots: np.ndarray,
                  uw_freq_down: np.ndarray | None = None) -> np.ndarray:
    """x_off = H (G_p p + B^T x~_u), the known pilot-plus-UW contribution."""
    x = gs.g_p @ pilots
    if uw_freq_down is not None:
        x = x + uw_freq_down
    return ch.h_used * x


def subtract_offset(y_down: np.ndarray, phi_hat: np.ndarray | float,
                    x_off: np.ndarray) -> np.ndarray:
    """e^{-j phi_hat_l} y_down,l - x_off for one symbol or a whole packet."""
    phase = np.exp(-1j * np.atleast_1d(np.asarray(phi_hat, dtype=float)))
    y = np.atleast_2d(y_down) * phase[:, None] - x_off[None, :]
    return y if np.asarray(y_down).ndim == 2 else y[0]


def lmmse_build(gs: GeneratorSet, ch: ChannelRealization, noise_var_time: float,
                n_dft: int, sigma_d_sq: float = 1.0) -> np.ndarray:
    """LMMSE data estimator for y = H G_d d + noise.

    The regularizer is the frequency-domain noise variance N * sigma_t^2 over
    the data variance (see channel.freq_noise_var); at zero noise the
    estimator degenerates to the pseudo-inverse of H G_d.
    """
    hg = ch.h_used[:, None] * gs.g_d
    if noise_var_time == 0.0:
        return np.linalg.pinv(hg)
    gram = hg.conj().T @ hg
    reg = freq_noise_var(noise_var_time, n_dft) / sigma_d_sq
    a = gram + reg * np.eye(gram.shape[0])
    return solve_hpd(a, hg.conj().T)


def compensate_cpe(y_down: np.ndarray, phi_hat: np.ndarray, x_off: np.ndarray,
                   estimator: np.ndarray, phi_off_hat: float = 0.0
                   ) -> tuple[np.ndarray, np.ndarray]:
    """CPE-tier data estimation; returns (y_comp, d_hat) as (L, .) arrays."""
    y_comp = subtract_offset(y_down, phi_hat, x_off)
    d_hat = np.exp(-1j * phi_off_hat) * (y_comp @ estimator.T)
    return y_comp, d_hat


def compensate_advanced(y_comp: np.ndarray, lambda_stat_hat: np.ndarray,
                        phi_p_hat: float, estimator: np.ndarray,
                        mode: str = TIER_ADV_HERMITIAN) -> np.ndarray:
    """ICI compensation through the estimated static CFO matrix.

    ``y_comp`` must already be CPE-derotated and offset-subtracted.  The
    Hermitian mode exploits the near-unitarity of the static ICI matrix; the
    exact mode factorizes it once per packet (regularized fallback if the
    estimate is numerically singular).
    """
    if mode == TIER_ADV_HERMITIAN:
        z = y_comp @ np.conj(lambda_stat_hat)      # (Lambda^H y)^T = y^T conj(Lambda)
    elif mode == TIER_ADV_EXACT:
        try:
            z = np.linalg.solve(lambda_stat_hat, y_comp.T).T
        except np.linalg.LinAlgError:
            warnings.warn("static ICI matrix numerically singular; using regularized solve")
            n = lambda_stat_hat.shape[0]
            a = lambda_stat_hat.conj().T @ lambda_stat_hat + 1e-12 * np.eye(n)
            z = np.linalg.solve(a, lambda_stat_hat.conj().T @ y_comp.T).T
    else:
        raise ValueError(f"unknown advanced mode {mode!r}")
    return np.exp(1j * phi_p_hat) * (z @ estimator.T)


def bmse(d_hat: np.ndarray, d: np.ndarray) -> float:
    """Mean squared error per data symbol, averaged over symbols (and trials)."""
    d_hat, d = np.asarray(d_hat), np.asarray(d)
    if d_hat.shape != d.shape:
        raise ValueError(f"shape mismatch {d_hat.shape} vs {d.shape}")
    return float(np.mean(np.abs(d_hat - d) ** 2))
