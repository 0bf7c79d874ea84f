"""Multipath channel, time-domain CFO, AWGN, and the frequency-domain CFO model.

The impairment is always applied in the time domain on the concatenated
packet stream (sample n multiplied by exp(2j pi eps (n + N_x) / N)); the
frequency-domain model (phase phi_l plus the static ICI matrix) is used only
for compensation and analysis, and a dedicated oracle test ties the two
representations together.

Noise convention: ``add_awgn`` draws i.i.d. circular complex Gaussian noise
with *time-domain* per-sample variance sigma_t^2.  Under the unnormalized
forward DFT the induced frequency-domain per-bin variance is N * sigma_t^2;
every consumer of a frequency-domain noise variance in this package applies
that factor exactly once, via :func:`freq_noise_var`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import CP_OFDM, SelectionMatrices, SystemConfig
from .numerics import rng_from_key


class SingularChannelError(ValueError):
    """Channel response too close to zero on a used subcarrier."""


@dataclass(frozen=True)
class CfoModel:
    """Normalized CFO eps = f_cfo / subcarrier spacing, plus sample offset."""

    epsilon: float
    n_dft: int
    n_x: int = 0


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray       # unit-energy impulse response
    h_full: np.ndarray     # frequency response over all N bins
    h_used: np.ndarray     # response restricted to non-zero subcarriers
    h_pilot: np.ndarray    # response at the pilot subcarriers
    tau_rms: float
    seed: int


def _make_realization(taps: np.ndarray, cfg: SystemConfig, sel: SelectionMatrices,
                      tau_rms: float, seed: int) -> ChannelRealization:
    h_full = np.fft.fft(taps, n=cfg.n_dft)
    h_used = h_full[sel.used]
    h_pilot = h_full[list(cfg.pilot_indices)]
    return ChannelRealization(taps=taps, h_full=h_full, h_used=h_used,
                              h_pilot=h_pilot, tau_rms=tau_rms, seed=seed)


def flat_channel(cfg: SystemConfig, sel: SelectionMatrices) -> ChannelRealization:
    return _make_realization(np.array([1.0 + 0j]), cfg, sel, 0.0, -1)


def draw_channel(cfg: SystemConfig, sel: SelectionMatrices, tau_rms: float,
                 seed: int) -> ChannelRealization:
    """Rayleigh taps with an exponentially decaying power delay profile.

    Tap count is the smallest K whose truncated profile leaves less than 1e-4
    of the total energy, capped at the guard length; each realization is
    normalized to exactly unit energy.
    """
    if tau_rms <= 0:
        return flat_channel(cfg, sel)
    ts = cfg.sample_period
    beta = ts / tau_rms
    # residual energy of the geometric profile beyond K taps is exp(-K*beta)
    n_taps = min(cfg.n_guard, int(np.ceil(np.log(1e4) / beta)))
    n_taps = max(n_taps, 1)
    profile = np.exp(-beta * np.arange(n_taps))
    rng = rng_from_key(seed, 0xC4A2)
    taps = (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)) * np.sqrt(profile / 2)
    taps /= np.linalg.norm(taps)
    return _make_realization(taps, cfg, sel, tau_rms, seed)


def apply_multipath(stream: np.ndarray, ch: ChannelRealization,
                    n_guard: int | None = None) -> np.ndarray:
    """Linear convolution, truncated to the input length."""
    if n_guard is not None and len(ch.taps) > n_guard:
        warnings.warn(
            f"channel has {len(ch.taps)} taps, exceeding the guard of {n_guard}; "
            "inter-symbol interference will leak past the guard"
        )
    return np.convolve(stream, ch.taps)[:len(stream)]


def apply_cfo_time(stream: np.ndarray, cfo: CfoModel) -> np.ndarray:
    """Continuous-phase CFO over the whole stream."""
    if cfo.epsilon == 0.0:
        return stream
    n = np.arange(len(stream))
    return stream * np.exp(2j * np.pi * cfo.epsilon * (n + cfo.n_x) / cfo.n_dft)


def add_awgn(stream: np.ndarray, sigma_t_sq: float, seed: int) -> np.ndarray:
    """Add circular complex Gaussian noise of time-domain variance sigma_t^2."""
    if sigma_t_sq < 0:
        raise ValueError("noise variance must be nonnegative")
    if sigma_t_sq == 0.0:
        return stream
    rng = rng_from_key(seed, 0xA36A)
    noise = rng.standard_normal(len(stream)) + 1j * rng.standard_normal(len(stream))
    return stream + np.sqrt(sigma_t_sq / 2) * noise


def freq_noise_var(sigma_t_sq: float, n_dft: int) -> float:
    """Per-bin frequency-domain noise variance under the forward DFT."""
    return n_dft * sigma_t_sq


def compute_phi_l(cfo: CfoModel, l: int | np.ndarray, samples_per_symbol: int | None = None,
                  window_start: int = 0, extra_offset: int = 0) -> float | np.ndarray:
    """Accumulated common phase of the l-th symbol's DFT window.

    Defaults give back-to-back N-sample symbols (UW-OFDM):
    phi_l = (2 pi eps / N) (N l + (N-1)/2 + N_x).  For CP-OFDM pass
    samples_per_symbol = N + N_g and window_start = N_g (the DFT window opens
    after the prefix).  ``extra_offset`` accounts for a packet-level prefix.
    """
    n = cfo.n_dft
    sps = n if samples_per_symbol is None else samples_per_symbol
    offset = cfo.n_x + window_start + extra_offset
    l = np.asarray(l)
    phi = (2 * np.pi * cfo.epsilon / n) * (sps * l + (n - 1) / 2 + offset)
    return float(phi) if phi.ndim == 0 else phi


def phi_l_for_variant(cfo: CfoModel, l, cfg: SystemConfig, prefix_len: int = 0):
    """compute_phi_l with the variant's window bookkeeping filled in."""
    if cfg.variant == CP_OFDM:
        return compute_phi_l(cfo, l, samples_per_symbol=cfg.samples_per_symbol,
                             window_start=cfg.n_guard, extra_offset=prefix_len)
    return compute_phi_l(cfo, l, extra_offset=prefix_len)


def compute_lambda_stat(cfo: CfoModel, sel: SelectionMatrices | None = None,
                        full: bool = True) -> np.ndarray:
    """Static frequency-domain CFO matrix.

    Entry (k, m) = sin(pi a) / (N sin(pi a / N)) * exp(j pi (m-k)(N-1)/N)
    with a = m + eps - k.  Where a is an exact integer the magnitude factor
    becomes 1 at a = 0 and 0 otherwise, so eps = 0 yields the identity
    exactly.  With full=False the matrix is reduced to the non-zero
    subcarriers, B^T Lambda' B.
    """
    n = cfo.n_dft
    k = np.arange(n)
    a = cfo.epsilon + k[None, :] - k[:, None]     # a[k, m] = m + eps - k
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.sin(np.pi * a) / (n * np.sin(np.pi * a / n))
    integer = a == np.round(a)
    mag = np.where(integer, np.where(a == 0, 1.0, 0.0), mag)
    lam = mag * np.exp(1j * np.pi * (k[None, :] - k[:, None]) * (n - 1) / n)
    if full:
        return lam
    if sel is None:
        raise ValueError("reduced form requires the selection matrices")
    return lam[np.ix_(sel.used, sel.used)]


def compute_lambda_h_stat(lambda_stat: np.ndarray, ch: ChannelRealization) -> np.ndarray:
    """Similarity transform H^{-1} Lambda H on the used subcarriers."""
    h = ch.h_used
    if np.min(np.abs(h)) <= 1e-12:
        raise SingularChannelError("channel response vanishes on a used subcarrier")
    return lambda_stat * (h[None, :] / h[:, None])
