"""Frequency/time-domain symbol assembly and whole-packet streams.

UW-OFDM: x = F_N^{-1} (B G_d d + B G_p p) ends in N_u zeros by construction;
the unique word is then added in the time domain, x~ = x + [0; x_u].

When a non-zero UW is used together with a multipath channel, each received
symbol only equals the circular-convolution model if the *preceding* N_u
samples are that same UW.  The packet stream therefore gets the UW prepended
once (``prefix_len`` samples); phase bookkeeping treats the prefix as an
extra sample offset.

CP-OFDM: each symbol is the IDFT core with its last N_g samples copied in
front, giving N + N_g samples per symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CP_OFDM, UW_OFDM, SelectionMatrices, SystemConfig
from .fec import Interleaver, conv_encode, puncture
from .generators import GeneratorSet
from .mapping import Constellation, map_bits

# Fixed unit-magnitude QPSK pilots, constant across symbols.
DEFAULT_PILOTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)

_BARKER13 = np.array([1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1], dtype=float)


@dataclass(frozen=True)
class TxSymbol:
    data: np.ndarray    # complex N_d
    freq: np.ndarray    # complex N (full spectrum incl. UW contribution)
    time: np.ndarray    # complex N (UW-OFDM) or N + N_g (CP-OFDM)


@dataclass(frozen=True)
class TxPacket:
    symbols: list[TxSymbol]
    stream: np.ndarray           # concatenated samples incl. UW prefix
    pilots: np.ndarray
    prefix_len: int
    data_symbols: np.ndarray     # (L, N_d) matrix of transmitted data symbols
    payload_bits: np.ndarray | None = None


def barker_uw(cfg: SystemConfig, gs: GeneratorSet, pilots: np.ndarray) -> np.ndarray:
    """Barker-13 zero-padded to N_u, scaled to the mean payload-sample power.

    Barker codes stop at length 13, so the guard is padded with three zeros;
    the scale makes the UW's average power over its N_u samples match the
    average power of the payload part of the symbol (unit data variance).
    """
    energy_payload = cfg.n_data * gs.scaling_alpha + float(np.linalg.norm(gs.g_p @ pilots) ** 2)
    mean_power = energy_payload / cfg.n_dft / (cfg.n_dft - cfg.n_guard)
    uw = np.zeros(cfg.n_guard, dtype=complex)
    uw[:len(_BARKER13)] = _BARKER13
    return uw * np.sqrt(mean_power * cfg.n_guard / np.sum(_BARKER13 ** 2))


def uw_spectra(cfg: SystemConfig, sel: SelectionMatrices,
               x_u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(full-spectrum x~_u, used-subcarrier B^T x~_u) for a time-domain UW."""
    padded = np.zeros(cfg.n_dft, dtype=complex)
    padded[cfg.n_dft - cfg.n_guard:] = x_u
    full = np.fft.fft(padded)
    return full, full[sel.used]


def assemble_symbol(d: np.ndarray, p: np.ndarray, gs: GeneratorSet,
                    sel: SelectionMatrices, cfg: SystemConfig,
                    x_u: np.ndarray | None = None) -> TxSymbol:
    if len(d) != cfg.n_data or len(p) != cfg.n_pilot:
        raise ValueError("data/pilot vector length does not match the configuration")
    payload_freq = sel.b @ (gs.g_d @ d + gs.g_p @ p)
    time = np.fft.ifft(payload_freq)
    freq = payload_freq
    if x_u is not None and np.any(x_u != 0):
        if len(x_u) != cfg.n_guard:
            raise ValueError(f"UW length {len(x_u)} != guard length {cfg.n_guard}")
        time = time.copy()
        time[cfg.n_dft - cfg.n_guard:] += x_u
        freq = np.fft.fft(time)
    return TxSymbol(data=np.asarray(d, dtype=complex), freq=freq, time=time)


def assemble_cp_symbol(d: np.ndarray, p: np.ndarray, gs: GeneratorSet,
                       sel: SelectionMatrices, cfg: SystemConfig) -> TxSymbol:
    if cfg.variant != CP_OFDM:
        raise ValueError("assemble_cp_symbol requires the cp_ofdm variant")
    if len(d) != cfg.n_data or len(p) != cfg.n_pilot:
        raise ValueError("data/pilot vector length does not match the configuration")
    freq = sel.b @ (gs.g_d @ d + gs.g_p @ p)
    core = np.fft.ifft(freq)
    time = np.concatenate([core[cfg.n_dft - cfg.n_guard:], core])
    return TxSymbol(data=np.asarray(d, dtype=complex), freq=freq, time=time)


def build_packet_from_symbols(data_symbols: np.ndarray, cfg: SystemConfig,
                              sel: SelectionMatrices, gs: GeneratorSet,
                              pilots: np.ndarray = DEFAULT_PILOTS,
                              x_u: np.ndarray | None = None,
                              payload_bits: np.ndarray | None = None) -> TxPacket:
    """Assemble a packet from an (L, N_d) matrix of data symbols."""
    data_symbols = np.asarray(data_symbols, dtype=complex)
    if data_symbols.shape != (cfg.symbols_per_packet, cfg.n_data):
        raise ValueError(
            f"data matrix shape {data_symbols.shape} != "
            f"({cfg.symbols_per_packet}, {cfg.n_data})"
        )
    # One batched matrix product + IFFT for the whole packet.
    payload_freq = (gs.g_d @ data_symbols.T + (gs.g_p @ pilots)[:, None]).T @ sel.b.T
    times = np.fft.ifft(payload_freq, axis=-1)
    freqs = payload_freq
    prefix = np.zeros(0, dtype=complex)
    if cfg.variant == UW_OFDM:
        if x_u is not None and np.any(x_u != 0):
            times = times.copy()
            times[:, cfg.n_dft - cfg.n_guard:] += x_u[None, :]
            freqs = np.fft.fft(times, axis=-1)
            prefix = np.asarray(x_u, dtype=complex)
        stream = np.concatenate([prefix, times.ravel()])
    else:
        cp = times[:, cfg.n_dft - cfg.n_guard:]
        stream = np.concatenate([cp, times], axis=-1).ravel()
        times = np.concatenate([cp, times], axis=-1)
    symbols = [TxSymbol(data=data_symbols[l], freq=freqs[l], time=times[l])
               for l in range(cfg.symbols_per_packet)]
    return TxPacket(symbols=symbols, stream=stream, pilots=np.asarray(pilots),
                    prefix_len=len(prefix), data_symbols=data_symbols,
                    payload_bits=payload_bits)


def payload_bit_count(cfg: SystemConfig, constellation: Constellation,
                      rate: float | None) -> int:
    """Information bits filling exactly L*N_d*log2|A| coded (or raw) bits.

    rate None means uncoded; coded rates account for the 6 termination bits.
    """
    capacity = cfg.symbols_per_packet * cfg.n_data * constellation.bits_per_symbol
    if rate is None:
        return capacity
    if rate == 0.5:
        payload = capacity // 2 - 6
        if 2 * (payload + 6) != capacity:
            raise ValueError(f"capacity {capacity} not fillable at rate 1/2")
    elif rate == 0.75:
        payload = capacity * 3 // 4 - 6
        if (payload + 6) * 4 != capacity * 3 or (payload + 6) % 3 != 0:
            raise ValueError(f"capacity {capacity} not fillable at rate 3/4")
    else:
        raise ValueError(f"unsupported code rate {rate}")
    return payload


def encode_payload(payload_bits: np.ndarray, cfg: SystemConfig,
                   constellation: Constellation, rate: float | None,
                   interleaver: Interleaver | None) -> np.ndarray:
    """FEC + interleaving + mapping; returns the (L, N_d) data-symbol matrix."""
    bits = np.asarray(payload_bits, dtype=np.uint8)
    if len(bits) != payload_bit_count(cfg, constellation, rate):
        raise ValueError(
            f"payload has {len(bits)} bits, expected "
            f"{payload_bit_count(cfg, constellation, rate)}"
        )
    if rate is None:
        coded = bits
    else:
        coded = conv_encode(bits)
        if rate == 0.75:
            coded = puncture(coded)
    if interleaver is not None:
        coded = interleaver.interleave(coded)
    symbols = map_bits(coded, constellation)
    return symbols.reshape(cfg.symbols_per_packet, cfg.n_data)


def build_packet(payload_bits: np.ndarray, cfg: SystemConfig, sel: SelectionMatrices,
                 gs: GeneratorSet, constellation: Constellation,
                 rate: float | None = None, interleaver: Interleaver | None = None,
                 pilots: np.ndarray = DEFAULT_PILOTS,
                 x_u: np.ndarray | None = None) -> TxPacket:
    data_symbols = encode_payload(payload_bits, cfg, constellation, rate, interleaver)
    return build_packet_from_symbols(data_symbols, cfg, sel, gs, pilots=pilots,
                                     x_u=x_u, payload_bits=np.asarray(payload_bits, np.uint8))


def dump_stream(pkt: TxPacket, path) -> None:
    """Debug dump of the packet sample stream in the generator-matrix text format."""
    from .generators import _write_matrix

    with open(path, "w", encoding="utf-8") as fh:
        _write_matrix(fh, pkt.stream[None, :])
