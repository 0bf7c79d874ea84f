"""Convolutional coding, puncturing, packet interleaving, Viterbi decoding.

The code is the classic constraint-length-7 (133, 171) octal pair; rate 3/4
is derived by puncturing with the pattern [[1,1,0],[1,0,1]] over successive
(a_i, b_i) output pairs.  Packets are tail-terminated with 6 zero bits so the
trellis starts and ends in the all-zero state.

LLR sign convention everywhere: positive LLR means bit 0 is more likely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import rng_from_key

CONSTRAINT_LENGTH = 7
GENERATORS_OCTAL = (0o133, 0o171)
PUNCTURE_PATTERN = np.array([[1, 1, 0], [1, 0, 1]], dtype=np.uint8)
# Flattened over (a1 b1 a2 b2 a3 b3): keep a1 b1 a2 b3.
_PUNCTURE_KEEP = PUNCTURE_PATTERN.T.ravel().astype(bool)
_N_TAIL = CONSTRAINT_LENGTH - 1
_N_STATES = 1 << _N_TAIL


def _taps(gen_octal: int) -> np.ndarray:
    """Binary taps, MSB first (tap 0 applies to the current input bit)."""
    return np.array([(gen_octal >> (CONSTRAINT_LENGTH - 1 - i)) & 1
                     for i in range(CONSTRAINT_LENGTH)], dtype=np.uint8)


def conv_encode(bits: np.ndarray) -> np.ndarray:
    """Rate-1/2 encode with tail termination; output length 2*(len(bits)+6)."""
    u = np.concatenate([np.asarray(bits, dtype=np.uint8), np.zeros(_N_TAIL, dtype=np.uint8)])
    out = np.empty((len(u), 2), dtype=np.uint8)
    for j, gen in enumerate(GENERATORS_OCTAL):
        out[:, j] = np.convolve(u, _taps(gen))[:len(u)] % 2
    return out.ravel()


def puncture(coded: np.ndarray) -> np.ndarray:
    """Keep 4 of every 6 coded bits (rate 1/2 -> 3/4)."""
    coded = np.asarray(coded)
    if len(coded) % 6 != 0:
        raise ValueError(f"coded length {len(coded)} is not a multiple of 6")
    return coded[np.tile(_PUNCTURE_KEEP, len(coded) // 6)]


def depuncture(soft: np.ndarray) -> np.ndarray:
    """Insert zero-LLR erasures at the punctured positions."""
    soft = np.asarray(soft, dtype=float)
    if len(soft) % 4 != 0:
        raise ValueError(f"punctured length {len(soft)} is not a multiple of 4")
    out = np.zeros(len(soft) // 4 * 6)
    out[np.tile(_PUNCTURE_KEEP, len(soft) // 4)] = soft
    return out


@dataclass(frozen=True)
class Interleaver:
    """Seeded uniform random permutation over all coded bits of a packet.

    Spanning the whole packet (rather than one OFDM symbol) breaks the
    statistical dependence that the per-symbol common phase error would
    otherwise impose on neighbouring coded bits.
    """

    length: int
    seed: int
    permutation: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        perm = rng_from_key(self.seed, 0x1EAF).permutation(self.length)
        object.__setattr__(self, "permutation", perm)

    def interleave(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if len(x) != self.length:
            raise ValueError(f"expected length {self.length}, got {len(x)}")
        return x[self.permutation]

    def deinterleave(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if len(y) != self.length:
            raise ValueError(f"expected length {self.length}, got {len(y)}")
        out = np.empty_like(y)
        out[self.permutation] = y
        return out


def _trellis() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Predecessor states and branch output signs for all (state, input)."""
    states = np.arange(_N_STATES)
    signs = np.empty((_N_STATES, 2, 2))   # [state, input, generator] -> (1 - 2*outbit)
    for b in (0, 1):
        reg = (b << _N_TAIL) | states
        for j, gen in enumerate(GENERATORS_OCTAL):
            parity = np.zeros(_N_STATES, dtype=np.uint8)
            masked = reg & gen
            for _ in range(CONSTRAINT_LENGTH):
                parity ^= (masked & 1).astype(np.uint8)
                masked >>= 1
            signs[:, b, j] = 1.0 - 2.0 * parity
    # next_state = (state >> 1) | (input << 5); predecessors of ns share ns & 31.
    ns = np.arange(_N_STATES)
    pred0 = (ns & (_N_STATES // 2 - 1)) << 1
    pred1 = pred0 + 1
    return pred0, pred1, signs


_PRED0, _PRED1, _SIGNS = _trellis()


def viterbi_decode_soft(llrs: np.ndarray) -> np.ndarray:
    """Maximum-likelihood decode of a tail-terminated rate-1/2 LLR stream.

    Branch metric for a coded bit c with reliability llr is llr*(1-2c)/2, so
    zero-LLR erasures contribute nothing and scaling all LLRs by a positive
    constant cannot change the decoded path.
    """
    llrs = np.asarray(llrs, dtype=float)
    if len(llrs) % 2 != 0:
        raise ValueError(f"LLR count {len(llrs)} is odd; rate-1/2 needs pairs")
    n_steps = len(llrs) // 2
    if n_steps <= _N_TAIL:
        raise ValueError("stream shorter than the termination tail")
    pairs = llrs.reshape(n_steps, 2)

    # Pre-gather branch signs at (predecessor, input-bit) per destination state.
    bit = (np.arange(_N_STATES) >> (_N_TAIL - 1)).astype(int)
    s0 = _SIGNS[_PRED0, bit]           # (states, 2): signs of branch from pred0
    s1 = _SIGNS[_PRED1, bit]
    # Branch metrics for every step at once: (n_steps, states).
    bm0 = 0.5 * pairs @ s0.T
    bm1 = 0.5 * pairs @ s1.T

    metric = np.full(_N_STATES, -np.inf)
    metric[0] = 0.0
    choice = np.empty((n_steps, _N_STATES), dtype=np.uint8)
    for t in range(n_steps):
        cand0 = metric[_PRED0] + bm0[t]
        cand1 = metric[_PRED1] + bm1[t]
        take1 = cand1 > cand0
        metric = np.where(take1, cand1, cand0)
        choice[t] = take1

    state = 0  # termination forces the all-zero end state
    decoded = np.empty(n_steps, dtype=np.uint8)
    pred = np.stack([_PRED0, _PRED1], axis=1)
    for t in range(n_steps - 1, -1, -1):
        decoded[t] = state >> (_N_TAIL - 1)
        state = pred[state, choice[t, state]]
    return decoded[:n_steps - _N_TAIL]
