"""Gray-mapped QPSK/16-QAM and phase-aware soft demapping.

Gray labeling (documented convention, bits MSB-first per symbol):

* QPSK, bits (b0, b1): point = ((1-2*b0) + 1j*(1-2*b1)) / sqrt(2);
  so 00 -> (1+1j)/sqrt(2).
* 16-QAM, bits (b0, b1, b2, b3): (b0, b1) select the real level and
  (b2, b3) the imaginary level from {00: +3, 01: +1, 11: -1, 10: -3},
  scaled by 1/sqrt(10).

Both constellations have unit average energy.

The soft demapper assumes the observation model

    r = alpha' * s * exp(j*theta) + w,
    theta ~ N(0, sigma_theta^2),  w ~ CN(0, sigma_w^2),

and marginalizes theta by Gauss-Hermite quadrature.  With sigma_theta^2 = 0
this reduces exactly to the AWGN log-likelihood ratio.  LLRs are capped at
+-LLR_CAP to keep Viterbi metrics finite; positive LLR means bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .numerics import gauss_hermite

LLR_CAP = 50.0
GH_NODES_DEFAULT = 16

_QAM16_LEVELS = np.array([3.0, 1.0, -3.0, -1.0])  # indexed by the 2-bit group value


@dataclass(frozen=True)
class Constellation:
    order: int
    points: np.ndarray = field(init=False, repr=False, compare=False)
    bits_per_symbol: int = field(init=False)

    def __post_init__(self) -> None:
        if self.order == 4:
            idx = np.arange(4)
            re = 1.0 - 2.0 * (idx >> 1)
            im = 1.0 - 2.0 * (idx & 1)
            points = (re + 1j * im) / np.sqrt(2.0)
        elif self.order == 16:
            idx = np.arange(16)
            re = _QAM16_LEVELS[idx >> 2]
            im = _QAM16_LEVELS[idx & 3]
            points = (re + 1j * im) / np.sqrt(10.0)
        else:
            raise ValueError(f"unsupported constellation order {self.order}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "bits_per_symbol", int(np.log2(self.order)))

    def bit_masks(self) -> np.ndarray:
        """(bits_per_symbol, order) boolean array: mask[b, i] = bit b of label i."""
        idx = np.arange(self.order)
        shifts = self.bits_per_symbol - 1 - np.arange(self.bits_per_symbol)
        return ((idx[None, :] >> shifts[:, None]) & 1).astype(bool)


QPSK = Constellation(4)
QAM16 = Constellation(16)


def constellation_by_name(name: str) -> Constellation:
    try:
        return {"qpsk": QPSK, "qam16": QAM16}[name.lower()]
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}") from None


@dataclass(frozen=True)
class LlrParams:
    """Per-subcarrier parameters of the residual-error observation model."""

    alpha_prime: np.ndarray      # complex gain per data index
    sigma_w_sq: np.ndarray       # noise-plus-interference variance per data index
    sigma_theta_sq: float        # residual phase variance (common to all indices)

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.sigma_w_sq) < 0) or self.sigma_theta_sq < 0:
            raise ValueError("variances must be nonnegative")
        if np.any(np.abs(np.asarray(self.alpha_prime)) == 0):
            raise ValueError("alpha_prime entries must be nonzero")


def map_bits(bits: np.ndarray, constellation: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    k = constellation.bits_per_symbol
    if len(bits) % k != 0:
        raise ValueError(f"bit count {len(bits)} not divisible by {k}")
    groups = bits.reshape(-1, k)
    idx = groups @ (1 << np.arange(k - 1, -1, -1))
    return constellation.points[idx]


def hard_demap(symbols: np.ndarray, constellation: Constellation,
               gain: np.ndarray | complex = 1.0) -> np.ndarray:
    """Nearest-point decisions after removing a known complex gain."""
    z = np.asarray(symbols) / gain
    idx = np.argmin(np.abs(z[..., None] - constellation.points), axis=-1)
    k = constellation.bits_per_symbol
    shifts = k - 1 - np.arange(k)
    return ((idx[..., None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def _llr_from_logp(logp: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Per-bit LLRs from per-point log-likelihoods (last axis = points)."""
    n_bits = masks.shape[0]
    out = np.empty(logp.shape[:-1] + (n_bits,))
    for b in range(n_bits):
        num = logsumexp(logp[..., ~masks[b]], axis=-1)
        den = logsumexp(logp[..., masks[b]], axis=-1)
        out[..., b] = num - den
    return np.clip(out, -LLR_CAP, LLR_CAP)


def demap_llr(r_hat: np.ndarray, params: LlrParams, constellation: Constellation,
              n_nodes: int = GH_NODES_DEFAULT) -> np.ndarray:
    """Phase-marginalized LLRs, shape r_hat.shape + (bits_per_symbol,).

    ``r_hat`` broadcasts against ``params.alpha_prime``/``params.sigma_w_sq``;
    in the receiver chain r_hat is (L, N_d) and the parameters are (N_d,).
    """
    r = np.asarray(r_hat, dtype=complex)
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite input to the demapper")
    alpha = np.broadcast_to(np.asarray(params.alpha_prime, dtype=complex), r.shape)
    sw = np.broadcast_to(np.maximum(np.asarray(params.sigma_w_sq, dtype=float), 1e-300), r.shape)
    nodes, weights = gauss_hermite(n_nodes)
    theta = np.sqrt(2.0 * params.sigma_theta_sq) * nodes
    log_w = np.log(weights / np.sqrt(np.pi))
    # |r - alpha s e^{j theta}|^2 expanded to avoid a (.., nodes, points)
    # complex subtraction: |r|^2 + |alpha s|^2 - 2 Re((r conj(alpha s)) e^{-j theta}).
    s = constellation.points
    cross = r[..., None] * np.conj(alpha)[..., None] * np.conj(s)   # (..., points)
    const_part = (np.abs(r) ** 2)[..., None] + (np.abs(alpha) ** 2)[..., None] * np.abs(s) ** 2
    re_part = (np.cos(theta)[:, None] * cross.real[..., None, :]
               + np.sin(theta)[:, None] * cross.imag[..., None, :])
    logp_nodes = log_w[:, None] - (const_part[..., None, :] - 2.0 * re_part) / sw[..., None, None]
    # manual log-sum-exp over the node axis (faster than scipy here)
    peak = np.max(logp_nodes, axis=-2, keepdims=True)
    logp = np.squeeze(peak, -2) + np.log(np.sum(np.exp(logp_nodes - peak), axis=-2))
    return _llr_from_logp(logp, constellation.bit_masks())


def demap_llr_awgn(r_hat: np.ndarray, alpha: np.ndarray | complex,
                   sigma_w_sq: np.ndarray | float,
                   constellation: Constellation) -> np.ndarray:
    """Exact AWGN LLRs (no phase model); baseline for ablation."""
    r = np.asarray(r_hat, dtype=complex)
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite input to the demapper")
    alpha_b = np.broadcast_to(np.asarray(alpha, dtype=complex), r.shape)
    sw = np.broadcast_to(np.maximum(np.asarray(sigma_w_sq, dtype=float), 1e-300), r.shape)
    dist = np.abs(r[..., None] - alpha_b[..., None] * constellation.points) ** 2
    return _llr_from_logp(-dist / sw[..., None], constellation.bit_masks())


def demap_llr_trapezoid(r_hat: complex, params: LlrParams, constellation: Constellation,
                        n_points: int = 100_000, half_width_sigmas: float = 10.0) -> np.ndarray:
    """Brute-force trapezoid-rule marginalization over theta (test oracle).

    Scalar-input reference implementation, deliberately independent of the
    quadrature path.
    """
    sigma = np.sqrt(params.sigma_theta_sq)
    sw = max(float(np.asarray(params.sigma_w_sq).reshape(())), 1e-300)
    alpha = complex(np.asarray(params.alpha_prime).reshape(()))
    if sigma == 0.0:
        logp = -np.abs(r_hat - alpha * constellation.points) ** 2 / sw
        return _llr_from_logp(logp, constellation.bit_masks())
    theta = np.linspace(-half_width_sigmas * sigma, half_width_sigmas * sigma, n_points)
    log_prior = -0.5 * (theta / sigma) ** 2
    means = alpha * np.exp(1j * theta)[:, None] * constellation.points[None, :]
    log_like = -np.abs(r_hat - means) ** 2 / sw
    # trapezoid weights in log domain: interior points count once, ends half
    log_trap = np.zeros(n_points)
    log_trap[0] = log_trap[-1] = np.log(0.5)
    logp = logsumexp(log_prior[:, None] + log_like + log_trap[:, None], axis=0)
    return _llr_from_logp(logp, constellation.bit_masks())
