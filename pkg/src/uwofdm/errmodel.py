"""Analytical model of the residual error after CFO compensation.

The data estimate on subcarrier k is modelled as

    d_hat_k = alpha'_k * d_k * e^{j theta_l} + w_k,

with theta_l ~ N(0, sigma_theta^2) the zero-mean part of the pilot-based CPE
estimation error and w_k ~ CN(0, sigma_w_k^2) collecting data-induced ICI and
thermal noise.  This module computes every parameter of that model from the
system matrices, plus the numerically calibrated slopes (m_d, m_p) that map
an CFO estimate to the constant phase offset phi_off = phi_d - phi_p.

Sign bookkeeping: the pilot self-interference rotates the CPE estimate to
phi_hat_l = phi_l + phi_p + delta_l, so derotating by phi_hat_l leaves the
data rotated by -phi_p.  The effective constant gain is therefore

    alpha'_k = alpha_k * e^{-j phi_p},

with alpha_k = e^{-j phi_off_hat} e_k^T Lambda_stat H g_k.  The Monte-Carlo
cross-checks in the test suite pin these signs down.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, CfoModel, compute_lambda_h_stat, compute_lambda_stat
from .config import SelectionMatrices, SystemConfig
from .generators import GeneratorSet
from .rxfront import (TIER_ADV_EXACT, TIER_ADV_HERMITIAN, TIER_CPE, TIER_CPE_OFFSET,
                      lmmse_build, pilot_weights)

# Model validity requires the pilot correlation power to dominate its
# perturbations (the small-angle arg() approximation).
_VALIDITY_MIN_RATIO = 10.0


@dataclass(frozen=True)
class ErrorModelParams:
    """All parameters of the residual-error signal model for one setup."""

    a_p: float
    phi_p: float
    alpha: np.ndarray            # complex gain per data subcarrier, offset-derotated
    alpha_prime: np.ndarray      # alpha including the residual CPE phase -phi_p
    sigma_theta_sq: float
    sigma_w_sq: np.ndarray
    a_d: np.ndarray              # |e_k^T Lambda H g_k|
    phi_d: np.ndarray            # arg(e_k^T Lambda H g_k)
    phi_d_bar: float
    mu: complex                  # mean pilot-ICI perturbation (model assumption: ~0)
    validity_ratio: float


def compute_pilot_gain(gs: GeneratorSet, ch: ChannelRealization, lambda_stat: np.ndarray,
                       sel: SelectionMatrices, pilots: np.ndarray,
                       weights: np.ndarray | None = None,
                       uw_freq_down: np.ndarray | None = None,
                       include_cross_pilot_ici: bool = True) -> tuple[float, float]:
    """Magnitude/phase (a_p, phi_p) of the constant pilot-correlation center.

    phi_p is the constant bias the pilot-based CPE estimate acquires from ICI
    among the pilot-bearing subcarriers (and from the UW, if present).  By
    default the full pilot contribution G_p p is used, which makes phi_p the
    exact mean of the measured CPE offset; include_cross_pilot_ici=False
    keeps only each pilot's own column g_m p_m (the classical approximation
    that books the cross terms as a separate near-zero-mean perturbation).
    """
    if weights is None:
        weights = pilot_weights(ch)
    lam_h = compute_lambda_h_stat(lambda_stat, ch)
    gp_p = gs.g_p @ pilots
    total = 0j
    for m in range(len(pilots)):
        vec = gp_p if include_cross_pilot_ici else gs.g_p[:, m] * pilots[m]
        if uw_freq_down is not None:
            vec = vec + uw_freq_down
        total += weights[m] * np.conj(pilots[m]) * (lam_h[sel.pilot_pos[m], :] @ vec)
    return float(np.abs(total)), float(np.angle(total))


def compute_ici_decomposition(gs: GeneratorSet, ch: ChannelRealization,
                              lambda_stat: np.ndarray, sel: SelectionMatrices,
                              pilots: np.ndarray, sigma_d_sq: float = 1.0,
                              noise_var_freq: float = 0.0
                              ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Perturbations of the estimated pilots: (p_ici, var_data_ici, var_noise).

    p_ici is the constant pilot-induced ICI offset; var_data_ici[m] the
    variance of the data leakage onto pilot bin m; var_noise[m] the thermal
    noise variance after zero-forcing at that bin.
    """
    lam_h_pilot = compute_lambda_h_stat(lambda_stat, ch)[sel.pilot_pos, :]
    p_ici = lam_h_pilot @ (gs.g_p @ pilots) - pilots
    var_data = sigma_d_sq * np.sum(np.abs(lam_h_pilot @ gs.g_d) ** 2, axis=1)
    var_noise = noise_var_freq / np.abs(ch.h_pilot) ** 2
    return p_ici, var_data, var_noise


def compute_sigma_theta(a_p: float, weights: np.ndarray, pilots: np.ndarray,
                        var_data_ici: np.ndarray, var_noise: np.ndarray,
                        warn_validity: bool = True) -> float:
    """Variance of the zero-mean CPE estimation error, per-pilot sum form.

    This is the classical simplification that treats the perturbations of the
    pilot bins as mutually independent.  The data leakage onto different
    pilot bins shares the same data symbols, so the neglected cross terms can
    reach tens of percent on unlucky channels; compute_sigma_theta_exact
    keeps them.
    """
    if a_p <= 0:
        raise ValueError("pilot gain a_p must be positive")
    perturbation = np.sum(weights ** 2 * np.abs(pilots) ** 2 * (var_data_ici + var_noise))
    sigma_theta_sq = perturbation / (2 * a_p ** 2)
    ratio = np.inf if perturbation == 0 else a_p ** 2 / perturbation
    if warn_validity and ratio < _VALIDITY_MIN_RATIO:
        warnings.warn(
            f"small-angle CPE model out of its validity range: a_p^2 / perturbation "
            f"= {ratio:.2f} < {_VALIDITY_MIN_RATIO}"
        )
    return float(sigma_theta_sq)


def compute_sigma_theta_exact(gs: GeneratorSet, ch: ChannelRealization,
                              lambda_stat: np.ndarray, sel: SelectionMatrices,
                              pilots: np.ndarray, a_p: float,
                              weights: np.ndarray | None = None,
                              sigma_d_sq: float = 1.0, noise_var_freq: float = 0.0,
                              warn_validity: bool = True) -> float:
    """Variance of the CPE estimation error from the exact half-variance.

    Half the variance of the weighted pilot-correlation perturbation,
    including the covariance of the data leakage across pilot bins: the
    data-ICI contribution is ||v^T G_d||^2 with v the weighted combination of
    the pilot rows of H^{-1} Lambda H.
    """
    if a_p <= 0:
        raise ValueError("pilot gain a_p must be positive")
    if weights is None:
        weights = pilot_weights(ch)
    lam_h_pilot = compute_lambda_h_stat(lambda_stat, ch)[sel.pilot_pos, :]
    v = (weights * np.conj(pilots)) @ lam_h_pilot
    var_data = sigma_d_sq * float(np.linalg.norm(v @ gs.g_d) ** 2)
    var_noise = noise_var_freq * float(np.sum(
        weights ** 2 * np.abs(pilots) ** 2 / np.abs(ch.h_pilot) ** 2))
    perturbation = var_data + var_noise
    ratio = np.inf if perturbation == 0 else a_p ** 2 / perturbation
    if warn_validity and ratio < _VALIDITY_MIN_RATIO:
        warnings.warn(
            f"small-angle CPE model out of its validity range: a_p^2 / perturbation "
            f"= {ratio:.2f} < {_VALIDITY_MIN_RATIO}"
        )
    return float(perturbation / (2 * a_p ** 2))


def compute_alpha_and_noise(gs: GeneratorSet, ch: ChannelRealization,
                            lambda_stat: np.ndarray, estimator: np.ndarray,
                            phi_off_hat: float = 0.0, phi_p: float = 0.0,
                            sigma_d_sq: float = 1.0, noise_var_freq: float = 0.0,
                            include_data_ici: bool = True
                            ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-subcarrier gains and noise variances: (alpha, alpha_prime, sigma_w_sq).

    ``estimator`` is the full estimation matrix applied to the compensated
    symbol (LMMSE alone for the CPE tiers, LMMSE times the ICI compensation
    for the advanced tiers, where the data-ICI term is dropped from the
    variance by the model's assumption).
    """
    coupling = estimator @ (lambda_stat * ch.h_used[None, :]) @ gs.g_d
    diag = np.diag(coupling)
    alpha = np.exp(-1j * phi_off_hat) * diag
    alpha_prime = alpha * np.exp(-1j * phi_p)
    sigma_w_sq = noise_var_freq * np.sum(np.abs(estimator) ** 2, axis=1)
    if include_data_ici:
        data_ici = sigma_d_sq * (np.sum(np.abs(coupling) ** 2, axis=1) - np.abs(diag) ** 2)
        sigma_w_sq = sigma_w_sq + data_ici
    return alpha, alpha_prime, sigma_w_sq


@dataclass(frozen=True)
class OffsetCalibration:
    """Numerically calibrated constant-offset model phi = intercept + slope*eps.

    With a zero UW both intercepts vanish analytically (the CFO matrix is the
    identity at eps = 0) and the model collapses to the pure slopes; a
    non-zero UW leaks into the pilot bins even at eps = 0, which shows up as
    a non-zero b_p.
    """

    m_d: float
    m_p: float
    b_d: float = 0.0
    b_p: float = 0.0

    def phi_off(self, eps_hat: float) -> float:
        return (self.b_d - self.b_p) + (self.m_d - self.m_p) * eps_hat


def calibrate_offset_slopes(cfg: SystemConfig, sel: SelectionMatrices, gs: GeneratorSet,
                            ch: ChannelRealization, pilots: np.ndarray,
                            eps_grid: np.ndarray | None = None,
                            noise_var_time: float = 0.0,
                            uw_freq_down: np.ndarray | None = None) -> OffsetCalibration:
    """Affine calibration of the constant phases phi_d, phi_p versus eps.

    Deterministic evaluation on an eps grid inside the linear regime,
    least-squares line fit.  The offset estimate applied by the second
    compensation tier is phi_off_hat = OffsetCalibration.phi_off(eps_hat).
    """
    if eps_grid is None:
        eps_grid = np.linspace(0.01, 0.1, 10)
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.ptp(eps_grid) == 0.0:
        return OffsetCalibration(m_d=0.0, m_p=0.0)
    estimator = lmmse_build(gs, ch, noise_var_time, cfg.n_dft)
    weights = pilot_weights(ch)
    phi_d_vals, phi_p_vals = [], []
    for eps in eps_grid:
        lam = compute_lambda_stat(CfoModel(epsilon=float(eps), n_dft=cfg.n_dft), sel, full=False)
        diag = np.diag(estimator @ (lam * ch.h_used[None, :]) @ gs.g_d)
        phi_d_vals.append(np.mean(np.angle(diag)))
        _, phi_p = compute_pilot_gain(gs, ch, lam, sel, pilots, weights, uw_freq_down)
        phi_p_vals.append(phi_p)
    fits = {}
    for name, vals in (("d", phi_d_vals), ("p", phi_p_vals)):
        vals = np.asarray(vals)
        slope, intercept = np.polyfit(eps_grid, vals, 1)
        fits[name] = (float(slope), float(intercept))
        scale = float(np.max(np.abs(vals)))
        if scale > 1e-9:   # an analytically zero phase is all rounding noise
            residual = float(np.max(np.abs(vals - (slope * eps_grid + intercept)))) / scale
            if residual > 0.05:
                warnings.warn(f"phi_{name} calibration deviates from linearity by {residual:.1%}")
    return OffsetCalibration(m_d=fits["d"][0], m_p=fits["p"][0],
                             b_d=fits["d"][1], b_p=fits["p"][1])


def build_error_model(cfg: SystemConfig, sel: SelectionMatrices, gs: GeneratorSet,
                      ch: ChannelRealization, pilots: np.ndarray, epsilon_model: float,
                      tier: str, estimator: np.ndarray, noise_var_freq: float,
                      phi_off_hat: float = 0.0, sigma_d_sq: float = 1.0,
                      uw_freq_down: np.ndarray | None = None,
                      warn_validity: bool = False) -> ErrorModelParams:
    """Assemble the full residual-error model for one compensation tier.

    ``epsilon_model`` is whatever CFO value the model should be built from
    (the receiver's estimate in a live chain, the true value in validation).
    """
    lam = compute_lambda_stat(CfoModel(epsilon=epsilon_model, n_dft=cfg.n_dft), sel, full=False)
    weights = pilot_weights(ch)
    a_p, phi_p = compute_pilot_gain(gs, ch, lam, sel, pilots, weights, uw_freq_down)
    p_ici, _, _ = compute_ici_decomposition(
        gs, ch, lam, sel, pilots, sigma_d_sq, noise_var_freq)
    sigma_theta_sq = compute_sigma_theta_exact(
        gs, ch, lam, sel, pilots, a_p, weights, sigma_d_sq, noise_var_freq,
        warn_validity=warn_validity)
    mu = complex(np.sum(weights * np.conj(pilots) * p_ici) / a_p)

    if tier in (TIER_CPE, TIER_CPE_OFFSET):
        estimator_eff = estimator
        include_ici = True
        phi_p_net = phi_p
    elif tier == TIER_ADV_HERMITIAN:
        estimator_eff = estimator @ lam.conj().T
        include_ici = False
        phi_p_net = 0.0   # the e^{j phi_p_hat} stage cancels the CPE bias
    elif tier == TIER_ADV_EXACT:
        estimator_eff = np.linalg.solve(lam.T, estimator.T).T
        include_ici = False
        phi_p_net = 0.0
    else:
        raise ValueError(f"unknown compensation tier {tier!r}")

    alpha, alpha_prime, sigma_w_sq = compute_alpha_and_noise(
        gs, ch, lam, estimator_eff, phi_off_hat=phi_off_hat, phi_p=phi_p_net,
        sigma_d_sq=sigma_d_sq, noise_var_freq=noise_var_freq,
        include_data_ici=include_ici)
    raw_diag = np.diag(estimator @ (lam * ch.h_used[None, :]) @ gs.g_d)
    return ErrorModelParams(
        a_p=a_p, phi_p=phi_p, alpha=alpha, alpha_prime=alpha_prime,
        sigma_theta_sq=sigma_theta_sq, sigma_w_sq=sigma_w_sq,
        a_d=np.abs(raw_diag), phi_d=np.angle(raw_diag),
        phi_d_bar=float(np.mean(np.angle(raw_diag))), mu=mu,
        validity_ratio=float(a_p ** 2 / max(2 * a_p ** 2 * sigma_theta_sq, 1e-300)),
    )


def save_calibration(path, cal: OffsetCalibration, meta: dict | None = None) -> None:
    payload = {"m_d": cal.m_d, "m_p": cal.m_p, "b_d": cal.b_d, "b_p": cal.b_p}
    if meta:
        payload["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def load_calibration(path) -> OffsetCalibration:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return OffsetCalibration(m_d=float(payload["m_d"]), m_p=float(payload["m_p"]),
                             b_d=float(payload.get("b_d", 0.0)),
                             b_p=float(payload.get("b_p", 0.0)))
