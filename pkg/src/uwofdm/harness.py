"""Experiment orchestration: MSE sweeps, BER sweeps, calibration, model checks.

Reproducibility contract: every trial draws its channel, payload and noise
from generators keyed by (base_seed, trial, stream), so a sweep writes
bitwise-identical CSV for a given spec and seed regardless of how many
worker processes execute it.  Trials are reduced in trial order.

Energy convention for E_b/N_0 (documented here, used nowhere else):

    E_b      = (mean transmit energy per OFDM symbol, guard included)
               / (information bits per OFDM symbol)
    sigma_t^2 = E_b * 10^(-EbN0_dB/10) * bits_per_symbol / samples_per_symbol
             = (mean energy per time-domain sample) * 10^(-EbN0_dB/10)

Guard samples (CP copies, or the UW's zero/Barker samples) count toward the
transmit energy.  Absolute curve positions depend on this bookkeeping; tier
and system comparisons at equal E_b/N_0 do not.  An empirical calibration
check (measured per-used-subcarrier SNR vs. the configured one) guards the
convention to within 1 percent.
"""

from __future__ import annotations

import functools
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import errmodel
from .channel import (CfoModel, ChannelRealization, add_awgn, apply_cfo_time,
                      apply_multipath, compute_lambda_stat, draw_channel, flat_channel,
                      freq_noise_var, phi_l_for_variant)
from .config import (CP_OFDM, UW_OFDM, SelectionMatrices, SystemConfig,
                     build_preset, build_selection_matrices)
from .fec import Interleaver, depuncture, viterbi_decode_soft
from .generators import GeneratorSet, build_generator_set
from .mapping import Constellation, LlrParams, constellation_by_name, demap_llr, hard_demap
from .numerics import rng_from_key
from .rxfront import (TIER_ADV_EXACT, TIER_ADV_HERMITIAN, TIER_CPE, TIER_CPE_OFFSET,
                      TIERS, CpeTrack, compensate_advanced, estimate_cpe,
                      estimate_epsilon, lmmse_build, offset_vector, pilot_weights,
                      rx_frontend, subtract_offset)
from .txchain import (DEFAULT_PILOTS, barker_uw, build_packet_from_symbols,
                      encode_payload, payload_bit_count, uw_spectra)

SYSTEM_NAMES = ("uw_systematic", "uw_spread", "cp_ofdm")
UW_ZERO = "zero"
UW_BARKER = "barker13"

TAU_RMS_DEFAULT = 100e-9
INTERLEAVER_SEED = 0x5EED


@dataclass(frozen=True)
class LinkSystem:
    """Everything static about one simulated system."""

    name: str
    cfg: SystemConfig
    sel: SelectionMatrices
    gens: GeneratorSet
    pilots: np.ndarray
    uw_time: np.ndarray | None         # None for zero UW and for CP-OFDM
    uw_freq_down: np.ndarray | None

    @property
    def mean_symbol_energy(self) -> float:
        """Mean transmit energy per OFDM symbol, guard included."""
        cfg, gens = self.cfg, self.gens
        payload = (cfg.n_data * gens.scaling_alpha
                   + float(np.linalg.norm(gens.g_p @ self.pilots) ** 2)) / cfg.n_dft
        if cfg.variant == CP_OFDM:
            return payload * cfg.samples_per_symbol / cfg.n_dft
        uw = 0.0 if self.uw_time is None else float(np.sum(np.abs(self.uw_time) ** 2))
        return payload + uw


@functools.lru_cache(maxsize=None)
def build_link_system(name: str, uw: str = UW_ZERO,
                      cfg_override: SystemConfig | None = None) -> LinkSystem:
    """Assemble a system by name; cfg_override replaces the matching-variant
    preset (loaded from a JSON config file by the CLI)."""
    if name not in SYSTEM_NAMES:
        raise ValueError(f"unknown system {name!r}, expected one of {SYSTEM_NAMES}")
    if name == "cp_ofdm":
        cfg = (cfg_override if cfg_override is not None
               and cfg_override.variant == CP_OFDM else build_preset(CP_OFDM))
        sel = build_selection_matrices(cfg)
        gens = build_generator_set(cfg, sel, CP_OFDM)
        return LinkSystem(name, cfg, sel, gens, DEFAULT_PILOTS, None, None)
    if cfg_override is not None and cfg_override.variant == UW_OFDM:
        cfg = cfg_override
        if cfg.red_indices is None:
            from .generators import optimize_redundant_placement

            cfg = cfg.with_red_indices(
                optimize_redundant_placement(cfg, build_selection_matrices(cfg)))
    else:
        cfg = build_preset(UW_OFDM)
    sel = build_selection_matrices(cfg)
    kind = "systematic" if name == "uw_systematic" else "spread"
    gens = build_generator_set(cfg, sel, kind)
    uw_time = uw_freq_down = None
    if uw == UW_BARKER:
        uw_time = barker_uw(cfg, gens, DEFAULT_PILOTS)
        _, uw_freq_down = uw_spectra(cfg, sel, uw_time)
    elif uw != UW_ZERO:
        raise ValueError(f"unknown UW choice {uw!r}")
    return LinkSystem(name, cfg, sel, gens, DEFAULT_PILOTS, uw_time, uw_freq_down)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str                                    # mse_sweep | ber_sweep | calibrate | model_check
    systems: tuple[str, ...] = ("uw_systematic", "cp_ofdm")
    tiers: tuple[str, ...] = (TIER_CPE,)
    epsilon_list: tuple[float, ...] = (0.1,)
    ebn0_list_db: tuple[float, ...] = ()
    rate: float | None = None                    # None = uncoded
    constellation: str = "qpsk"
    n_channels: int = 300
    n_packets: int = 200
    base_seed: int = 1
    uw: str = UW_ZERO
    tau_rms: float = TAU_RMS_DEFAULT
    workers: int = 1
    config_override: SystemConfig | None = None

    def __post_init__(self) -> None:
        if not self.systems or not self.tiers:
            raise ValueError("systems and tiers must be nonempty")
        if self.n_channels < 1:
            raise ValueError("n_channels must be at least 1")
        for tier in self.tiers:
            if tier not in TIERS:
                raise ValueError(f"unknown tier {tier!r}")


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)

    def append(self, **kwargs) -> None:
        self.rows.append(kwargs)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")

    def filtered(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise ValueError(f"{path} is empty")
        columns = tuple(lines[0].split(","))
        table = cls(columns)
        for line in lines[1:]:
            values = line.split(",")
            row = {}
            for c, v in zip(columns, values):
                try:
                    num = float(v)
                    row[c] = int(num) if num.is_integer() and "." not in v and "e" not in v else num
                except ValueError:
                    row[c] = v
            table.rows.append(row)
        return table


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def ebn0_to_noise(system: LinkSystem, constellation: Constellation,
                  rate: float | None, ebn0_db: float) -> float:
    """Time-domain noise variance realizing the requested E_b/N_0."""
    bits = system.cfg.n_data * constellation.bits_per_symbol * (rate if rate else 1.0)
    e_sample = system.mean_symbol_energy / system.cfg.samples_per_symbol
    e_b = e_sample * system.cfg.samples_per_symbol / bits
    return e_b * 10 ** (-ebn0_db / 10) * bits / system.cfg.samples_per_symbol


def measure_subcarrier_snr(system: LinkSystem, noise_var_time: float,
                           n_symbols: int = 4000, seed: int = 0) -> tuple[float, float]:
    """(measured, configured) per-used-subcarrier SNR; calibration guard."""
    cfg, sel, gens = system.cfg, system.sel, system.gens
    rng = rng_from_key(seed, 0x51A2)
    d = (rng.standard_normal((n_symbols, cfg.n_data))
         + 1j * rng.standard_normal((n_symbols, cfg.n_data))) / np.sqrt(2)
    spectra = (gens.g_d @ d.T + (gens.g_p @ system.pilots)[:, None]).T
    signal_power = float(np.mean(np.abs(spectra) ** 2))
    noise = (rng.standard_normal(spectra.shape) + 1j * rng.standard_normal(spectra.shape))
    noise *= np.sqrt(freq_noise_var(noise_var_time, cfg.n_dft) / 2)
    measured = signal_power / float(np.mean(np.abs(noise) ** 2))
    configured = signal_power / freq_noise_var(noise_var_time, cfg.n_dft)
    return measured, configured


# --- single-packet receive chain ---------------------------------------------


@dataclass
class ReceiverState:
    """Per-(channel, noise level) receiver-side quantities shared by tiers."""

    estimator: np.ndarray
    x_off: np.ndarray
    noise_var_time: float
    offset_cal: errmodel.OffsetCalibration | None = None


def prepare_receiver(system: LinkSystem, ch: ChannelRealization, noise_var_time: float,
                     need_offset_slopes: bool) -> ReceiverState:
    estimator = lmmse_build(system.gens, ch, noise_var_time, system.cfg.n_dft)
    x_off = offset_vector(ch, system.gens, system.pilots, system.uw_freq_down)
    state = ReceiverState(estimator=estimator, x_off=x_off, noise_var_time=noise_var_time)
    if need_offset_slopes:
        state.offset_cal = errmodel.calibrate_offset_slopes(
            system.cfg, system.sel, system.gens, ch, system.pilots,
            noise_var_time=noise_var_time, uw_freq_down=system.uw_freq_down)
    return state


def receive_tiers(system: LinkSystem, ch: ChannelRealization, state: ReceiverState,
                  stream: np.ndarray, prefix_len: int, tiers: tuple[str, ...],
                  with_model: bool = False) -> tuple[dict, CpeTrack]:
    """Run the front end once and every requested tier on top of it.

    Returns ({tier: (d_hat, LlrParams | None)}, CpeTrack).
    """
    cfg, sel = system.cfg, system.sel
    rxp = rx_frontend(stream, cfg, sel, prefix_len)
    phi_hat = estimate_cpe(rxp.y_down, system.pilots, ch, sel)
    eps_hat = estimate_epsilon(phi_hat, cfg)
    noise_f = freq_noise_var(state.noise_var_time, cfg.n_dft)

    out = {}
    y_comp = subtract_offset(rxp.y_down, phi_hat, state.x_off)
    lam_hat = None
    phi_p_hat = 0.0
    phi_off_used = 0.0
    for tier in tiers:
        if tier in (TIER_ADV_HERMITIAN, TIER_ADV_EXACT) and lam_hat is None:
            lam_hat = compute_lambda_stat(CfoModel(eps_hat, cfg.n_dft), sel, full=False)
            _, phi_p_hat = errmodel.compute_pilot_gain(
                system.gens, ch, lam_hat, sel, system.pilots,
                uw_freq_down=system.uw_freq_down)
        if tier == TIER_CPE:
            d_hat = y_comp @ state.estimator.T
            phi_off_hat = 0.0
        elif tier == TIER_CPE_OFFSET:
            if state.offset_cal is None:
                raise ValueError("tier cpe_offset requires offset calibration")
            phi_off_hat = state.offset_cal.phi_off(eps_hat)
            phi_off_used = phi_off_hat
            d_hat = np.exp(-1j * phi_off_hat) * (y_comp @ state.estimator.T)
        else:
            phi_off_hat = 0.0
            d_hat = compensate_advanced(y_comp, lam_hat, phi_p_hat, state.estimator, tier)
        params = None
        if with_model:
            model = errmodel.build_error_model(
                cfg, sel, system.gens, ch, system.pilots, eps_hat, tier,
                state.estimator, noise_f, phi_off_hat=phi_off_hat,
                uw_freq_down=system.uw_freq_down)
            params = LlrParams(alpha_prime=model.alpha_prime,
                               sigma_w_sq=np.maximum(model.sigma_w_sq, 1e-30),
                               sigma_theta_sq=model.sigma_theta_sq)
        out[tier] = (d_hat, params)
    track = CpeTrack(phi_hat=phi_hat, epsilon_hat=eps_hat, phi_off_hat=phi_off_used,
                     weights=pilot_weights(ch))
    return out, track


# --- trial workers ------------------------------------------------------------


def _random_data_symbols(system: LinkSystem, constellation: Constellation,
                         seed_key: tuple) -> np.ndarray:
    cfg = system.cfg
    rng = rng_from_key(*seed_key)
    bits = rng.integers(0, 2, cfg.symbols_per_packet * cfg.n_data
                        * constellation.bits_per_symbol).astype(np.uint8)
    from .mapping import map_bits

    return map_bits(bits, constellation).reshape(cfg.symbols_per_packet, cfg.n_data)


def _mse_trial(task) -> tuple:
    """BMSE of every tier for one (system, epsilon, trial)."""
    spec, name, eps, trial = task
    system = build_link_system(name, spec.uw, spec.config_override)
    cfg, sel = system.cfg, system.sel
    ch = (flat_channel(cfg, sel) if spec.tau_rms == 0.0
          else draw_channel(cfg, sel, spec.tau_rms, _seed(spec.base_seed, trial, 1)))
    constellation = constellation_by_name(spec.constellation)
    d = _random_data_symbols(system, constellation, (spec.base_seed, trial, 2))
    pkt = build_packet_from_symbols(d, cfg, sel, system.gens, system.pilots,
                                    x_u=system.uw_time)
    cfo = CfoModel(epsilon=eps, n_dft=cfg.n_dft)
    stream = apply_cfo_time(apply_multipath(pkt.stream, ch, cfg.n_guard), cfo)
    state = prepare_receiver(system, ch, 0.0, TIER_CPE_OFFSET in spec.tiers)
    res, _ = receive_tiers(system, ch, state, stream, pkt.prefix_len, spec.tiers)
    return tuple(float(np.mean(np.abs(res[t][0] - d) ** 2)) for t in spec.tiers)


def _ber_trial(task) -> tuple:
    """Bit errors of every tier for one (system, epsilon, ebn0, trial)."""
    spec, name, eps, ebn0_db, trial = task
    system = build_link_system(name, spec.uw, spec.config_override)
    cfg, sel = system.cfg, system.sel
    constellation = constellation_by_name(spec.constellation)
    ch = (flat_channel(cfg, sel) if spec.tau_rms == 0.0
          else draw_channel(cfg, sel, spec.tau_rms, _seed(spec.base_seed, trial, 1)))
    rng = rng_from_key(spec.base_seed, trial, 2)
    payload = rng.integers(0, 2, payload_bit_count(cfg, constellation, spec.rate)).astype(np.uint8)
    interleaver = None
    if spec.rate is not None:
        n_coded = cfg.symbols_per_packet * cfg.n_data * constellation.bits_per_symbol
        interleaver = _interleaver(n_coded)
    d = encode_payload(payload, cfg, constellation, spec.rate, interleaver)
    pkt = build_packet_from_symbols(d, cfg, sel, system.gens, system.pilots,
                                    x_u=system.uw_time)

    noise_var = ebn0_to_noise(system, constellation, spec.rate, ebn0_db)
    cfo = CfoModel(epsilon=eps, n_dft=cfg.n_dft)
    stream = apply_cfo_time(apply_multipath(pkt.stream, ch, cfg.n_guard), cfo)
    stream = add_awgn(stream, noise_var, _seed(spec.base_seed, trial, 3))

    state = prepare_receiver(system, ch, noise_var, TIER_CPE_OFFSET in spec.tiers)
    res, _ = receive_tiers(system, ch, state, stream, pkt.prefix_len, spec.tiers,
                           with_model=True)
    counts = []
    for tier in spec.tiers:
        d_hat, params = res[tier]
        if spec.rate is None:
            # hard decisions after removing the modelled per-subcarrier gain
            bits_hat = hard_demap(d_hat, constellation, gain=params.alpha_prime[None, :])
            errors = int(np.count_nonzero(bits_hat != payload))
            counts.append((errors, payload.size))
        else:
            llrs = demap_llr(d_hat, params, constellation).reshape(-1)
            soft = interleaver.deinterleave(llrs)
            if spec.rate == 0.75:
                soft = depuncture(soft)
            decoded = viterbi_decode_soft(soft)
            errors = int(np.count_nonzero(decoded != payload))
            counts.append((errors, payload.size))
    return tuple(counts)


@functools.lru_cache(maxsize=8)
def _interleaver(length: int) -> Interleaver:
    return Interleaver(length=length, seed=INTERLEAVER_SEED)


def _seed(base: int, trial: int, stream: int) -> int:
    # flat integer key for channel / payload / noise streams of one trial
    return (base * 1_000_003 + trial) * 7 + stream


def _run_tasks(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (workers * 8))))


# --- sweeps -------------------------------------------------------------------


def run_mse_sweep(spec: ExperimentSpec) -> ResultTable:
    """BMSE versus epsilon per (system, tier); noise-free by definition."""
    table = ResultTable(("epsilon", "system", "tier", "bmse", "stderr", "n"))
    points = [(name, eps) for name in spec.systems for eps in spec.epsilon_list]
    for name, eps in points:
        t0 = time.time()
        tasks = [(spec, name, eps, t) for t in range(spec.n_packets)]
        per_trial = np.array(_run_tasks(_mse_trial, tasks, spec.workers))
        for j, tier in enumerate(spec.tiers):
            vals = per_trial[:, j]
            table.append(epsilon=eps, system=name, tier=tier,
                         bmse=float(np.mean(vals)),
                         stderr=float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
                         if len(vals) > 1 else 0.0,
                         n=len(vals))
        _progress(spec, f"mse {name} eps={eps:g} done in {time.time() - t0:.1f}s")
    return table


def run_ber_sweep(spec: ExperimentSpec) -> ResultTable:
    """BER versus E_b/N_0 per (system, tier, epsilon)."""
    table = ResultTable(("ebn0_db", "system", "tier", "epsilon", "ber", "stderr", "n_bits"))
    for name in spec.systems:
        for eps in spec.epsilon_list:
            for ebn0 in spec.ebn0_list_db:
                t0 = time.time()
                tasks = [(spec, name, eps, ebn0, t) for t in range(spec.n_channels)]
                counts = _run_tasks(_ber_trial, tasks, spec.workers)
                for j, tier in enumerate(spec.tiers):
                    errs = np.array([c[j][0] for c in counts], dtype=float)
                    bits = np.array([c[j][1] for c in counts], dtype=float)
                    total_err, total_bits = float(np.sum(errs)), float(np.sum(bits))
                    ber = total_err / total_bits
                    per_trial = errs / bits
                    stderr = (float(np.std(per_trial, ddof=1) / np.sqrt(len(per_trial)))
                              if len(per_trial) > 1 else 0.0)
                    if ber > 0 and stderr > ber / 3:
                        warnings.warn(
                            f"BER point ({name}, {tier}, eps={eps}, {ebn0} dB) has "
                            f"stderr {stderr:.2e} > ber/3 = {ber / 3:.2e}; add trials")
                    table.append(ebn0_db=ebn0, system=name, tier=tier, epsilon=eps,
                                 ber=ber, stderr=stderr, n_bits=int(total_bits))
                _progress(spec, f"ber {name} eps={eps:g} {ebn0:g} dB done in "
                                f"{time.time() - t0:.1f}s")
    return table


def _progress(spec: ExperimentSpec, msg: str) -> None:
    if os.environ.get("UWOFDM_QUIET"):
        return
    print(f"[{spec.kind}] {msg}", flush=True)


def ber_floor(ber: float) -> float:
    """Statistical floor of a BER estimate (3 errors' worth of bits)."""
    return 3.0 / ber if ber > 0 else np.inf


def interpolate_ebn0_at_ber(table: ResultTable, target_ber: float, **match) -> float:
    """E_b/N_0 at which the matched curve crosses target_ber (log-BER interp)."""
    rows = sorted(table.filtered(**match), key=lambda r: r["ebn0_db"])
    if not rows:
        raise ValueError(f"no rows match {match}")
    xs = np.array([r["ebn0_db"] for r in rows], dtype=float)
    ys = np.array([max(r["ber"], 1e-12) for r in rows], dtype=float)
    logt = np.log10(target_ber)
    logy = np.log10(ys)
    for i in range(len(xs) - 1):
        y0, y1 = logy[i], logy[i + 1]
        if (y0 - logt) * (y1 - logt) <= 0 and y0 != y1:
            return float(xs[i] + (xs[i + 1] - xs[i]) * (logt - y0) / (y1 - y0))
    raise ValueError(f"curve {match} does not cross BER {target_ber:g} on the grid")


# --- model check --------------------------------------------------------------


def run_model_check(spec: ExperimentSpec) -> ResultTable:
    """Monte-Carlo validation of the residual-error model.

    For each (system, epsilon, channel): compares the variance of the CPE
    estimation error against sigma_theta^2 and the per-subcarrier variance of
    the data-ICI-plus-noise residual against sigma_w^2 (the deterministic
    pilot/UW offset residual is excluded; it is not part of the modelled
    variance).  Noise-free, true epsilon, tier ``cpe``.
    """
    table = ResultTable(("system", "epsilon", "channel_seed", "metric",
                         "empirical", "model", "ratio", "ok"))
    constellation = constellation_by_name(spec.constellation)
    for name in spec.systems:
        system = build_link_system(name, spec.uw, spec.config_override)
        cfg, sel, gens = system.cfg, system.sel, system.gens
        channels = [(-1, flat_channel(cfg, sel))]
        channels += [(s, draw_channel(cfg, sel, spec.tau_rms, _seed(spec.base_seed, s, 1)))
                     for s in range(spec.n_channels)]
        for eps in spec.epsilon_list:
            cfo = CfoModel(epsilon=eps, n_dft=cfg.n_dft)
            lam = compute_lambda_stat(cfo, sel, full=False)
            for seed, ch in channels:
                state = prepare_receiver(system, ch, 0.0, False)
                model = errmodel.build_error_model(
                    cfg, sel, gens, ch, system.pilots, eps, TIER_CPE,
                    state.estimator, 0.0, uw_freq_down=system.uw_freq_down)
                coupling = state.estimator @ (lam * ch.h_used[None, :]) @ gens.g_d
                alpha_raw = np.diag(coupling)
                hgp = ch.h_used * (gens.g_p @ system.pilots
                                   + (system.uw_freq_down if system.uw_freq_down is not None
                                      else 0.0))
                dphis, resid_sq = [], 0.0
                n_entries = 0
                for t in range(spec.n_packets):
                    d = _random_data_symbols(system, constellation,
                                             (spec.base_seed, seed, t, 2))
                    pkt = build_packet_from_symbols(d, cfg, sel, gens, system.pilots,
                                                    x_u=system.uw_time)
                    stream = apply_cfo_time(apply_multipath(pkt.stream, ch, cfg.n_guard), cfo)
                    rxp = rx_frontend(stream, cfg, sel, pkt.prefix_len)
                    phi_hat = estimate_cpe(rxp.y_down, system.pilots, ch, sel)
                    phi_true = phi_l_for_variant(cfo, np.arange(cfg.symbols_per_packet),
                                                 cfg, pkt.prefix_len)
                    psi = np.angle(np.exp(1j * (phi_hat - phi_true)))
                    dphis.append(psi)
                    y_comp = subtract_offset(rxp.y_down, phi_hat, state.x_off)
                    d_hat = y_comp @ state.estimator.T
                    base = np.exp(-1j * psi)[:, None] * (alpha_raw[None, :] * d)
                    # deterministic pilot/UW offset residual, excluded from the check
                    xi = (np.exp(-1j * psi)[:, None] * (lam @ hgp)[None, :]
                          - hgp[None, :]) @ state.estimator.T
                    resid_sq += float(np.sum(np.abs(d_hat - base - xi) ** 2))
                    n_entries += d.size
                dphi = np.concatenate(dphis)
                var_phi = float(np.var(dphi - model.phi_p))
                ratio_theta = var_phi / model.sigma_theta_sq
                table.append(system=name, epsilon=eps, channel_seed=seed,
                             metric="sigma_theta_sq", empirical=var_phi,
                             model=model.sigma_theta_sq, ratio=ratio_theta,
                             ok=int(0.8 <= ratio_theta <= 1.2))
                emp_w = resid_sq / n_entries
                model_w = float(np.mean(model.sigma_w_sq))
                ratio_w = emp_w / model_w if model_w > 0 else (1.0 if emp_w == 0 else np.inf)
                table.append(system=name, epsilon=eps, channel_seed=seed,
                             metric="sigma_w_sq", empirical=emp_w, model=model_w,
                             ratio=ratio_w, ok=int(0.9 <= ratio_w <= 1.1))
    return table


# --- plotting -----------------------------------------------------------------


def emit_plots(table: ResultTable, path, kind: str) -> list:
    """Write one vector-graphics figure per sweep kind; data stays in CSV."""
    if not table.rows:
        raise ValueError("refusing to plot an empty result table")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    written = []
    if kind == "mse_sweep":
        curves = sorted({(r["system"], r["tier"]) for r in table.rows})
        for system, tier in curves:
            rows = sorted(table.filtered(system=system, tier=tier),
                          key=lambda r: r["epsilon"])
            ax.semilogy([r["epsilon"] for r in rows], [max(r["bmse"], 1e-16) for r in rows],
                        marker="o", label=f"{system} / {tier}")
        ax.set_xlabel(r"normalized CFO $\epsilon$")
        ax.set_ylabel(r"BMSE per data symbol")
    elif kind == "ber_sweep":
        curves = sorted({(r["system"], r["tier"], r["epsilon"]) for r in table.rows})
        for system, tier, eps in curves:
            rows = sorted(table.filtered(system=system, tier=tier, epsilon=eps),
                          key=lambda r: r["ebn0_db"])
            ax.semilogy([r["ebn0_db"] for r in rows], [max(r["ber"], 1e-9) for r in rows],
                        marker="o", label=f"{system} / {tier} / eps={eps:g}")
        ax.set_xlabel(r"$E_b/N_0$ (dB)")
        ax.set_ylabel("BER")
    else:
        raise ValueError(f"no plot layout for kind {kind!r}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written
