"""System configurations and subcarrier selection matrices.

Subcarrier indexing is plain DFT-bin order 0..N-1 throughout the package;
no fftshift reordering happens anywhere in the data path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace, asdict

import numpy as np

UW_OFDM = "uw_ofdm"
CP_OFDM = "cp_ofdm"
VARIANTS = (UW_OFDM, CP_OFDM)

# 802.11a-like 64-bin layout: DC plus the 11 bins around the band edge unused.
_ZERO_INDICES = (0,) + tuple(range(27, 38))
_PILOT_INDICES = (7, 21, 43, 57)


class ConfigError(ValueError):
    """Inconsistent system configuration."""


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, index sets and timing of one OFDM variant.

    For UW-OFDM, n_data + n_red + n_pilot + n_zero = n_dft and the redundant
    subcarrier count equals the guard length (n_red = n_guard).  For CP-OFDM
    there are no redundant subcarriers and the guard is a cyclic prefix.
    """

    variant: str
    n_dft: int
    n_data: int
    n_red: int
    n_pilot: int
    n_zero: int
    n_guard: int
    zero_indices: tuple[int, ...]
    pilot_indices: tuple[int, ...]
    red_indices: tuple[int, ...] | None
    subcarrier_spacing: float
    symbols_per_packet: int

    @property
    def n_used(self) -> int:
        """Number of non-zero subcarriers N - N_z."""
        return self.n_dft - self.n_zero

    @property
    def t_dft(self) -> float:
        return 1.0 / self.subcarrier_spacing

    @property
    def sample_period(self) -> float:
        return self.t_dft / self.n_dft

    @property
    def samples_per_symbol(self) -> int:
        """Time-domain samples per transmitted OFDM symbol."""
        return self.n_dft if self.variant == UW_OFDM else self.n_dft + self.n_guard

    def with_red_indices(self, red_indices) -> "SystemConfig":
        return replace(self, red_indices=tuple(int(i) for i in red_indices))


def build_preset(variant: str, red_indices=None) -> SystemConfig:
    """64-bin WLAN-style preset for either variant.

    UW-OFDM redundant subcarrier placement defaults to the deterministic
    optimizer in :mod:`uwofdm.generators`; pass ``red_indices`` to override
    (e.g. to reproduce externally supplied generator matrices exactly).
    """
    if variant == UW_OFDM:
        cfg = SystemConfig(
            variant=UW_OFDM,
            n_dft=64,
            n_data=32,
            n_red=16,
            n_pilot=4,
            n_zero=12,
            n_guard=16,
            zero_indices=_ZERO_INDICES,
            pilot_indices=_PILOT_INDICES,
            red_indices=tuple(int(i) for i in red_indices) if red_indices is not None else None,
            subcarrier_spacing=312.5e3,
            symbols_per_packet=200,
        )
        if cfg.red_indices is None:
            from . import generators  # deferred: generators imports this module

            cfg = cfg.with_red_indices(
                generators.optimize_redundant_placement(cfg, build_selection_matrices(cfg))
            )
    elif variant == CP_OFDM:
        cfg = SystemConfig(
            variant=CP_OFDM,
            n_dft=64,
            n_data=48,
            n_red=0,
            n_pilot=4,
            n_zero=12,
            n_guard=16,
            zero_indices=_ZERO_INDICES,
            pilot_indices=_PILOT_INDICES,
            red_indices=None,
            subcarrier_spacing=312.5e3,
            symbols_per_packet=200,
        )
    else:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    validate(cfg)
    return cfg


def validate(cfg: SystemConfig) -> None:
    """Check all SystemConfig invariants; raises ConfigError on violation."""
    if cfg.variant not in VARIANTS:
        raise ConfigError(f"unknown variant {cfg.variant!r}")
    index_sets = {"zero_indices": cfg.zero_indices, "pilot_indices": cfg.pilot_indices}
    if cfg.variant == UW_OFDM:
        if cfg.red_indices is not None:
            index_sets["red_indices"] = cfg.red_indices
        if cfg.n_red != cfg.n_guard:
            raise ConfigError(f"UW-OFDM requires n_red == n_guard, got {cfg.n_red} != {cfg.n_guard}")
        total = cfg.n_data + cfg.n_red + cfg.n_pilot + cfg.n_zero
    else:
        if cfg.n_red != 0 or cfg.red_indices is not None:
            raise ConfigError("CP-OFDM has no redundant subcarriers")
        total = cfg.n_data + cfg.n_pilot + cfg.n_zero
    if total != cfg.n_dft:
        raise ConfigError(f"dimension mismatch: subcarrier counts sum to {total}, n_dft is {cfg.n_dft}")

    seen: set[int] = set()
    for name, indices in index_sets.items():
        if len(set(indices)) != len(indices):
            raise ConfigError(f"{name} contains duplicates")
        for i in indices:
            if not 0 <= i < cfg.n_dft:
                raise ConfigError(f"{name} entry {i} out of range [0, {cfg.n_dft})")
            if i in seen:
                raise ConfigError(f"index {i} appears in more than one index set")
        seen.update(indices)
    expected = {"zero_indices": cfg.n_zero, "pilot_indices": cfg.n_pilot, "red_indices": cfg.n_red}
    for name, indices in index_sets.items():
        if len(indices) != expected[name]:
            raise ConfigError(f"{name} has {len(indices)} entries, expected {expected[name]}")


@dataclass(frozen=True)
class SelectionMatrices:
    """Binary selection/permutation matrices derived from a SystemConfig.

    b          zero-subcarrier insertion, N x (N - N_z); b[i, j] = 1 iff used
               subcarrier j sits at DFT bin i.
    e_p        pilot extraction within the used-subcarrier vector, N_p x (N - N_z).
    p_p        permutation on the used-subcarrier vector sorting non-pilot
               positions first, pilots last; e_p = [0 I] p_p^T.
    b_p        CP-OFDM data mapping onto the non-pilot used positions.
    used       DFT-bin indices of the N - N_z used subcarriers, ascending.
    data_pos / pilot_pos / red_pos
               positions of each role inside the used-subcarrier vector.
    """

    b: np.ndarray
    e_p: np.ndarray
    p_p: np.ndarray
    b_p: np.ndarray
    used: np.ndarray
    data_pos: np.ndarray
    pilot_pos: np.ndarray
    red_pos: np.ndarray | None


def build_selection_matrices(cfg: SystemConfig) -> SelectionMatrices:
    n, n_used = cfg.n_dft, cfg.n_used
    used = np.array(sorted(set(range(n)) - set(cfg.zero_indices)))
    bin_to_used = {int(k): j for j, k in enumerate(used)}

    b = np.zeros((n, n_used))
    b[used, np.arange(n_used)] = 1.0

    pilot_pos = np.array([bin_to_used[k] for k in cfg.pilot_indices])
    nonpilot_pos = np.array([j for j in range(n_used) if j not in set(pilot_pos)])

    e_p = np.zeros((cfg.n_pilot, n_used))
    e_p[np.arange(cfg.n_pilot), pilot_pos] = 1.0

    # p_p^T y = [y at non-pilot positions; y at pilot positions]
    order = np.concatenate([nonpilot_pos, pilot_pos])
    p_p = np.zeros((n_used, n_used))
    p_p[order, np.arange(n_used)] = 1.0

    b_p = np.zeros((n_used, n_used - cfg.n_pilot))
    b_p[nonpilot_pos, np.arange(n_used - cfg.n_pilot)] = 1.0

    if cfg.variant == UW_OFDM and cfg.red_indices is not None:
        red_pos = np.array([bin_to_used[k] for k in cfg.red_indices])
        data_pos = np.array(
            [j for j in range(n_used) if j not in set(pilot_pos) and j not in set(red_pos)]
        )
    else:
        red_pos = None
        data_pos = nonpilot_pos
    return SelectionMatrices(
        b=b, e_p=e_p, p_p=p_p, b_p=b_p, used=used,
        data_pos=data_pos, pilot_pos=pilot_pos, red_pos=red_pos,
    )


def save_config(cfg: SystemConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(cfg), fh, indent=2)


def load_config(path) -> SystemConfig:
    """Load a SystemConfig from a JSON file with keys mirroring the fields."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {f for f in SystemConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = known - set(raw)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    for key in ("zero_indices", "pilot_indices", "red_indices"):
        if raw.get(key) is not None:
            raw[key] = tuple(int(i) for i in raw[key])
    cfg = SystemConfig(**raw)
    validate(cfg)
    return cfg
