"""Generator matrices mapping data/pilot symbols onto subcarriers.

UW-OFDM needs the last N_u time-domain samples of each payload symbol to be
exactly zero, so the frequency-domain symbol must lie in the null space of
the constraint matrix M (the last N_u rows of F_N^{-1} B).  The redundant
subcarriers absorb that constraint: r = -M_r^{-1} (M_d d + M_p p).

Two UW-OFDM flavours are built here:

* systematic: every data symbol sits on its own subcarrier, plus spill-over
  onto the redundant subcarriers (diagonal-dominant matrix);
* spread: the systematic matrix post-multiplied by a unitary spreading
  matrix (default: normalized N_d-point DFT), distributing each data symbol
  across all non-pilot subcarriers, single-carrier-like.

CP-OFDM is modelled in the same framework with plain selection matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .config import CP_OFDM, UW_OFDM, SelectionMatrices, SystemConfig

SYSTEMATIC = "systematic"
SPREAD = "spread"

# A condition number this high on M_r means the redundant placement cannot
# absorb the zero-word constraint at working precision.
_SINGULAR_COND = 1e12


class SingularRedundancyError(ValueError):
    """Redundant subcarrier placement makes M_r (numerically) singular."""


class ZeroWordViolation(ValueError):
    """Imported generator matrices do not satisfy the zero-word constraint."""


class MatrixParseError(ValueError):
    """Malformed generator-matrix file."""


@dataclass(frozen=True)
class ConstraintMatrix:
    """Last N_u rows of F_N^{-1} B, one column per used subcarrier."""

    m: np.ndarray


@dataclass(frozen=True)
class GeneratorSet:
    """Data/pilot generator matrices with their scaling.

    g_d is (N - N_z) x N_d, g_p is (N - N_z) x N_p.  ``scaling_alpha`` is the
    per-column squared norm of g_d after scaling.  ``gram_offdiag`` reports
    ||g_d^H g_d - alpha I||_F / ||alpha I||_F (the paper-grade matrices have
    an exactly proportional Gram; ours only guarantee the column norms).
    """

    g_d: np.ndarray
    g_p: np.ndarray
    scaling_alpha: float
    kind: str
    red_cond: float | None = None
    gram_offdiag: float | None = None


def compute_constraint_matrix(cfg: SystemConfig, sel: SelectionMatrices) -> ConstraintMatrix:
    if cfg.variant != UW_OFDM:
        raise ValueError("constraint matrix only exists for the UW-OFDM variant")
    n, n_u = cfg.n_dft, cfg.n_guard
    rows = np.arange(n - n_u, n)
    # (1/N) exp(+2j pi n k / N) at the tail rows, restricted to used bins.
    m = np.exp(2j * np.pi * np.outer(rows, sel.used) / n) / n
    return ConstraintMatrix(m=m)


def _redundancy_maps(m: np.ndarray, sel: SelectionMatrices) -> tuple[np.ndarray, np.ndarray, float]:
    """T = -M_r^{-1} M_d and T_p = -M_r^{-1} M_p, plus cond(M_r)."""
    m_r = m[:, sel.red_pos]
    m_d = m[:, sel.data_pos]
    m_p = m[:, sel.pilot_pos]
    cond = float(np.linalg.cond(m_r))
    if not np.isfinite(cond) or cond > _SINGULAR_COND:
        raise SingularRedundancyError(
            f"M_r condition number {cond:.3e} exceeds {_SINGULAR_COND:.0e}; "
            "choose a different redundant placement"
        )
    t = -np.linalg.solve(m_r, m_d)
    t_p = -np.linalg.solve(m_r, m_p)
    return t, t_p, cond


def build_systematic_gd(cfg: SystemConfig, sel: SelectionMatrices, m: ConstraintMatrix) -> GeneratorSet:
    """Diagonal-dominant data generator plus the matching pilot generator."""
    t, t_p, cond = _redundancy_maps(m.m, sel)
    g_d = np.zeros((cfg.n_used, cfg.n_data), dtype=complex)
    g_d[sel.data_pos, np.arange(cfg.n_data)] = 1.0
    g_d[sel.red_pos] = t
    g_p = np.zeros((cfg.n_used, cfg.n_pilot), dtype=complex)
    g_p[sel.pilot_pos, np.arange(cfg.n_pilot)] = 1.0
    g_p[sel.red_pos] = t_p
    return GeneratorSet(g_d=g_d, g_p=g_p, scaling_alpha=1.0, kind=SYSTEMATIC, red_cond=cond)


def build_gp(cfg: SystemConfig, sel: SelectionMatrices, m: ConstraintMatrix) -> np.ndarray:
    """Pilot generator alone (identical to the one in build_systematic_gd)."""
    _, t_p, _ = _redundancy_maps(m.m, sel)
    g_p = np.zeros((cfg.n_used, cfg.n_pilot), dtype=complex)
    g_p[sel.pilot_pos, np.arange(cfg.n_pilot)] = 1.0
    g_p[sel.red_pos] = t_p
    return g_p


def default_spreading_matrix(n_data: int) -> np.ndarray:
    """Unitary N_d-point DFT matrix."""
    k = np.arange(n_data)
    return np.exp(-2j * np.pi * np.outer(k, k) / n_data) / np.sqrt(n_data)


def build_spread_gd(cfg: SystemConfig, sel: SelectionMatrices, base: GeneratorSet,
                    u: np.ndarray | None = None) -> GeneratorSet:
    """Post-multiply the base data generator by a unitary spreading matrix.

    The range of g_d is unchanged, so the zero-word constraint is preserved
    exactly.
    """
    if u is None:
        u = default_spreading_matrix(cfg.n_data)
    err = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
    if err > 1e-9:
        raise ValueError(f"spreading matrix is not unitary: ||U^H U - I||_F = {err:.3e}")
    return replace(base, g_d=base.g_d @ u, kind=SPREAD)


def build_cpofdm_generators(cfg: SystemConfig, sel: SelectionMatrices) -> GeneratorSet:
    if cfg.variant != CP_OFDM:
        raise ValueError("CP-OFDM generators require the cp_ofdm variant")
    g_p = np.zeros((cfg.n_used, cfg.n_pilot), dtype=complex)
    g_p[sel.pilot_pos, np.arange(cfg.n_pilot)] = 1.0
    return GeneratorSet(g_d=sel.b_p.astype(complex), g_p=g_p, scaling_alpha=1.0, kind=CP_OFDM)


def redundancy_energy(cfg: SystemConfig, sel: SelectionMatrices, red_indices) -> float:
    """trace(T^H T) for an explicit redundant placement; inf if singular.

    Candidate data positions are all non-zero non-pilot carriers outside the
    placement, matching the search space of the optimizer below.
    """
    n, n_u = cfg.n_dft, cfg.n_guard
    rows = np.arange(n - n_u, n)
    red = set(int(k) for k in red_indices)
    pilots = set(cfg.pilot_indices)
    data = [int(k) for k in sel.used if int(k) not in red and int(k) not in pilots]
    m_r = np.exp(2j * np.pi * np.outer(rows, sorted(red)) / n) / n
    if np.linalg.cond(m_r) > _SINGULAR_COND:
        return float("inf")
    m_d = np.exp(2j * np.pi * np.outer(rows, data) / n) / n
    t = -np.linalg.solve(m_r, m_d)
    return float(np.sum(np.abs(t) ** 2))


def optimize_redundant_placement(cfg: SystemConfig, sel: SelectionMatrices) -> tuple[int, ...]:
    """Deterministic redundant-subcarrier placement.

    Starts from equidistant positions among the non-zero non-pilot carriers
    and runs a greedy single-swap descent on trace(T^H T), the mean
    redundancy energy per data symbol.  Ties break toward the lowest index,
    so repeated runs give identical placements.
    """
    if cfg.variant != UW_OFDM:
        raise ValueError("redundant placement only applies to UW-OFDM")
    n, n_u = cfg.n_dft, cfg.n_guard
    rows = np.arange(n - n_u, n)
    pilot_set = set(cfg.pilot_indices)
    candidates = np.array([int(k) for k in sel.used if int(k) not in pilot_set])
    m = np.exp(2j * np.pi * np.outer(rows, candidates) / n) / n
    n_cand = len(candidates)
    if cfg.n_red > n_cand:
        raise ValueError(f"cannot place {cfg.n_red} redundant carriers on {n_cand} candidates")

    def cost(chosen_mask: np.ndarray) -> float:
        m_r = m[:, chosen_mask]
        if m_r.shape[1] != cfg.n_red or np.linalg.cond(m_r) > _SINGULAR_COND:
            return float("inf")
        t = -np.linalg.solve(m_r, m[:, ~chosen_mask])
        return float(np.sum(np.abs(t) ** 2))

    mask = np.zeros(n_cand, dtype=bool)
    start = (np.floor((np.arange(cfg.n_red) + 0.5) * n_cand / cfg.n_red)).astype(int)
    mask[start] = True
    if cfg.n_red == n_cand:
        return tuple(int(k) for k in candidates)

    best = cost(mask)
    improved = True
    while improved:
        improved = False
        best_swap = None
        for i in np.flatnonzero(mask):
            for j in np.flatnonzero(~mask):
                mask[i], mask[j] = False, True
                c = cost(mask)
                mask[i], mask[j] = True, False
                if c < best - 1e-12:
                    best, best_swap = c, (i, j)
        if best_swap is not None:
            i, j = best_swap
            mask[i], mask[j] = False, True
            improved = True
    return tuple(int(k) for k in candidates[mask])


def scale_generators(gs: GeneratorSet, cfg_uw: SystemConfig, cfg_cp: SystemConfig) -> GeneratorSet:
    """Normalize every g_d column to squared norm alpha = N'_d / N_d.

    This equalizes the data-induced mean power per non-pilot subcarrier
    between UW-OFDM and CP-OFDM.  Column scaling keeps each column in the
    zero-word null space, so the constraint is untouched.  The Gram matrix is
    generally not alpha*I beyond the diagonal; the relative off-diagonal
    residual is recorded on the returned set.
    """
    if gs.kind == CP_OFDM:
        return replace(gs, scaling_alpha=1.0, gram_offdiag=0.0)
    alpha = cfg_cp.n_data / cfg_uw.n_data
    norms = np.linalg.norm(gs.g_d, axis=0)
    g_d = gs.g_d * (np.sqrt(alpha) / norms)[None, :]
    gram = g_d.conj().T @ g_d
    offdiag = gram - np.diag(np.diag(gram))
    residual = float(np.linalg.norm(offdiag) / np.linalg.norm(alpha * np.eye(gram.shape[0])))
    return replace(gs, g_d=g_d, scaling_alpha=float(alpha), gram_offdiag=residual)


def zero_word_residual(gs: GeneratorSet, cfg: SystemConfig, sel: SelectionMatrices,
                       n_trials: int = 100, seed: int = 0) -> float:
    """Max tail magnitude of F^{-1} B (G_d d + G_p p) over random (d, p)."""
    from .numerics import rng_from_key

    rng = rng_from_key(seed, 0xC0DE)
    worst = 0.0
    for _ in range(n_trials):
        d = (rng.standard_normal(cfg.n_data) + 1j * rng.standard_normal(cfg.n_data)) / np.sqrt(2)
        p = (rng.standard_normal(cfg.n_pilot) + 1j * rng.standard_normal(cfg.n_pilot)) / np.sqrt(2)
        spectrum = sel.b @ (gs.g_d @ d + gs.g_p @ p)
        tail = np.fft.ifft(spectrum)[cfg.n_dft - cfg.n_guard:]
        worst = max(worst, float(np.max(np.abs(tail))))
    return worst


def build_generator_set(cfg: SystemConfig, sel: SelectionMatrices, kind: str,
                        cfg_cp: SystemConfig | None = None) -> GeneratorSet:
    """Convenience constructor: build, spread if requested, scale."""
    if cfg.variant == CP_OFDM:
        return build_cpofdm_generators(cfg, sel)
    base = build_systematic_gd(cfg, sel, compute_constraint_matrix(cfg, sel))
    if kind == SPREAD:
        base = build_spread_gd(cfg, sel, base)
    elif kind != SYSTEMATIC:
        raise ValueError(f"unknown UW-OFDM generator kind {kind!r}")
    if cfg_cp is None:
        from .config import build_preset

        cfg_cp = build_preset(CP_OFDM)
    return scale_generators(base, cfg, cfg_cp)


# --- plain-text matrix files -------------------------------------------------
#
# Format: one or more matrix blocks; each block is a header line "rows cols"
# followed by `rows` lines of `cols` entries "re:im", 17 significant digits.


def _write_matrix(fh, m: np.ndarray) -> None:
    fh.write(f"{m.shape[0]} {m.shape[1]}\n")
    for row in m:
        fh.write(" ".join(f"{v.real:.17g}:{v.imag:.17g}" for v in row) + "\n")


def _read_matrix(lines, lineno: int) -> tuple[np.ndarray, int]:
    try:
        header = lines[lineno].split()
        rows, cols = int(header[0]), int(header[1])
    except (IndexError, ValueError) as exc:
        raise MatrixParseError(f"bad matrix header at line {lineno + 1}") from exc
    out = np.empty((rows, cols), dtype=complex)
    for r in range(rows):
        try:
            parts = lines[lineno + 1 + r].split()
        except IndexError as exc:
            raise MatrixParseError(f"matrix truncated at line {lineno + 1 + r + 1}") from exc
        if len(parts) != cols:
            raise MatrixParseError(
                f"line {lineno + 1 + r + 1}: expected {cols} entries, got {len(parts)}"
            )
        for c, token in enumerate(parts):
            try:
                re_s, im_s = token.split(":")
                out[r, c] = complex(float(re_s), float(im_s))
            except ValueError as exc:
                raise MatrixParseError(f"line {lineno + 1 + r + 1}: bad entry {token!r}") from exc
    return out, lineno + 1 + rows


def export_matrices(gs: GeneratorSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _write_matrix(fh, gs.g_d)
        _write_matrix(fh, gs.g_p)


def import_matrices(path, cfg: SystemConfig, sel: SelectionMatrices) -> GeneratorSet:
    """Read (g_d, g_p) and re-check the zero-word constraint for UW-OFDM."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    g_d, lineno = _read_matrix(lines, 0)
    g_p, lineno = _read_matrix(lines, lineno)
    if g_d.shape != (cfg.n_used, cfg.n_data) or g_p.shape != (cfg.n_used, cfg.n_pilot):
        raise MatrixParseError(
            f"matrix shapes {g_d.shape}/{g_p.shape} do not match the configuration"
        )
    alpha = float(np.mean(np.linalg.norm(g_d, axis=0) ** 2))
    gs = GeneratorSet(g_d=g_d, g_p=g_p, scaling_alpha=alpha, kind="imported")
    if cfg.variant == UW_OFDM:
        residual = zero_word_residual(gs, cfg, sel)
        if residual > 1e-8:
            raise ZeroWordViolation(
                f"imported matrices violate the zero-word constraint: tail residual {residual:.3e}"
            )
    return gs


def check_condition_report(cfg: SystemConfig, sel: SelectionMatrices) -> float:
    """cond(M_r) for the configured placement (diagnostic)."""
    m = compute_constraint_matrix(cfg, sel)
    cond = float(np.linalg.cond(m.m[:, sel.red_pos]))
    if cond > 1e6:
        warnings.warn(f"redundant placement is poorly conditioned: cond(M_r) = {cond:.3e}")
    return cond
