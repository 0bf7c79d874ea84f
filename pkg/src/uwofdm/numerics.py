"""Shared numerical kernels: DFT conventions, linear solves, quadrature, RNG.

DFT convention used throughout the package: the forward transform is
unnormalized, F[k,l] = exp(-2j*pi*k*l/N), and the inverse carries the 1/N
factor (inverse = (1/N) F^H).  numpy.fft follows the same convention, so the
fast path is a thin wrapper; the explicit matrices exist for tests and for
building constraint matrices.

RNG: all randomness in the package flows through PCG64 generators built from
``numpy.random.SeedSequence`` keys, see :func:`rng_from_key`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


def forward_dft_matrix(n: int) -> np.ndarray:
    """Return the N x N forward DFT matrix F with F[k,l] = exp(-2j pi k l / n)."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def inverse_dft_matrix(n: int) -> np.ndarray:
    """Return F^{-1} = (1/n) F^H."""
    return forward_dft_matrix(n).conj().T / n


@dataclass(frozen=True)
class DftPlan:
    """Fixed-size DFT plan (forward unnormalized, inverse 1/N)."""

    size: int
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", forward_dft_matrix(self.size))

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.size:
            raise ValueError(f"expected last axis {self.size}, got {x.shape[-1]}")
        return np.fft.fft(x, axis=-1)

    def inverse(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.size:
            raise ValueError(f"expected last axis {self.size}, got {x.shape[-1]}")
        return np.fft.ifft(x, axis=-1)

    def forward_matrix_path(self, x: np.ndarray) -> np.ndarray:
        """Matrix-multiplication reference path (oracle for the fast path)."""
        return x @ self.matrix.T

    def inverse_matrix_path(self, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix.conj() / self.size


def solve_hpd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b for Hermitian positive definite A via Cholesky.

    Raises ValueError if the factorization detects a non-HPD matrix.
    """
    try:
        c, low = scipy.linalg.cho_factor(a, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"matrix is not Hermitian positive definite: {exc}") from exc
    return scipy.linalg.cho_solve((c, low), b, check_finite=False)


def gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for int f(t) exp(-t^2) dt, exact to degree 2n-1."""
    if not 1 <= n <= 64:
        raise ValueError(f"node count {n} outside supported range [1, 64]")
    return np.polynomial.hermite.hermgauss(n)


def rng_from_key(*key: int) -> np.random.Generator:
    """PCG64 generator keyed by a tuple of integers.

    The entire key participates in seeding, so rng_from_key(seed, trial, 2)
    gives a stream independent of rng_from_key(seed, trial, 1) and
    reproducible regardless of process or worker count.  Negative components
    are folded through 64-bit two's complement.
    """
    entropy = [int(k) & 0xFFFF_FFFF_FFFF_FFFF for k in key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
