"""Dense Hermitian linear algebra helpers used by every solver module.

All routines operate on small matrices (transmit arrays of at most a few
dozen antennas), so everything is plain double-precision LAPACK via numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

# Relative tolerance for accepting a matrix as Hermitian.
HERM_TOL = 1e-12
# Singular values below RANK_TOL * smax * max(m, n) count as zero.
RANK_TOL = 1e-10


def check_hermitian(a: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    """Validate that `a` is square and Hermitian within `tol` (relative).

    Returns the exactly Hermitian symmetrization (a + a^H)/2 so downstream
    eigensolvers never see the asymmetric rounding residue.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > tol * scale:
        raise InvalidInputError("matrix is not Hermitian within tolerance")
    return 0.5 * (a + a.conj().T)


@dataclass
class EvdResult:
    """Eigendecomposition A = U diag(w) U^H with eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T


@dataclass
class SvdResult:
    """Compact-free SVD A = U diag(s) V^H with singular values sorted descending."""

    u: np.ndarray
    singular_values: np.ndarray
    vh: np.ndarray

    @property
    def rank(self) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] == 0.0:
            return 0
        m = max(self.u.shape[0], self.vh.shape[1])
        return int(np.count_nonzero(s > RANK_TOL * s[0] * m))


def hermitian_evd(a: np.ndarray) -> EvdResult:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    a = check_hermitian(a)
    w, u = np.linalg.eigh(a)
    return EvdResult(eigenvalues=w[::-1].copy(), eigenvectors=u[:, ::-1].copy())


def svd(a: np.ndarray) -> SvdResult:
    """Full SVD of a (possibly rectangular) complex matrix."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {a.shape}")
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    return SvdResult(u=u, singular_values=s, vh=vh)


def is_psd(a: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff the Hermitian matrix `a` has lambda_min >= -tol * max(1, ||a||2)."""
    a = check_hermitian(a)
    w = np.linalg.eigvalsh(a)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 0.0)
    return bool(w.size == 0 or w[0] >= -tol * scale)


def water_fill(gains: np.ndarray, noise: float, budget: float) -> np.ndarray:
    """Exact water-filling over parallel channels.

    Maximizes sum log2(1 + g_k p_k / noise) subject to sum p_k = budget,
    p_k >= 0. `gains` are the channel power gains g_k (zeros allowed and
    receive no power). Returns the per-channel allocation.
    """
    gains = np.asarray(gains, dtype=float)
    if gains.ndim != 1:
        raise InvalidInputError("gains must be a 1-D array")
    if np.any(gains < 0):
        raise InvalidInputError("gains must be nonnegative")
    if not np.any(gains > 0):
        raise InvalidInputError("water_fill needs at least one positive gain")
    if not (noise > 0):
        raise InvalidInputError("noise power must be positive")
    if not (budget > 0):
        raise InvalidInputError("power budget must be positive")

    active = gains > 0
    floors = np.full(gains.shape, np.inf)
    floors[active] = noise / gains[active]
    order = np.argsort(floors)
    sorted_floors = floors[order]
    # Largest k with water level mu_k = (budget + sum of k lowest floors)/k
    # above the k-th floor; the classic cumulative scan is exact.
    k_active = 1
    csum = 0.0
    for k in range(gains.size):
        if not np.isfinite(sorted_floors[k]):
            break
        csum += sorted_floors[k]
        mu = (budget + csum) / (k + 1)
        if mu > sorted_floors[k]:
            k_active = k + 1
        else:
            break
    mu = (budget + float(np.sum(sorted_floors[:k_active]))) / k_active
    p = np.zeros_like(gains)
    idx = order[:k_active]
    p[idx] = mu - floors[idx]
    # Guard against a floor tie placing a negative crumb on the last channel.
    p = np.maximum(p, 0.0)
    s = p.sum()
    if s > 0:
        p *= budget / s
    return p
