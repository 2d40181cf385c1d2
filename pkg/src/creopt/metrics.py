"""Sensing, rate, and harvested-energy figures of merit.

Infinite CRBs are legitimate outputs (rank-deficient covariances cannot
localize or invert); they are reported as math.inf and propagated as such,
never as overflow artifacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import TargetGeometry
from .errors import InvalidInputError
from .linalg import check_hermitian

# Fisher determinants below DET_TOL times their own term scale count as zero.
DET_TOL = 1e-14
# Covariance eigenvalues below SING_TOL times the largest count as zero.
SING_TOL = 1e-12


def as_covariance(s: np.ndarray, power: Optional[float] = None,
                  tol: float = 1e-9) -> np.ndarray:
    """Validate a transmit covariance: Hermitian, PSD, optional trace budget."""
    s = check_hermitian(s)
    w = np.linalg.eigvalsh(s)
    scale = max(1.0, float(w[-1]) if w.size else 0.0)
    if w.size and w[0] < -tol * scale:
        raise InvalidInputError("covariance is not positive semidefinite")
    if power is not None and float(np.real(np.trace(s))) > power * (1.0 + 1e-6):
        raise InvalidInputError("covariance exceeds the power budget")
    return s


def rate(s: np.ndarray, h: np.ndarray, sigma_sq: float) -> float:
    """Achievable rate log2 det(I + H S H^H / sigma^2) in bps/Hz."""
    if sigma_sq <= 0:
        raise InvalidInputError("noise power must be positive")
    s = as_covariance(s)
    g = h @ s @ h.conj().T
    w = np.linalg.eigvalsh(0.5 * (g + g.conj().T))
    w = np.maximum(w, 0.0)
    return float(np.sum(np.log2(1.0 + w / sigma_sq)))


def energy(s: np.ndarray, h: np.ndarray) -> float:
    """Received RF power tr(H S H^H) at the harvesting receiver."""
    s = as_covariance(s)
    val = float(np.real(np.trace(h @ s @ h.conj().T)))
    return max(val, 0.0)


def crb_point(s: np.ndarray, geom: TargetGeometry, sigma_s_sq: float,
              alpha: complex, l_snapshots: int) -> float:
    """Angle CRB for a point target under covariance `s`.

    Returns math.inf when the Fisher determinant vanishes relative to its
    own term scale (the angle is unidentifiable under that illumination).
    """
    if sigma_s_sq <= 0 or l_snapshots < 1 or alpha == 0:
        raise InvalidInputError("need positive noise, snapshots, and target gain")
    s = as_covariance(s)
    t_dd, t_da, t_aa = geom.fisher_traces(s)
    det = t_dd * t_aa - abs(t_da) ** 2
    scale = abs(t_dd * t_aa) + abs(t_da) ** 2
    if t_aa <= 0 or det <= DET_TOL * max(scale, 1e-300):
        return math.inf
    return sigma_s_sq * t_aa / (2.0 * abs(alpha) ** 2 * l_snapshots * det)


def crb_extended(s: np.ndarray, sigma_s_sq: float, n_s: int, m: int,
                 l_snapshots: int) -> float:
    """Response-matrix CRB for an extended target: sigma^2 N_S tr(S^-1)/L.

    Requires N_S >= M for identifiability; rank-deficient covariances give
    math.inf.
    """
    if sigma_s_sq <= 0 or l_snapshots < 1:
        raise InvalidInputError("need positive noise and snapshot count")
    if n_s < m:
        raise InvalidInputError("extended-target CRB requires N_S >= M")
    s = as_covariance(s)
    if s.shape[0] != m:
        raise InvalidInputError(f"covariance must be {m}x{m}")
    w = np.linalg.eigvalsh(s)
    if w.size == 0 or w[-1] <= 0 or w[0] <= SING_TOL * w[-1]:
        return math.inf
    return sigma_s_sq * n_s * float(np.sum(1.0 / w)) / l_snapshots


@dataclass
class CREPoint:
    """One operating point on the CRB-rate-energy surface."""

    crb: float
    rate_bpshz: float
    energy_w: float
    energy_dc_w: float = 0.0
    status: str = "ok"
    iterations: int = 0
    duality_gap: Optional[float] = None
    meta: dict = field(default_factory=dict)


def evaluate(s: np.ndarray, model, **kw) -> CREPoint:
    """Evaluate all three metrics of a covariance against a SystemModel."""
    cfg = model.config
    if cfg.case == "point":
        crb = crb_point(s, model.target, cfg.sigma_s_sq, cfg.alpha, cfg.l_snapshots)
    else:
        crb = crb_extended(s, cfg.sigma_s_sq, cfg.n_s, cfg.m, cfg.l_snapshots)
    r = rate(s, model.h_id, cfg.sigma_id_sq)
    e = energy(s, model.h_eh)
    return CREPoint(crb=crb, rate_bpshz=r, energy_w=e, energy_dc_w=cfg.zeta * e, **kw)
