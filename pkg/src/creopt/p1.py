"""Point-target solver: rate maximization under transmit power, harvested
energy, and angle-estimation accuracy constraints.

The accuracy constraint is a bound on the estimation error variance of the
target angle, rewritten as a 2x2 linear matrix inequality so the problem is
convex in the transmit covariance.  The solver works on the Lagrangian dual:
an analytic inner maximization over the covariance for fixed multipliers,
and an ellipsoid search over the six real multiplier coordinates, followed
by a complementarity polish and (when the dual curvature matrix loses rank)
a feasibility completion in its null space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import SystemModel, TargetGeometry
from .engine import (LinearTerm, LogDetRateTerm, OracleResponse, PSDIneq,
                     ScalarIneq, VarLayout, barrier_maximize, ellipsoid_solve,
                     linear_matrix_coef, phase_one)
from .errors import (InfeasibleError, InternalInconsistencyError,
                     InvalidInputError, UnboundedDualError)
from .linalg import check_hermitian, hermitian_evd, water_fill
from .metrics import CREPoint, energy, evaluate, rate

# Eigenvalue classification for the dual curvature matrix D.
PSD_TOL = 1e-11          # reject D as indefinite below -PSD_TOL * scale
NULL_TOL = 1e-12         # eigenvalues below NULL_TOL * max are null space
COMPLETION_TOL = 1e-7    # rank decision at the accepted dual optimum
RANGE_LEAK_TOL = 1e-8
FEAS_TOL = 1e-9          # normalized primal feasibility tolerance


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class P1Thresholds:
    """Constraint levels: harvested energy floor (W), error-variance ceiling
    (rad^2, +inf disables), and an optional power override (W)."""

    gamma_eh_w: float = 0.0
    gamma_s: float = math.inf
    power_w: Optional[float] = None

    def __post_init__(self):
        if self.gamma_eh_w < 0:
            raise InvalidInputError("energy threshold must be >= 0")
        if not self.gamma_s > 0:
            raise InvalidInputError("accuracy threshold must be positive")
        if self.power_w is not None and not self.power_w > 0:
            raise InvalidInputError("power budget must be positive")


@dataclass
class P1Dual:
    """Multipliers: lam (energy), nu (power), and the 2x2 PSD block Z
    attached to the accuracy LMI, stored as (z1, z2, z3)."""

    lam: float = 0.0
    nu: float = 0.0
    z1: float = 0.0
    z2: complex = 0.0
    z3: float = 0.0

    @property
    def z_mat(self) -> np.ndarray:
        return np.array([[self.z1, self.z2], [np.conj(self.z2), self.z3]])

    def as_vector(self) -> np.ndarray:
        return np.array([self.lam, self.nu, self.z1,
                         self.z2.real, self.z2.imag, self.z3])

    @classmethod
    def from_vector(cls, v) -> "P1Dual":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]),
                   complex(v[3], v[4]), float(v[5]))


@dataclass
class InnerSolution:
    """Inner Lagrangian maximizer restricted to the range of D."""

    s11: np.ndarray          # covariance block in the whitened range basis
    q_bar: np.ndarray        # orthonormal basis of range(D)
    q_null: np.ndarray       # orthonormal basis of null(D)
    sigma_bar: np.ndarray    # positive eigenvalues of D (descending)
    p_tilde: np.ndarray      # per-mode powers from the water level
    s_full: np.ndarray       # assembled M x M covariance

    @property
    def d_rank(self) -> int:
        return int(self.sigma_bar.size)


@dataclass
class P1Solution:
    covariance: np.ndarray
    duals: Optional[P1Dual]
    metrics: CREPoint
    structure: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Closed-form covariance templates
# ---------------------------------------------------------------------------

def waterfilling_covariance(h: np.ndarray, sigma_sq: float, power: float) -> np.ndarray:
    """Rate-optimal covariance under the power budget alone."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    u, s, vh = np.linalg.svd(h, full_matrices=False)
    gains = s ** 2
    m = h.shape[1]
    if not np.any(gains > 0):
        return np.zeros((m, m), dtype=complex)
    powers = water_fill(gains, sigma_sq, power)
    v = vh.conj().T
    out = (v * powers) @ v.conj().T
    return 0.5 * (out + out.conj().T)

def energy_beam_covariance(h: np.ndarray, power: float) -> np.ndarray:
    """All power on the top right-singular direction of the harvesting channel."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    _, _, vh = np.linalg.svd(h, full_matrices=False)
    v1 = vh[0].conj()
    return power * np.outer(v1, v1.conj())

def sensing_beam_covariance(target: TargetGeometry, power: float) -> np.ndarray:
    """All power on the conjugate transmit steering vector."""
    p = target.p_vec
    return (power / p.size) * np.outer(p, p.conj())


# ---------------------------------------------------------------------------
# Dual building blocks (original units)
# ---------------------------------------------------------------------------

def build_D(dual: P1Dual, model: SystemModel) -> np.ndarray:
    """Curvature matrix of the inner Lagrangian maximization.

    D = nu*I - lam*H_EH^H H_EH - M_Z, where M_Z collects the accuracy-LMI
    multipliers through the transmit-side steering quadratic forms.
    """
    geom = model.target
    p, q = geom.p_vec, geom.q_vec
    c_r, c_dr = geom.c_r, geom.c_dr
    m_z = (dual.z1 * (c_r * np.outer(q, q.conj()) + c_dr * np.outer(p, p.conj()))
           + c_r * (dual.z2 * np.outer(q, p.conj())
                    + np.conj(dual.z2) * np.outer(p, q.conj()))
           + dual.z3 * c_r * np.outer(p, p.conj()))
    d = (dual.nu * np.eye(model.m)
         - dual.lam * model.h_eh.conj().T @ model.h_eh - m_z)
    return 0.5 * (d + d.conj().T)


def _inner_core(eigs_desc, vecs_desc, h_id, sigma_id_sq, rank_tol) -> InnerSolution:
    """Water-filling maximizer of rate(S) - tr(D S) given the EVD of D."""
    scale = max(float(eigs_desc[0]), 0.0) if eigs_desc.size else 0.0
    if eigs_desc.size and float(eigs_desc[-1]) < -PSD_TOL * max(1.0, scale):
        raise UnboundedDualError("curvature matrix is indefinite")
    pos = eigs_desc > rank_tol * max(scale, np.finfo(float).tiny)
    q_bar = vecs_desc[:, pos]
    q_null = vecs_desc[:, ~pos]
    sig = np.asarray(eigs_desc[pos], dtype=float)

    h_norm = np.linalg.norm(h_id)
    if q_null.shape[1] and h_norm > 0:
        leak = np.linalg.norm(h_id @ q_null)
        if leak > RANGE_LEAK_TOL * h_norm:
            raise UnboundedDualError("channel leaks into the null space of D")

    m = h_id.shape[1]
    r = q_bar.shape[1]
    if r == 0:
        z = np.zeros((m, m), dtype=complex)
        return InnerSolution(np.zeros((0, 0), dtype=complex), q_bar, q_null,
                             sig, np.zeros(0), z)

    whiten = q_bar / np.sqrt(sig)          # columns scaled by sigma^(-1/2)
    g = h_id @ whiten
    _, sv, vh = np.linalg.svd(g, full_matrices=False)
    p_tilde = np.zeros(sv.size)
    nz = sv > 0
    p_tilde[nz] = np.maximum(1.0 / math.log(2) - sigma_id_sq / sv[nz] ** 2, 0.0)
    v = vh.conj().T
    w = (v * p_tilde) @ v.conj().T          # whitened-space covariance
    s11 = (np.diag(1.0 / np.sqrt(sig)) @ w @ np.diag(1.0 / np.sqrt(sig)))
    s11 = 0.5 * (s11 + s11.conj().T)
    s_full = q_bar @ s11 @ q_bar.conj().T
    s_full = 0.5 * (s_full + s_full.conj().T)
    return InnerSolution(s11, q_bar, q_null, sig, p_tilde, s_full)


def inner_solution(d_mat: np.ndarray, h_id: np.ndarray, sigma_id_sq: float,
                   rank_tol: float = NULL_TOL) -> InnerSolution:
    """Maximize rate(S) - tr(D S) over S >= 0 (no power cap).

    Requires D PSD with the channel row space inside range(D); otherwise the
    maximization is unbounded and UnboundedDualError is raised.
    """
    d_mat = check_hermitian(np.asarray(d_mat, dtype=complex), tol=1e-10)
    h_id = np.atleast_2d(np.asarray(h_id, dtype=complex))
    evd = hermitian_evd(d_mat)
    return _inner_core(evd.eigenvalues, evd.eigenvectors, h_id,
                       float(sigma_id_sq), rank_tol)


def dual_oracle(dual: P1Dual, s_star: Optional[np.ndarray],
                thresholds: P1Thresholds, model: SystemModel) -> OracleResponse:
    """Subgradient oracle for the dual function over the six multiplier
    coordinates (lam, nu, z1, Re z2, Im z2, z3), in original units.

    Emits a feasibility cut for any violated dual-domain condition (sign
    constraints, Z >= 0, D >= 0, channel range inside range(D)); otherwise
    an objective response at the inner maximizer.
    """
    if dual.lam < 0:
        g = np.zeros(6)
        g[0] = -1.0
        return OracleResponse("feasibility", g, -dual.lam)
    if dual.nu < 0:
        g = np.zeros(6)
        g[1] = -1.0
        return OracleResponse("feasibility", g, -dual.nu)

    zw, zv = np.linalg.eigh(dual.z_mat)
    if zw[0] < 0:
        u = zv[:, 0]
        g = np.zeros(6)
        g[2] = -abs(u[0]) ** 2
        g[3] = -2.0 * (np.conj(u[0]) * u[1]).real
        g[4] = 2.0 * (np.conj(u[0]) * u[1]).imag
        g[5] = -abs(u[1]) ** 2
        return OracleResponse("feasibility", g, -float(zw[0]))

    geom = model.target
    d = build_D(dual, model)
    eigs, vecs = np.linalg.eigh(d)
    scale = max(1.0, float(eigs[-1]))
    if eigs[0] < -PSD_TOL * scale:
        q1 = vecs[:, 0]
        return OracleResponse("feasibility", _d_cut(q1, model),
                              -float(eigs[0]))
    null = eigs < NULL_TOL * max(float(eigs[-1]), np.finfo(float).tiny)
    h_norm = np.linalg.norm(model.h_id)
    if np.any(null) and h_norm > 0:
        qn = vecs[:, null]
        leak = np.linalg.norm(model.h_id @ qn, axis=0)
        worst = int(np.argmax(leak))
        if leak[worst] > RANGE_LEAK_TOL * h_norm:
            q1 = qn[:, worst]
            viol = max(-float(np.real(np.vdot(q1, d @ q1))), 0.0)
            return OracleResponse("feasibility", _d_cut(q1, model), viol)

    if s_star is None:
        s_star = _inner_core(eigs[::-1], vecs[:, ::-1], model.h_id,
                             model.config.sigma_id_sq, NULL_TOL).s_full
    power = thresholds.power_w if thresholds.power_w is not None else model.power
    t_dd, t_da, t_aa = geom.fisher_traces(s_star)
    inv_gs1 = 0.0
    if math.isfinite(thresholds.gamma_s):
        inv_gs1 = 1.0 / model.gamma_s1(thresholds.gamma_s)
    g = np.array([
        energy(s_star, model.h_eh) - thresholds.gamma_eh_w,
        power - float(np.real(np.trace(s_star))),
        t_dd - inv_gs1,
        2.0 * t_da.real,
        -2.0 * t_da.imag,
        t_aa,
    ])
    val = (rate(s_star, model.h_id, model.config.sigma_id_sq)
           - float(np.real(np.trace(d @ s_star)))
           + dual.nu * power - dual.lam * thresholds.gamma_eh_w
           - dual.z1 * inv_gs1)
    return OracleResponse("objective", g, val)


def _d_cut(q1: np.ndarray, model: SystemModel) -> np.ndarray:
    """Gradient of -q1^H D(dual) q1 over the six dual coordinates."""
    geom = model.target
    a = np.vdot(geom.p_vec, q1)
    b = np.vdot(geom.q_vec, q1)
    c_r, c_dr = geom.c_r, geom.c_dr
    return np.array([
        float(np.linalg.norm(model.h_eh @ q1) ** 2),
        -1.0,
        c_r * abs(b) ** 2 + c_dr * abs(a) ** 2,
        2.0 * (np.conj(b) * a).real * c_r,
        -2.0 * (np.conj(b) * a).imag * c_r,
        c_r * abs(a) ** 2,
    ])


# ---------------------------------------------------------------------------
# Normalized workspace for the ellipsoid search
# ---------------------------------------------------------------------------

class _Workspace:
    """Scale-free reformulation: trace budget 1, unit noise, energy in units
    of its maximum, LMI in units of its largest reachable entry.  Keeps all
    dual coordinates O(1) across physical parameter ranges."""

    def __init__(self, model: SystemModel, th: P1Thresholds):
        self.model = model
        power = th.power_w if th.power_w is not None else model.power
        self.power = float(power)
        geom = model.target
        self.m = model.m
        self.p_v = geom.p_vec
        self.q_v = geom.q_vec
        self.c_r = geom.c_r
        self.c_dr = geom.c_dr
        self.c_a2 = float(self.c_r * np.vdot(self.q_v, self.q_v).real
                          + self.c_dr * self.m)

        sigma_id = math.sqrt(model.config.sigma_id_sq)
        self.g_c = model.h_id * (math.sqrt(self.power) / sigma_id)

        self.gamma_eh = max(float(th.gamma_eh_w), 0.0)
        self.use_energy = self.gamma_eh > 0
        self.e_max = None
        self.g_e = None
        self.gamma_e = 0.0
        if self.use_energy:
            smax = float(np.linalg.svd(model.h_eh, compute_uv=False)[0])
            if smax <= 0:
                raise InfeasibleError(
                    "positive energy demand with a zero harvesting channel",
                    certificate={"e_max": 0.0, "gamma_eh_w": self.gamma_eh})
            self.e_max = self.power * smax ** 2
            self.g_e = model.h_eh * math.sqrt(self.power / self.e_max)
            self.gamma_e = self.gamma_eh / self.e_max

        self.use_crb = math.isfinite(th.gamma_s)
        self.s_t = 1.0
        self.gamma_s_n = 0.0
        if self.use_crb:
            if self.c_a2 <= 0:
                raise InfeasibleError(
                    "target response derivative vanishes; no finite accuracy "
                    "is reachable", certificate={"gamma_s": th.gamma_s})
            gs1 = model.gamma_s1(th.gamma_s)
            self.s_t = self.power * self.c_a2
            self.gamma_s_n = 1.0 / (gs1 * self.s_t)
            p, q = self.p_v, self.q_v
            self.b1 = (self.c_r * np.outer(q, q.conj())
                       + self.c_dr * np.outer(p, p.conj())) / self.c_a2
            self.b2 = (self.c_r / self.c_a2) * np.outer(q, p.conj())
            self.b3 = (self.c_r / self.c_a2) * np.outer(p, p.conj())

        idx = [1]
        if self.use_energy:
            idx = [0, 1]
        if self.use_crb:
            idx = idx + [2, 3, 4, 5]
        self.active_idx = np.array(idx, dtype=int)
        scale = np.ones(6)
        if self.use_energy:
            scale[0] = self.e_max
        scale[1] = self.power
        scale[2:] = self.s_t
        self.coord_scale = scale

    # -- normalized quantities ------------------------------------------------

    def d_norm(self, t6: np.ndarray) -> np.ndarray:
        d = t6[1] * np.eye(self.m, dtype=complex)
        if self.use_energy and t6[0] != 0.0:
            d = d - t6[0] * self.g_e.conj().T @ self.g_e
        if self.use_crb:
            z2 = complex(t6[3], t6[4])
            d = d - (t6[2] * self.b1 + z2 * self.b2
                     + np.conj(z2) * self.b2.conj().T + t6[5] * self.b3)
        return 0.5 * (d + d.conj().T)

    def rate_n(self, s: np.ndarray) -> float:
        return rate(s, self.g_c, 1.0)

    def energy_n(self, s: np.ndarray) -> float:
        return energy(s, self.g_e)

    def t_mat(self, s: np.ndarray) -> np.ndarray:
        t11 = float(np.real(np.trace(self.b1 @ s))) - self.gamma_s_n
        t21 = (self.c_r / self.c_a2) * np.vdot(self.p_v, s @ self.q_v)
        t22 = float(np.real(np.trace(self.b3 @ s)))
        return np.array([[t11, np.conj(t21)], [t21, t22]])

    def inner(self, t6: np.ndarray, rank_tol: float = NULL_TOL) -> InnerSolution:
        d = self.d_norm(t6)
        eigs, vecs = np.linalg.eigh(d)
        return _inner_core(eigs[::-1], vecs[:, ::-1], self.g_c, 1.0, rank_tol)

    def dual_value(self, t6: np.ndarray, inner: InnerSolution) -> float:
        s = inner.s_full
        val = (self.rate_n(s)
               - float(np.real(np.trace(self.d_norm(t6) @ s)))
               + t6[1])
        if self.use_energy:
            val -= t6[0] * self.gamma_e
        if self.use_crb:
            val -= t6[2] * self.gamma_s_n
        return val

    def objective_subgrad(self, s: np.ndarray) -> np.ndarray:
        g = np.zeros(6)
        if self.use_energy:
            g[0] = self.energy_n(s) - self.gamma_e
        g[1] = 1.0 - float(np.real(np.trace(s)))
        if self.use_crb:
            t = self.t_mat(s)
            g[2] = t[0, 0].real
            g[3] = 2.0 * t[1, 0].real
            g[4] = -2.0 * t[1, 0].imag
            g[5] = t[1, 1].real
        return g

    def d_cut(self, q1: np.ndarray) -> np.ndarray:
        g = np.zeros(6)
        if self.use_energy:
            g[0] = float(np.linalg.norm(self.g_e @ q1) ** 2)
        g[1] = -1.0
        if self.use_crb:
            a = np.vdot(self.p_v, q1)
            b = np.vdot(self.q_v, q1)
            g[2] = (self.c_r * abs(b) ** 2 + self.c_dr * abs(a) ** 2) / self.c_a2
            g[3] = 2.0 * (np.conj(b) * a).real * self.c_r / self.c_a2
            g[4] = -2.0 * (np.conj(b) * a).imag * self.c_r / self.c_a2
            g[5] = self.c_r * abs(a) ** 2 / self.c_a2
        return g

    # -- primal constraint set (normalized) ------------------------------------

    def primal_constraints(self, layout: VarLayout):
        cons = [PSDIneq.from_herm_block(layout, 0, name="covariance-psd")]
        tr_coef = linear_matrix_coef(layout, 0, np.eye(self.m))
        cons.append(ScalarIneq(LinearTerm(-tr_coef, 1.0), name="power"))
        if self.use_energy:
            e_coef = linear_matrix_coef(layout, 0, self.g_e.conj().T @ self.g_e)
            cons.append(ScalarIneq(LinearTerm(e_coef, -self.gamma_e), name="energy"))
        if self.use_crb:
            cons.append(self.lmi_constraint(layout, 0))
        return cons

    def lmi_constraint(self, layout: VarLayout, block: int,
                       t_base: Optional[np.ndarray] = None,
                       basis_cols: Optional[np.ndarray] = None) -> PSDIneq:
        """Accuracy LMI as an affine 2x2 PSD constraint on a herm block.

        basis_cols restricts the block to act through W S W^H (completion);
        t_base shifts the constant term by an already-fixed covariance part.
        """
        kind, dd = layout.blocks[block]
        from .engine import HermMap
        hm = HermMap(dd)
        sl = layout.slices[block]
        t0 = np.array([[-self.gamma_s_n, 0.0], [0.0, 0.0]], dtype=complex)
        if t_base is not None:
            t0 = t0 + t_base
        w = basis_cols
        coeffs = []
        for k in range(hm.dim):
            bk = hm.basis[k]
            eff = bk if w is None else w @ bk @ w.conj().T
            t11 = float(np.real(np.trace(self.b1 @ eff)))
            t21 = (self.c_r / self.c_a2) * np.vdot(self.p_v, eff @ self.q_v)
            t22 = float(np.real(np.trace(self.b3 @ eff)))
            coeffs.append((sl.start + k,
                           np.array([[t11, np.conj(t21)], [t21, t22]])))
        return PSDIneq(t0, coeffs, layout.dim, name="accuracy-lmi")

    def violations(self, s: np.ndarray) -> float:
        worst = float(np.real(np.trace(s))) - 1.0
        if self.use_energy:
            worst = max(worst, self.gamma_e - self.energy_n(s))
        if self.use_crb:
            worst = max(worst, -float(np.linalg.eigvalsh(self.t_mat(s))[0]))
        ev = np.linalg.eigvalsh(0.5 * (s + s.conj().T))
        worst = max(worst, -float(ev[0]))
        return worst


# ---------------------------------------------------------------------------
# Completion and public wrapper
# ---------------------------------------------------------------------------

def _completion_feasibility(ws: _Workspace, s1: np.ndarray, q_null: np.ndarray):
    """Search a PSD block in null(D) making the assembled covariance feasible.

    Returns (s00, assembled) with the best achievable common slack, or None
    when even the maximal slack stays below -FEAS_TOL.
    """
    n0 = q_null.shape[1]
    layout = VarLayout([("herm", n0)])
    cons = [PSDIneq.from_herm_block(layout, 0, name="s00-psd")]
    tr_fixed = float(np.real(np.trace(s1)))
    tr_coef = linear_matrix_coef(layout, 0, np.eye(n0))
    cons.append(ScalarIneq(LinearTerm(-tr_coef, 1.0 - tr_fixed), name="power"))
    if ws.use_energy:
        ge_n = ws.g_e @ q_null
        e_fixed = ws.energy_n(s1)
        e_coef = linear_matrix_coef(layout, 0, ge_n.conj().T @ ge_n)
        cons.append(ScalarIneq(LinearTerm(e_coef, e_fixed - ws.gamma_e),
                               name="energy"))
    if ws.use_crb:
        t_base = ws.t_mat(s1)
        t_base[0, 0] += ws.gamma_s_n        # t_mat already subtracted it
        cons.append(ws.lmi_constraint(layout, 0, t_base=t_base,
                                      basis_cols=q_null))
    x0 = layout.pack(1e-3 * max(1.0 - tr_fixed, 1e-6) / n0 * np.eye(n0))
    try:
        x, slack = phase_one(cons, x0, s_cap=1.0)
    except Exception:
        return None
    if slack < -FEAS_TOL:
        return None
    from .engine import HermMap
    s00 = HermMap(n0).to_mat(x)
    ev, evec = np.linalg.eigh(0.5 * (s00 + s00.conj().T))
    s00 = (evec * np.maximum(ev, 0.0)) @ evec.conj().T
    assembled = s1 + q_null @ s00 @ q_null.conj().T
    return s00, 0.5 * (assembled + assembled.conj().T)


def complete_solution(inner: InnerSolution, thresholds: P1Thresholds,
                      model: SystemModel):
    """Null-space completion of an inner solution at the dual optimum.

    Returns (c_block, s00) in original units with the cross block fixed at
    zero; the pair makes the assembled covariance feasible.  With D full
    rank there is nothing to complete and zero-shaped blocks come back.
    """
    r = inner.d_rank
    n0 = inner.q_null.shape[1]
    if n0 == 0:
        return (np.zeros((r, 0), dtype=complex), np.zeros((0, 0), dtype=complex))
    ws = _Workspace(model, thresholds)
    out = _completion_feasibility(ws, inner.s_full / ws.power, inner.q_null)
    if out is None:
        raise InternalInconsistencyError(
            "completion feasibility program failed; dual optimum and primal "
            "constraints disagree beyond tolerance")
    s00, _ = out
    return (np.zeros((r, n0), dtype=complex), ws.power * s00)


# ---------------------------------------------------------------------------
# Complementarity refinement
# ---------------------------------------------------------------------------

def _refine_duals(ws: _Workspace, t6: np.ndarray):
    """Newton polish of the active-set complementarity system.

    Solves for multipliers making the inner maximizer exactly satisfy the
    active constraints (power always; energy when lam is on; the accuracy
    LMI through Z of the rank seen at the ellipsoid optimum).  Returns
    (t6_refined, inner, dual_value) or None when the polish fails.
    """
    lam_on = ws.use_energy and t6[0] > 1e-7
    z_rank = 0
    u_seed = None
    if ws.use_crb:
        z = np.array([[t6[2], complex(t6[3], t6[4])],
                      [complex(t6[3], -t6[4]), t6[5]]])
        zw, zv = np.linalg.eigh(z)
        if zw[1] > 1e-7:
            z_rank = 2 if zw[0] > 1e-5 * zw[1] else 1
            u_seed = zv[:, 1]

    def pack_params():
        params = []
        if lam_on:
            params.append(t6[0])
        params.append(t6[1])
        if z_rank == 1:
            w = max(float(np.linalg.eigvalsh(np.array(
                [[t6[2], complex(t6[3], t6[4])],
                 [complex(t6[3], -t6[4]), t6[5]]]))[1]), 1e-12)
            u = u_seed
            phi = math.atan2(abs(u[1]), abs(u[0]))
            psi = math.atan2(u[1].imag, u[1].real) - math.atan2(u[0].imag, u[0].real)
            params += [w, phi, psi]
        elif z_rank == 2:
            params += [t6[2], t6[3], t6[4], t6[5]]
        return np.array(params)

    def theta_of(params):
        out = np.zeros(6)
        k = 0
        if lam_on:
            out[0] = params[k]
            k += 1
        out[1] = params[k]
        k += 1
        if z_rank == 1:
            w, phi, psi = params[k], params[k + 1], params[k + 2]
            u = np.array([math.cos(phi), math.sin(phi) * np.exp(1j * psi)])
            zm = w * np.outer(u, u.conj())
            out[2] = zm[0, 0].real
            out[3] = zm[0, 1].real
            out[4] = zm[0, 1].imag
            out[5] = zm[1, 1].real
        elif z_rank == 2:
            out[2:] = params[k:k + 4]
        return out

    def residual(params):
        th6 = theta_of(params)
        try:
            sol = ws.inner(th6)
        except UnboundedDualError:
            return None
        s = sol.s_full
        r = []
        if lam_on:
            r.append(ws.energy_n(s) - ws.gamma_e)
        r.append(1.0 - float(np.real(np.trace(s))))
        if z_rank == 1:
            w, phi, psi = params[-3], params[-2], params[-1]
            u = np.array([math.cos(phi), math.sin(phi) * np.exp(1j * psi)])
            up = np.array([-math.sin(phi) * np.exp(-1j * psi), math.cos(phi)])
            t = ws.t_mat(s)
            r.append(float(np.real(np.vdot(u, t @ u))))
            cross = np.vdot(up, t @ u)
            r += [cross.real, cross.imag]
        elif z_rank == 2:
            t = ws.t_mat(s)
            r += [t[0, 0].real, t[1, 1].real, t[1, 0].real, t[1, 0].imag]
        return np.array(r)

    params = pack_params()
    res = residual(params)
    if res is None:
        return None
    norm = np.linalg.norm(res)
    for _ in range(40):
        if norm < 1e-13:
            break
        n = params.size
        jac = np.zeros((res.size, n))
        for k in range(n):
            step = 1e-7 * max(1.0, abs(params[k]))
            ek = np.zeros(n)
            ek[k] = step
            rp = residual(params + ek)
            rm = residual(params - ek)
            if rp is None or rm is None:
                return None
            jac[:, k] = (rp - rm) / (2 * step)
        try:
            delta = np.linalg.lstsq(jac, -res, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        improved = False
        while t > 1e-6:
            cand = params + t * delta
            rc = residual(cand)
            if rc is not None and np.linalg.norm(rc) < norm:
                params, res, norm = cand, rc, np.linalg.norm(rc)
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    if norm > 1e-9:
        return None

    t6_ref = theta_of(params)
    if lam_on and t6_ref[0] < 0:
        return None
    if t6_ref[1] < 0:
        return None
    if ws.use_crb:
        z = np.array([[t6_ref[2], complex(t6_ref[3], t6_ref[4])],
                      [complex(t6_ref[3], -t6_ref[4]), t6_ref[5]]])
        if float(np.linalg.eigvalsh(z)[0]) < -1e-10 * max(1.0, abs(z).max()):
            return None
    try:
        sol = ws.inner(t6_ref)
    except UnboundedDualError:
        return None
    return t6_ref, sol, ws.dual_value(t6_ref, sol)


# ---------------------------------------------------------------------------
# Main solver
# ---------------------------------------------------------------------------

def solve_p1(model: SystemModel, thresholds: P1Thresholds, *,
             tol: float = 1e-9, max_iter: int = 25000) -> P1Solution:
    """Solve the point-target constrained rate maximization.

    Strategy: handle forced-vertex and slack-threshold cases in closed form;
    otherwise probe feasibility, run the ellipsoid method on the normalized
    dual, polish the multipliers on the active complementarity system, and
    restore exact primal feasibility.  The reported duality gap is the best
    dual value minus the rate of the returned (feasible) covariance.
    """
    if model.case != "point":
        raise InvalidInputError("point-target solver needs a point-case model")
    power = thresholds.power_w if thresholds.power_w is not None else model.power
    geom = model.target
    cfg = model.config

    s_id = waterfilling_covariance(model.h_id, cfg.sigma_id_sq, power)
    point_id = evaluate(s_id, model)
    use_crb = math.isfinite(thresholds.gamma_s)
    use_energy = thresholds.gamma_eh_w > 0

    # forced sensing vertex / infeasible accuracy demand
    if use_crb:
        crb_min = (cfg.sigma_s_sq
                   / (2.0 * abs(cfg.alpha) ** 2 * cfg.l_snapshots
                      * geom.c_dr * power * model.m))
        if thresholds.gamma_s < crb_min * (1.0 - 1e-9):
            raise InfeasibleError(
                "accuracy demand below the best reachable error variance",
                certificate={"gamma_s": thresholds.gamma_s, "crb_min": crb_min})
        if thresholds.gamma_s <= crb_min * (1.0 + 1e-9):
            s = sensing_beam_covariance(geom, power)
            if energy(s, model.h_eh) < thresholds.gamma_eh_w * (1.0 - 1e-9):
                raise InfeasibleError(
                    "accuracy pinned at its minimum but the forced beam "
                    "misses the energy demand",
                    certificate={"gamma_eh_w": thresholds.gamma_eh_w,
                                 "energy_at_vertex": energy(s, model.h_eh)})
            met = evaluate(s, model, status="vertex", duality_gap=0.0)
            return P1Solution(s, None, met, {"d_rank": model.m,
                                             "used_completion": False,
                                             "vertex": "sensing"})

    # forced energy vertex / infeasible energy demand
    if use_energy:
        smax = float(np.linalg.svd(model.h_eh, compute_uv=False)[0])
        e_max = power * smax ** 2
        if thresholds.gamma_eh_w > e_max * (1.0 + 1e-9):
            raise InfeasibleError(
                "energy demand above the maximum the channel can deliver",
                certificate={"gamma_eh_w": thresholds.gamma_eh_w,
                             "e_max": e_max})
        if thresholds.gamma_eh_w >= e_max * (1.0 - 1e-12):
            s = energy_beam_covariance(model.h_eh, power)
            met = evaluate(s, model, status="vertex", duality_gap=0.0)
            if use_crb and met.crb > thresholds.gamma_s * (1.0 + 1e-9):
                raise InfeasibleError(
                    "energy pinned at its maximum but the forced beam "
                    "violates the accuracy demand",
                    certificate={"gamma_s": thresholds.gamma_s,
                                 "crb_at_vertex": met.crb})
            return P1Solution(s, None, met, {"d_rank": model.m,
                                             "used_completion": False,
                                             "vertex": "energy"})

    # unconstrained-optimal covariance already feasible
    id_ok_energy = (not use_energy
                    or point_id.energy_w >= thresholds.gamma_eh_w * (1.0 - 1e-12))
    id_ok_crb = (not use_crb
                 or point_id.crb <= thresholds.gamma_s * (1.0 + 1e-12))
    if id_ok_energy and id_ok_crb:
        met = evaluate(s_id, model, status="ok", duality_gap=0.0)
        return P1Solution(s_id, P1Dual(), met,
                          {"d_rank": model.m, "used_completion": False,
                           "binding": "none"})

    ws = _Workspace(model, thresholds)
    if np.linalg.norm(ws.g_c) == 0:
        # zero rate channel: the problem is pure feasibility
        layout = VarLayout([("herm", model.m)])
        cons = ws.primal_constraints(layout)
        x, slack = phase_one(cons, layout.pack(np.eye(model.m) / (2 * model.m)))
        if slack < FEAS_TOL:
            raise InfeasibleError("thresholds jointly unreachable",
                                  certificate={"max_slack": slack})
        from .engine import HermMap
        s = power * HermMap(model.m).to_mat(x)
        met = evaluate(s, model, status="ok", duality_gap=0.0)
        return P1Solution(s, P1Dual(), met,
                          {"d_rank": model.m, "used_completion": False})

    # feasibility probe; the maximizing point doubles as the mixing anchor
    layout = VarLayout([("herm", model.m)])
    cons = ws.primal_constraints(layout)
    x_anchor, slack = phase_one(cons, layout.pack(np.eye(model.m) / (2 * model.m)))
    if slack < FEAS_TOL:
        raise InfeasibleError(
            "thresholds jointly unreachable",
            certificate={"max_slack": slack,
                         "gamma_eh_w": thresholds.gamma_eh_w,
                         "gamma_s": thresholds.gamma_s})
    from .engine import HermMap
    s_anchor = HermMap(model.m).to_mat(x_anchor)

    idx = ws.active_idx
    dim = idx.size

    def oracle(xr):
        t6 = np.zeros(6)
        t6[idx] = xr
        if ws.use_energy and t6[0] < 0:
            g = np.zeros(6)
            g[0] = -1.0
            return OracleResponse("feasibility", g[idx], -t6[0])
        if t6[1] < 0:
            g = np.zeros(6)
            g[1] = -1.0
            return OracleResponse("feasibility", g[idx], -t6[1])
        if ws.use_crb:
            z = np.array([[t6[2], complex(t6[3], t6[4])],
                          [complex(t6[3], -t6[4]), t6[5]]])
            zw, zv = np.linalg.eigh(z)
            if zw[0] < 0:
                u = zv[:, 0]
                g = np.zeros(6)
                g[2] = -abs(u[0]) ** 2
                g[3] = -2.0 * (np.conj(u[0]) * u[1]).real
                g[4] = 2.0 * (np.conj(u[0]) * u[1]).imag
                g[5] = -abs(u[1]) ** 2
                return OracleResponse("feasibility", g[idx], -float(zw[0]))
        d = ws.d_norm(t6)
        eigs, vecs = np.linalg.eigh(d)
        scale = max(1.0, float(eigs[-1]))
        if eigs[0] < -PSD_TOL * scale:
            q1 = vecs[:, 0]
            return OracleResponse("feasibility", ws.d_cut(q1)[idx], -float(eigs[0]))
        null = eigs < NULL_TOL * max(float(eigs[-1]), np.finfo(float).tiny)
        if np.any(null):
            qn = vecs[:, null]
            leak = np.linalg.norm(ws.g_c @ qn, axis=0)
            worst = int(np.argmax(leak))
            if leak[worst] > RANGE_LEAK_TOL * np.linalg.norm(ws.g_c):
                q1 = qn[:, worst]
                viol = max(-float(np.real(np.vdot(q1, d @ q1))), 0.0)
                return OracleResponse("feasibility", ws.d_cut(q1)[idx], viol)
        sol = _inner_core(eigs[::-1], vecs[:, ::-1], ws.g_c, 1.0, NULL_TOL)
        val = ws.dual_value(t6, sol)
        return OracleResponse("objective", ws.objective_subgrad(sol.s_full)[idx], val)

    r_iso = ws.rate_n(np.eye(model.m, dtype=complex) / model.m)
    radius = 10.0 * (r_iso * math.log(2) + 1.0)
    res = ellipsoid_solve(dim, np.zeros(dim), radius, oracle,
                          tol=tol, max_iter=max_iter)
    if res.x is None:
        raise InternalInconsistencyError("dual search found no feasible multipliers")
    t6_best = np.zeros(6)
    t6_best[idx] = res.x
    g_bound = res.value
    iterations = res.iterations

    sol_best = ws.inner(t6_best, rank_tol=COMPLETION_TOL)
    used_completion = False
    refined = False
    fallback = False
    t6_final = t6_best

    if sol_best.q_null.shape[1] > 0:
        comp = _completion_feasibility(ws, sol_best.s_full, sol_best.q_null)
        if comp is not None:
            s_norm = comp[1]
            used_completion = True
        else:
            s_norm = sol_best.s_full
    else:
        polished = _refine_duals(ws, t6_best)
        if polished is not None:
            t6_final, sol_ref, g_ref = polished
            if g_ref <= g_bound + 1e-9 * max(1.0, abs(g_bound)):
                s_norm = sol_ref.s_full
                g_bound = min(g_bound, g_ref)
                refined = True
            else:
                s_norm = sol_best.s_full
        else:
            s_norm = sol_best.s_full

    s_norm = _restore_feasible(ws, s_norm, s_anchor)
    rate_final = ws.rate_n(s_norm)

    # boundary-degenerate dual optimum (refinement and completion both out):
    # recover the primal by an interior-point solve; the ellipsoid bound
    # still certifies the gap independently of that solve.
    if g_bound - rate_final > 5e-5:
        try:
            obj = LogDetRateTerm(layout, 0, ws.g_c)
            res_b = barrier_maximize(obj, cons, x_anchor)
            s_b = _restore_feasible(ws, HermMap(model.m).to_mat(res_b.x),
                                    s_anchor)
            if ws.rate_n(s_b) > rate_final:
                s_norm, rate_final = s_b, ws.rate_n(s_b)
                iterations += res_b.iterations
                fallback = True
        except Exception:
            pass

    s_final = ws.power * s_norm
    gap = g_bound - rate_final
    duals = P1Dual.from_vector(t6_final / ws.coord_scale)
    met = evaluate(s_final, model, status="ok", iterations=iterations,
                   duality_gap=gap)
    structure = {"d_rank": sol_best.d_rank, "used_completion": used_completion,
                 "refined": refined, "primal_fallback": fallback,
                 "anchor_slack": float(slack)}
    return P1Solution(s_final, duals, met, structure)


def _restore_feasible(ws: _Workspace, s_norm: np.ndarray,
                      s_anchor: np.ndarray) -> np.ndarray:
    """Exact feasibility: symmetrize, power rescale, then the smallest mixing
    with the interior anchor that clears every constraint."""
    s_norm = 0.5 * (s_norm + s_norm.conj().T)
    tr = float(np.real(np.trace(s_norm)))
    if tr > 1.0:
        s_norm = s_norm / tr
    if ws.violations(s_norm) > FEAS_TOL:
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            cand = (1.0 - mid) * s_norm + mid * s_anchor
            if ws.violations(cand) <= 1e-12:
                hi = mid
            else:
                lo = mid
        s_norm = (1.0 - hi) * s_norm + hi * s_anchor
    return s_norm


def solve_p1_direct(model: SystemModel, thresholds: P1Thresholds, *,
                    outer_tol: float = 1e-9) -> P1Solution:
    """Interior-point solve of the same problem on its primal LMI form.

    Independent route from the dual ellipsoid: used as a cross-check.
    """
    if model.case != "point":
        raise InvalidInputError("point-target solver needs a point-case model")
    ws = _Workspace(model, thresholds)
    layout = VarLayout([("herm", model.m)])
    cons = ws.primal_constraints(layout)
    x0, slack = phase_one(cons, layout.pack(np.eye(model.m) / (2 * model.m)))
    if slack < FEAS_TOL:
        raise InfeasibleError("thresholds jointly unreachable",
                              certificate={"max_slack": slack})
    from .engine import BarrierParams
    obj = LogDetRateTerm(layout, 0, ws.g_c)
    res = barrier_maximize(obj, cons, x0,
                           params=BarrierParams(outer_tol=outer_tol))
    from .engine import HermMap
    s_norm = HermMap(model.m).to_mat(res.x)
    s = ws.power * s_norm
    met = evaluate(s, model, status="ok", iterations=res.iterations,
                   duality_gap=res.gap_bound)
    return P1Solution(s, None, met, {"solver": "direct-barrier"})


# ---------------------------------------------------------------------------
# Co-located reductions
# ---------------------------------------------------------------------------

def _assert_los_at_target(h: np.ndarray, geom: TargetGeometry, label: str):
    a_t = np.conj(geom.p_vec)
    u = (h @ geom.p_vec) / geom.p_vec.size
    resid = np.linalg.norm(h - np.outer(u, a_t))
    if resid > 1e-8 * max(np.linalg.norm(h), np.finfo(float).tiny):
        raise InvalidInputError(
            f"{label} channel is not line-of-sight at the target angle")


def _pencil_beamformer(q_mat: np.ndarray, c_mat: np.ndarray, floor_c: float):
    """Maximize w^H Q w subject to w^H C w >= floor_c over unit vectors.

    Q and C are PSD with lambda_max(C) = 1 and floor_c in [0, 1).  The
    optimum is the top eigenvector of Q + mu*C at the smallest mu >= 0 whose
    constraint value reaches the floor; lambda_max(Q + mu*C) is convex in
    mu, so the constraint value of its top eigenvector is nondecreasing and
    a bisection applies.  Returns the unit beamformer.
    """
    def top_vec(mu):
        _, vecs = np.linalg.eigh(q_mat + mu * c_mat)
        return vecs[:, -1]

    def c_val(w):
        return float(np.real(np.vdot(w, c_mat @ w)))

    w0 = top_vec(0.0)
    if c_val(w0) >= floor_c:
        return w0
    hi = 1.0
    while c_val(top_vec(hi)) < floor_c and hi < 1e12:
        hi *= 4.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if c_val(top_vec(mid)) >= floor_c:
            hi = mid
        else:
            lo = mid
    w = top_vec(hi)
    if c_val(w) <= floor_c * (1.0 + 1e-9):
        return w
    # eigenvalue crossing: the floor sits inside a jump of the constraint
    # value; search the top-2 eigenspace at the critical pencil weight
    eigs, vecs = np.linalg.eigh(q_mat + hi * c_mat)
    v1, v2 = vecs[:, -1], vecs[:, -2]
    best = None
    for t in np.linspace(0.0, 0.5 * math.pi, 401):
        for ph in np.linspace(0.0, 2.0 * math.pi, 32, endpoint=False):
            wc = math.cos(t) * v1 + math.sin(t) * np.exp(1j * ph) * v2
            if c_val(wc) >= floor_c:
                g = float(np.real(np.vdot(wc, q_mat @ wc)))
                if best is None or g > best[0]:
                    best = (g, wc)
    return best[1] if best is not None else w


def colocated_point_reduction(kind: str, model: SystemModel,
                              thresholds: P1Thresholds) -> P1Solution:
    """Closed reductions when a receiver shares the target direction.

    kind "c-r": line-of-sight information channel at the target angle; the
    rate is monotone in the beam gain toward the target, so the solve is a
    beam-gain maximization under the energy demand.  kind "c-e" (single
    information antenna, harvesting channel at the target angle): maximize
    the information quadratic form under a floor on the target gain.  Both
    are two-quadratic programs with an exact rank-one optimum, recovered by
    a monotone pencil bisection.
    """
    key = kind.strip().lower().replace("_", "-")
    if key not in ("c-r", "c-e"):
        raise InvalidInputError("kind must be 'c-r' or 'c-e'")
    if model.case != "point":
        raise InvalidInputError("reductions require a point-case model")
    power = thresholds.power_w if thresholds.power_w is not None else model.power
    geom = model.target
    p_v = geom.p_vec
    m = model.m
    use_crb = math.isfinite(thresholds.gamma_s)
    floor_crb = 0.0
    if use_crb:
        gs1 = model.gamma_s1(thresholds.gamma_s)
        floor_crb = 1.0 / (geom.c_dr * gs1)   # minimum target beam gain

    if key == "c-r":
        _assert_los_at_target(model.h_id, geom, "information")
        q_n = np.outer(p_v, p_v.conj()) / m
        if thresholds.gamma_eh_w > 0:
            ws = _Workspace(model, thresholds)
            if ws.gamma_e > 1.0 + 1e-9:
                raise InfeasibleError(
                    "energy demand above the maximum the channel can deliver",
                    certificate={"gamma_eh_w": thresholds.gamma_eh_w,
                                 "e_max": ws.e_max})
            c_n = ws.g_e.conj().T @ ws.g_e
            w = _pencil_beamformer(q_n, c_n, min(ws.gamma_e, 1.0))
        else:
            w = p_v / np.linalg.norm(p_v)
        gain = power * float(abs(np.vdot(p_v, w)) ** 2)
        if gain < floor_crb * (1.0 - 1e-9):
            raise InfeasibleError(
                "target beam gain cannot reach the accuracy floor under the "
                "energy demand",
                certificate={"gain_max": gain, "gain_floor": floor_crb})
        s = power * np.outer(w, w.conj())
        met = evaluate(s, model, status="ok", duality_gap=0.0)
        return P1Solution(s, None, met, {"kind": key, "gain": gain,
                                         "gain_floor": floor_crb})

    # c-e: single information antenna, harvesting channel at the target angle
    if model.h_id.shape[0] != 1:
        raise InvalidInputError("the c-e reduction needs a single "
                                "information antenna")
    _assert_los_at_target(model.h_eh, geom, "harvesting")
    n_eh = model.h_eh.shape[0]
    alpha_sq = float(np.linalg.svd(model.h_eh, compute_uv=False)[0]) ** 2 / (m * n_eh)
    floor_energy = (thresholds.gamma_eh_w / (alpha_sq * n_eh)
                    if thresholds.gamma_eh_w > 0 else 0.0)
    gain_floor = max(floor_energy, floor_crb)
    if gain_floor > power * m * (1.0 + 1e-9):
        raise InfeasibleError(
            "required target gain above the full-power beam gain",
            certificate={"gain_floor": gain_floor, "gain_max": power * m})
    if gain_floor >= power * m * (1.0 - 1e-9):
        s = sensing_beam_covariance(geom, power)
        met = evaluate(s, model, status="vertex", duality_gap=0.0)
        return P1Solution(s, None, met, {"kind": key, "gain_floor": gain_floor})
    hmat = model.h_id.conj().T @ model.h_id
    q_n = hmat / max(float(np.linalg.norm(hmat)), np.finfo(float).tiny)
    c_n = np.outer(p_v, p_v.conj()) / m
    w = _pencil_beamformer(q_n, c_n, gain_floor / (power * m))
    s = power * np.outer(w, w.conj())
    met = evaluate(s, model, status="ok", duality_gap=0.0)
    return P1Solution(s, None, met, {"kind": key, "gain_floor": gain_floor})
