"""Cutting-plane and interior-point engines shared by all solvers.

Two independent optimization routes live here. `ellipsoid_solve` is a
minimizing cutting-plane driver with deep feasibility cuts and the standard
lower-bound certificate. `barrier_maximize` is a log-barrier Newton method
over real vectors; Hermitian matrix variables are embedded as length-d^2
real blocks (diagonal entries followed by real/imaginary off-diagonal pairs)
so a single Newton core serves matrix and scalar problems alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import (IllConditionedError, InternalInconsistencyError,
                     InvalidInputError)

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# Hermitian <-> real-vector embedding
# ---------------------------------------------------------------------------

class HermMap:
    """Bijection between d x d Hermitian matrices and real vectors of length d^2."""

    _cache: dict = {}

    def __new__(cls, d: int):
        if d not in cls._cache:
            obj = super().__new__(cls)
            obj._init(d)
            cls._cache[d] = obj
        return cls._cache[d]

    def _init(self, d: int):
        self.d = d
        self.dim = d * d
        self.iu = np.triu_indices(d, k=1)
        self.n_off = self.iu[0].size
        basis = np.zeros((self.dim, d, d), dtype=complex)
        for i in range(d):
            basis[i, i, i] = 1.0
        for k in range(self.n_off):
            i, j = self.iu[0][k], self.iu[1][k]
            basis[d + k, i, j] = 1.0
            basis[d + k, j, i] = 1.0
            basis[d + self.n_off + k, i, j] = 1.0j
            basis[d + self.n_off + k, j, i] = -1.0j
        self.basis = basis

    def to_vec(self, s: np.ndarray) -> np.ndarray:
        x = np.empty(self.dim)
        x[:self.d] = np.real(np.diag(s))
        off = s[self.iu]
        x[self.d:self.d + self.n_off] = off.real
        x[self.d + self.n_off:] = off.imag
        return x

    def to_mat(self, x: np.ndarray) -> np.ndarray:
        d = self.d
        s = np.zeros((d, d), dtype=complex)
        s[np.arange(d), np.arange(d)] = x[:d]
        off = x[d:d + self.n_off] + 1j * x[d + self.n_off:]
        s[self.iu] = off
        s[self.iu[1], self.iu[0]] = off.conj()
        return s

    def grad_vec(self, g: np.ndarray) -> np.ndarray:
        """Real gradient of f(S(x)) given the Hermitian matrix gradient G
        (in the convention df = tr(G dS))."""
        x = np.empty(self.dim)
        x[:self.d] = np.real(np.diag(g))
        off = g[self.iu]
        x[self.d:self.d + self.n_off] = 2.0 * off.real
        x[self.d + self.n_off:] = 2.0 * off.imag
        return x

    def bilinear(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Matrix with entries Re tr(W B_k V B_l) over the basis stack."""
        t = np.einsum('ij,kjl,lm->kim', w, self.basis, v, optimize=True)
        return np.real(np.einsum('kij,lji->kl', t, self.basis, optimize=True))


@dataclass
class VarLayout:
    """Concatenation of Hermitian blocks and scalar tails into one real vector."""

    blocks: Sequence[tuple]   # ("herm", d) or ("scalar", n)

    def __post_init__(self):
        self.slices = []
        pos = 0
        for kind, d in self.blocks:
            n = d * d if kind == "herm" else d
            self.slices.append(slice(pos, pos + n))
            pos += n
        self.dim = pos

    def pack(self, *parts) -> np.ndarray:
        x = np.empty(self.dim)
        for (kind, d), sl, part in zip(self.blocks, self.slices, parts):
            x[sl] = HermMap(d).to_vec(part) if kind == "herm" else np.atleast_1d(part)
        return x

    def unpack(self, x: np.ndarray) -> list:
        out = []
        for (kind, d), sl in zip(self.blocks, self.slices):
            out.append(HermMap(d).to_mat(x[sl]) if kind == "herm" else x[sl].copy())
        return out


# ---------------------------------------------------------------------------
# Differentiable terms (objective pieces and scalar constraint slacks)
# ---------------------------------------------------------------------------

def finite_difference_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                               step: float = 1e-6) -> np.ndarray:
    g = np.empty_like(x)
    for k in range(x.size):
        h = step * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        g[k] = (f(xp) - f(xm)) / (2.0 * h)
    return g


class Term:
    """Scalar function of the packed real vector with gradient and Hessian."""

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, x: np.ndarray) -> np.ndarray:
        g = self.grad
        n = x.size
        h = np.empty((n, n))
        for k in range(n):
            dk = 1e-7 * max(1.0, abs(x[k]))
            xp, xm = x.copy(), x.copy()
            xp[k] += dk
            xm[k] -= dk
            h[:, k] = (g(xp) - g(xm)) / (2.0 * dk)
        return 0.5 * (h + h.T)


class CallableTerm(Term):
    def __init__(self, f, grad=None, hess=None):
        self._f, self._g, self._h = f, grad, hess

    def value(self, x):
        return float(self._f(x))

    def grad(self, x):
        if self._g is not None:
            return np.asarray(self._g(x), dtype=float)
        return finite_difference_gradient(self._f, x)

    def hess(self, x):
        if self._h is not None:
            return np.asarray(self._h(x), dtype=float)
        return super().hess(x)


class LinearTerm(Term):
    def __init__(self, coef: np.ndarray, const: float = 0.0):
        self.coef = np.asarray(coef, dtype=float)
        self.const = float(const)

    def value(self, x):
        return float(self.coef @ x + self.const)

    def grad(self, x):
        return self.coef.copy()

    def hess(self, x):
        return np.zeros((x.size, x.size))


class SumTerm(Term):
    def __init__(self, terms: Sequence[Term], weights: Optional[Sequence[float]] = None):
        self.terms = list(terms)
        self.weights = [1.0] * len(self.terms) if weights is None else list(weights)

    def value(self, x):
        return sum(w * t.value(x) for w, t in zip(self.weights, self.terms))

    def grad(self, x):
        g = np.zeros(x.size)
        for w, t in zip(self.weights, self.terms):
            g += w * t.grad(x)
        return g

    def hess(self, x):
        h = np.zeros((x.size, x.size))
        for w, t in zip(self.weights, self.terms):
            h += w * t.hess(x)
        return h


class _BlockTerm(Term):
    """Base for terms acting on one Hermitian block of the layout."""

    def __init__(self, layout: VarLayout, block: int):
        kind, d = layout.blocks[block]
        if kind != "herm":
            raise InvalidInputError("matrix term bound to a non-matrix block")
        self.sl = layout.slices[block]
        self.map = HermMap(d)
        self.dim = layout.dim

    def _scatter_grad(self, x, gmat):
        g = np.zeros(self.dim)
        g[self.sl] = self.map.grad_vec(gmat)
        return g

    def _scatter_hess(self, hblock):
        h = np.zeros((self.dim, self.dim))
        h[self.sl, self.sl] = hblock
        return h


class LogDetRateTerm(_BlockTerm):
    """f(S) = log2 det(I + G S G^H), concave in S."""

    def __init__(self, layout, block, g_mat: np.ndarray):
        super().__init__(layout, block)
        self.g_mat = np.asarray(g_mat, dtype=complex)

    def _core(self, x):
        s = self.map.to_mat(x[self.sl])
        m = np.eye(self.g_mat.shape[0], dtype=complex) + self.g_mat @ s @ self.g_mat.conj().T
        m = 0.5 * (m + m.conj().T)
        return s, m

    def value(self, x):
        _, m = self._core(x)
        sign, logdet = np.linalg.slogdet(m)
        if sign.real <= 0:
            return -math.inf
        return float(logdet) / LN2

    def _w(self, m):
        sol = np.linalg.solve(m, self.g_mat)
        w = self.g_mat.conj().T @ sol
        return 0.5 * (w + w.conj().T)

    def grad(self, x):
        _, m = self._core(x)
        return self._scatter_grad(x, self._w(m) / LN2)

    def hess(self, x):
        _, m = self._core(x)
        w = self._w(m)
        return self._scatter_hess(-self.map.bilinear(w, w) / LN2)


class TraceInvTerm(_BlockTerm):
    """f(S) = tr(S^-1), convex on the PD cone."""

    def value(self, x):
        s = self.map.to_mat(x[self.sl])
        w = np.linalg.eigvalsh(s)
        if w[0] <= 0:
            return math.inf
        return float(np.sum(1.0 / w))

    def grad(self, x):
        s = self.map.to_mat(x[self.sl])
        si = np.linalg.inv(s)
        return self._scatter_grad(x, -(si @ si))

    def hess(self, x):
        s = self.map.to_mat(x[self.sl])
        si = np.linalg.inv(s)
        si2 = si @ si
        h = self.map.bilinear(si, si2)
        return self._scatter_hess(h + h.T)


class DiagLogDetRateTerm(Term):
    """f(p) = log2 det(I + G diag(p) G^H) over a scalar block of powers."""

    def __init__(self, layout: VarLayout, block: int, g_mat: np.ndarray):
        kind, n = layout.blocks[block]
        if kind != "scalar" or n != g_mat.shape[1]:
            raise InvalidInputError("power block does not match channel columns")
        self.sl = layout.slices[block]
        self.dim = layout.dim
        self.g_mat = np.asarray(g_mat, dtype=complex)

    def _m(self, x):
        p = x[self.sl]
        m = np.eye(self.g_mat.shape[0], dtype=complex) + (self.g_mat * p) @ self.g_mat.conj().T
        return 0.5 * (m + m.conj().T)

    def value(self, x):
        sign, logdet = np.linalg.slogdet(self._m(x))
        if sign.real <= 0:
            return -math.inf
        return float(logdet) / LN2

    def grad(self, x):
        sol = np.linalg.solve(self._m(x), self.g_mat)
        g = np.zeros(self.dim)
        g[self.sl] = np.real(np.sum(self.g_mat.conj() * sol, axis=0)) / LN2
        return g

    def hess(self, x):
        sol = np.linalg.solve(self._m(x), self.g_mat)
        inner = self.g_mat.conj().T @ sol
        h = np.zeros((self.dim, self.dim))
        h[self.sl, self.sl] = -np.abs(inner) ** 2 / LN2
        return h


class ReciprocalTerm(Term):
    """f(x) = weight / x_i, convex for x_i > 0."""

    def __init__(self, index: int, weight: float = 1.0):
        self.i = index
        self.w = weight

    def value(self, x):
        return self.w / x[self.i] if x[self.i] > 0 else math.inf

    def grad(self, x):
        g = np.zeros(x.size)
        g[self.i] = -self.w / x[self.i] ** 2
        return g

    def hess(self, x):
        h = np.zeros((x.size, x.size))
        h[self.i, self.i] = 2.0 * self.w / x[self.i] ** 3
        return h


def linear_matrix_coef(layout: VarLayout, block: int, g: np.ndarray) -> np.ndarray:
    """Coefficient vector of the linear functional S -> tr(G S) (G Hermitian)."""
    kind, d = layout.blocks[block]
    if kind != "herm":
        raise InvalidInputError("expected a Hermitian block")
    coef = np.zeros(layout.dim)
    coef[layout.slices[block]] = HermMap(d).grad_vec(g)
    return coef


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------

class ScalarIneq:
    """Constraint c(x) >= 0 given the slack term c."""

    def __init__(self, term: Term, name: str = ""):
        self.term = term
        self.name = name
        self.theta = 1.0

    def slack(self, x):
        return self.term.value(x)

    def feasible(self, x):
        v = self.slack(x)
        return np.isfinite(v) and v > 0.0

    def barrier_value(self, x):
        c = self.slack(x)
        if not (np.isfinite(c) and c > 0):
            return math.inf
        return -math.log(c)

    def barrier_grad_hess(self, x):
        c = self.term.value(x)
        g = self.term.grad(x)
        h = self.term.hess(x)
        return -g / c, np.outer(g, g) / c ** 2 - h / c

    def multiplier(self, x, t):
        return 1.0 / (t * self.slack(x))


class PSDIneq:
    """Affine matrix constraint T(x) = T0 + sum_k x_k T_k >= 0."""

    def __init__(self, t0: np.ndarray, coeffs: Sequence[tuple], dim: int, name: str = ""):
        """coeffs: iterable of (index, Hermitian matrix) pairs."""
        self.t0 = np.asarray(t0, dtype=complex)
        self.coeffs = [(int(i), np.asarray(m, dtype=complex)) for i, m in coeffs]
        self.dim = dim
        self.name = name
        self.theta = float(self.t0.shape[0])

    @classmethod
    def from_herm_block(cls, layout: VarLayout, block: int, name: str = ""):
        """The block itself must be PSD: T(x) = S(x)."""
        kind, d = layout.blocks[block]
        hm = HermMap(d)
        sl = layout.slices[block]
        coeffs = [(sl.start + k, hm.basis[k]) for k in range(hm.dim)]
        return cls(np.zeros((d, d)), coeffs, layout.dim, name=name)

    def matrix(self, x):
        t = self.t0.copy()
        for i, m in self.coeffs:
            t = t + x[i] * m
        return 0.5 * (t + t.conj().T)

    def slack(self, x):
        return float(np.linalg.eigvalsh(self.matrix(x))[0])

    def feasible(self, x):
        try:
            np.linalg.cholesky(self.matrix(x))
            return True
        except np.linalg.LinAlgError:
            return False

    def barrier_value(self, x):
        t = self.matrix(x)
        sign, logdet = np.linalg.slogdet(t)
        if sign.real <= 0 or not np.isfinite(logdet):
            return math.inf
        try:
            np.linalg.cholesky(t)
        except np.linalg.LinAlgError:
            return math.inf
        return -float(logdet)

    def barrier_grad_hess(self, x):
        t = self.matrix(x)
        ti = np.linalg.inv(t)
        ti = 0.5 * (ti + ti.conj().T)
        g = np.zeros(self.dim)
        idx = [i for i, _ in self.coeffs]
        mats = np.stack([m for _, m in self.coeffs])
        tim = np.einsum('ij,kjl->kil', ti, mats, optimize=True)
        for pos, i in enumerate(idx):
            g[i] += -float(np.real(np.trace(tim[pos])))
        hblk = np.real(np.einsum('kij,lji->kl', tim, tim, optimize=True))
        h = np.zeros((self.dim, self.dim))
        h[np.ix_(idx, idx)] += 0.5 * (hblk + hblk.T)
        return g, h

    def multiplier(self, x, t):
        return np.linalg.inv(self.matrix(x)) / t


# ---------------------------------------------------------------------------
# Log-barrier Newton maximizer
# ---------------------------------------------------------------------------

@dataclass
class BarrierParams:
    mu0: float = 1.0
    mu_factor: float = 20.0
    newton_tol: float = 1e-10
    outer_tol: float = 1e-8
    max_newton: int = 120
    t_cap: float = 1e14


@dataclass
class BarrierResult:
    x: np.ndarray
    value: float
    gap_bound: float
    iterations: int
    kkt_residual: float
    t_final: float
    multipliers: list = field(default_factory=list)
    status: str = "converged"


@dataclass
class BarrierProblem:
    """Bundle of layout, objective, constraints, and a strictly feasible start."""

    layout: VarLayout
    objective: Term
    constraints: List
    x0: np.ndarray

    def solve(self, params: Optional[BarrierParams] = None) -> BarrierResult:
        return barrier_maximize(self.objective, self.constraints, self.x0,
                                params=params)


def _strictly_feasible(constraints, x):
    return all(c.feasible(x) for c in constraints)


def _psi(objective, constraints, x, t):
    v = -t * objective.value(x)
    for c in constraints:
        b = c.barrier_value(x)
        if not np.isfinite(b):
            return math.inf
        v += b
    return v


def barrier_maximize(objective: Term, constraints: Sequence, x0: np.ndarray,
                     params: Optional[BarrierParams] = None,
                     stop_value: Optional[float] = None) -> BarrierResult:
    """Maximize `objective` subject to every constraint in `constraints`.

    `x0` must be strictly feasible. `stop_value` allows phase-I callers to
    stop as soon as the objective exceeds a target.
    """
    prm = params or BarrierParams()
    x = np.asarray(x0, dtype=float).copy()
    if not _strictly_feasible(constraints, x):
        raise InvalidInputError("barrier_maximize requires a strictly feasible start")
    theta = sum(c.theta for c in constraints)
    t = prm.mu0 * max(1.0, theta)
    total_newton = 0
    status = "converged"

    while True:
        # Newton centering for fixed t.
        for _ in range(prm.max_newton):
            total_newton += 1
            g = -t * objective.grad(x)
            h = -t * objective.hess(x)
            for c in constraints:
                cg, ch = c.barrier_grad_hess(x)
                g += cg
                h += ch
            h = 0.5 * (h + h.T)
            step = _newton_direction(h, g)
            lam2 = float(-g @ step)
            if not np.isfinite(lam2) or lam2 <= 0:
                step = -g
                lam2 = float(g @ g)
            if 0.5 * lam2 <= prm.newton_tol:
                break
            psi0 = _psi(objective, constraints, x, t)
            alpha, ok = 1.0, False
            while alpha > 1e-14:
                xn = x + alpha * step
                if _strictly_feasible(constraints, xn):
                    if _psi(objective, constraints, xn, t) <= psi0 + 0.25 * alpha * (g @ step):
                        ok = True
                        break
                alpha *= 0.5
            if not ok:
                break
            x = xn
        fval = objective.value(x)
        gap = theta / t
        if stop_value is not None and fval >= stop_value:
            status = "early"
            break
        if gap <= prm.outer_tol * max(1.0, abs(fval)):
            break
        if t >= prm.t_cap:
            status = "t_cap"
            break
        t *= prm.mu_factor

    g_obj = objective.grad(x)
    kkt = g_obj.copy()
    mults = []
    for c in constraints:
        mu = 1.0 / (t * max(c.slack(x), 1e-300)) if isinstance(c, ScalarIneq) else None
        if isinstance(c, ScalarIneq):
            kkt += mu * c.term.grad(x)
            mults.append((c.name, mu))
        else:
            cg, _ = c.barrier_grad_hess(x)
            kkt -= cg / t
            mults.append((c.name, c.multiplier(x, t)))
    kkt_res = float(np.linalg.norm(kkt)) / max(1.0, float(np.linalg.norm(g_obj)))
    return BarrierResult(x=x, value=float(objective.value(x)), gap_bound=gap,
                         iterations=total_newton, kkt_residual=kkt_res,
                         t_final=t, multipliers=mults, status=status)


def _newton_direction(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.abs(np.diag(h)))) if h.size else 1.0
    jitter = 0.0
    for _ in range(8):
        try:
            cf = scipy.linalg.cho_factor(h + jitter * np.eye(h.shape[0]), lower=True)
            return -scipy.linalg.cho_solve(cf, g)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            jitter = max(jitter * 100.0, 1e-14 * max(scale, 1.0))
    sol, *_ = np.linalg.lstsq(h, -g, rcond=None)
    return sol


def phase_one(constraints: Sequence, x0: np.ndarray, *, weights=None,
              s_cap: float = 1.0, target: float = 0.0,
              params: Optional[BarrierParams] = None):
    """Maximize the common slack s with every constraint shifted by s.

    Returns (x_at_max, max_slack). `x0` need not satisfy the constraints but
    must keep them evaluable (PSD structural blocks strictly feasible after a
    sufficiently negative shift is impossible for PSDIneq with T0 = 0, so
    structural PSD constraints should be satisfied by x0 and are shifted like
    the rest only when marked shiftable).
    """
    n = x0.size
    w = np.ones(len(constraints)) if weights is None else np.asarray(weights, float)

    shifted = []
    for c, wi in zip(constraints, w):
        if isinstance(c, ScalarIneq):
            base = c.term
            coef = np.zeros(n + 1)
            coef[n] = -wi
            shifted.append(ScalarIneq(SumTerm([_Extend(base, n + 1), LinearTerm(coef)]),
                                      name=c.name))
        else:
            t0 = c.t0.copy()
            coeffs = list(c.coeffs) + [(n, -wi * np.eye(c.t0.shape[0]))]
            shifted.append(PSDIneq(t0, coeffs, n + 1, name=c.name))
    cap_coef = np.zeros(n + 1)
    cap_coef[n] = -1.0
    shifted.append(ScalarIneq(LinearTerm(cap_coef, const=s_cap), name="slack-cap"))

    slacks = []
    for c, wi in zip(constraints, w):
        slacks.append(c.slack(x0) / wi)
    s0 = min(min(slacks) - 0.1 * max(1.0, abs(min(slacks))), 0.5 * s_cap)
    z0 = np.concatenate([x0, [s0]])
    if not all(c.feasible(z0) for c in shifted):
        raise InternalInconsistencyError("phase-I start failed to be strictly feasible")

    obj_coef = np.zeros(n + 1)
    obj_coef[n] = 1.0
    res = barrier_maximize(LinearTerm(obj_coef), shifted, z0, params=params,
                           stop_value=(target if target > 0 else None))
    return res.x[:n], float(res.x[n])


class _Extend(Term):
    """View an n-dim term as a function of the first n coordinates of a longer x."""

    def __init__(self, term: Term, dim: int):
        self.term = term
        self.dim = dim

    def value(self, x):
        return self.term.value(x[:self.dim - 1])

    def grad(self, x):
        g = np.zeros(self.dim)
        g[:self.dim - 1] = self.term.grad(x[:self.dim - 1])
        return g

    def hess(self, x):
        h = np.zeros((self.dim, self.dim))
        h[:self.dim - 1, :self.dim - 1] = self.term.hess(x[:self.dim - 1])
        return h


# ---------------------------------------------------------------------------
# Ellipsoid method
# ---------------------------------------------------------------------------

@dataclass
class OracleResponse:
    kind: str                 # "objective" | "feasibility"
    subgrad: np.ndarray
    value: float = 0.0        # objective value, or violation amount for cuts


@dataclass
class EllipsoidState:
    center: np.ndarray
    shape: np.ndarray
    best_x: Optional[np.ndarray]
    best_value: float
    iteration: int


@dataclass
class EllipsoidResult:
    x: Optional[np.ndarray]
    value: float
    lower_bound: float
    gap: float
    iterations: int
    status: str
    state: Optional[EllipsoidState] = None
    history: Optional[list] = None


def ellipsoid_solve(dim: int, center: np.ndarray, radius: float,
                    oracle: Callable[[np.ndarray], OracleResponse],
                    tol: float = 1e-6, max_iter: Optional[int] = None,
                    collect_history: bool = False) -> EllipsoidResult:
    """Minimize a convex function over a convex set via the ellipsoid method.

    The oracle returns an objective cut (value + subgradient) at feasible
    points and a feasibility cut (violation + subgradient of the violated
    constraint) elsewhere. Deep cuts are applied for strictly violated
    constraints; objective cuts are central. Stops when the certified
    relative gap falls below `tol`.
    """
    if dim < 1:
        raise InvalidInputError("ellipsoid dimension must be >= 1")
    if radius <= 0:
        raise InvalidInputError("initial radius must be positive")
    n = dim
    c = np.asarray(center, dtype=float).copy()
    p = (radius ** 2) * np.eye(n)
    best_x, best_val = None, math.inf
    lower = -math.inf
    max_iter = max_iter if max_iter is not None else 2000 * n * n
    history = [] if collect_history else None
    status = "max_iter"
    it = 0

    for it in range(1, max_iter + 1):
        resp = oracle(c)
        g = np.asarray(resp.subgrad, dtype=float)
        if g.shape != (n,):
            raise InvalidInputError("oracle subgradient has wrong dimension")
        gpg = float(g @ p @ g)
        if not np.isfinite(gpg) or gpg <= 0:
            raise IllConditionedError("ellipsoid cut direction degenerated")
        gn = math.sqrt(gpg)

        if resp.kind == "objective":
            if resp.value < best_val:
                best_val, best_x = float(resp.value), c.copy()
            lower = max(lower, float(resp.value) - gn)
            if best_val - lower <= tol * max(1.0, abs(best_val)):
                status = "converged"
                break
            alpha = 0.0
        else:
            alpha = min(float(resp.value) / gn, 1.0 - 1e-12) if resp.value > 0 else 0.0

        pg = p @ g / gn
        if n == 1:
            # One-dimensional ellipsoids are intervals; cut and re-center.
            half = math.sqrt(p[0, 0])
            lo, hi = c[0] - half, c[0] + half
            if g[0] > 0:
                hi = c[0] - alpha * half
            else:
                lo = c[0] + alpha * half
            if hi <= lo:
                status = "converged"
                break
            c[0] = 0.5 * (lo + hi)
            p[0, 0] = (0.5 * (hi - lo)) ** 2
        else:
            c = c - ((1.0 + n * alpha) / (n + 1.0)) * pg
            p = (n * n * (1.0 - alpha * alpha) / (n * n - 1.0)) * (
                p - (2.0 * (1.0 + n * alpha) / ((n + 1.0) * (1.0 + alpha)))
                * np.outer(pg, pg))
            p = 0.5 * (p + p.T)

        if collect_history:
            sign, logdet = np.linalg.slogdet(p)
            history.append({"iteration": it, "logdet_shape": float(logdet),
                            "best": best_val})
        if it % 128 == 0:
            w = np.linalg.eigvalsh(p)
            if w[0] <= 0 or w[-1] / max(w[0], 1e-300) > 1e14:
                if best_x is not None and best_val - lower <= 1e-3 * max(1.0, abs(best_val)):
                    status = "ill_conditioned_converged"
                    break
                raise IllConditionedError("ellipsoid shape matrix condition exceeded 1e14")

    if best_x is None:
        return EllipsoidResult(x=None, value=math.inf, lower_bound=lower,
                               gap=math.inf, iterations=it, status="no_feasible_point",
                               state=EllipsoidState(c, p, None, math.inf, it),
                               history=history)
    return EllipsoidResult(x=best_x, value=best_val, lower_bound=lower,
                           gap=best_val - lower, iterations=it, status=status,
                           state=EllipsoidState(c, p, best_x, best_val, it),
                           history=history)
