"""Array steering, target responses, and communication channel generators.

Conventions: uniform linear arrays at half-wavelength spacing with a centered
phase reference, so element k of an n-element array sits at offset
(2k - n + 1)/2 in units of half wavelengths. The sensing response factors as
A(theta) = a_rx(theta) a_tx(theta)^T and line-of-sight communication channels
follow the same outer-product convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError


def _offsets(n: int) -> np.ndarray:
    if n < 1:
        raise InvalidInputError("element count must be >= 1")
    k = np.arange(n)
    return (2.0 * k - n + 1.0) / 2.0


def steering_from_sin(sin_theta: float, n: int) -> np.ndarray:
    """Steering vector parameterized by the direction sine directly."""
    return np.exp(1j * np.pi * sin_theta * _offsets(n))


def steering(theta: float, n: int, order: int = 0) -> np.ndarray:
    """ULA steering vector (order 0) or its angle derivative (order 1)."""
    if order not in (0, 1):
        raise InvalidInputError("derivative order must be 0 or 1")
    off = _offsets(n)
    a = np.exp(1j * np.pi * np.sin(theta) * off)
    if order == 0:
        return a
    return a * (1j * np.pi * np.cos(theta) * off)


@dataclass
class TargetGeometry:
    """Steering bundle for one point target: vectors, derivatives, and the
    receive-side norms that every sensing expression reduces to."""

    theta: float
    m: int
    n_s: int
    a_t: np.ndarray = field(init=False)
    da_t: np.ndarray = field(init=False)
    a_r: np.ndarray = field(init=False)
    da_r: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_s <= self.m:
            raise InvalidInputError("sensing array must have more elements than transmit array")
        self.a_t = steering(self.theta, self.m)
        self.da_t = steering(self.theta, self.m, order=1)
        self.a_r = steering(self.theta, self.n_s)
        self.da_r = steering(self.theta, self.n_s, order=1)

    @property
    def c_r(self) -> float:
        """||a_r||^2 = N_S."""
        return float(np.real(np.vdot(self.a_r, self.a_r)))

    @property
    def c_dr(self) -> float:
        """||da_r||^2."""
        return float(np.real(np.vdot(self.da_r, self.da_r)))

    # Fisher-style traces reduce to quadratic forms with the conjugated
    # transmit vectors p = conj(a_t), q = conj(da_t).
    @property
    def p_vec(self) -> np.ndarray:
        return self.a_t.conj()

    @property
    def q_vec(self) -> np.ndarray:
        return self.da_t.conj()

    def fisher_traces(self, s: np.ndarray) -> tuple[float, complex, float]:
        """Return (tr(dA^H dA S), tr(dA^H A S), tr(A^H A S)) for covariance S."""
        p, q = self.p_vec, self.q_vec
        sp = s @ p
        sq = s @ q
        m1 = float(np.real(np.vdot(p, sp)))
        m2 = float(np.real(np.vdot(q, sq)))
        m3 = complex(np.vdot(p, sq))
        t_dd = self.c_r * m2 + self.c_dr * m1
        t_da = self.c_r * m3
        t_aa = self.c_r * m1
        return t_dd, t_da, t_aa


def target_response(thetas, alphas, m: int, n_s: int) -> np.ndarray:
    """Sensing channel: sum_q alpha_q a_rx(theta_q) a_tx(theta_q)^T.

    A single (theta, alpha) pair gives the point-target response; a sequence
    models an extended target as a cluster of scatterers.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    if thetas.shape != alphas.shape:
        raise InvalidInputError("thetas and alphas must have matching shapes")
    h = np.zeros((n_s, m), dtype=complex)
    for th, al in zip(thetas, alphas):
        h += al * np.outer(steering(th, n_s), steering(th, m))
    return h


def los_channel(gain: float, sin_theta: float, n_rx: int, n_tx: int) -> np.ndarray:
    """Rank-one line-of-sight channel gain * a_rx a_tx^T (n_rx x n_tx)."""
    return gain * np.outer(steering_from_sin(sin_theta, n_rx),
                           steering_from_sin(sin_theta, n_tx))


def rician_channel(gain: float, sin_theta: float, n_rx: int, n_tx: int,
                   kappa: float, rng: np.random.Generator) -> np.ndarray:
    """Rician channel with LoS factor kappa and per-entry power gain^2.

    kappa = 0 is pure Rayleigh scattering, kappa -> inf recovers los_channel.
    """
    if kappa < 0:
        raise InvalidInputError("Rician factor must be nonnegative")
    h_los = los_channel(gain, sin_theta, n_rx, n_tx)
    h_w = gain * (rng.standard_normal((n_rx, n_tx))
                  + 1j * rng.standard_normal((n_rx, n_tx))) / np.sqrt(2.0)
    return np.sqrt(kappa / (1.0 + kappa)) * h_los + np.sqrt(1.0 / (1.0 + kappa)) * h_w


@dataclass
class ChannelSpec:
    """How to realize one communication channel (ID or EH receiver)."""

    kind: str = "rician"          # "los" | "rician" | "fixed"
    gain: float = 1e-4
    sin_theta: float = 0.0
    kappa: float = 20.0
    matrix: Optional[np.ndarray] = None   # used when kind == "fixed"

    def realize(self, n_rx: int, n_tx: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "fixed":
            h = np.asarray(self.matrix, dtype=complex)
            if h.shape != (n_rx, n_tx):
                raise InvalidInputError(f"fixed channel has shape {h.shape}, expected {(n_rx, n_tx)}")
            return h
        if self.kind == "los":
            return los_channel(self.gain, self.sin_theta, n_rx, n_tx)
        if self.kind == "rician":
            return rician_channel(self.gain, self.sin_theta, n_rx, n_tx, self.kappa, rng)
        raise InvalidInputError(f"unknown channel kind {self.kind!r}")


@dataclass
class ScenarioConfig:
    """Full description of one system instance prior to realization."""

    case: str = "point"            # "point" | "extended"
    m: int = 6
    n_s: int = 16
    n_id: int = 2
    n_eh: int = 2
    power_w: float = 1.0
    sigma_s_sq: float = 1e-12
    sigma_id_sq: float = 1e-12
    l_snapshots: int = 256
    zeta: float = 0.5
    alpha: complex = 1e-6
    theta: float = 0.0
    id_channel: ChannelSpec = field(default_factory=ChannelSpec)
    eh_channel: ChannelSpec = field(default_factory=ChannelSpec)
    # Extended-target scatterer cluster (exposed for completeness; the
    # extended-case CRB depends on the covariance only).
    scatter_thetas: Optional[Sequence[float]] = None
    scatter_alphas: Optional[Sequence[complex]] = None
    seed: int = 0

    def validate(self):
        if self.case not in ("point", "extended"):
            raise InvalidInputError(f"unknown case {self.case!r}")
        if self.m < 1 or self.n_s <= self.m:
            raise InvalidInputError("need N_S > M >= 1")
        if min(self.n_id, self.n_eh) < 1:
            raise InvalidInputError("receivers need at least one antenna")
        for name in ("power_w", "sigma_s_sq", "sigma_id_sq"):
            if not (getattr(self, name) > 0):
                raise InvalidInputError(f"{name} must be positive")
        if self.l_snapshots < 1:
            raise InvalidInputError("snapshot count must be >= 1")
        if not (0.0 <= self.zeta <= 1.0):
            raise InvalidInputError("zeta must lie in [0, 1]")

    def build(self, seed: Optional[int] = None) -> "SystemModel":
        """Realize channels and steering into a solver-ready SystemModel."""
        self.validate()
        rng = np.random.default_rng(self.seed if seed is None else seed)
        h_id = self.id_channel.realize(self.n_id, self.m, rng)
        h_eh = self.eh_channel.realize(self.n_eh, self.m, rng)
        geom = TargetGeometry(self.theta, self.m, self.n_s)
        return SystemModel(config=self, h_id=h_id, h_eh=h_eh, target=geom,
                           seed=self.seed if seed is None else seed)


@dataclass
class SystemModel:
    """One realized instance: channels plus target geometry and constants."""

    config: ScenarioConfig
    h_id: np.ndarray
    h_eh: np.ndarray
    target: TargetGeometry
    seed: int = 0

    @property
    def case(self) -> str:
        return self.config.case

    @property
    def m(self) -> int:
        return self.config.m

    @property
    def power(self) -> float:
        return self.config.power_w

    def sensing_channel(self) -> np.ndarray:
        """H_S as seen by the sensing receiver (unused by the solvers)."""
        cfg = self.config
        if cfg.case == "extended" and cfg.scatter_thetas is not None:
            return target_response(cfg.scatter_thetas, cfg.scatter_alphas,
                                   cfg.m, cfg.n_s)
        return target_response(cfg.theta, cfg.alpha, cfg.m, cfg.n_s)

    def gamma_s1(self, gamma_s: float) -> float:
        """Point-case CRB threshold mapped to the Fisher-domain constant."""
        cfg = self.config
        return 2.0 * abs(cfg.alpha) ** 2 * cfg.l_snapshots * gamma_s / cfg.sigma_s_sq

    def gamma_s2(self, gamma_s: float) -> float:
        """Extended-case CRB threshold mapped to the trace-inverse bound."""
        cfg = self.config
        return cfg.l_snapshots * gamma_s / (cfg.sigma_s_sq * cfg.n_s)
