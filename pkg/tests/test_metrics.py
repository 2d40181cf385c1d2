"""Tests for the CRB, rate, and energy metrics."""

import math

import numpy as np
import pytest

from creopt.channels import TargetGeometry
from creopt.errors import InvalidInputError
from creopt.metrics import (as_covariance, crb_extended, crb_point, energy,
                            evaluate, rate)

from conftest import random_covariance, random_model, random_psd


def test_rate_determinant_oracle(rng):
    for _ in range(50):
        m = int(rng.integers(1, 6))
        n = int(rng.integers(1, 4))
        h = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        s = random_covariance(rng, m, power=2.0)
        sigma = rng.uniform(0.2, 3.0)
        direct = np.log2(np.linalg.det(np.eye(n) + h @ s @ h.conj().T / sigma).real)
        assert abs(rate(s, h, sigma) - direct) <= 1e-9 * max(1.0, abs(direct))


def test_rate_zero_covariance():
    h = np.ones((2, 3))
    assert rate(np.zeros((3, 3)), h, 1.0) == 0.0


def test_rate_monotone_in_power(rng):
    h = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    s = random_covariance(rng, 4)
    assert rate(2.0 * s, h, 1.0) > rate(s, h, 1.0)


def test_energy_rayleigh_oracle(rng):
    for _ in range(50):
        m = int(rng.integers(1, 6))
        h = rng.standard_normal((2, m)) + 1j * rng.standard_normal((2, m))
        s = random_covariance(rng, m)
        direct = np.trace(h @ s @ h.conj().T).real
        assert abs(energy(s, h) - direct) <= 1e-12 * max(1.0, direct)
    # beamforming along the top right-singular vector collects sigma1^2 * P
    h = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    _, sv, vh = np.linalg.svd(h)
    p = 3.0
    s_bf = p * np.outer(vh[0].conj(), vh[0])
    assert abs(energy(s_bf, h) - p * sv[0] ** 2) <= 1e-10 * p * sv[0] ** 2


def test_crb_point_min_closed_form():
    # sigma = |alpha| = L = P = 1, M = 2, N_S = 3, theta = 0:
    # CRB at the optimal rank-one covariance is 1/(8 pi^2).
    geom = TargetGeometry(0.0, 2, 3)
    p = 1.0
    s = (p / 2) * np.outer(geom.a_t.conj(), geom.a_t)
    val = crb_point(s, geom, 1.0, 1.0, 1)
    assert abs(val - 1.0 / (8 * np.pi ** 2)) <= 1e-12


def test_crb_point_general_matches_fisher_matrix(rng):
    # independent oracle: CRB = sigma^2/(2|a|^2 L) tr(A^H A S) / det(F)
    for _ in range(50):
        m = int(rng.integers(2, 6))
        n_s = m + int(rng.integers(1, 5))
        geom = TargetGeometry(rng.uniform(-1.0, 1.0), m, n_s)
        s = random_covariance(rng, m, power=rng.uniform(0.5, 4.0))
        a_mat = np.outer(geom.a_r, geom.a_t)
        da_mat = np.outer(geom.a_r, geom.da_t) + np.outer(geom.da_r, geom.a_t)
        t_dd = np.trace(da_mat.conj().T @ da_mat @ s).real
        t_da = np.trace(da_mat.conj().T @ a_mat @ s)
        t_aa = np.trace(a_mat.conj().T @ a_mat @ s).real
        sigma_sq, l_snap, alpha = 0.5, 16, 0.3 + 0.1j
        expect = sigma_sq * t_aa / (2 * abs(alpha) ** 2 * l_snap
                                    * (t_dd * t_aa - abs(t_da) ** 2))
        got = crb_point(s, geom, sigma_sq, alpha, l_snap)
        assert abs(got - expect) <= 1e-9 * expect


def test_crb_point_scaling_inverse_in_power(rng):
    geom = TargetGeometry(0.3, 4, 9)
    s = random_covariance(rng, 4, power=1.0)
    c1 = crb_point(s, geom, 1.0, 1.0, 4)
    c2 = crb_point(2.0 * s, geom, 1.0, 1.0, 4)
    assert abs(c2 - 0.5 * c1) <= 1e-10 * c1


def test_crb_point_unidentifiable_gives_inf(rng):
    # power orthogonal to both steering directions carries no angle info
    geom = TargetGeometry(0.2, 4, 9)
    basis = np.linalg.qr(np.column_stack([geom.a_t.conj(), geom.da_t.conj(),
                                          rng.standard_normal(4) + 0j]))[0]
    v = basis[:, 2]
    s = np.outer(v, v.conj())
    assert crb_point(s, geom, 1.0, 1.0, 1) == math.inf
    # zero covariance likewise
    assert crb_point(np.zeros((4, 4)), geom, 1.0, 1.0, 1) == math.inf


def test_crb_extended_closed_forms(rng):
    # isotropic covariance: CRB = sigma^2 N_S M^2 / (L P)
    m, n_s, l_snap, p = 4, 9, 8, 2.0
    s = (p / m) * np.eye(m)
    val = crb_extended(s, 1.0, n_s, m, l_snap)
    assert abs(val - n_s * m * m / (l_snap * p)) <= 1e-12 * val
    # general PD: matches direct trace inverse
    s2 = random_covariance(rng, m, power=p) + 0.1 * np.eye(m)
    direct = np.trace(np.linalg.inv(s2)).real * n_s / l_snap
    assert abs(crb_extended(s2, 1.0, n_s, m, l_snap) - direct) <= 1e-9 * direct


def test_crb_extended_rank_deficient_inf(rng):
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    s = np.outer(v, v.conj())
    assert crb_extended(s, 1.0, 9, 4, 8) == math.inf


def test_crb_extended_requires_ns_ge_m():
    with pytest.raises(InvalidInputError):
        crb_extended(np.eye(6), 1.0, 4, 6, 8)


def test_as_covariance_validation(rng):
    s = random_covariance(rng, 3, power=1.0)
    as_covariance(s, power=1.0)
    with pytest.raises(InvalidInputError):
        as_covariance(s - 0.9 * np.eye(3))
    with pytest.raises(InvalidInputError):
        as_covariance(2.0 * s, power=1.0)
    with pytest.raises(InvalidInputError):
        rate(s, np.eye(3), -1.0)


def test_evaluate_bundles_point(rng):
    model = random_model(rng)
    s = random_covariance(rng, model.m, power=model.power)
    pt = evaluate(s, model)
    assert pt.rate_bpshz > 0
    assert pt.energy_w > 0
    assert pt.energy_dc_w == pytest.approx(0.5 * pt.energy_w)
    assert pt.crb > 0
