"""Tests for the ellipsoid and log-barrier engines."""

import math

import numpy as np
import pytest

from creopt.engine import (BarrierParams, BarrierProblem, CallableTerm,
                           DiagLogDetRateTerm, HermMap, LinearTerm,
                           LogDetRateTerm, OracleResponse, PSDIneq,
                           ReciprocalTerm, ScalarIneq, SumTerm, TraceInvTerm,
                           VarLayout, barrier_maximize, ellipsoid_solve,
                           finite_difference_gradient, linear_matrix_coef,
                           phase_one)
from creopt.errors import IllConditionedError, InvalidInputError

from conftest import random_psd


# ---------------------------------------------------------------- ellipsoid

def test_ellipsoid_scalar_absolute_value():
    def oracle(x):
        return OracleResponse("objective", np.array([np.sign(x[0] - 3.0)]),
                              abs(x[0] - 3.0))

    res = ellipsoid_solve(1, np.array([0.0]), 10.0, oracle, tol=1e-8)
    assert res.status == "converged"
    assert abs(res.x[0] - 3.0) <= 1e-6


def test_ellipsoid_quadratic_with_feasibility_cut():
    target = np.array([1.0, 2.0])

    def oracle(x):
        if x[0] + x[1] > 4.0:  # feasible set: x0 + x1 <= 4
            return OracleResponse("feasibility", np.array([1.0, 1.0]),
                                  x[0] + x[1] - 4.0)
        d = x - target
        return OracleResponse("objective", 2.0 * d, float(d @ d))

    res = ellipsoid_solve(2, np.array([5.0, 5.0]), 20.0, oracle, tol=1e-10)
    assert np.max(np.abs(res.x - target)) <= 1e-4
    assert res.value <= 1e-7


def test_ellipsoid_volume_ratio_bound(rng):
    # every iteration must shrink the volume by at least exp(-1/(2(n+1)))
    for n in (2, 4, 6):
        target = rng.standard_normal(n)

        def oracle(x, t=target):
            d = x - t
            return OracleResponse("objective", 2.0 * d, float(d @ d))

        res = ellipsoid_solve(n, np.zeros(n), 10.0, oracle, tol=1e-9,
                              max_iter=500, collect_history=True)
        logs = [h["logdet_shape"] for h in res.history]
        bound = -1.0 / (n + 1.0) + 1e-9  # log of squared volume ratio
        for a, b in zip(logs, logs[1:]):
            assert b - a <= bound + 1e-9


def test_ellipsoid_gap_certificate(rng):
    n = 3
    target = np.array([0.5, -0.25, 1.5])

    def oracle(x):
        d = x - target
        return OracleResponse("objective", 2.0 * d, float(d @ d) + 1.0)

    res = ellipsoid_solve(n, np.zeros(n), 8.0, oracle, tol=1e-7)
    assert res.status == "converged"
    assert res.lower_bound <= 1.0 + 1e-12
    assert res.value - res.lower_bound <= 1e-7 * max(1.0, res.value)


def test_ellipsoid_deep_cut_faster_than_central():
    # count iterations to localize a point feasible set {x : |x_i| <= 1e-3}
    def make_oracle(deep):
        def oracle(x):
            i = int(np.argmax(np.abs(x)))
            if abs(x[i]) > 1e-3:
                g = np.zeros(3)
                g[i] = np.sign(x[i])
                viol = abs(x[i]) - 1e-3 if deep else 0.0
                return OracleResponse("feasibility", g, viol)
            return OracleResponse("objective", 2.0 * x, float(x @ x))
        return oracle

    deep = ellipsoid_solve(3, np.full(3, 5.0), 20.0, make_oracle(True), tol=1e-4)
    shallow = ellipsoid_solve(3, np.full(3, 5.0), 20.0, make_oracle(False), tol=1e-4)
    assert deep.iterations < shallow.iterations


def test_ellipsoid_invalid_inputs():
    def oracle(x):
        return OracleResponse("objective", np.ones(2), 0.0)

    with pytest.raises(InvalidInputError):
        ellipsoid_solve(0, np.zeros(0), 1.0, oracle)
    with pytest.raises(InvalidInputError):
        ellipsoid_solve(2, np.zeros(2), -1.0, oracle)
    with pytest.raises(InvalidInputError):
        ellipsoid_solve(3, np.zeros(3), 1.0, oracle)  # wrong subgrad dim


def test_ellipsoid_degenerate_raises():
    # contradictory feasibility cuts never admit an objective evaluation and
    # flatten the ellipsoid until the condition check trips
    def oracle(x):
        return OracleResponse("feasibility", np.array([1.0, 0.0]), 0.0)

    with pytest.raises(IllConditionedError):
        ellipsoid_solve(2, np.zeros(2), 5.0, oracle, max_iter=100000)


# ---------------------------------------------------------- hermitian embed

def test_herm_map_roundtrip(rng):
    for d in (1, 2, 4, 6):
        hm = HermMap(d)
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        s = 0.5 * (a + a.conj().T)
        x = hm.to_vec(s)
        assert x.shape == (d * d,)
        assert np.max(np.abs(hm.to_mat(x) - s)) <= 1e-14


def test_herm_map_grad_consistency(rng):
    # df = tr(G dS) must match the numeric gradient of x -> tr(G S(x))
    d = 3
    hm = HermMap(d)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    g = 0.5 * (g + g.conj().T)

    def f(x):
        return float(np.real(np.trace(g @ hm.to_mat(x))))

    x0 = rng.standard_normal(d * d)
    fd = finite_difference_gradient(f, x0)
    assert np.max(np.abs(fd - hm.grad_vec(g))) <= 1e-6


# ------------------------------------------------------------ term calculus

def _check_term(term, x0, tol_g=1e-6, tol_h=5e-5):
    fd_g = finite_difference_gradient(term.value, x0)
    assert np.max(np.abs(fd_g - term.grad(x0))) <= tol_g * max(1.0, np.max(np.abs(fd_g)))
    h = term.hess(x0)
    for k in range(x0.size):
        e = np.zeros(x0.size)
        step = 1e-5 * max(1.0, abs(x0[k]))
        e[k] = step
        fd_row = (term.grad(x0 + e) - term.grad(x0 - e)) / (2 * step)
        assert np.max(np.abs(fd_row - h[:, k])) <= tol_h * max(1.0, np.max(np.abs(h)))


def test_logdet_rate_term_calculus(rng):
    layout = VarLayout([("herm", 3)])
    g = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    term = LogDetRateTerm(layout, 0, g)
    s0 = random_psd(rng, 3, jitter=0.5)
    _check_term(term, layout.pack(s0))


def test_trace_inv_term_calculus(rng):
    layout = VarLayout([("herm", 3)])
    term = TraceInvTerm(layout, 0)
    s0 = random_psd(rng, 3, jitter=1.0)
    _check_term(term, layout.pack(s0))


def test_diag_logdet_term_calculus(rng):
    layout = VarLayout([("scalar", 4)])
    g = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    term = DiagLogDetRateTerm(layout, 0, g)
    _check_term(term, rng.uniform(0.5, 2.0, 4))


def test_reciprocal_and_linear_terms(rng):
    term = ReciprocalTerm(1, weight=3.0)
    x = np.array([1.0, 2.0, 0.5])
    assert term.value(x) == pytest.approx(1.5)
    _check_term(term, x)
    lin = LinearTerm(np.array([1.0, -2.0, 0.0]), const=4.0)
    assert lin.value(x) == pytest.approx(1.0)
    _check_term(lin, x)


def test_linear_matrix_coef(rng):
    layout = VarLayout([("herm", 3), ("scalar", 2)])
    g = random_psd(rng, 3)
    coef = linear_matrix_coef(layout, 0, g)
    s = random_psd(rng, 3)
    x = layout.pack(s, np.zeros(2))
    assert coef @ x == pytest.approx(np.trace(g @ s).real, rel=1e-12)


def test_psd_ineq_barrier_calculus(rng):
    layout = VarLayout([("herm", 3)])
    con = PSDIneq.from_herm_block(layout, 0)
    s0 = random_psd(rng, 3, jitter=0.8)
    x0 = layout.pack(s0)
    g, h = con.barrier_grad_hess(x0)
    fd = finite_difference_gradient(lambda x: con.barrier_value(x), x0)
    assert np.max(np.abs(fd - g)) <= 1e-5 * max(1.0, np.max(np.abs(g)))
    e = np.zeros(x0.size)
    e[2] = 1e-5
    fd_row = np.array(
        [(con.barrier_grad_hess(x0 + e)[0][k] - con.barrier_grad_hess(x0 - e)[0][k])
         / (2e-5) for k in range(x0.size)])
    assert np.max(np.abs(fd_row - h[:, 2])) <= 1e-4 * max(1.0, np.max(np.abs(h)))


# --------------------------------------------------------------- barrier

def test_barrier_scalar_box():
    # maximize log x subject to 0.1 <= x <= 2 -> x* = 2
    layout = VarLayout([("scalar", 1)])
    obj = CallableTerm(lambda x: math.log(x[0]),
                       lambda x: np.array([1.0 / x[0]]),
                       lambda x: np.array([[-1.0 / x[0] ** 2]]))
    cons = [ScalarIneq(LinearTerm(np.array([-1.0]), 2.0), "ub"),
            ScalarIneq(LinearTerm(np.array([1.0]), -0.1), "lb")]
    res = barrier_maximize(obj, cons, np.array([0.5]))
    assert abs(res.x[0] - 2.0) <= 1e-6
    assert res.kkt_residual <= 1e-6


def test_barrier_logdet_isotropic(rng):
    # maximize log det S s.t. tr(S) <= M -> S = I
    m = 3
    layout = VarLayout([("herm", m)])
    hm = HermMap(m)

    def val(x):
        s = hm.to_mat(x)
        sign, ld = np.linalg.slogdet(s)
        return float(ld) if sign.real > 0 else -math.inf

    def grad(x):
        return hm.grad_vec(np.linalg.inv(hm.to_mat(x)))

    def hess(x):
        si = np.linalg.inv(hm.to_mat(x))
        return -hm.bilinear(si, si)

    obj = CallableTerm(val, grad, hess)
    cons = [PSDIneq.from_herm_block(layout, 0, "psd"),
            ScalarIneq(LinearTerm(-linear_matrix_coef(layout, 0, np.eye(m)), m), "pow")]
    res = barrier_maximize(obj, cons, layout.pack(0.1 * np.eye(m)))
    s_opt = hm.to_mat(res.x)
    assert np.max(np.abs(s_opt - np.eye(m))) <= 1e-5


def test_barrier_energy_beamforming(rng):
    # maximize tr(H S H^H) s.t. tr(S) <= P, S >= 0 -> P sigma1^2
    m, p_bud = 4, 2.0
    h = rng.standard_normal((2, m)) + 1j * rng.standard_normal((2, m))
    layout = VarLayout([("herm", m)])
    obj_coef = linear_matrix_coef(layout, 0, h.conj().T @ h)
    cons = [PSDIneq.from_herm_block(layout, 0, "psd"),
            ScalarIneq(LinearTerm(-linear_matrix_coef(layout, 0, np.eye(m)), p_bud), "pow")]
    res = barrier_maximize(LinearTerm(obj_coef), cons, layout.pack((p_bud / (2 * m)) * np.eye(m)))
    smax = np.linalg.svd(h, compute_uv=False)[0]
    assert abs(res.value - p_bud * smax ** 2) <= 1e-6 * p_bud * smax ** 2


def test_barrier_requires_feasible_start():
    layout = VarLayout([("scalar", 1)])
    cons = [ScalarIneq(LinearTerm(np.array([1.0]), -1.0), "lb")]  # x >= 1
    with pytest.raises(InvalidInputError):
        barrier_maximize(LinearTerm(np.array([-1.0])), cons, np.array([0.0]))


def test_barrier_quadratic_objective_fd_hessian():
    # CallableTerm without explicit Hessian exercises the FD fallback
    target = np.array([0.3, -0.7])
    obj = CallableTerm(lambda x: -float((x - target) @ (x - target)),
                       lambda x: -2.0 * (x - target))
    cons = [ScalarIneq(LinearTerm(np.array([1.0, 0.0]), 5.0), "b1"),
            ScalarIneq(LinearTerm(np.array([-1.0, 0.0]), 5.0), "b2"),
            ScalarIneq(LinearTerm(np.array([0.0, 1.0]), 5.0), "b3"),
            ScalarIneq(LinearTerm(np.array([0.0, -1.0]), 5.0), "b4")]
    res = barrier_maximize(obj, cons, np.zeros(2))
    assert np.max(np.abs(res.x - target)) <= 1e-5


def test_phase_one_feasible_and_infeasible():
    # feasible: x in [0, 1] with target slack; infeasible: x <= 0 and x >= 1 jointly with x in small box
    cons = [ScalarIneq(LinearTerm(np.array([1.0]), 0.0), "ge0"),
            ScalarIneq(LinearTerm(np.array([-1.0]), 1.0), "le1")]
    x, s = phase_one(cons, np.array([3.0]))
    assert s > 0.2
    assert cons[0].slack(x) > 0 and cons[1].slack(x) > 0
    bad = [ScalarIneq(LinearTerm(np.array([1.0]), -2.0), "ge2"),
           ScalarIneq(LinearTerm(np.array([-1.0]), 1.0), "le1")]
    x2, s2 = phase_one(bad, np.array([0.5]))
    assert s2 < -0.4  # max slack certifies infeasibility


def test_barrier_problem_dataclass(rng):
    layout = VarLayout([("scalar", 2)])
    obj = LinearTerm(np.array([1.0, 1.0]))
    cons = [ScalarIneq(LinearTerm(np.array([-1.0, 0.0]), 1.0), "a"),
            ScalarIneq(LinearTerm(np.array([0.0, -1.0]), 1.0), "b"),
            ScalarIneq(LinearTerm(np.array([1.0, 0.0]), 0.0), "c"),
            ScalarIneq(LinearTerm(np.array([0.0, 1.0]), 0.0), "d")]
    prob = BarrierProblem(layout, obj, cons, np.array([0.5, 0.5]))
    res = prob.solve(BarrierParams(outer_tol=1e-10))
    assert abs(res.value - 2.0) <= 1e-7
