"""Shared fixtures and random-instance helpers for the test suite."""

import numpy as np
import pytest

from creopt.channels import ChannelSpec, ScenarioConfig


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_psd(rng, n, scale=1.0, jitter=0.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a @ a.conj().T) / n + jitter * np.eye(n)


def random_covariance(rng, n, power=1.0):
    s = random_psd(rng, n)
    return s * (power / np.real(np.trace(s)))


def random_model(rng, m=4, n_s=8, n_id=2, n_eh=2, case="point", theta=None,
                 power=1.0, sigma=1.0, alpha=1.0, l_snapshots=1, kappa=0.0):
    """Unit-scale random instance: channels are dense complex Gaussian."""
    h_id = (rng.standard_normal((n_id, m)) + 1j * rng.standard_normal((n_id, m))) / np.sqrt(2)
    h_eh = (rng.standard_normal((n_eh, m)) + 1j * rng.standard_normal((n_eh, m))) / np.sqrt(2)
    theta = rng.uniform(-1.0, 1.0) if theta is None else theta
    cfg = ScenarioConfig(case=case, m=m, n_s=n_s, n_id=n_id, n_eh=n_eh,
                         power_w=power, sigma_s_sq=sigma, sigma_id_sq=sigma,
                         l_snapshots=l_snapshots, zeta=0.5, alpha=alpha, theta=theta,
                         id_channel=ChannelSpec(kind="fixed", matrix=h_id),
                         eh_channel=ChannelSpec(kind="fixed", matrix=h_eh))
    return cfg.build()


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
