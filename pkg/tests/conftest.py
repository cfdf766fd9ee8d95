import numpy as np
import pytest

from compctrl.model import LtiPlant, LtvPlant, load_bundled_plant


def random_lti(rng, n=3, m=1, p=1, radius=0.9, q_floor=0.05):
    """Random stable LTI plant with positive definite Q (so PBH is trivial)."""
    A = rng.standard_normal((n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    if rho > 0:
        A = A * (radius / rho)
    Bu = rng.standard_normal((n, m))
    Bw = rng.standard_normal((n, p))
    M = rng.standard_normal((n, n))
    Q = M.T @ M / n + q_floor * np.eye(n)
    return LtiPlant(
        A=A, Bu=Bu, Bw=Bw, Q=Q, R_half=np.eye(m), x0=np.zeros(n)
    )


def random_unstable_stabilizable(rng, n=3, m=None, p=1, radius=1.3):
    """Unstable plant with Bu square (controllable a.s. => stabilizable)."""
    if m is None:
        m = n
    A = rng.standard_normal((n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    if rho > 0:
        A = A * (radius / rho)
    Bu = rng.standard_normal((n, m)) + 0.5 * np.eye(n, m)
    Bw = rng.standard_normal((n, p))
    M = rng.standard_normal((n, n))
    Q = M.T @ M / n + 0.1 * np.eye(n)
    return LtiPlant(A=A, Bu=Bu, Bw=Bw, Q=Q, R_half=np.eye(m), x0=np.zeros(n))


def random_ltv(rng, T=8, n=2, m=1, p=1, scale=0.8):
    """Random finite-horizon time-varying plant with x0 = 0."""
    A = rng.standard_normal((T, n, n)) * (scale / np.sqrt(n))
    Bu = rng.standard_normal((T, n, m))
    Bw = rng.standard_normal((T, n, p))
    M = rng.standard_normal((T, n, n))
    Q = np.einsum("tij,tkj->tik", M, M) / n
    R_half = np.repeat(np.eye(m)[None], T, axis=0)
    return LtvPlant(A=A, Bu=Bu, Bw=Bw, Q=Q, R_half=R_half, x0=np.zeros(n))


def scalar_lti(a=1.0, bu=1.0, bw=1.0, q=1.0):
    return LtiPlant(
        A=np.array([[a]]),
        Bu=np.array([[bu]]),
        Bw=np.array([[bw]]),
        Q=np.array([[q]]),
        R_half=np.eye(1),
        x0=np.zeros(1),
    )


@pytest.fixture(scope="session")
def boeing():
    return load_bundled_plant("boeing747")


@pytest.fixture()
def rng():
    return np.random.default_rng(20260816)
