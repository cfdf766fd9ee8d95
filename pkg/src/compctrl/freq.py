"""Frequency-domain analysis of closed loops.

Every causal controller here closes the loop into a discrete LTI system
mapping the disturbance w to the stacked performance output (s; u) with
s = Q^{1/2} x.  State-feedback laws give an n-state realization; the
ratio-optimal controller, whose internal filter and synthetic state are
driven by w alone, folds into a 3n-state realization with blocks for the
plant state, the synthetic upper state, and the filter state.

Per-frequency cost ratio: with F and G the open-loop maps u -> s and
w -> s, the clairvoyant cost at frequency omega has Gram
N = G* (I + F F*)^{-1} G, and the controller's cost Gram is
M = T_K* T_K, so the reported ratio is the largest eigenvalue of
N^{-1/2} M N^{-1/2}.  Frequencies where N is numerically singular are
reported as the string "degenerate-frequency" instead of a number.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .controllers import CompetitiveController, StateFeedbackController, ZeroController
from .model import LtiPlant
from .sim import atomic_write_text

__all__ = [
    "ClosedLoop",
    "closed_loop",
    "transfer_at",
    "open_loop_maps",
    "clairvoyant_gram",
    "sigma_max",
    "peak_gain",
    "per_freq_cr",
    "SweepResult",
    "sweep",
    "write_sweep_csv",
    "extremal_dc",
    "default_grid",
]

DEGENERATE_FREQUENCY = "degenerate-frequency"
_SINGULAR_REL = 1e-12


@dataclass(frozen=True)
class ClosedLoop:
    """Discrete LTI realization of w -> (s; u)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray


def closed_loop(plant: LtiPlant, controller) -> ClosedLoop:
    """Fold a time-invariant causal controller into the plant."""
    if not isinstance(plant, LtiPlant):
        raise TypeError("closed_loop expects a time-invariant plant")
    if getattr(controller, "horizon", None) is not None:
        raise ValueError("closed_loop requires an infinite-horizon controller")
    A, Bu, Bw, Qh = plant.A, plant.Bu, plant.Bw, plant.Q_half
    n, m, p = plant.n, plant.m, plant.p
    if isinstance(controller, ZeroController):
        C = np.vstack([Qh, np.zeros((m, n))])
        return ClosedLoop(A=A, B=Bw, C=C, D=np.zeros((n + m, p)))
    if isinstance(controller, StateFeedbackController):
        Kx, Kw = controller.Kx, controller.Kw
        Acl = A - Bu @ Kx
        Bcl = Bw - Bu @ Kw
        C = np.vstack([Qh, -Kx])
        D = np.vstack([np.zeros((n, p)), -Kw])
        return ClosedLoop(A=Acl, B=Bcl, C=C, D=D)
    if isinstance(controller, CompetitiveController):
        syn = controller.synthetic
        KSh = syn.Ahat[:n, n:]  # K Sigma^{1/2}
        M = syn.M_filter  # Sigma^{-1/2} Q^{1/2}
        Ak = syn.A_filter  # A - K Q^{1/2}
        Ka, Kb = controller.Kxi[:, :n], controller.Kxi[:, n:]
        gwp = controller.Kwp
        Ga = Ka
        Gn = Kb @ M + gwp @ M @ Ak
        Gw = gwp @ M @ Bw
        Acl = np.block(
            [
                [A, -Bu @ Ga, -Bu @ Gn],
                [np.zeros((n, n)), A - Bu @ Ga, KSh @ M - Bu @ Gn],
                [np.zeros((n, 2 * n)), Ak],
            ]
        )
        Bcl = np.vstack([Bw - Bu @ Gw, -Bu @ Gw, Bw])
        C = np.block(
            [
                [Qh, np.zeros((n, 2 * n))],
                [np.zeros((m, n)), -Ga, -Gn],
            ]
        )
        D = np.vstack([np.zeros((n, p)), -Gw])
        return ClosedLoop(A=Acl, B=Bcl, C=C, D=D)
    raise TypeError(f"no frequency response for controller kind {controller.kind!r}")


def transfer_at(loop: ClosedLoop, z: complex) -> np.ndarray:
    """Evaluate C (zI - A)^{-1} B + D."""
    nA = loop.A.shape[0]
    X = np.linalg.solve(z * np.eye(nA) - loop.A, loop.B)
    return loop.C @ X + loop.D


def open_loop_maps(plant: LtiPlant, z: complex):
    """The maps F(z): u -> s and G(z): w -> s of the open plant."""
    n = plant.n
    X = np.linalg.solve(
        z * np.eye(n) - plant.A, np.hstack([plant.Bu, plant.Bw])
    )
    S = plant.Q_half @ X
    return S[:, : plant.m], S[:, plant.m :]


def clairvoyant_gram(plant: LtiPlant, omega: float) -> np.ndarray:
    """N(omega) = G* (I + F F*)^{-1} G at z = e^{i omega}."""
    z = np.exp(1j * float(omega))
    F, G = open_loop_maps(plant, z)
    n = plant.n
    N = G.conj().T @ np.linalg.solve(np.eye(n) + F @ F.conj().T, G)
    return 0.5 * (N + N.conj().T)


def sigma_max(loop: ClosedLoop, omega: float) -> float:
    """Largest singular value of the closed loop at z = e^{i omega}."""
    T = transfer_at(loop, np.exp(1j * float(omega)))
    return float(np.linalg.svd(T, compute_uv=False)[0])


def default_grid(n_points: int = 512) -> np.ndarray:
    return np.linspace(0.0, np.pi, int(n_points))


def peak_gain(loop: ClosedLoop, omegas=None) -> float:
    """Max singular value over a frequency grid (default 512 points)."""
    if omegas is None:
        omegas = default_grid()
    return max(sigma_max(loop, w) for w in omegas)


def per_freq_cr(
    plant: LtiPlant, loop: ClosedLoop, omega: float
) -> Union[float, str]:
    """Largest eigenvalue of N^{-1/2} (T_K* T_K) N^{-1/2} at one frequency."""
    N = clairvoyant_gram(plant, omega)
    lam, V = np.linalg.eigh(N)
    if lam[-1] <= 0.0 or lam[0] <= _SINGULAR_REL * lam[-1]:
        return DEGENERATE_FREQUENCY
    Ninv_half = (V / np.sqrt(lam)) @ V.conj().T
    T = transfer_at(loop, np.exp(1j * float(omega)))
    M = T.conj().T @ T
    W = Ninv_half @ M @ Ninv_half
    W = 0.5 * (W + W.conj().T)
    return float(np.linalg.eigvalsh(W)[-1])


@dataclass
class SweepResult:
    """Per-frequency peak gain and cost ratio for several controllers."""

    omegas: np.ndarray
    names: list
    sigma_max: dict
    per_freq_cr: dict  # name -> list of float or "degenerate-frequency"


def sweep(plant: LtiPlant, named_controllers, n_points: int = 512) -> SweepResult:
    """Evaluate sigma_max and the per-frequency ratio on a uniform grid."""
    if isinstance(named_controllers, dict):
        items = list(named_controllers.items())
    else:
        items = list(named_controllers)
    omegas = default_grid(n_points)
    names, sig, cr = [], {}, {}
    for name, ctrl in items:
        loop = closed_loop(plant, ctrl)
        names.append(name)
        sig[name] = np.array([sigma_max(loop, w) for w in omegas])
        cr[name] = [per_freq_cr(plant, loop, w) for w in omegas]
    return SweepResult(omegas=omegas, names=names, sigma_max=sig, per_freq_cr=cr)


def write_sweep_csv(path: str, result: SweepResult) -> None:
    lines = ["controller,omega,sigma_max_TK,per_freq_cr"]
    for name in result.names:
        sig = result.sigma_max[name]
        cr = result.per_freq_cr[name]
        for i, omega in enumerate(result.omegas):
            r = cr[i] if isinstance(cr[i], str) else "%.17g" % cr[i]
            lines.append(f"{name},{'%.17g' % omega},{'%.17g' % sig[i]},{r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def extremal_dc(plant: LtiPlant, controller):
    """Best- and worst-case constant disturbance directions.

    Unit eigenvectors of T_K(1)' T_K(1) for the smallest and largest
    eigenvalue, signed so the first nonzero coordinate is positive.
    Returns (best, worst).
    """
    loop = closed_loop(plant, controller)
    T1 = transfer_at(loop, 1.0 + 0.0j)
    T1 = np.real(T1)
    M = T1.T @ T1
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    best, worst = V[:, 0].copy(), V[:, -1].copy()

    def fix_sign(v):
        idx = np.argmax(np.abs(v) > 1e-12 * max(np.abs(v).max(), 1e-300))
        return -v if v[idx] < 0 else v

    return fix_sign(best), fix_sign(worst)
