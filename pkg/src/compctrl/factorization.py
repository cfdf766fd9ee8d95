"""Whitening/spectral factorization and the doubled synthetic system.

The reduction implemented here rewrites the ratio-against-clairvoyant control
problem as a disturbance-attenuation problem.  Its engine is a factorization
of the clairvoyant cost operator: a causal, causally invertible Delta with

    Delta Delta* = I + F F*        (finite horizon, block operators)
    Delta(z) Delta*(1/conj(z)) = I + F(z) F*(1/conj(z))   (infinite horizon)

obtained from a forward Kalman-style Riccati recursion (finite horizon) or
its stabilizing fixed point (infinite horizon).  From the factor we assemble
a doubled 2n-state synthetic plant (Ahat, Buhat, Bwhat, Qhat) driven by the
filtered disturbance w' = Delta^{-1} G w, which is a *strictly causal*
function of w and can therefore be computed online by the small filter

    nu_{t+1} = (A - K Q^{1/2}) nu_t + B_w w_t,   w'_t = Sigma^{-1/2} Q^{1/2} nu_t,

with nu_0 = 0.  Disturbance-attenuation synthesis on the synthetic plant then
yields ratio-optimal controllers for the original plant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .model import LtiPlant, LtvPlant, inv_sqrt_pd, sqrt_psd
from .riccati import is_stable, pbh_detectable, pbh_stabilizable, spectral_radius, sym

__all__ = [
    "FactorizationError",
    "WhiteningSchedule",
    "SpectralFactor",
    "SyntheticSystem",
    "SyntheticSystemFH",
    "WPrimeFilter",
    "whitening_fh",
    "spectral_factor_ih",
    "build_synthetic",
    "wprime_step",
    "wprime_run",
    "dense_delta",
    "delta_transfer",
    "delta_inv_transfer",
]


class FactorizationError(RuntimeError):
    """Raised when a factorization precondition or fixed point fails.

    Unlike the gamma-feasibility verdicts, factorization failures are plant
    properties (gamma-independent), so no bisection ever needs to consume
    them as values.
    """


@dataclass(frozen=True)
class WhiteningSchedule:
    """Forward filtering recursion output for a finite-horizon plant.

    P has T+1 entries with P[0] = 0; K, Sigma (and the cached square roots)
    have T entries, indexed by the step at which they apply.
    """

    P: np.ndarray  # (T+1, n, n)
    K: np.ndarray  # (T, n, n)
    Sigma: np.ndarray  # (T, n, n)
    Sigma_half: np.ndarray  # (T, n, n)
    Sigma_inv_half: np.ndarray  # (T, n, n)

    @property
    def T(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class SpectralFactor:
    """Stabilizing solution of the forward Riccati fixed point (LTI case).

    Defines Delta(z) = (I + Q^{1/2}(zI - A)^{-1} K) Sigma^{1/2} with
    A - K Q^{1/2} stable, so Delta is causal and causally invertible.
    """

    P: np.ndarray
    K: np.ndarray
    Sigma: np.ndarray
    Sigma_half: np.ndarray
    Sigma_inv_half: np.ndarray
    A_whiten: np.ndarray  # A - K Q^{1/2}
    residual: float
    iterations: int


@dataclass(frozen=True)
class SyntheticSystem:
    """Doubled-dimension LTI synthetic plant plus its w'-filter matrices."""

    Ahat: np.ndarray  # (2n, 2n)
    Buhat: np.ndarray  # (2n, m)
    Bwhat: np.ndarray  # (2n, n)
    Qhat: np.ndarray  # (2n, 2n)
    A_filter: np.ndarray  # (n, n)   nu_{t+1} = A_filter nu_t + B_filter w_t
    B_filter: np.ndarray  # (n, p)
    M_filter: np.ndarray  # (n, n)   w'_t = M_filter nu_t

    @property
    def n(self) -> int:
        return self.A_filter.shape[0]

    @property
    def m(self) -> int:
        return self.Buhat.shape[1]


@dataclass(frozen=True)
class SyntheticSystemFH:
    """Time-varying synthetic plant; sequences indexed t = 0..T-1."""

    Ahat: np.ndarray  # (T, 2n, 2n)
    Buhat: np.ndarray  # (T, 2n, m)
    Bwhat: np.ndarray  # (T, 2n, n)
    Qhat: np.ndarray  # (T, 2n, 2n)
    A_filter: np.ndarray  # (T, n, n)
    B_filter: np.ndarray  # (T, n, p)
    M_filter: np.ndarray  # (T, n, n)

    @property
    def T(self) -> int:
        return self.Ahat.shape[0]

    @property
    def n(self) -> int:
        return self.A_filter.shape[1]

    @property
    def m(self) -> int:
        return self.Buhat.shape[2]

    def as_ltv_plant(self) -> LtvPlant:
        """View the synthetic system as an ordinary finite-horizon plant."""
        T, m = self.T, self.m
        return LtvPlant(
            A=self.Ahat,
            Bu=self.Buhat,
            Bw=self.Bwhat,
            Q=self.Qhat,
            R_half=np.repeat(np.eye(m)[None], T, axis=0),
            x0=np.zeros(2 * self.n),
        )


def whitening_fh(plant: LtvPlant) -> WhiteningSchedule:
    """Run the forward whitening recursion from P_0 = 0.

    Sigma_t = I + Q_t^{1/2} P_t Q_t^{1/2},  K_t = A_t P_t Q_t^{1/2} Sigma_t^{-1},
    P_{t+1} = A_t P_t A_t' + B_u,t B_u,t' - K_t Sigma_t K_t'.

    Sigma_t >= I analytically; a numerically singular Sigma is reported as a
    numeric failure.
    """
    T, n = plant.T, plant.n
    P = np.zeros((T + 1, n, n))
    K = np.zeros((T, n, n))
    Sigma = np.zeros((T, n, n))
    Sigma_half = np.zeros((T, n, n))
    Sigma_inv_half = np.zeros((T, n, n))
    eye = np.eye(n)
    for t in range(T):
        Qh = plant.Q_half[t]
        Sig = sym(eye + Qh @ P[t] @ Qh)
        lam = np.linalg.eigvalsh(Sig)
        if lam.min() < 1e-9:
            raise FactorizationError(
                f"numeric-failure: innovation matrix singular at t={t} "
                f"(min eigenvalue {lam.min():.3e})"
            )
        A = plant.A[t]
        Kt = np.linalg.solve(Sig, (A @ P[t] @ Qh).T).T
        Pn = A @ P[t] @ A.T + plant.Bu[t] @ plant.Bu[t].T - Kt @ Sig @ Kt.T
        P[t + 1] = sym(Pn)
        K[t] = Kt
        Sigma[t] = Sig
        Sigma_half[t] = sqrt_psd(Sig)
        Sigma_inv_half[t] = inv_sqrt_pd(Sig)
    return WhiteningSchedule(
        P=P, K=K, Sigma=Sigma, Sigma_half=Sigma_half, Sigma_inv_half=Sigma_inv_half
    )


def spectral_factor_ih(
    plant: LtiPlant,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    P0: Optional[np.ndarray] = None,
) -> SpectralFactor:
    """Stabilizing fixed point of P = APA' + B_u B_u' - K Sigma K'.

    Preconditions (PBH rank tests, singular-value threshold 1e-8): (A, B_u)
    stabilizable and (A, Q^{1/2}) detectable.  The iteration starts from
    P = 0 (or a PSD warm start ``P0``, e.g. from a nearby plant); failure to
    converge within the cap reports "no-stabilizing-solution".
    """
    A, Bu, Qh = plant.A, plant.Bu, plant.Q_half
    n = plant.n
    if not pbh_stabilizable(A, Bu):
        raise FactorizationError("precondition failed: (A, B_u) not stabilizable")
    if not pbh_detectable(A, Qh):
        raise FactorizationError("precondition failed: (A, Q^{1/2}) not detectable")
    eye = np.eye(n)
    BBt = Bu @ Bu.T
    P = np.zeros((n, n)) if P0 is None else np.asarray(P0, dtype=float).copy()
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        Sig = sym(eye + Qh @ P @ Qh)
        K = np.linalg.solve(Sig, (A @ P @ Qh).T).T
        Pn = sym(A @ P @ A.T + BBt - K @ Sig @ K.T)
        diff = np.abs(Pn - P).max()
        P = Pn
        if diff < tol * max(1.0, np.abs(P).max()):
            converged = True
            break
    if not converged:
        raise FactorizationError("no-stabilizing-solution: fixed point did not converge")
    Sig = sym(eye + Qh @ P @ Qh)
    K = np.linalg.solve(Sig, (A @ P @ Qh).T).T
    residual = float(np.abs(sym(A @ P @ A.T + BBt - K @ Sig @ K.T) - P).max())
    A_whiten = A - K @ Qh
    if not is_stable(A_whiten):
        raise FactorizationError(
            f"no-stabilizing-solution: whitening closed loop has spectral "
            f"radius {spectral_radius(A_whiten):.6f}"
        )
    return SpectralFactor(
        P=P,
        K=K,
        Sigma=Sig,
        Sigma_half=sqrt_psd(Sig),
        Sigma_inv_half=inv_sqrt_pd(Sig),
        A_whiten=A_whiten,
        residual=residual,
        iterations=iterations,
    )


def build_synthetic(
    plant: Union[LtiPlant, LtvPlant],
    factor: Union[SpectralFactor, WhiteningSchedule],
) -> Union[SyntheticSystem, SyntheticSystemFH]:
    """Assemble the doubled synthetic plant from a whitening/spectral factor.

    Ahat = [[A, K Sigma^{1/2}], [0, 0]], Buhat = [B_u; 0], Bwhat = [0; I],
    Qhat = [Q^{1/2}; Sigma^{1/2}] [Q^{1/2}  Sigma^{1/2}]  (PSD, rank <= n).
    """
    if isinstance(factor, SpectralFactor):
        if not isinstance(plant, LtiPlant):
            raise TypeError("spectral factor requires a time-invariant plant")
        n, m = plant.n, plant.m
        Qh = plant.Q_half
        Ahat = np.block(
            [[plant.A, factor.K @ factor.Sigma_half], [np.zeros((n, 2 * n))]]
        )
        Buhat = np.vstack([plant.Bu, np.zeros((n, m))])
        Bwhat = np.vstack([np.zeros((n, n)), np.eye(n)])
        U = np.vstack([Qh, factor.Sigma_half])
        return SyntheticSystem(
            Ahat=Ahat,
            Buhat=Buhat,
            Bwhat=Bwhat,
            Qhat=U @ U.T,
            A_filter=factor.A_whiten,
            B_filter=plant.Bw,
            M_filter=factor.Sigma_inv_half @ Qh,
        )
    if isinstance(factor, WhiteningSchedule):
        if not isinstance(plant, LtvPlant):
            raise TypeError("whitening schedule requires a finite-horizon plant")
        T, n, m = plant.T, plant.n, plant.m
        Ahat = np.zeros((T, 2 * n, 2 * n))
        Buhat = np.zeros((T, 2 * n, m))
        Bwhat = np.zeros((T, 2 * n, n))
        Qhat = np.zeros((T, 2 * n, 2 * n))
        A_filter = np.zeros((T, n, n))
        M_filter = np.zeros((T, n, n))
        for t in range(T):
            Qh = plant.Q_half[t]
            Ahat[t, :n, :n] = plant.A[t]
            Ahat[t, :n, n:] = factor.K[t] @ factor.Sigma_half[t]
            Buhat[t, :n, :] = plant.Bu[t]
            Bwhat[t, n:, :] = np.eye(n)
            U = np.vstack([Qh, factor.Sigma_half[t]])
            Qhat[t] = U @ U.T
            A_filter[t] = plant.A[t] - factor.K[t] @ Qh
            M_filter[t] = factor.Sigma_inv_half[t] @ Qh
        return SyntheticSystemFH(
            Ahat=Ahat,
            Buhat=Buhat,
            Bwhat=Bwhat,
            Qhat=Qhat,
            A_filter=A_filter,
            B_filter=plant.Bw.copy(),
            M_filter=M_filter,
        )
    raise TypeError(f"unsupported factor type {type(factor).__name__}")


class WPrimeFilter:
    """Online state of the strictly causal map w -> w'.

    The filter is advanced with w_t and then emits w'_{t+1}; w'_0 = 0 always.
    For finite-horizon (time-varying) systems the output map at index T does
    not exist, and none of the synthesized controllers ever needs it (the
    final-step control gain is identically zero), so stepping past t = T-2 is
    an error there.  Cloning yields an independent filter for branched
    rollouts.
    """

    def __init__(self, synthetic: Union[SyntheticSystem, SyntheticSystemFH]):
        self._syn = synthetic
        self._ltv = isinstance(synthetic, SyntheticSystemFH)
        n = synthetic.n
        self.nu = np.zeros(n)
        self.t = 0

    @property
    def horizon(self) -> Optional[int]:
        return self._syn.T if self._ltv else None

    def clone(self) -> "WPrimeFilter":
        other = WPrimeFilter(self._syn)
        other.nu = self.nu.copy()
        other.t = self.t
        return other

    def wprime_now(self) -> np.ndarray:
        """Current output w'_t (zero at t = 0)."""
        if self._ltv:
            return self._syn.M_filter[self.t] @ self.nu
        return self._syn.M_filter @ self.nu

    def step(self, w_t: np.ndarray) -> np.ndarray:
        """Absorb w_t, advance to t+1, and return w'_{t+1}."""
        w_t = np.asarray(w_t, dtype=float).reshape(-1)
        syn = self._syn
        if self._ltv:
            if self.t + 1 >= syn.T:
                raise IndexError("w' filter stepped past its horizon")
            A, B = syn.A_filter[self.t], syn.B_filter[self.t]
        else:
            A, B = syn.A_filter, syn.B_filter
        if w_t.shape != (B.shape[1],):
            raise ValueError(
                f"disturbance has dimension {w_t.shape[0]}, expected {B.shape[1]}"
            )
        self.nu = A @ self.nu + B @ w_t
        self.t += 1
        return self.wprime_now()


def wprime_step(filt: WPrimeFilter, w_t: np.ndarray) -> tuple[WPrimeFilter, np.ndarray]:
    """Functional wrapper over WPrimeFilter.step (mutates and returns filt)."""
    return filt, filt.step(w_t)


def wprime_run(
    synthetic: Union[SyntheticSystem, SyntheticSystemFH], w: np.ndarray
) -> np.ndarray:
    """Expand a length-T disturbance into (w'_0, ..., w'_{T-1}).

    w'_t depends only on w_0..w_{t-1}; in particular w'_0 = 0 and the final
    disturbance w_{T-1} influences no emitted value.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    T = w.shape[0]
    filt = WPrimeFilter(synthetic)
    out = np.zeros((T, synthetic.n))
    for t in range(T - 1):
        out[t + 1] = filt.step(w[t])
    return out


def dense_delta(plant: LtvPlant, schedule: WhiteningSchedule) -> np.ndarray:
    """Materialize the finite-horizon Delta as a dense (nT x nT) matrix.

    State-space model: eta_{t+1} = A_t eta_t + K_t Sigma_t^{1/2} e_t,
    y_t = Q_t^{1/2} eta_t + Sigma_t^{1/2} e_t.  Used by tests and the
    verification command only; synthesis never forms it.
    """
    T, n = plant.T, plant.n
    D = np.zeros((n * T, n * T))
    S = np.zeros((n, 0))  # columns: A_{i-1}...A_{j+1} K_j Sigma_j^{1/2}
    for i in range(T):
        D[i * n : (i + 1) * n, i * n : (i + 1) * n] = schedule.Sigma_half[i]
        if i > 0:
            D[i * n : (i + 1) * n, : i * n] = plant.Q_half[i] @ S
        S = np.hstack([plant.A[i] @ S, schedule.K[i] @ schedule.Sigma_half[i]])
    return D


def delta_transfer(plant: LtiPlant, factor: SpectralFactor, z: complex) -> np.ndarray:
    """Delta(z) = (I + Q^{1/2} (zI - A)^{-1} K) Sigma^{1/2}."""
    n = plant.n
    resolvent = np.linalg.solve(z * np.eye(n) - plant.A, factor.K)
    return (np.eye(n) + plant.Q_half @ resolvent) @ factor.Sigma_half


def delta_inv_transfer(
    plant: LtiPlant, factor: SpectralFactor, z: complex
) -> np.ndarray:
    """Delta(z)^{-1} = Sigma^{-1/2} (I - Q^{1/2} (zI - A + KQ^{1/2})^{-1} K)."""
    n = plant.n
    resolvent = np.linalg.solve(z * np.eye(n) - factor.A_whiten, factor.K)
    return factor.Sigma_inv_half @ (np.eye(n) - plant.Q_half @ resolvent)
