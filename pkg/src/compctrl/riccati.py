"""Indefinite Riccati recursions and fixed points with feasibility verdicts.

Two related objects live here:

* the backward finite-horizon recursion for the min-max (game-type) quadratic
  problem, which carries per-step existence conditions for causal and
  strictly causal disturbance-attenuating controllers, and

* the corresponding infinite-horizon fixed point, iterated from P = 0, whose
  acceptance requires (1) a stable closed loop, (2) matching inertia of the
  weight R~ and of H~ = R~ + B~'PB~, and (3) P PSD.

Feasibility failures are reported as structured verdicts with reason codes
("singular-Htilde", "no-stabilizing-solution", ...) rather than exceptions,
because the gamma-bisection consumes them as ordinary values.

All symmetric (possibly indefinite) linear systems are solved through an
eigendecomposition with a relative pivot guard: the matrix is declared
singular when min|lam| < 1e-12 * max|lam|.  A determinant-based guard is not
scale-free (|det| ~ scale^dim) and misfires badly on well-conditioned
matrices of moderate norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import LtvPlant

__all__ = [
    "SingularHtildeError",
    "Verdict",
    "RiccatiSchedule",
    "RiccatiFixedPoint",
    "solve_sym",
    "spectral_radius",
    "is_stable",
    "inertia",
    "pbh_stabilizable",
    "pbh_detectable",
    "hinf_backward",
    "dare_fixed_point",
]

#: margin for strict matrix inequalities (lam_max < gamma^2 - MARGIN)
STRICT_MARGIN = 1e-9
#: threshold for counting signs of eigenvalues in inertia computations
INERTIA_TOL = 1e-10
#: stability means spectral radius < 1 - STABILITY_MARGIN
STABILITY_MARGIN = 1e-9
#: relative pivot guard for symmetric solves
PIVOT_GUARD = 1e-12


class SingularHtildeError(ValueError):
    """Raised by solve_sym when the symmetric matrix is numerically singular."""


def equilibrate_sym(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric row/column scaling S H S with S = diag(1/sqrt(row max)).

    Balances blocks of wildly different magnitude (the game matrix mixes an
    O(1) control block with an O(gamma^2) disturbance block) so that the
    relative pivot guard measures genuine singularity rather than scale
    spread.  The congruence preserves inertia and exact singularity.
    """
    Hs = 0.5 * (H + H.T)
    d = np.abs(Hs).max(axis=1)
    S = 1.0 / np.sqrt(np.maximum(d, np.finfo(float).tiny))
    return Hs * S[:, None] * S[None, :], S


def solve_sym(H: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve H X = B for symmetric (possibly indefinite) H.

    The matrix is first equilibrated, then factored by the symmetric
    eigendecomposition; the eigenvalues act as pivots and the solve is
    rejected when min|lam| <= 1e-12 * max|lam| after scaling.
    """
    Hhat, S = equilibrate_sym(H)
    lam, V = np.linalg.eigh(Hhat)
    abs_lam = np.abs(lam)
    if abs_lam.min() <= PIVOT_GUARD * max(abs_lam.max(), np.finfo(float).tiny):
        raise SingularHtildeError(
            f"symmetric solve rejected: |pivot| ratio "
            f"{abs_lam.min():.3e}/{abs_lam.max():.3e}"
        )
    Y = V.T @ (B * S[:, None])
    return (V @ (Y / lam[:, None])) * S[:, None]


def sym(M: np.ndarray) -> np.ndarray:
    """Symmetrize (cheap guard against eigvalsh on slightly asymmetric input)."""
    return 0.5 * (M + M.T)


def spectral_radius(M: np.ndarray) -> float:
    """Largest eigenvalue modulus."""
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(M, dtype=float)))))


def is_stable(M: np.ndarray) -> bool:
    """Schur stability with a deterministic margin: radius < 1 - 1e-9."""
    return spectral_radius(M) < 1.0 - STABILITY_MARGIN


def inertia(M: np.ndarray, tol: float = INERTIA_TOL) -> tuple[int, int, int]:
    """Counts (n_pos, n_neg, n_zero) of eigenvalues of symmetric M."""
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))
    n_pos = int(np.sum(lam > tol))
    n_neg = int(np.sum(lam < -tol))
    return n_pos, n_neg, lam.size - n_pos - n_neg


def _unstable_eigenvalues(A: np.ndarray) -> np.ndarray:
    lam = np.linalg.eigvals(A)
    return lam[np.abs(lam) >= 1.0 - STABILITY_MARGIN]


def pbh_stabilizable(A: np.ndarray, B: np.ndarray, tol: float = 1e-8) -> bool:
    """PBH test: sigma_min([A - lam I, B]) >= tol at every unstable eigenvalue."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    for lam in _unstable_eigenvalues(A):
        M = np.hstack([A - lam * np.eye(n), B])
        if np.linalg.svd(M, compute_uv=False)[-1] < tol:
            return False
    return True


def pbh_detectable(A: np.ndarray, C: np.ndarray, tol: float = 1e-8) -> bool:
    """Dual PBH test on (A', C')."""
    return pbh_stabilizable(np.asarray(A).T, np.asarray(C).T, tol=tol)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a feasibility check: ok, or a reason plus first bad step."""

    ok: bool
    reason: Optional[str] = None
    first_violation: Optional[int] = None

    def __bool__(self) -> bool:  # allows "if verdict:"
        return self.ok


@dataclass
class RiccatiSchedule:
    """Backward-recursion output {P_t} plus per-step gate matrices and verdicts.

    P has T+1 entries with P[T] = 0.  H[t] = I + B_u,t' P_{t+1} B_u,t and
    Htilde[t] = R~ + B~_t' P_{t+1} B~_t, t = 0..T-1.  Three existence verdicts
    are carried: the causal condition

        B_w'[P - P B_u H^{-1} B_u' P] B_w < gamma^2 I     (strict, margin 1e-9)

    and two one-step-delay (strictly causal) conditions, reported separately:
    the u-channel form B_u' P B_u < gamma^2 I and the w-channel form
    B_w' P B_w < gamma^2 I.  The w-channel gates strictly causal synthesis;
    the u-channel is computed for diagnostic parity.
    """

    gamma: float
    P: np.ndarray  # (T+1, N, N)
    H: list
    Htilde: list
    causal: Verdict
    strictly_causal_u: Verdict
    strictly_causal_w: Verdict

    @property
    def T(self) -> int:
        return self.P.shape[0] - 1


def hinf_backward(plant: LtvPlant, gamma: float) -> RiccatiSchedule:
    """Backward recursion P_t = Q_t + A'PA - A'PB~ H~^{-1} B~'PA at level gamma.

    R~ = diag(I_m, -gamma^2 I_p).  A singular H~ (or singular H in the causal
    condition) aborts with verdict reason "singular-Htilde" on all conditions;
    the recursion itself is otherwise always well defined.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    T, N, m, p = plant.T, plant.n, plant.m, plant.p
    g2 = gamma * gamma
    Rtil = np.block(
        [[np.eye(m), np.zeros((m, p))], [np.zeros((p, m)), -g2 * np.eye(p)]]
    )
    P = np.zeros((T + 1, N, N))
    H_list: list = [None] * T
    Ht_list: list = [None] * T
    causal_bad: list[int] = []
    strict_u_bad: list[int] = []
    strict_w_bad: list[int] = []

    for t in range(T - 1, -1, -1):
        A, Bu, Bw, Q = plant.A[t], plant.Bu[t], plant.Bw[t], plant.Q[t]
        Pn = P[t + 1]
        Btil = np.hstack([Bu, Bw])
        Htil = Rtil + Btil.T @ Pn @ Btil
        Ht_list[t] = Htil
        H = np.eye(m) + Bu.T @ Pn @ Bu
        H_list[t] = H
        try:
            BtPA = Btil.T @ Pn @ A
            Pt = Q + A.T @ Pn @ A - BtPA.T @ solve_sym(Htil, BtPA)
            # causal condition needs H^{-1} as well
            PBu = Pn @ Bu
            closed = Pn - PBu @ solve_sym(H, PBu.T)
        except SingularHtildeError:
            bad = Verdict(False, "singular-Htilde", t)
            return RiccatiSchedule(
                gamma=gamma, P=P, H=H_list, Htilde=Ht_list,
                causal=bad, strictly_causal_u=bad, strictly_causal_w=bad,
            )
        P[t] = 0.5 * (Pt + Pt.T)
        if np.linalg.eigvalsh(sym(Bw.T @ closed @ Bw)).max() >= g2 - STRICT_MARGIN:
            causal_bad.append(t)
        if np.linalg.eigvalsh(sym(Bu.T @ Pn @ Bu)).max() >= g2 - STRICT_MARGIN:
            strict_u_bad.append(t)
        if np.linalg.eigvalsh(sym(Bw.T @ Pn @ Bw)).max() >= g2 - STRICT_MARGIN:
            strict_w_bad.append(t)

    def verdict(bad: list[int]) -> Verdict:
        if not bad:
            return Verdict(True)
        return Verdict(False, "condition-violated", min(bad))

    return RiccatiSchedule(
        gamma=gamma,
        P=P,
        H=H_list,
        Htilde=Ht_list,
        causal=verdict(causal_bad),
        strictly_causal_u=verdict(strict_u_bad),
        strictly_causal_w=verdict(strict_w_bad),
    )


@dataclass
class RiccatiFixedPoint:
    """Converged (or failed) fixed point of the backward recursion.

    residual is the infinity-norm one-step recursion defect at the returned P.
    The three acceptance checks mirror the infinite-horizon existence theorem:
    closed-loop spectral radius < 1, inertia(R~) == inertia(H~), and P PSD.
    When the iteration fails, reason is "singular-Htilde",
    "no-stabilizing-solution" (divergence or iteration cap), or
    "condition-violated" (an inertia flip of H~ part way through, which
    certifies infeasibility: the k-th iterate is the k-step game value, and a
    failed finite-horizon existence condition cannot recover at longer
    horizons).  The checks are None on failure.
    """

    P: Optional[np.ndarray]
    residual: Optional[float]
    iterations: int
    converged: bool
    reason: Optional[str] = None
    closed_loop_radius: Optional[float] = None
    inertia_match: Optional[bool] = None
    psd: Optional[bool] = None

    @property
    def feasible(self) -> bool:
        """All three acceptance conditions hold on a converged solution."""
        return bool(
            self.converged
            and self.closed_loop_radius is not None
            and self.closed_loop_radius < 1.0 - STABILITY_MARGIN
            and self.inertia_match
            and self.psd
        )

    @property
    def failure_reason(self) -> Optional[str]:
        if self.feasible:
            return None
        if self.reason is not None:
            return self.reason
        return "condition-violated"


def dare_fixed_point(
    A: np.ndarray,
    Btil: np.ndarray,
    Rtil: np.ndarray,
    Q: np.ndarray,
    tol_abs: float = 1e-11,
    tol_rel: float = 1e-9,
    max_iter: int = 100_000,
    P0: Optional[np.ndarray] = None,
) -> RiccatiFixedPoint:
    """Iterate P <- Q + A'PA - A'PB~ H~^{-1} B~'PA from P = 0 to a fixed point.

    Convergence is declared when the update norm drops below
    tol_abs + tol_rel * max(1, ||P||_inf).  The relative term matters: for
    indefinite weights near the feasibility boundary ||P|| grows without
    bound and float64 cannot realize an absolute 1e-11 update on a matrix of
    norm 1e4, so a purely absolute test would misreport feasible problems as
    divergent.  Divergence (||P||_inf > 1e12) and the iteration cap both
    yield reason "no-stabilizing-solution".

    ``P0`` warm-starts the iteration from a PSD guess (e.g. the solution of a
    nearby problem); the acceptance checks on the converged solution are
    unchanged.
    """
    A = np.asarray(A, dtype=float)
    Btil = np.asarray(Btil, dtype=float)
    Rtil = np.asarray(Rtil, dtype=float)
    Q = np.asarray(Q, dtype=float)
    N = A.shape[0]
    P = np.zeros((N, N)) if P0 is None else np.asarray(P0, dtype=float).copy()
    inertia_R = inertia(Rtil)
    tiny = np.finfo(float).tiny

    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        Htil = sym(Rtil + Btil.T @ P @ Btil)
        Hhat, S = equilibrate_sym(Htil)
        lam, V = np.linalg.eigh(Hhat)
        abs_lam = np.abs(lam)
        if abs_lam.min() <= PIVOT_GUARD * max(abs_lam.max(), tiny):
            return RiccatiFixedPoint(
                P=None, residual=None, iterations=iterations,
                converged=False, reason="singular-Htilde",
            )
        n_pos = int(np.sum(lam > INERTIA_TOL))
        n_neg = int(np.sum(lam < -INERTIA_TOL))
        if (n_pos, n_neg, lam.size - n_pos - n_neg) != inertia_R:
            return RiccatiFixedPoint(
                P=None, residual=None, iterations=iterations,
                converged=False, reason="condition-violated",
            )
        BtPA = Btil.T @ P @ A
        Y = V.T @ (BtPA * S[:, None])
        Pn = sym(Q + A.T @ P @ A - BtPA.T @ ((V @ (Y / lam[:, None])) * S[:, None]))
        if not np.isfinite(Pn).all() or np.abs(Pn).max() > 1e12:
            return RiccatiFixedPoint(
                P=None, residual=None, iterations=iterations,
                converged=False, reason="no-stabilizing-solution",
            )
        diff = np.abs(Pn - P).max()
        P = Pn
        if diff < tol_abs + tol_rel * max(1.0, np.abs(P).max()):
            converged = True
            break
    if not converged:
        return RiccatiFixedPoint(
            P=None, residual=None, iterations=iterations,
            converged=False, reason="no-stabilizing-solution",
        )

    def step(P: np.ndarray) -> np.ndarray:
        Htil = Rtil + Btil.T @ P @ Btil
        BtPA = Btil.T @ P @ A
        Pn = Q + A.T @ P @ A - BtPA.T @ solve_sym(Htil, BtPA)
        return 0.5 * (Pn + Pn.T)

    try:
        residual = float(np.abs(step(P) - P).max())
        Htil = Rtil + Btil.T @ P @ Btil
        Acl = A - Btil @ solve_sym(Htil, Btil.T @ P @ A)
    except SingularHtildeError:
        return RiccatiFixedPoint(
            P=None, residual=None, iterations=iterations,
            converged=False, reason="singular-Htilde",
        )
    return RiccatiFixedPoint(
        P=P,
        residual=residual,
        iterations=iterations,
        converged=True,
        closed_loop_radius=spectral_radius(Acl),
        inertia_match=inertia(Rtil) == inertia(Htil),
        psd=bool(np.linalg.eigvalsh(P).min() >= -1e-9),
    )
