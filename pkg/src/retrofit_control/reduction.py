"""Gramian-based balanced truncation of stable state-space models.

Produces approximate environment models of selectable dimension together
with the Hankel singular values and the classical twice-the-tail
L-infinity error bound.
"""

from dataclasses import dataclass

import numpy as np

from .lti import StateSpace
from .numerics import solve_lyapunov, spectral_abscissa

__all__ = ["BalancedReduction", "gramians", "balanced_truncate"]

# Hankel values below this relative threshold are dropped unconditionally to
# avoid ill-conditioned balancing transforms.
_HANKEL_FLOOR = 1e-12


@dataclass(frozen=True)
class BalancedReduction:
    """Result of a balanced truncation.

    ``error_bound`` is twice the sum of the truncated Hankel singular
    values, an upper bound on the L-infinity error of the reduction.
    """

    reduced: StateSpace
    hankel_values: np.ndarray
    error_bound: float


def gramians(sys):
    """Controllability and observability Gramians of a stable system.

    ``Wc`` solves ``A Wc + Wc A^T + B B^T = 0`` and ``Wo`` solves
    ``A^T Wo + Wo A + C^T C = 0``; both are symmetric positive
    semidefinite.  Raises if the system is not strictly stable.
    """
    if spectral_abscissa(sys.A) >= 0.0:
        raise ValueError("gramians require a strictly stable system")
    Wc = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    Wo = solve_lyapunov(sys.A.T, sys.C.T @ sys.C)
    return Wc, Wo


def _psd_factor(W):
    """Factor ``W = L L^T`` of a (numerically) PSD matrix via eigendecomposition."""
    vals, vecs = np.linalg.eigh(0.5 * (W + W.T))
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def balanced_truncate(sys, r):
    """Balanced truncation retaining the ``r`` largest Hankel singular values.

    Square-root method: with Gramian factors ``Wc = Lc Lc^T`` and
    ``Wo = Lo Lo^T``, the SVD of ``Lo^T Lc`` yields the Hankel values and
    the (oblique) balancing projection.  ``r = 0`` returns the static
    D-only system.  Requested dimensions below the numerical Hankel rank
    floor are clipped.
    """
    n = sys.n_states
    if not 0 <= r <= n:
        raise ValueError(f"requested dimension r={r} outside [0, {n}]")
    if n == 0:
        return BalancedReduction(sys, np.zeros(0), 0.0)

    Wc, Wo = gramians(sys)
    Lc = _psd_factor(Wc)
    Lo = _psd_factor(Wo)
    U, hsv, Vt = np.linalg.svd(Lo.T @ Lc)
    hsv = hsv[: min(Lc.shape[1], Lo.shape[1])]

    significant = int(np.sum(hsv > _HANKEL_FLOOR * (hsv[0] if hsv.size else 0.0)))
    r_eff = min(r, significant)
    tail = float(2.0 * np.sum(hsv[r_eff:]))

    if r_eff == 0:
        reduced = StateSpace.from_gain(sys.D)
    else:
        s_half = np.sqrt(hsv[:r_eff])
        T = Lc @ Vt[:r_eff].T / s_half
        Ti = (U[:, :r_eff] / s_half).T @ Lo.T
        reduced = StateSpace(Ti @ sys.A @ T, Ti @ sys.B, sys.C @ T, sys.D)
    return BalancedReduction(reduced, hsv, tail)
