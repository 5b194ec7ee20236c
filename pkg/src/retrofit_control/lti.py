"""Continuous-time LTI state-space systems and their interconnection algebra.

The positive-feedback sign convention ``(I - P K)^{-1}`` is fixed globally:
:func:`feedback` and :func:`close_loop` inject the loop signal *additively*
into the plant input.  All operations return new :class:`StateSpace` values;
instances are immutable after construction.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .numerics import expm

__all__ = [
    "StateSpace",
    "ChannelMap",
    "select_channels",
    "series",
    "add",
    "negate",
    "feedback",
    "close_loop",
    "freq_response",
    "simulate",
    "minreal",
]

_MINREAL_TOL = 1e-8


class StateSpace:
    """Real state-space quadruple ``(A, B, C, D)``.

    ``D`` defaults to zero.  Dimension consistency and finiteness are
    checked at construction; the stored arrays are read-only.
    """

    __slots__ = ("A", "B", "C", "D")

    def __init__(self, A, B, C, D=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        if D is None:
            D = np.zeros((C.shape[0], B.shape[1]))
        else:
            D = np.atleast_2d(np.asarray(D, dtype=float))
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(
                f"D has shape {D.shape}, expected {(C.shape[0], B.shape[1])}"
            )
        for name, M in (("A", A), ("B", B), ("C", C), ("D", D)):
            if M.size and not np.all(np.isfinite(M)):
                raise ValueError(f"{name} contains non-finite entries")
        for M in (A, B, C, D):
            M.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    def __setattr__(self, name, value):
        raise AttributeError("StateSpace is immutable")

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]

    @classmethod
    def from_gain(cls, D):
        """Static (state-free) system ``y = D u``."""
        D = np.atleast_2d(np.asarray(D, dtype=float))
        return cls(
            np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D
        )

    @classmethod
    def zero(cls, n_outputs, n_inputs):
        """The zero system of the given shape."""
        return cls.from_gain(np.zeros((n_outputs, n_inputs)))

    def __repr__(self):
        return (
            f"StateSpace(states={self.n_states}, inputs={self.n_inputs}, "
            f"outputs={self.n_outputs})"
        )


def _indices(spec, limit, what):
    idx = np.asarray(spec, dtype=int).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= limit):
        raise ValueError(f"{what} indices {idx} out of range [0, {limit})")
    return idx


@dataclass(frozen=True)
class ChannelMap:
    """Named input/output groups mapping to column/row index ranges.

    Groups must be disjoint and jointly cover every input column and output
    row of the system they describe.
    """

    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "inputs", {k: np.asarray(v, dtype=int) for k, v in self.inputs.items()}
        )
        object.__setattr__(
            self,
            "outputs",
            {k: np.asarray(v, dtype=int) for k, v in self.outputs.items()},
        )
        for side in (self.inputs, self.outputs):
            all_idx = np.concatenate([v for v in side.values()]) if side else np.array([], int)
            if len(np.unique(all_idx)) != len(all_idx):
                raise ValueError("channel groups overlap")

    def validate_cover(self, sys):
        n_in = sum(len(v) for v in self.inputs.values())
        n_out = sum(len(v) for v in self.outputs.values())
        if n_in != sys.n_inputs or n_out != sys.n_outputs:
            raise ValueError(
                f"channel map covers {n_in} inputs / {n_out} outputs, system has "
                f"{sys.n_inputs} / {sys.n_outputs}"
            )

    def input_indices(self, *names):
        return self._collect(self.inputs, names, "input")

    def output_indices(self, *names):
        return self._collect(self.outputs, names, "output")

    @staticmethod
    def _collect(side, names, what):
        parts = []
        for name in names:
            if name not in side:
                raise KeyError(f"unknown {what} group {name!r}")
            parts.append(np.asarray(side[name], dtype=int))
        return np.concatenate(parts) if parts else np.array([], dtype=int)


def select_channels(sys, cmap, ins, outs):
    """Subsystem restricted to the named input and output groups."""
    ci = cmap.input_indices(*ins)
    co = cmap.output_indices(*outs)
    return StateSpace(sys.A, sys.B[:, ci], sys.C[co, :], sys.D[np.ix_(co, ci)])


def series(g1, g2):
    """Cascade ``g2 o g1``; transfer matrix ``G2(s) G1(s)``."""
    if g1.n_outputs != g2.n_inputs:
        raise ValueError(
            f"series: g1 has {g1.n_outputs} outputs, g2 expects {g2.n_inputs} inputs"
        )
    n1, n2 = g1.n_states, g2.n_states
    A = np.block(
        [[g1.A, np.zeros((n1, n2))], [g2.B @ g1.C, g2.A]]
    ) if n1 + n2 else np.zeros((0, 0))
    B = np.vstack([g1.B, g2.B @ g1.D])
    C = np.hstack([g2.D @ g1.C, g2.C])
    D = g2.D @ g1.D
    return StateSpace(A, B, C, D)


def add(g1, g2):
    """Parallel sum: same input into both, outputs added."""
    if g1.n_inputs != g2.n_inputs or g1.n_outputs != g2.n_outputs:
        raise ValueError("add: dimension mismatch")
    n1, n2 = g1.n_states, g2.n_states
    A = scipy.linalg.block_diag(g1.A, g2.A)
    B = np.vstack([g1.B, g2.B])
    C = np.hstack([g1.C, g2.C])
    return StateSpace(A, B, C, g1.D + g2.D)


def negate(sys):
    """Flip the sign of the output."""
    return StateSpace(sys.A, sys.B, -sys.C, -sys.D)


def close_loop(sys, ctrl, in_idx, out_idx, keep_external=False):
    """Close the loop ``u[in_idx] = ctrl(y[out_idx]) (+ external)``.

    All outputs of ``sys`` are retained.  When ``keep_external`` is true the
    looped input columns stay available as external inputs (the controller
    output is added on top); otherwise they are removed from the input list.
    The closed-loop state is the plant state stacked over the controller
    state.  Raises on an algebraic loop (singular ``I - D_loop D_ctrl``).
    """
    in_idx = _indices(in_idx, sys.n_inputs, "loop input")
    out_idx = _indices(out_idx, sys.n_outputs, "loop output")
    other = np.setdiff1d(np.arange(sys.n_inputs), in_idx)
    if ctrl.n_inputs != len(out_idx) or ctrl.n_outputs != len(in_idx):
        raise ValueError(
            f"controller maps {ctrl.n_inputs} -> {ctrl.n_outputs}, loop needs "
            f"{len(out_idx)} -> {len(in_idx)}"
        )

    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    Bl, Bo = B[:, in_idx], B[:, other]
    Cs = C[out_idx, :]
    Dsl = D[np.ix_(out_idx, in_idx)]
    Dso = D[np.ix_(out_idx, other)]
    Ak, Bk, Ck, Dk = ctrl.A, ctrl.B, ctrl.C, ctrl.D

    nl = len(in_idx)
    M = np.eye(len(out_idx)) - Dsl @ Dk
    if np.linalg.cond(M) > 1e12:
        raise ValueError("algebraic loop: I - D_loop D_ctrl is singular")
    Mi = np.linalg.inv(M)

    # y_s = Mi (Cs x + Dsl Ck xk + Dsl e + Dso u_o); u_l = Ck xk + Dk y_s + e
    n, nk = sys.n_states, ctrl.n_states
    A_cl = np.block(
        [
            [A + Bl @ Dk @ Mi @ Cs, Bl @ (Ck + Dk @ Mi @ Dsl @ Ck)],
            [Bk @ Mi @ Cs, Ak + Bk @ Mi @ Dsl @ Ck],
        ]
    ) if n + nk else np.zeros((0, 0))

    # External input blocks: looped-channel feed (if kept) then the others.
    B_e = np.vstack(
        [Bl @ (np.eye(nl) + Dk @ Mi @ Dsl), Bk @ Mi @ Dsl]
    )
    B_o = np.vstack([Bo + Bl @ Dk @ Mi @ Dso, Bk @ Mi @ Dso])

    # Full output map: y = C x + D_l u_l + D_o u_o with u_l resolved.
    Dl_full = D[:, in_idx]
    Do_full = D[:, other]
    C_cl = np.hstack(
        [C + Dl_full @ Dk @ Mi @ Cs, Dl_full @ (Ck + Dk @ Mi @ Dsl @ Ck)]
    )
    D_e = Dl_full @ (np.eye(nl) + Dk @ Mi @ Dsl)
    D_o = Do_full + Dl_full @ Dk @ Mi @ Dso

    if keep_external:
        # Preserve the original input ordering with the loop columns in place.
        B_cl = np.zeros((n + nk, sys.n_inputs))
        D_cl = np.zeros((sys.n_outputs, sys.n_inputs))
        B_cl[:, in_idx], B_cl[:, other] = B_e, B_o
        D_cl[:, in_idx], D_cl[:, other] = D_e, D_o
    else:
        B_cl, D_cl = B_o, D_o
    return StateSpace(A_cl, B_cl, C_cl, D_cl)


def feedback(plant, ctrl, sign=1):
    """Positive-feedback interconnection ``u = ctrl(y) + external``.

    Maps the external input to the plant output; the transfer matrix is
    ``(I - P K)^{-1} P = P (I - K P)^{-1}``.  Pass ``sign=-1`` for the
    negative-feedback variant.
    """
    if sign == -1:
        ctrl = negate(ctrl)
    elif sign != 1:
        raise ValueError("sign must be +1 or -1")
    return close_loop(
        plant,
        ctrl,
        np.arange(plant.n_inputs),
        np.arange(plant.n_outputs),
        keep_external=True,
    )


def freq_response(sys, w):
    """Transfer-matrix value ``C (jwI - A)^{-1} B + D`` at frequency ``w``."""
    n = sys.n_states
    if n == 0:
        return sys.D.astype(complex)
    M = 1j * float(w) * np.eye(n) - sys.A
    if np.linalg.cond(M) > 1e14:
        raise ValueError(f"system has a pole at s = {1j * w:.3e}")
    return sys.C @ np.linalg.solve(M, sys.B) + sys.D


def simulate(sys, u, dt, x0=None):
    """Sampled output under zero-order-hold discretization.

    ``u`` has one row per sample.  The discrete pair ``(A_d, B_d)`` is the
    exact ZOH discretization computed from an augmented matrix exponential.
    An impulse is represented as a first-sample pulse of height ``1/dt``.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] != sys.n_inputs:
        if u.shape[0] == sys.n_inputs:
            u = u.T
        else:
            raise ValueError("input sample shape does not match system inputs")
    if dt <= 0:
        raise ValueError("dt must be positive")
    n, m = sys.n_states, sys.n_inputs
    if x0 is None:
        x = np.zeros(n)
    else:
        x = np.asarray(x0, dtype=float).ravel()
        if x.shape != (n,):
            raise ValueError(f"x0 has shape {x.shape}, expected ({n},)")

    if n:
        aug = np.zeros((n + m, n + m))
        aug[:n, :n] = sys.A
        aug[:n, n:] = sys.B
        E = expm(aug, dt)
        Ad, Bd = E[:n, :n], E[:n, n:]
    else:
        Ad, Bd = np.zeros((0, 0)), np.zeros((0, m))

    y = np.empty((u.shape[0], sys.n_outputs))
    for k in range(u.shape[0]):
        y[k] = sys.C @ x + sys.D @ u[k]
        x = Ad @ x + Bd @ u[k]
    return y


def _controllable_basis(A, B, tol, floor=0.0):
    """Orthonormal basis of the controllable subspace (SVD rank decisions).

    ``floor`` is an absolute singular-value cutoff; without it a block that
    is numerically zero but nonvanishing (e.g. after an exact pole-zero
    cancellation) would count as full rank under the block-relative test.
    """
    n = A.shape[0]
    basis = np.zeros((n, 0))
    frontier = B
    while frontier.shape[1]:
        # Two-pass Gram-Schmidt keeps the basis orthonormal to machine
        # precision as it grows; a single pass drifts on large systems.
        resid = frontier - basis @ (basis.T @ frontier)
        resid = resid - basis @ (basis.T @ resid)
        if resid.size == 0:
            break
        U, s, _ = np.linalg.svd(resid, full_matrices=False)
        ref = max(
            s[0] if s.size else 0.0,
            np.linalg.norm(frontier, 2) if frontier.size else 0.0,
            1e-300,
        )
        keep = s > max(tol * ref, floor)
        if not np.any(keep):
            break
        new = U[:, keep]
        basis = np.hstack([basis, new])
        if basis.shape[1] >= n:
            basis = basis[:, :n]
            break
        frontier = A @ new
    return basis


def minreal(sys, tol=_MINREAL_TOL):
    """Minimal realization via staircase (Kalman) decomposition.

    Removes the uncontrollable subspace, then the unobservable subspace of
    the remainder, using orthogonal projections with relative rank
    tolerance ``tol``.  The frequency response is preserved.
    """
    # Absolute cutoff tied to the input/output coupling scale, so blocks
    # left numerically zero by exact cancellations are dropped.
    floor = tol * max(
        np.linalg.norm(sys.B, 2) if sys.B.size else 0.0,
        np.linalg.norm(sys.C, 2) if sys.C.size else 0.0,
    )
    # Controllable part.
    V = _controllable_basis(sys.A, sys.B, tol, floor)
    A = V.T @ sys.A @ V
    B = V.T @ sys.B
    C = sys.C @ V
    # Observable part (dual).
    W = _controllable_basis(A.T, C.T, tol, floor)
    A = W.T @ A @ W
    B = W.T @ B
    C = C @ W
    return StateSpace(A, B, C, sys.D)
