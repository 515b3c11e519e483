"""Transfer matrices and solutions of the block three-term recurrence.

Solutions are stored with an index offset of one: ``U[0]`` holds ``U_{-1}``
and ``U[n + 1]`` holds ``U_n``. All recursions run forward from the boundary
and never rescale; entries above 1e150 raise GrowthOverflow, which carries
the trusted prefix in ``partial``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matspec
from .errors import GrowthOverflow, SingularBlock
from .model import SINGULAR_COND, JacobiModel

OVERFLOW = 1e150
RESIDUAL_TOL = 1e-9
_CHECK_EVERY = 32


def _overflow(index: int, partial) -> GrowthOverflow:
    err = GrowthOverflow(f"solution entries exceed {OVERFLOW:g} at n={index}", index=index)
    err.partial = partial
    return err


def _inverse(a: np.ndarray, n0: int = 0) -> np.ndarray:
    """Inverse of a block or block stack, raising SingularBlock on failure."""
    sv = matspec.singular_values(a)
    small = sv[..., -1] * SINGULAR_COND <= sv[..., 0]
    if np.any(small):
        k = int(np.argmax(np.atleast_1d(small)))
        raise SingularBlock(f"A_{n0 + k} is numerically singular", index=n0 + k)
    return np.linalg.inv(a)


def transfer_stack(model: JacobiModel, n0: int, n1: int, z: complex) -> np.ndarray:
    """One-step transfer matrices T_n(z) for n0 <= n < n1, shape (n1-n0, 2d, 2d)."""
    d = model.d
    a, b = model.blocks(n0, n1)
    ainv = _inverse(a, n0)
    if n0 > 0:
        a_prev = model.blocks(n0 - 1, n1 - 1)[0]
    else:
        a_prev = np.concatenate([-np.eye(d, dtype=complex)[None], model.blocks(0, n1 - 1)[0]])
    eye = np.eye(d, dtype=complex)
    T = np.zeros((n1 - n0, 2 * d, 2 * d), dtype=complex)
    T[:, :d, d:] = eye
    T[:, d:, :d] = -ainv @ matspec.adjoint(a_prev)
    T[:, d:, d:] = ainv @ (z * eye - b)
    return T


def transfer_step(model: JacobiModel, n: int, z: complex) -> np.ndarray:
    """T_n(z) = [[0, I], [-A_n^-1 A_{n-1}^*, A_n^-1 (z - B_n)]] with A_{-1} = -I."""
    if n < 0:
        raise ValueError("transfer steps start at n = 0")
    return transfer_stack(model, n, n + 1, z)[0]


def transfer_products(model: JacobiModel, N: int, z: complex) -> np.ndarray:
    """Stack R_0, ..., R_N with R_0 = I and R_n = T_{n-1} ... T_0.

    R_n maps (U_{-1}, U_0) to (U_{n-1}, U_n).
    """
    d2 = 2 * model.d
    R = np.empty((N + 1, d2, d2), dtype=complex)
    R[0] = np.eye(d2)
    if N == 0:
        return R
    T = transfer_stack(model, 0, N, z)
    for k in range(N):
        R[k + 1] = T[k] @ R[k]
        if (k + 1) % _CHECK_EVERY == 0 or k + 1 == N:
            lo = max(0, k + 1 - _CHECK_EVERY)
            big = np.max(np.abs(R[lo:k + 2]), axis=(1, 2))
            if not np.all(big <= OVERFLOW):
                first = lo + int(np.argmax(~(big <= OVERFLOW)))
                raise _overflow(first, R[:first])
    return R


def n_step_transfer(model: JacobiModel, n: int, z: complex) -> np.ndarray:
    """R_n(z) = T_{n-1}(z) ... T_0(z)."""
    return transfer_products(model, n, z)[n]


def transfer_inverse(model: JacobiModel, n: int, z: complex,
                     R_conj: np.ndarray | None = None) -> np.ndarray:
    """Closed-form inverse R_n(z)^-1 = Omega R_n(conj z)^* [[0, A_{n-1}], [-A_{n-1}^*, 0]].

    ``Omega = [[0, I], [-I, 0]]``. Pass ``R_conj`` to reuse an already computed
    R_n(conj z).
    """
    d = model.d
    if R_conj is None:
        R_conj = n_step_transfer(model, n, np.conj(z))
    a = model.A(n - 1)
    eye = np.eye(d, dtype=complex)
    omega = np.block([[0 * eye, eye], [-eye, 0 * eye]])
    right = np.block([[0 * eye, a], [-matspec.adjoint(a), 0 * eye]])
    return omega @ matspec.adjoint(R_conj) @ right


def inverse_products(model: JacobiModel, N: int, z: complex) -> np.ndarray:
    """R_n(z)^-1 for n = 0..N as T_0^-1 ... T_{n-1}^-1, each step inverted numerically.

    Independent of the closed form in :func:`transfer_inverse`, and accurate
    where a direct inverse of R_n fails because cond(R_n) ~ ||R_n||^2.
    """
    steps = np.linalg.inv(transfer_stack(model, 0, N, z))
    out = np.empty((N + 1,) + steps.shape[1:], dtype=complex)
    out[0] = np.eye(steps.shape[1])
    for n in range(N):
        out[n + 1] = out[n] @ steps[n]
    return out


def symplectic_transfer(model: JacobiModel, n: int, z: complex) -> np.ndarray:
    """Tilde T_n = K_n T_n K_{n-1}^-1 with K_n = diag(A_n^*, I); satisfies
    Tilde T(conj z)^* Omega Tilde T(z) = Omega."""
    d = model.d
    eye = np.eye(d, dtype=complex)
    a = model.A(n)
    a_prev = model.A(n - 1)
    K = np.block([[matspec.adjoint(a), 0 * eye], [0 * eye, eye]])
    K_prev_inv = np.block([[np.linalg.inv(matspec.adjoint(a_prev)), 0 * eye], [0 * eye, eye]])
    return K @ transfer_step(model, n, z) @ K_prev_inv


# ---------------------------------------------------------------------------
# solutions


@dataclass
class MatrixSolution:
    """Solution of the recurrence for indices -1..N; ``U[n + 1]`` is U_n."""

    z: complex
    U: np.ndarray

    @property
    def N(self) -> int:
        return self.U.shape[0] - 2

    def at(self, n: int) -> np.ndarray:
        return self.U[n + 1]


@dataclass
class SolutionPair:
    """Matrix polynomials of the first (P) and second (Q) kind on -1..N.

    P_{-1} = 0, P_0 = I and Q_{-1} = I, Q_0 = 0.
    """

    z: complex
    P: np.ndarray
    Q: np.ndarray

    @property
    def N(self) -> int:
        return self.P.shape[0] - 2

    def p(self, n: int) -> np.ndarray:
        return self.P[n + 1]

    def q(self, n: int) -> np.ndarray:
        return self.Q[n + 1]


def propagate(model: JacobiModel, N: int, z: complex, u_minus: np.ndarray,
              u_zero: np.ndarray) -> np.ndarray:
    """Forward three-term recursion from (U_{-1}, U_0) up to U_N.

    ``u_minus``/``u_zero`` are ``(d,)`` vectors or ``(d, k)`` matrices; returns
    an array of shape ``(N + 2,) + u_zero.shape``.
    """
    u_minus = np.asarray(u_minus, dtype=complex)
    u_zero = np.asarray(u_zero, dtype=complex)
    vec = u_zero.ndim == 1
    if vec:
        u_minus, u_zero = u_minus[:, None], u_zero[:, None]
    d = model.d
    U = np.empty((N + 2,) + u_zero.shape, dtype=complex)
    U[0], U[1] = u_minus, u_zero
    if N > 0:
        a, b = model.blocks(0, N)
        ainv = _inverse(a)
        shifted = (z * np.eye(d) - b)
        a_prev = np.concatenate([-np.eye(d, dtype=complex)[None], a[:-1]])
        a_prev_h = matspec.adjoint(a_prev)
        for n in range(N):
            U[n + 2] = ainv[n] @ (shifted[n] @ U[n + 1] - a_prev_h[n] @ U[n])
            if (n + 1) % _CHECK_EVERY == 0 or n + 1 == N:
                lo = max(0, n + 2 - _CHECK_EVERY)
                big = np.max(np.abs(U[lo:n + 3]).reshape(n + 3 - lo, -1), axis=1)
                if not np.all(big <= OVERFLOW):
                    first = lo + int(np.argmax(~(big <= OVERFLOW)))
                    raise _overflow(first - 1, U[:first, :, 0] if vec else U[:first])
    return U[..., 0] if vec else U


def solve_matrix(model: JacobiModel, initial: tuple, N: int, z: complex) -> MatrixSolution:
    """Matrix solution with prescribed (U_{-1}, U_0)."""
    u_minus, u_zero = (np.asarray(x, dtype=complex) for x in initial)
    if u_zero.ndim == 1:
        u_minus, u_zero = matspec.column_embed(u_minus), matspec.column_embed(u_zero)
    return MatrixSolution(z, propagate(model, N, z, u_minus, u_zero))


def polynomials(model: JacobiModel, N: int, z: complex) -> SolutionPair:
    """P_n(z), Q_n(z) for -1 <= n <= N."""
    d = model.d
    eye = np.eye(d, dtype=complex)
    both = propagate(model, N, z, np.hstack([0 * eye, eye]), np.hstack([eye, 0 * eye]))
    return SolutionPair(z, P=both[:, :, :d], Q=both[:, :, d:])


def extend_to_minus_one(model: JacobiModel, u0: np.ndarray, u1: np.ndarray,
                        z: complex) -> np.ndarray:
    """U_{-1} = (B_0 - z) U_0 + A_0 U_1, so the recurrence holds at n = 0."""
    d = model.d
    return (model.B(0) - z * np.eye(d)) @ np.asarray(u0) + model.A(0) @ np.asarray(u1)


def recurrence_residual(model: JacobiModel, U: np.ndarray, z: complex) -> np.ndarray:
    """Relative residual of A_{n-1}^* U_{n-1} + B_n U_n + A_n U_{n+1} = z U_n for 0 <= n < N.

    ``U`` uses the offset layout (``U[n + 1]`` is U_n). Each residual is divided
    by ``||A^* U_{n-1}|| + ||B U_n|| + ||A U_{n+1}|| + |z| ||U_n||``.
    """
    U = np.asarray(U, dtype=complex)
    if U.ndim == 2:
        U = U[..., None]
    N = U.shape[0] - 2
    d = model.d
    a, b = model.blocks(0, N)
    a_prev = np.concatenate([-np.eye(d, dtype=complex)[None], a[:-1]])
    t1 = matspec.adjoint(a_prev) @ U[:N]
    t2 = b @ U[1:N + 1]
    t3 = a @ U[2:N + 2]
    t4 = z * U[1:N + 1]
    res = matspec.op_norm(t1 + t2 + t3 - t4)
    scale = matspec.op_norm(t1) + matspec.op_norm(t2) + matspec.op_norm(t3) + matspec.op_norm(t4)
    return res / np.where(scale > 0, scale, 1.0)


def liouville_ostrogradsky(model: JacobiModel, w: complex, K: int) -> tuple[float, float]:
    """Largest relative residuals of the two polynomial identities up to index K.

    Q_k(w) P_k(conj w)^* = P_k(w) Q_k(conj w)^* for 0 <= k <= K, and
    Q_k(w) P_{k-1}(conj w)^* - P_k(w) Q_{k-1}(conj w)^* = A_{k-1}^-1 for 1 <= k <= K.
    Each residual is scaled by the sizes of the terms involved.
    """
    s = polynomials(model, K, w)
    c = polynomials(model, K, np.conj(w))
    P, Q = s.P[1:], s.Q[1:]
    Pc, Qc = matspec.adjoint(c.P[1:]), matspec.adjoint(c.Q[1:])
    nrm = matspec.op_norm
    first = Q @ Pc - P @ Qc
    scale1 = nrm(Q) * nrm(Pc) + nrm(P) * nrm(Qc)
    r1 = nrm(first) / np.where(scale1 > 0, scale1, 1.0)
    r2 = np.zeros(0)
    if K >= 1:
        ainv = np.linalg.inv(model.blocks(0, K)[0])
        second = Q[1:] @ Pc[:-1] - P[1:] @ Qc[:-1] - ainv
        scale2 = nrm(Q[1:]) * nrm(Pc[:-1]) + nrm(P[1:]) * nrm(Qc[:-1]) + nrm(ainv)
        r2 = nrm(second) / scale2
    return float(np.max(r1, initial=0.0)), float(np.max(r2, initial=0.0))


@dataclass
class TransferTrajectory:
    """Norm data of R_1(z), ..., R_K(z); entry i refers to R_{i+1}.

    ``stopped_at`` is the first index n whose product overflowed (K = n - 1),
    or None when the full horizon was computed.
    """

    z: complex
    norm: np.ndarray
    minmod: np.ndarray
    probe_norms: np.ndarray | None
    stopped_at: int | None

    @property
    def K(self) -> int:
        return len(self.norm)


def transfer_trajectory(model: JacobiModel, z: complex, N: int, probes: np.ndarray | None = None,
                        chunk: int = 4096) -> TransferTrajectory:
    """Operator norms and minimum moduli of R_n(z) for 1 <= n <= N.

    Products are formed chunk by chunk so memory stays bounded; ``probes`` is an
    optional ``(2d, m)`` matrix whose columns v give ``||R_n v||`` as well. The
    scan stops (without raising) at the first product with an entry above 1e150.
    """
    d2 = 2 * model.d
    R = np.eye(d2, dtype=complex)
    norms, mins, pnorms = [], [], []
    stopped = None
    for c0 in range(0, N, chunk):
        c1 = min(N, c0 + chunk)
        T = transfer_stack(model, c0, c1, z)
        Rs = np.empty((c1 - c0, d2, d2), dtype=complex)
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(c1 - c0):
                R = T[i] @ R
                Rs[i] = R
        big = np.max(np.abs(Rs), axis=(1, 2))
        bad = ~(big <= OVERFLOW)
        if np.any(bad):
            cut = int(np.argmax(bad))
            stopped = c0 + cut + 1
            Rs = Rs[:cut]
        sv = matspec.singular_values(Rs)
        norms.append(sv[:, 0])
        mins.append(sv[:, -1])
        if probes is not None:
            pnorms.append(np.linalg.norm(Rs @ probes, axis=1))
        if stopped is not None:
            break
    cat = (lambda xs: np.concatenate(xs)) if norms else (lambda xs: np.zeros(0))
    return TransferTrajectory(z, cat(norms), cat(mins),
                              np.concatenate(pnorms) if probes is not None and pnorms else None,
                              stopped)
