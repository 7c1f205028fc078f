"""Quantum channels, dilations, and the Choi/superoperator plumbing.

Conventions used throughout:
  * composite indices are row-major, so an S x E operator places the system
    factor first: index (s, e) = s * dim_e + e;
  * vec() stacks columns, vec(A X B) = (B^T kron A) vec(X);
  * the Choi matrix is unnormalized, J = sum_ij |i><j| kron N(|i><j|), so a
    trace-preserving channel satisfies Tr_out(J) = identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    herm_eig,
    partial_trace,
    require_density,
    require_unitary,
    trace_norm,
)
from .policy import DEFAULT_POLICY, NumericPolicy

SUPEROP_DIM_CAP = 8


@dataclass(frozen=True)
class Dilation:
    """Unitary system-environment model of a channel: rho -> Tr_E(U(rho x xi)U†)."""

    dim_s: int
    dim_e: int
    unitary: np.ndarray
    xi: np.ndarray
    policy: NumericPolicy = field(default=DEFAULT_POLICY, compare=False)

    def __post_init__(self) -> None:
        d = self.dim_s * self.dim_e
        u = require_unitary(self.unitary, 1e-10, "dilation unitary")
        if u.shape != (d, d):
            raise ValueError(f"unitary shape {u.shape} does not match dims ({self.dim_s},{self.dim_e})")
        xi = require_density(self.xi, self.policy, "ancilla state")
        if xi.shape != (self.dim_e, self.dim_e):
            raise ValueError(f"ancilla shape {xi.shape} does not match dim_e={self.dim_e}")
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "xi", xi)

    def reversed(self, xi_prime: np.ndarray) -> "Dilation":
        """Same joint unitary run backwards, with a fresh ancilla."""
        return Dilation(self.dim_s, self.dim_e, self.unitary.conj().T, xi_prime, self.policy)


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(m, dtype=complex).flatten(order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(rows, cols, order="F")


@dataclass(frozen=True)
class QuantumChannel:
    """A CPTP map held as a Kraus list with an eagerly cached Choi matrix."""

    dim_in: int
    dim_out: int
    kraus: tuple[np.ndarray, ...]
    policy: NumericPolicy = field(default=DEFAULT_POLICY, compare=False)
    choi: np.ndarray = field(init=False, compare=False)

    def __post_init__(self) -> None:
        if not self.kraus:
            raise ValueError("channel needs at least one Kraus operator")
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        for k in ops:
            if k.shape != (self.dim_out, self.dim_in):
                raise ValueError(f"Kraus shape {k.shape}, expected ({self.dim_out},{self.dim_in})")
        total = sum(k.conj().T @ k for k in ops)
        defect = np.max(np.abs(total - np.eye(self.dim_in)))
        if defect > self.policy.cptp_tol:
            raise ValueError(f"Kraus operators fail trace preservation (defect {defect:.3e})")
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "choi", _choi_from_kraus(ops, self.dim_in, self.dim_out))


def _choi_from_kraus(kraus: tuple[np.ndarray, ...], dim_in: int, dim_out: int) -> np.ndarray:
    # vec(K) carries composite index (in, out), which is exactly the row-major
    # layout of the |i><j| kron N(|i><j|) block structure
    j = np.zeros((dim_in * dim_out, dim_in * dim_out), dtype=complex)
    for k in kraus:
        w = vec(k)
        j += np.outer(w, w.conj())
    return j


def apply(ch: QuantumChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros((ch.dim_out, ch.dim_out), dtype=complex)
    for k in ch.kraus:
        out += k @ rho @ k.conj().T
    return out


def adjoint_apply(ch: QuantumChannel, x: np.ndarray) -> np.ndarray:
    """Heisenberg-picture action, sum_k K† X K."""
    x = np.asarray(x, dtype=complex)
    out = np.zeros((ch.dim_in, ch.dim_in), dtype=complex)
    for k in ch.kraus:
        out += k.conj().T @ x @ k
    return out


def choi(ch: QuantumChannel) -> np.ndarray:
    return ch.choi


def channel_from_dilation(
    d: Dilation,
    out_basis: np.ndarray | None = None,
    policy: NumericPolicy | None = None,
) -> QuantumChannel:
    """Kraus operators sqrt(p_k) <f_j| U |e_k> from a dilation.

    |e_k> are the ancilla eigenvectors with weight above the rank floor and
    <f_j| runs over out_basis (columns; computational basis by default).
    """
    pol = policy or d.policy
    xi_eig = herm_eig(d.xi)
    floor = pol.rank_tol * max(float(xi_eig.values[-1]), 0.0)
    if out_basis is None:
        out_basis = np.eye(d.dim_e, dtype=complex)
    else:
        out_basis = require_unitary(np.asarray(out_basis, dtype=complex), 1e-10, "out basis")
        if out_basis.shape != (d.dim_e, d.dim_e):
            raise ValueError("out basis size must match dim_e")
    u4 = d.unitary.reshape(d.dim_s, d.dim_e, d.dim_s, d.dim_e)
    kraus: list[np.ndarray] = []
    for k, p in enumerate(xi_eig.values):
        if p <= floor:
            continue
        e_k = xi_eig.vectors[:, k]
        # blocks[m] = (1 x <f_m|) U (1 x |e_k>), an S-operator for each out vector
        blocks = np.einsum("am,iajb,b->mij", out_basis.conj(), u4, e_k, optimize=True)
        for m in range(d.dim_e):
            kraus.append(np.sqrt(p) * blocks[m])
    return QuantumChannel(d.dim_s, d.dim_s, tuple(kraus), pol)


def kraus_from_choi(
    j: np.ndarray,
    dim_in: int,
    dim_out: int,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> tuple[np.ndarray, ...]:
    """Eigen-split an (unnormalized) Choi matrix back into Kraus operators."""
    eig = herm_eig(j, tol=policy.cptp_tol)
    top = max(float(np.max(np.abs(eig.values))), 1e-300)
    kraus: list[np.ndarray] = []
    for idx in range(len(eig.values)):
        w = eig.values[idx]
        if w <= policy.rank_tol * top:
            continue
        col = eig.vectors[:, idx]
        block = col.reshape(dim_in, dim_out)  # row index i, column index a
        kraus.append(np.sqrt(w) * block.T)
    if not kraus:
        raise ValueError("Choi matrix has no weight above the rank floor")
    return tuple(kraus)


def channel_from_choi(
    j: np.ndarray,
    dim_in: int,
    dim_out: int,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> QuantumChannel:
    return QuantumChannel(dim_in, dim_out, kraus_from_choi(j, dim_in, dim_out, policy), policy)


def superop_from_kraus(ch: QuantumChannel) -> np.ndarray:
    """Column-stacking superoperator matrix, vec(N(rho)) = S vec(rho)."""
    if ch.dim_in > SUPEROP_DIM_CAP or ch.dim_out > SUPEROP_DIM_CAP:
        raise ValueError(f"superoperator form capped at dimension {SUPEROP_DIM_CAP}")
    s = np.zeros((ch.dim_out**2, ch.dim_in**2), dtype=complex)
    for k in ch.kraus:
        s += np.kron(k.conj(), k)
    return s


def choi_from_superop(s: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    """J[(i,a),(j,b)] = [N(|i><j|)]_{ab} = S[(b,a) composite, (j,i) composite]."""
    s4 = np.asarray(s, dtype=complex).reshape(dim_out, dim_out, dim_in, dim_in)
    return np.transpose(s4, (3, 1, 2, 0)).reshape(dim_in * dim_out, dim_in * dim_out)


def channel_from_superop(
    s: np.ndarray,
    dim_in: int,
    dim_out: int,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> QuantumChannel:
    return channel_from_choi(choi_from_superop(s, dim_in, dim_out), dim_in, dim_out, policy)


@dataclass(frozen=True)
class CptpReport:
    tp_defect: float
    min_choi_eigenvalue: float
    trace_preserving: bool
    completely_positive: bool

    @property
    def ok(self) -> bool:
        return self.trace_preserving and self.completely_positive


def is_cptp(ch: QuantumChannel, policy: NumericPolicy | None = None) -> CptpReport:
    pol = policy or ch.policy
    total = sum(k.conj().T @ k for k in ch.kraus)
    tp_defect = float(np.max(np.abs(total - np.eye(ch.dim_in))))
    min_eig = float(np.linalg.eigvalsh(ch.choi)[0])
    return CptpReport(
        tp_defect=tp_defect,
        min_choi_eigenvalue=min_eig,
        trace_preserving=tp_defect <= pol.cptp_tol,
        completely_positive=min_eig >= -pol.cptp_tol,
    )


def channel_distance(a: QuantumChannel, b: QuantumChannel) -> float:
    """Half the trace norm of the Choi difference, normalized by dim_in.

    Zero exactly when the maps coincide.  This bounds the worst-case
    distinguishability from both sides (up to a factor of dim_in) without
    requiring a semidefinite solve.
    """
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise ValueError("channels act between different spaces")
    return 0.5 * trace_norm(a.choi - b.choi) / a.dim_in


def choi_distance(j_a: np.ndarray, j_b: np.ndarray, dim_in: int) -> float:
    return 0.5 * trace_norm(np.asarray(j_a) - np.asarray(j_b)) / dim_in
