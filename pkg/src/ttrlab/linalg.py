"""Hermitian linear algebra kernel.

All routines operate on dense complex numpy arrays.  Dimensions stay small
(products of qubit/qutrit factors), so everything goes through exact
eigendecompositions rather than iterative methods.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .policy import DEFAULT_POLICY, NumericPolicy

HERMITICITY_TOL = 1e-12


class RankDeficiencyError(ValueError):
    """Raised when a matrix function needs strictly positive spectrum."""


def require_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    defect = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if defect > tol:
        raise ValueError(f"{name} is not Hermitian (defect {defect:.3e} > {tol:.1e})")
    return m


def hermitianize(m: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part (m + m†)/2."""
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True)
class EigDecomposition:
    """Spectral data of a Hermitian matrix.

    values  : real eigenvalues in ascending order
    vectors : unitary matrix whose columns are the matching eigenvectors,
              each phased so its largest-modulus component is real positive
    """

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T

    def degenerate(self, gap: float = DEFAULT_POLICY.degeneracy_gap) -> bool:
        if len(self.values) < 2:
            return False
        return bool(np.min(np.diff(self.values)) < gap)


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rephase each column so its largest-modulus entry is real positive.

    Ties on the modulus are broken by the lowest row index, which keeps the
    output deterministic for bitwise-identical input.
    """
    out = np.array(vectors, dtype=complex)
    for col in range(out.shape[1]):
        v = out[:, col]
        pivot = v[int(np.argmax(np.abs(v)))]
        if abs(pivot) > 0:
            out[:, col] = v * (pivot.conj() / abs(pivot))
    return out


def herm_eig(m: np.ndarray, tol: float = HERMITICITY_TOL) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix with a fixed phase convention."""
    m = require_hermitian(m, tol)
    values, vectors = np.linalg.eigh(m)
    return EigDecomposition(values=values.real, vectors=_fix_phases(vectors))


def mat_func(m: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to the spectrum of a Hermitian matrix."""
    eig = herm_eig(m)
    return (eig.vectors * f(eig.values)) @ eig.vectors.conj().T


def _positive_spectrum(m: np.ndarray, rank_tol: float, what: str) -> EigDecomposition:
    eig = herm_eig(m)
    top = float(np.max(np.abs(eig.values))) if eig.values.size else 0.0
    floor = rank_tol * top
    bad = eig.values <= floor
    if np.any(bad):
        worst = float(eig.values[bad][0])
        raise RankDeficiencyError(
            f"{what} needs a strictly positive spectrum; eigenvalue {worst:.3e} "
            f"is below the rank floor {floor:.3e}"
        )
    return eig


def mat_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of a PSD matrix (tiny negative ripple clipped)."""
    eig = herm_eig(m)
    return (eig.vectors * np.sqrt(np.clip(eig.values, 0.0, None))) @ eig.vectors.conj().T


def mat_inv_sqrt(m: np.ndarray, rank_tol: float = DEFAULT_POLICY.rank_tol) -> np.ndarray:
    eig = _positive_spectrum(m, rank_tol, "inverse square root")
    return (eig.vectors * eig.values**-0.5) @ eig.vectors.conj().T


def mat_log(m: np.ndarray, rank_tol: float = DEFAULT_POLICY.rank_tol) -> np.ndarray:
    eig = _positive_spectrum(m, rank_tol, "matrix logarithm")
    return (eig.vectors * np.log(eig.values)) @ eig.vectors.conj().T


def unitary_exp(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(-i h t) for Hermitian h."""
    eig = herm_eig(h)
    return (eig.vectors * np.exp(-1j * eig.values * t)) @ eig.vectors.conj().T


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace(m: np.ndarray, dim_s: int, dim_e: int, keep: str = "S") -> np.ndarray:
    """Trace out one tensor factor of an operator on a dim_s * dim_e space.

    keep="S" returns the system block Tr_E(m); keep="E" returns Tr_S(m).
    """
    m = np.asarray(m, dtype=complex)
    d = dim_s * dim_e
    if m.shape != (d, d):
        raise ValueError(f"operator shape {m.shape} does not match dims ({dim_s},{dim_e})")
    r = m.reshape(dim_s, dim_e, dim_s, dim_e)
    if keep == "S":
        return np.einsum("iaja->ij", r)
    if keep == "E":
        return np.einsum("iaib->ab", r)
    raise ValueError("keep must be 'S' or 'E'")


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)))


def frob_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=complex)))


def sylvester_sqrt_solve(
    gamma: np.ndarray,
    c: np.ndarray,
    rank_tol: float = DEFAULT_POLICY.rank_tol,
) -> np.ndarray:
    """Solve sqrt(gamma) B + B sqrt(gamma) = C for B.

    gamma must be positive definite; the solution is assembled entrywise in
    the eigenbasis of gamma, B_mn = C_mn / (sqrt(r_m) + sqrt(r_n)).
    """
    eig = _positive_spectrum(gamma, rank_tol, "sqrt-weighted Sylvester solve")
    c = np.asarray(c, dtype=complex)
    if c.shape != gamma.shape:
        raise ValueError("C must have the same shape as gamma")
    roots = np.sqrt(eig.values)
    c_eig = eig.vectors.conj().T @ c @ eig.vectors
    b_eig = c_eig / (roots[:, None] + roots[None, :])
    b = eig.vectors @ b_eig @ eig.vectors.conj().T
    sqrt_gamma = (eig.vectors * roots) @ eig.vectors.conj().T
    residual = frob_norm(sqrt_gamma @ b + b @ sqrt_gamma - c)
    if residual > 1e-10 * max(frob_norm(c), 1e-300):
        raise ArithmeticError(f"Sylvester residual {residual:.3e} exceeds tolerance")
    return b


def require_density(
    m: np.ndarray,
    policy: NumericPolicy = DEFAULT_POLICY,
    name: str = "state",
) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, PSD within tolerance."""
    m = require_hermitian(m, policy.cptp_tol, name)
    tr = np.trace(m).real
    if abs(tr - 1.0) > policy.cptp_tol:
        raise ValueError(f"{name} trace {tr:.12f} differs from 1 beyond tolerance")
    w = np.linalg.eigvalsh(m)
    if w[0] < -policy.cptp_tol:
        raise ValueError(f"{name} has negative eigenvalue {w[0]:.3e}")
    return m


def require_full_rank(
    m: np.ndarray,
    policy: NumericPolicy = DEFAULT_POLICY,
    name: str = "state",
) -> np.ndarray:
    w = np.linalg.eigvalsh(require_hermitian(m, policy.cptp_tol, name))
    floor = policy.rank_tol * max(float(w[-1]), 0.0)
    if w[0] <= floor:
        raise RankDeficiencyError(
            f"{name} is rank deficient: smallest eigenvalue {w[0]:.3e} vs floor {floor:.3e}"
        )
    return m


def require_unitary(u: np.ndarray, tol: float = 1e-10, name: str = "unitary") -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"{name} must be square, got shape {u.shape}")
    defect = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if defect > tol:
        raise ValueError(f"{name} fails unitarity (defect {defect:.3e} > {tol:.1e})")
    return u
