"""Ready-made dilations whose reversal behavior is known in closed form.

Each factory returns the instance together with the predicted reverse
ancilla and verdicts, so the rest of the library can be regression-tested
against worked answers: unital channels reverse with the unchanged maximally
mixed ancilla, the controlled-X gate reverses without preserving products,
the XX exchange reverses at every angle with a rotated ancilla, and thermal
operations reverse with the untouched Gibbs ancilla at every time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import Dilation, apply, channel_from_dilation
from .linalg import (
    frob_norm,
    kron,
    require_density,
    require_full_rank,
    require_hermitian,
    require_unitary,
    unitary_exp,
)
from .policy import DEFAULT_POLICY, NumericPolicy
from .reversal import TTRInstance

X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


@dataclass(frozen=True)
class ExpectedBehavior:
    """Predicted witness and verdicts; None means no prediction is attached."""

    xi_prime: np.ndarray
    ttr: bool
    product_preserving: bool | None = None


@dataclass(frozen=True)
class NamedExample:
    name: str
    instance: TTRInstance
    expected: ExpectedBehavior
    policy: NumericPolicy = field(default=DEFAULT_POLICY, compare=False)


def gibbs_state(h: np.ndarray, beta: float) -> np.ndarray:
    """Thermal state e^{-beta h} / Z; beta = 0 gives the maximally mixed state."""
    h = require_hermitian(np.asarray(h, dtype=complex), name="Hamiltonian")
    w = np.linalg.eigvalsh(h)
    # shift by the ground energy before exponentiating to avoid overflow
    ground = float(w[0])
    eig_vecs = np.linalg.eigh(h)[1]
    weights = np.exp(-beta * (w - ground))
    weights = weights / np.sum(weights)
    return (eig_vecs * weights) @ eig_vecs.conj().T


def partial_swap(angle: float) -> np.ndarray:
    """Rotation by `angle` inside the span of |01> and |10>, identity outside.

    Commutes with any H_S + H_E built from equal single-site Hamiltonians
    whose |01> and |10> levels are degenerate, so it generates thermal
    operations for matched Gibbs states.
    """
    u = np.eye(4, dtype=complex)
    c, s = np.cos(angle), np.sin(angle)
    u[1, 1] = c
    u[1, 2] = -s
    u[2, 1] = s
    u[2, 2] = c
    return u


def _is_steady(instance_gamma: np.ndarray, dilation: Dilation, policy: NumericPolicy) -> float:
    ch = channel_from_dilation(dilation, policy=policy)
    return frob_norm(apply(ch, instance_gamma) - instance_gamma)


def make_unital(
    d: int,
    u: np.ndarray,
    gamma: np.ndarray,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> NamedExample:
    """Channel with a maximally mixed ancilla; the same ancilla reverses it.

    The recovery of a unital channel at a steady prior is the adjoint
    channel, which the backwards unitary with the unchanged ancilla realizes.
    """
    xi = np.eye(d, dtype=complex) / d
    dilation = Dilation(d, d, u, xi, policy)
    gamma = require_density(gamma, policy, "prior")
    defect = _is_steady(gamma, dilation, policy)
    if defect > policy.equality_tol:
        raise ValueError(f"prior is not steady for this channel (defect {defect:.3e})")
    maximally_mixed = bool(frob_norm(gamma - xi) <= policy.equality_tol)
    expected = ExpectedBehavior(
        xi_prime=xi, ttr=True, product_preserving=True if maximally_mixed else None
    )
    instance = TTRInstance(dilation, gamma, xi, policy)
    return NamedExample("unital", instance, expected, policy)


def make_cx(p: float, r: float, policy: NumericPolicy = DEFAULT_POLICY) -> NamedExample:
    """Controlled-X dilation with diagonal ancilla and prior.

    Reversible with the unchanged ancilla for every bias p, yet the joint
    unitary maps the product prior to a correlated state whenever p differs
    from one half: reversibility without product preservation.
    """
    if not (0.0 < p < 1.0 and 0.0 < r < 1.0):
        raise ValueError("populations must lie strictly inside (0, 1) to keep full rank")
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = 1.0
    u[1, 1] = 1.0
    u[2, 3] = 1.0
    u[3, 2] = 1.0
    xi = np.diag([p, 1.0 - p]).astype(complex)
    gamma = np.diag([r, 1.0 - r]).astype(complex)
    dilation = Dilation(2, 2, u, xi, policy)
    balanced = bool(abs(p - 0.5) <= policy.equality_tol)
    expected = ExpectedBehavior(xi_prime=xi, ttr=True, product_preserving=balanced)
    instance = TTRInstance(dilation, gamma, xi, policy)
    return NamedExample("controlled_x", instance, expected, policy)


def make_xx(
    theta: float,
    xi: np.ndarray,
    gamma: np.ndarray,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> NamedExample:
    """Exchange dynamics exp(-i theta XX) with an X-commuting prior.

    Reversible at every angle: the witness is the ancilla rotated by
    exp(-i theta X), which shares its X expectation with the original.  If
    the ancilla commutes with X or with Z the rotation is unnecessary and the
    witness is the ancilla itself.
    """
    xi = require_density(xi, policy, "ancilla state")
    gamma = require_density(gamma, policy, "prior")
    require_full_rank(xi, policy, "ancilla state")
    require_full_rank(gamma, policy, "prior")
    commutator = frob_norm(gamma @ X - X @ gamma)
    if commutator > policy.equality_tol:
        raise ValueError(f"prior must commute with the exchange axis (defect {commutator:.3e})")
    u = unitary_exp(kron(X, X), theta)
    if (
        frob_norm(xi @ X - X @ xi) <= policy.equality_tol
        or frob_norm(xi @ Z - Z @ xi) <= policy.equality_tol
    ):
        xi_prime = xi
    else:
        rot = unitary_exp(X, theta)
        xi_prime = rot @ xi @ rot.conj().T
    half_turns = theta / (np.pi / 2.0)
    at_half_turn = abs(half_turns - round(half_turns)) <= 1e-9
    preserved = bool(frob_norm(xi @ X - X @ xi) <= policy.equality_tol or at_half_turn)
    expected = ExpectedBehavior(xi_prime=xi_prime, ttr=True, product_preserving=preserved)
    instance = TTRInstance(Dilation(2, 2, u, xi, policy), gamma, xi_prime, policy)
    return NamedExample("exchange_xx", instance, expected, policy)


def make_thermal(
    beta: float,
    h_s: np.ndarray,
    h_e: np.ndarray,
    u: np.ndarray,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> NamedExample:
    """Energy-preserving unitary with matched Gibbs ancilla and prior.

    The joint unitary must commute with the total bare Hamiltonian; the
    product of Gibbs states is then preserved and the unchanged ancilla
    reverses the channel at every evolution time.
    """
    h_s = require_hermitian(np.asarray(h_s, dtype=complex), name="system Hamiltonian")
    h_e = require_hermitian(np.asarray(h_e, dtype=complex), name="ancilla Hamiltonian")
    u = require_unitary(np.asarray(u, dtype=complex), name="joint unitary")
    dim_s = h_s.shape[0]
    dim_e = h_e.shape[0]
    bare = kron(h_s, np.eye(dim_e)) + kron(np.eye(dim_s), h_e)
    residual = frob_norm(u @ bare - bare @ u)
    if residual > policy.equality_tol:
        raise ValueError(f"unitary does not preserve the bare energy (residual {residual:.3e})")
    xi = gibbs_state(h_e, beta)
    gamma = gibbs_state(h_s, beta)
    expected = ExpectedBehavior(xi_prime=xi, ttr=True, product_preserving=True)
    instance = TTRInstance(Dilation(dim_s, dim_e, u, xi, policy), gamma, xi, policy)
    return NamedExample("thermal", instance, expected, policy)
