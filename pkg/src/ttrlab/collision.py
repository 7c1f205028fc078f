"""Collision-model Lindbladians and sequential reversal of the Petz recovery.

A system colliding repeatedly with fresh ancilla copies is coarse-grained
into a Lindbladian whose Hamiltonian part carries the coupling g and whose
dissipator carries the collision rate Gamma.  Three generators live here: the
forward one, the tabletop reverse driven by a reversed Hamiltonian and a
fresh ancilla xi', and the Petz generator whose extra correction Hamiltonian
makes a single Lindblad step track the Petz recovery of the forward step to
linear order in the step length.  Matching the reverse generator against the
Petz generator, step by step along the propagated prior trajectory, turns a
long recovery into a sequence of tabletop reversals.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .channels import (
    SUPEROP_DIM_CAP,
    QuantumChannel,
    channel_distance,
    channel_from_superop,
    choi_distance,
    choi_from_superop,
    superop_from_kraus,
    unvec,
    vec,
)
from .linalg import (
    RankDeficiencyError,
    frob_norm,
    herm_eig,
    hermitianize,
    kron,
    mat_inv_sqrt,
    mat_sqrt,
    partial_trace,
    require_density,
    require_full_rank,
    require_hermitian,
    unitary_exp,
)
from .policy import DEFAULT_POLICY, NumericPolicy
from .reversal import hermitian_basis, petz_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CollisionSpec:
    """One collision: joint Hamiltonian g*(H_S + H_E + H_I), fresh ancilla xi.

    The coarse-grained Lindbladian weights the dissipator by the collision
    rate; the regime assumption collision_rate ~ g^2 <dt> is the caller's
    modeling responsibility and is only warned about, never enforced.
    """

    dim_s: int
    dim_e: int
    h_s: np.ndarray
    h_e: np.ndarray
    h_i: np.ndarray
    xi: np.ndarray
    g: float = 1.0
    collision_rate: float = 1.0
    policy: NumericPolicy = field(default=DEFAULT_POLICY, compare=False)

    def __post_init__(self) -> None:
        d = self.dim_s * self.dim_e
        h_s = require_hermitian(self.h_s, name="system Hamiltonian")
        h_e = require_hermitian(self.h_e, name="ancilla Hamiltonian")
        h_i = require_hermitian(self.h_i, name="interaction Hamiltonian")
        if h_s.shape != (self.dim_s, self.dim_s):
            raise ValueError(f"system Hamiltonian shape {h_s.shape}, expected ({self.dim_s},{self.dim_s})")
        if h_e.shape != (self.dim_e, self.dim_e):
            raise ValueError(f"ancilla Hamiltonian shape {h_e.shape}, expected ({self.dim_e},{self.dim_e})")
        if h_i.shape != (d, d):
            raise ValueError(f"interaction Hamiltonian shape {h_i.shape}, expected ({d},{d})")
        xi = require_density(self.xi, self.policy, "collision ancilla")
        if xi.shape != (self.dim_e, self.dim_e):
            raise ValueError(f"ancilla shape {xi.shape} does not match dim_e={self.dim_e}")
        if self.collision_rate < 0:
            raise ValueError("collision rate must be nonnegative")
        if self.collision_rate > self.g**2:
            warnings.warn(
                f"collision rate {self.collision_rate:g} exceeds g^2 = {self.g**2:g}; "
                "the coarse-grained generator assumes rate ~ g^2 * mean collision time",
                stacklevel=2,
            )
        object.__setattr__(self, "h_s", h_s)
        object.__setattr__(self, "h_e", h_e)
        object.__setattr__(self, "h_i", h_i)
        object.__setattr__(self, "xi", xi)
        h_tot = kron(h_s, np.eye(self.dim_e)) + kron(np.eye(self.dim_s), h_e) + h_i
        object.__setattr__(self, "_h_tot", h_tot)

    @property
    def h_tot(self) -> np.ndarray:
        return self._h_tot


@dataclass(frozen=True)
class LindbladGenerator:
    """Hamiltonian plus weighted jumps, with a cached superoperator matrix.

    The superoperator uses column-stacking, so evolving a state means
    unvec(expm(dt * superoperator_matrix) @ vec(rho)).
    """

    hamiltonian: np.ndarray
    jumps: tuple[tuple[float, np.ndarray], ...]
    superoperator_matrix: np.ndarray = field(init=False, compare=False)

    def __post_init__(self) -> None:
        h = require_hermitian(self.hamiltonian, name="generator Hamiltonian")
        d = h.shape[0]
        if d > SUPEROP_DIM_CAP:
            raise ValueError(f"superoperator form capped at dimension {SUPEROP_DIM_CAP}")
        jumps: list[tuple[float, np.ndarray]] = []
        for w, op in self.jumps:
            if w < 0:
                raise ValueError(f"jump weight {w:g} is negative")
            op = np.asarray(op, dtype=complex)
            if op.shape != (d, d):
                raise ValueError(f"jump shape {op.shape} does not match dimension {d}")
            jumps.append((float(w), op))
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jumps", tuple(jumps))
        eye = np.eye(d)
        s = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
        if jumps:
            s += _dissipator_superop(self.jumps)
        object.__setattr__(self, "superoperator_matrix", s)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def _dissipator_superop(jumps: tuple[tuple[float, np.ndarray], ...]) -> np.ndarray:
    if not jumps:
        raise ValueError("empty jump list")
    d = np.asarray(jumps[0][1]).shape[0]
    eye = np.eye(d)
    s = np.zeros((d * d, d * d), dtype=complex)
    for w, op in jumps:
        ldl = op.conj().T @ op
        s += w * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye))
    return s


def collision_step(spec: CollisionSpec, rho: np.ndarray, dt: float) -> np.ndarray:
    """One exact collision, Tr_E(e^{-i g H dt} (rho x xi) e^{i g H dt})."""
    if dt < 0:
        raise ValueError("collision time must be nonnegative")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (spec.dim_s, spec.dim_s):
        raise ValueError(f"state shape {rho.shape} does not match dim_s={spec.dim_s}")
    u = unitary_exp(spec.g * spec.h_tot, dt)
    return partial_trace(u @ kron(rho, spec.xi) @ u.conj().T, spec.dim_s, spec.dim_e)


def collision_step_expansion(spec: CollisionSpec, rho: np.ndarray, dt: float) -> np.ndarray:
    """Second-order expansion of a collision: the coarse-graining cross-check.

    rho + g*dt*(-i[H_S + H_Ls, rho]) + (g*dt)^2 * (dissipator term), where the
    dissipator is assembled basis-free from ancilla-weighted contractions.
    """
    if dt < 0:
        raise ValueError("collision time must be nonnegative")
    rho = np.asarray(rho, dtype=complex)
    ds, de = spec.dim_s, spec.dim_e
    h = spec.h_tot
    h_eff = spec.h_s + lamb_shift(spec.h_i, spec.xi)
    sandwich = partial_trace(h @ kron(rho, spec.xi) @ h, ds, de)
    g_in = partial_trace(h @ h @ kron(np.eye(ds), spec.xi), ds, de)
    first = -1j * (h_eff @ rho - rho @ h_eff)
    second = sandwich - 0.5 * (g_in @ rho + rho @ g_in)
    return rho + spec.g * dt * first + (spec.g * dt) ** 2 * second


def lamb_shift(h_i: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Level shift Tr_E((1 x state) h_i) induced by the ancilla; linear in state."""
    h_i = np.asarray(h_i, dtype=complex)
    state = np.asarray(state, dtype=complex)
    d = h_i.shape[0]
    de = state.shape[0]
    if h_i.shape != (d, d) or state.shape != (de, de) or d % de:
        raise ValueError(f"interaction shape {h_i.shape} incompatible with ancilla shape {state.shape}")
    ds = d // de
    return hermitianize(partial_trace(kron(np.eye(ds), state) @ h_i, ds, de))


def _jump_operators(
    spec: CollisionSpec,
    out_basis: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ancilla weights p_k, their eigenvectors, and blocks <f_j|H_tot|e_k>.

    Returns (weights, blocks, f_basis) with blocks[j, k] an S-operator; the
    out basis defaults to the ancilla eigenbasis.
    """
    eig_xi = herm_eig(spec.xi)
    if out_basis is None:
        out_basis = eig_xi.vectors
    else:
        out_basis = np.asarray(out_basis, dtype=complex)
        if out_basis.shape != (spec.dim_e, spec.dim_e):
            raise ValueError("out basis size must match dim_e")
        defect = np.max(np.abs(out_basis.conj().T @ out_basis - np.eye(spec.dim_e)))
        if defect > 1e-10:
            raise ValueError(f"out basis is not orthonormal (defect {defect:.3e})")
    h4 = spec.h_tot.reshape(spec.dim_s, spec.dim_e, spec.dim_s, spec.dim_e)
    # blocks[j, k] = (1 x <f_j|) H_tot (1 x |e_k>)
    blocks = np.einsum("aj,iamb,bk->jkim", out_basis.conj(), h4, eig_xi.vectors, optimize=True)
    weights = np.clip(eig_xi.values, 0.0, None)
    return weights, blocks, out_basis


def forward_generator(spec: CollisionSpec, out_basis: np.ndarray | None = None) -> LindbladGenerator:
    """Coarse-grained generator of the collision sequence.

    Hamiltonian g*(H_S + H_Ls(xi)); one jump <f_j|H_tot|e_k> of weight
    rate*p_k per ancilla eigenpair and out vector.
    """
    weights, blocks, _ = _jump_operators(spec, out_basis)
    jumps = tuple(
        (spec.collision_rate * weights[k], blocks[j, k])
        for j in range(spec.dim_e)
        for k in range(spec.dim_e)
    )
    return LindbladGenerator(spec.g * (spec.h_s + lamb_shift(spec.h_i, spec.xi)), jumps)


def reverse_generator(spec: CollisionSpec, xi_prime: np.ndarray) -> LindbladGenerator:
    """Generator of tabletop reverse collisions, (-H_tot, xi').

    The Hamiltonian flow is negated (with the level shift re-weighted by the
    fresh ancilla) and each forward jump is replaced by its adjoint, weighted
    by the fresh ancilla's eigenvalue on the out index.
    """
    xi_prime = require_density(xi_prime, spec.policy, "reverse ancilla")
    if xi_prime.shape != (spec.dim_e, spec.dim_e):
        raise ValueError(f"reverse ancilla shape {xi_prime.shape} does not match dim_e={spec.dim_e}")
    eig_prime = herm_eig(xi_prime)
    _, blocks, _ = _jump_operators(spec, eig_prime.vectors)
    weights_prime = np.clip(eig_prime.values, 0.0, None)
    jumps = tuple(
        (spec.collision_rate * weights_prime[j], blocks[j, k].conj().T)
        for j in range(spec.dim_e)
        for k in range(spec.dim_e)
    )
    return LindbladGenerator(-spec.g * (spec.h_s + lamb_shift(spec.h_i, xi_prime)), jumps)


def correction_hamiltonian(
    gamma_t: np.ndarray,
    jumps: tuple[np.ndarray, ...] | list[np.ndarray],
    weights: tuple[float, ...] | list[float] | np.ndarray,
) -> np.ndarray:
    """Hermitian correction entering the Petz generator's Hamiltonian.

    In the prior eigenbasis the entry (a, b) weights <a|M|b> by
    (sqrt(r_a) - sqrt(r_b)) / (2i (sqrt(r_a) + sqrt(r_b))), where
    M = sum_k w_k (L† L + gamma^{-1/2} L gamma L† gamma^{-1/2}).  Vanishes
    for a maximally mixed prior and whenever conjugating each jump's adjoint
    by sqrt(gamma) only rescales it.
    """
    gamma_t = np.asarray(gamma_t, dtype=complex)
    require_full_rank(gamma_t, name="prior")
    inv_root = mat_inv_sqrt(gamma_t)
    m = np.zeros_like(gamma_t)
    for w, op in zip(weights, jumps):
        op = np.asarray(op, dtype=complex)
        m += w * (op.conj().T @ op + inv_root @ op @ gamma_t @ op.conj().T @ inv_root)
    eig = herm_eig(gamma_t)
    roots = np.sqrt(np.clip(eig.values, 0.0, None))
    coef = (roots[:, None] - roots[None, :]) / (roots[:, None] + roots[None, :])
    m_eig = eig.vectors.conj().T @ m @ eig.vectors
    return eig.vectors @ (coef * m_eig / 2j) @ eig.vectors.conj().T


def petz_generator(
    spec: CollisionSpec,
    gamma_t: np.ndarray,
    out_basis: np.ndarray | None = None,
) -> LindbladGenerator:
    """Generator whose Lindblad step tracks the Petz recovery of a forward step.

    Hamiltonian -g*(H_S + H_Ls(xi)) plus the correction term; each forward
    jump L is replaced by gamma^{1/2} L† gamma^{-1/2} at unchanged weight.
    """
    gamma_t = np.asarray(gamma_t, dtype=complex)
    require_full_rank(gamma_t, spec.policy, "prior")
    root = mat_sqrt(gamma_t)
    inv_root = mat_inv_sqrt(gamma_t, spec.policy.rank_tol)
    weights, blocks, _ = _jump_operators(spec, out_basis)
    ops = [blocks[j, k] for j in range(spec.dim_e) for k in range(spec.dim_e)]
    flat_weights = [
        spec.collision_rate * weights[k] for _ in range(spec.dim_e) for k in range(spec.dim_e)
    ]
    h_c = correction_hamiltonian(gamma_t, ops, flat_weights)
    jumps = tuple(
        (w, root @ op.conj().T @ inv_root) for w, op in zip(flat_weights, ops)
    )
    hamiltonian = -spec.g * (spec.h_s + lamb_shift(spec.h_i, spec.xi)) + h_c
    return LindbladGenerator(hamiltonian, jumps)


def lindblad_evolve(gen: LindbladGenerator, rho: np.ndarray, dt: float) -> np.ndarray:
    """Evolve rho by expm(dt * superoperator); output re-symmetrized."""
    if dt < 0:
        raise ValueError("evolution time must be nonnegative")
    rho = np.asarray(rho, dtype=complex)
    d = gen.dim
    if rho.shape != (d, d):
        raise ValueError(f"state shape {rho.shape} does not match generator dimension {d}")
    out = unvec(expm(dt * gen.superoperator_matrix) @ vec(rho), d, d)
    defect = frob_norm(out - out.conj().T)
    if defect > 0:
        logger.debug("symmetrization defect %.3e at dt=%g", defect, dt)
    return 0.5 * (out + out.conj().T)


def step_channel(gen: LindbladGenerator, dt: float, policy: NumericPolicy = DEFAULT_POLICY) -> QuantumChannel:
    """The map e^{dt * generator} as an explicit channel."""
    if dt < 0:
        raise ValueError("evolution time must be nonnegative")
    return channel_from_superop(expm(dt * gen.superoperator_matrix), gen.dim, gen.dim, policy)


def petz_step_gap(spec: CollisionSpec, gamma_t: np.ndarray, dt: float) -> float:
    """Distance between the Petz recovery of one forward Lindblad step and
    the step of the Petz generator.

    Scales as dt^2 for a generic prior and sits at the numerical floor for a
    steady one, where the Petz recovery is itself a semigroup.
    """
    forward = forward_generator(spec)
    forward_ch = step_channel(forward, dt, spec.policy)
    recovery = petz_map(forward_ch, gamma_t, spec.policy)
    petz_ch = step_channel(petz_generator(spec, gamma_t), dt, spec.policy)
    return channel_distance(recovery, petz_ch)


def petz_linear_defect(spec: CollisionSpec, gamma_t: np.ndarray) -> float:
    """Entrywise defect certifying the Petz generator at linear order.

    The dt coefficient of the Petz recovery of e^{dt L} minus the Petz
    generator collapses to K rho + rho K†; this returns the largest entry of
    K in the prior eigenbasis, which vanishes identically.
    """
    gamma_t = np.asarray(gamma_t, dtype=complex)
    require_full_rank(gamma_t, spec.policy, "prior")
    gen = forward_generator(spec)
    h = gen.hamiltonian
    root = mat_sqrt(gamma_t)
    inv_root = mat_inv_sqrt(gamma_t, spec.policy.rank_tol)
    l_gamma = -1j * (h @ gamma_t - gamma_t @ h)
    sum_ldl = np.zeros_like(gamma_t)
    sum_lgl = np.zeros_like(gamma_t)
    for w, op in gen.jumps:
        ldl = op.conj().T @ op
        lgl = op @ gamma_t @ op.conj().T
        l_gamma += w * (lgl - 0.5 * (ldl @ gamma_t + gamma_t @ ldl))
        sum_ldl += w * ldl
        sum_lgl += w * lgl
    eig = herm_eig(gamma_t)
    roots = np.sqrt(np.clip(eig.values, 0.0, None))
    lg_eig = eig.vectors.conj().T @ l_gamma @ eig.vectors
    a = eig.vectors @ (lg_eig / (roots[:, None] + roots[None, :])) @ eig.vectors.conj().T
    h_c = correction_hamiltonian(gamma_t, [op for _, op in gen.jumps], [w for w, _ in gen.jumps])
    k = (
        1j * root @ h @ inv_root
        - 0.5 * root @ sum_ldl @ inv_root
        - a @ inv_root
        - 1j * h
        + 1j * h_c
        + 0.5 * inv_root @ sum_lgl @ inv_root
    )
    return float(np.max(np.abs(eig.vectors.conj().T @ k @ eig.vectors)))


@dataclass(frozen=True)
class GeneratorMatchReport:
    """Residuals of the two conditions for the reverse generator to track
    the Petz generator: Hamiltonian parts equal up to a global level shift,
    and dissipators equal as superoperators."""

    hamiltonian_residual: float
    level_shift: float
    dissipator_residual: float

    @property
    def residuals(self) -> tuple[float, float]:
        return (self.hamiltonian_residual, self.dissipator_residual)


def generator_ttr_check(
    spec: CollisionSpec,
    gamma_t: np.ndarray,
    xi_prime: np.ndarray,
) -> GeneratorMatchReport:
    """Compare the Petz generator against the reverse generator for xi'.

    The Hamiltonian residual is minimized over a global level shift alpha
    (closed form: the trace of the defect over the dimension); the dissipator
    residual is a Frobenius distance of superoperator matrices.
    """
    xi_prime = require_density(xi_prime, spec.policy, "reverse ancilla")
    eig_prime = herm_eig(xi_prime)
    petz = petz_generator(spec, gamma_t, out_basis=eig_prime.vectors)
    reverse = reverse_generator(spec, xi_prime)
    defect = petz.hamiltonian - reverse.hamiltonian
    alpha = float(np.trace(defect).real) / spec.dim_s
    res1 = frob_norm(defect - alpha * np.eye(spec.dim_s))
    res2 = frob_norm(_dissipator_superop(petz.jumps) - _dissipator_superop(reverse.jumps))
    return GeneratorMatchReport(res1, alpha, res2)


def _reverse_dissipator_superop(spec: CollisionSpec, ancilla_op: np.ndarray) -> np.ndarray:
    """Superoperator of the reverse dissipator for an arbitrary ancilla operator.

    Linear in the ancilla argument, which is what makes a least-squares
    search for xi' possible.
    """
    ds, de = spec.dim_s, spec.dim_e
    h = spec.h_tot
    ancilla_op = np.asarray(ancilla_op, dtype=complex)
    s = np.zeros((ds * ds, ds * ds), dtype=complex)
    for col_b in range(ds):
        for col_a in range(ds):
            unit = np.zeros((ds, ds), dtype=complex)
            unit[col_a, col_b] = 1.0
            sand = partial_trace(h @ kron(unit, ancilla_op) @ h, ds, de)
            s[:, col_b * ds + col_a] = vec(sand)
    g_out = partial_trace(h @ h @ kron(np.eye(ds), ancilla_op), ds, de)
    s -= 0.5 * (np.kron(np.eye(ds), g_out) + np.kron(g_out.T, np.eye(ds)))
    return spec.collision_rate * s


def solve_xi_prime(spec: CollisionSpec, gamma_t: np.ndarray) -> np.ndarray:
    """Least-squares reverse ancilla matching the Petz generator at gamma_t.

    Both matching conditions are affine in xi': the reverse dissipator
    superoperator directly, and the Lamb shift together with the free level
    constant.  Solve the stacked system over a Hermitian, unit-trace ansatz,
    then clip the result back onto the density cone.
    """
    gamma_t = np.asarray(gamma_t, dtype=complex)
    petz = petz_generator(spec, gamma_t)
    target_dissipator = _dissipator_superop(petz.jumps)
    target_hamiltonian = petz.hamiltonian + spec.g * spec.h_s

    basis = hermitian_basis(spec.dim_e)
    eye_s = np.eye(spec.dim_s)
    columns = []
    for g_el in basis:
        dis = _reverse_dissipator_superop(spec, g_el).flatten()
        ham = vec(-spec.g * lamb_shift(spec.h_i, g_el))
        columns.append(np.concatenate([dis, ham, [np.trace(g_el)]]))
    # one extra unknown: the free level shift alpha on the Hamiltonian block
    alpha_col = np.concatenate(
        [np.zeros(target_dissipator.size, dtype=complex), vec(eye_s), [0.0]]
    )
    a_cplx = np.stack(columns + [alpha_col], axis=1)
    b_cplx = np.concatenate([target_dissipator.flatten(), vec(target_hamiltonian), [1.0]])
    a_mat = np.concatenate([a_cplx.real, a_cplx.imag], axis=0)
    b_vec = np.concatenate([b_cplx.real, b_cplx.imag])
    x, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)

    cand = np.zeros((spec.dim_e, spec.dim_e), dtype=complex)
    for coeff, g_el in zip(x[:-1], basis):
        cand += coeff * g_el
    eig = herm_eig(hermitianize(cand))
    w = np.clip(eig.values, 0.0, None)
    total = float(np.sum(w))
    if total <= 0:
        raise ArithmeticError("least-squares ancilla collapsed to zero")
    w = w / total
    return (eig.vectors * w) @ eig.vectors.conj().T


@dataclass(frozen=True)
class SequentialRun:
    """Trajectory record of an N-step reversal at fixed step length.

    prior_trajectory holds gamma_0 ... gamma_N propagated by the forward
    generator; gaps compare, per step and cumulatively, the Petz recovery of
    a forward step against the reverse Lindblad step actually applied.
    """

    total_time: float
    steps: int
    dt: float
    prior_trajectory: tuple[np.ndarray, ...]
    xi_primes: tuple[np.ndarray, ...]
    per_step_gaps: tuple[float, ...]
    cumulative_gaps: tuple[float, ...]
    min_eig_priors: tuple[float, ...]
    total_gap: float

    def __post_init__(self) -> None:
        n = self.steps
        if len(self.prior_trajectory) != n + 1:
            raise ValueError("prior trajectory must hold one state per step plus the start")
        for name in ("xi_primes", "per_step_gaps", "cumulative_gaps", "min_eig_priors"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must hold one entry per step")


def _normalize_policy(xi_prime_policy, spec: CollisionSpec):
    if callable(xi_prime_policy):
        return xi_prime_policy, False
    if isinstance(xi_prime_policy, str):
        if xi_prime_policy == "constant":
            return (lambda n: spec.xi), False
        if xi_prime_policy == "solve":
            return None, True
        raise ValueError(f"unknown ancilla policy {xi_prime_policy!r}")
    schedule = [np.asarray(m, dtype=complex) for m in xi_prime_policy]
    return (lambda n: schedule[n]), False


def sequential_reverse(
    spec: CollisionSpec,
    gamma_0: np.ndarray,
    xi_prime_policy="constant",
    total_time: float = 1.0,
    steps: int = 1,
) -> SequentialRun:
    """Concatenate per-step tabletop reversals along the propagated priors.

    The prior trajectory follows the forward generator, gamma_n =
    e^{dt L}(gamma_{n-1}).  The reverse ancilla for step n comes from the
    policy: "constant" reuses the forward ancilla, "solve" runs the
    least-squares generator match at each step, and a callable or sequence
    supplies an explicit schedule indexed from 0.  Compositions apply the
    reversal of the last forward step first.
    """
    if steps < 1:
        raise ValueError("at least one step is required")
    if total_time <= 0:
        raise ValueError("total time must be positive")
    gamma_0 = require_density(gamma_0, spec.policy, "prior")
    require_full_rank(gamma_0, spec.policy, "prior")
    schedule, solve = _normalize_policy(xi_prime_policy, spec)
    dt = total_time / steps

    forward = forward_generator(spec)
    step_superop = expm(dt * forward.superoperator_matrix)
    forward_ch = channel_from_superop(step_superop, spec.dim_s, spec.dim_s, spec.policy)

    trajectory = [gamma_0]
    xi_primes: list[np.ndarray] = []
    per_step: list[float] = []
    cumulative: list[float] = []
    min_eigs: list[float] = []
    petz_composed = np.eye(spec.dim_s**2, dtype=complex)
    reverse_composed = np.eye(spec.dim_s**2, dtype=complex)

    gamma = gamma_0
    for n in range(steps):
        xi_n = solve_xi_prime(spec, gamma) if solve else np.asarray(schedule(n), dtype=complex)
        xi_n = require_density(xi_n, spec.policy, f"reverse ancilla at step {n + 1}")
        try:
            recovery = petz_map(forward_ch, gamma, spec.policy)
        except RankDeficiencyError as exc:
            raise RankDeficiencyError(
                f"prior propagation lost full rank at step {n + 1}: {exc}"
            ) from exc
        reverse_step = step_channel(reverse_generator(spec, xi_n), dt, spec.policy)
        per_step.append(channel_distance(recovery, reverse_step))
        # reversal of the last forward step is applied first: new factors
        # multiply on the right
        petz_composed = petz_composed @ superop_from_kraus(recovery)
        reverse_composed = reverse_composed @ superop_from_kraus(reverse_step)
        cumulative.append(
            choi_distance(
                choi_from_superop(petz_composed, spec.dim_s, spec.dim_s),
                choi_from_superop(reverse_composed, spec.dim_s, spec.dim_s),
                spec.dim_s,
            )
        )
        gamma = hermitianize(unvec(step_superop @ vec(gamma), spec.dim_s, spec.dim_s))
        min_eigs.append(float(np.linalg.eigvalsh(gamma)[0]))
        trajectory.append(gamma)
        xi_primes.append(xi_n)

    return SequentialRun(
        total_time=total_time,
        steps=steps,
        dt=dt,
        prior_trajectory=tuple(trajectory),
        xi_primes=tuple(xi_primes),
        per_step_gaps=tuple(per_step),
        cumulative_gaps=tuple(cumulative),
        min_eig_priors=tuple(min_eigs),
        total_gap=cumulative[-1],
    )


def sequential_csv(run: SequentialRun) -> str:
    """Per-step record with a stable, replayable text form."""
    lines = ["step,dt,per_step_gap,cumulative_gap,min_eig_prior"]
    for n in range(run.steps):
        lines.append(
            f"{n + 1},{run.dt!r},{run.per_step_gaps[n]!r},"
            f"{run.cumulative_gaps[n]!r},{run.min_eig_priors[n]!r}"
        )
    return "\n".join(lines) + "\n"


def total_gap_slope(step_counts, gaps) -> float:
    """Log-log slope of total gap versus step count.

    Separate from the dt-grid scaling fit: step sweeps are short (five
    counts is typical), so only three points above the floor are required.
    """
    pts = [(float(n), float(g)) for n, g in zip(step_counts, gaps) if g > 1e-13]
    if len(pts) < 3:
        raise ValueError(f"step sweep needs at least 3 gaps above the floor, got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def collision_times(
    count: int,
    mean_dt: float,
    distribution: str = "fixed",
    seed: int = 0,
) -> np.ndarray:
    """Deterministic collision-time samples for trajectory studies."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    if mean_dt <= 0:
        raise ValueError("mean collision time must be positive")
    if distribution == "fixed":
        return np.full(count, float(mean_dt))
    if distribution == "exponential":
        return np.random.default_rng(seed).exponential(mean_dt, count)
    raise ValueError(f"unknown distribution {distribution!r}")
