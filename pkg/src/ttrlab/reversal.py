"""Exact tabletop reversibility of the Petz recovery map.

Given a dilation N(rho) = Tr_E(U (rho x xi) U†) and a full-rank prior gamma,
the Petz recovery of N can sometimes be produced by running the same joint
unitary backwards with a different ancilla: Tr_E(U† (rho x xi') U).  This
module decides that question three ways: a spectral fourth-order tensor
criterion, a direct Choi comparison, and a feasibility search over candidate
ancilla states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import (
    Dilation,
    QuantumChannel,
    apply,
    channel_distance,
    channel_from_dilation,
)
from .linalg import (
    herm_eig,
    frob_norm,
    kron,
    mat_inv_sqrt,
    mat_sqrt,
    partial_trace,
    require_density,
    require_full_rank,
)
from .policy import DEFAULT_POLICY, NumericPolicy

MAX_ASCENT_ITERATIONS = 5000


@dataclass(frozen=True)
class TTRInstance:
    """A dilation, a full-rank prior, and (optionally) a candidate reverse ancilla."""

    dilation: Dilation
    gamma: np.ndarray
    xi_prime: np.ndarray | None = None
    policy: NumericPolicy = field(default=DEFAULT_POLICY, compare=False)

    def __post_init__(self) -> None:
        gamma = require_density(self.gamma, self.policy, "prior")
        require_full_rank(gamma, self.policy, "prior")
        if gamma.shape != (self.dilation.dim_s, self.dilation.dim_s):
            raise ValueError("prior dimension does not match the system")
        object.__setattr__(self, "gamma", gamma)
        ch = channel_from_dilation(self.dilation)
        gamma_out = apply(ch, gamma)
        require_full_rank(gamma_out, self.policy, "propagated prior")
        object.__setattr__(self, "_channel", ch)
        object.__setattr__(self, "_gamma_out", gamma_out)
        if self.xi_prime is not None:
            xi_p = require_density(self.xi_prime, self.policy, "reverse ancilla")
            object.__setattr__(self, "xi_prime", xi_p)

    @property
    def channel(self) -> QuantumChannel:
        return self._channel

    @property
    def gamma_out(self) -> np.ndarray:
        return self._gamma_out

    def with_xi_prime(self, xi_prime: np.ndarray) -> "TTRInstance":
        return TTRInstance(self.dilation, self.gamma, xi_prime, self.policy)


def petz_map(ch: QuantumChannel, gamma: np.ndarray, policy: NumericPolicy | None = None) -> QuantumChannel:
    """Recovery map gamma^{1/2} N†((N(gamma))^{-1/2} . (N(gamma))^{-1/2}) gamma^{1/2}.

    Each forward Kraus operator K maps to sqrt(gamma) K† (N(gamma))^{-1/2}.
    """
    pol = policy or ch.policy
    gamma = require_density(gamma, pol, "prior")
    require_full_rank(gamma, pol, "prior")
    gamma_out = apply(ch, gamma)
    require_full_rank(gamma_out, pol, "propagated prior")
    left = mat_sqrt(gamma)
    right = mat_inv_sqrt(gamma_out, pol.rank_tol)
    kraus = tuple(left @ k.conj().T @ right for k in ch.kraus)
    return QuantumChannel(ch.dim_out, ch.dim_in, kraus, pol)


def tabletop_reverse(
    d: Dilation,
    xi_prime: np.ndarray,
    policy: NumericPolicy | None = None,
) -> QuantumChannel:
    """Channel of the reversed dilation: rho -> Tr_E(U† (rho x xi') U)."""
    return channel_from_dilation(d.reversed(xi_prime), policy=policy or d.policy)


@dataclass(frozen=True)
class TransitionMatrix:
    """Joint-unitary amplitudes between the four relevant eigenbases.

    entries[m, j, n, k] = <out_m| x <anc'_j| U |in_n> x |anc_k>, where the
    bases diagonalize the propagated prior, the reverse ancilla, the prior,
    and the forward ancilla respectively.
    """

    entries: np.ndarray
    prior_values: np.ndarray
    prior_out_values: np.ndarray
    ancilla_values: np.ndarray
    ancilla_prime_values: np.ndarray
    degenerate: bool


def transition_matrix(inst: TTRInstance) -> TransitionMatrix:
    if inst.xi_prime is None:
        raise ValueError("a reverse ancilla is required to build the transition matrix")
    d = inst.dilation
    eig_gamma = herm_eig(inst.gamma)
    eig_gamma_out = herm_eig(inst.gamma_out)
    eig_xi = herm_eig(d.xi)
    eig_xi_p = herm_eig(inst.xi_prime)
    left = kron(eig_gamma_out.vectors, eig_xi_p.vectors).conj().T
    right = kron(eig_gamma.vectors, eig_xi.vectors)
    entries = (left @ d.unitary @ right).reshape(d.dim_s, d.dim_e, d.dim_s, d.dim_e)
    gap = inst.policy.degeneracy_gap
    degenerate = any(
        e.degenerate(gap) for e in (eig_gamma, eig_gamma_out, eig_xi, eig_xi_p)
    )
    return TransitionMatrix(
        entries=entries,
        prior_values=eig_gamma.values,
        prior_out_values=eig_gamma_out.values,
        ancilla_values=eig_xi.values,
        ancilla_prime_values=eig_xi_p.values,
        degenerate=degenerate,
    )


def exact_ttr_residual(inst: TTRInstance) -> float:
    """Max-entry defect of the spectral reversibility criterion.

    The candidate reverse equals the Petz map exactly when, for every pair of
    in/out eigenvalue indices,
        sum_jk (p_k sqrt(r_n1 r_n2) - p'_j sqrt(r'_m1 r'_m2))
               Phi[m1,j,n1,k] conj(Phi[m2,j,n2,k]) = 0.
    """
    tm = transition_matrix(inst)
    phi = tm.entries
    # g1[m1,n1,m2,n2] = sum_jk p_k Phi[m1,j,n1,k] conj(Phi[m2,j,n2,k])
    g1 = np.einsum("ajck,bjdk,k->acbd", phi, phi.conj(), tm.ancilla_values, optimize=True)
    g2 = np.einsum("ajck,bjdk,j->acbd", phi, phi.conj(), tm.ancilla_prime_values, optimize=True)
    root_in = np.sqrt(np.clip(tm.prior_values, 0.0, None))
    root_out = np.sqrt(np.clip(tm.prior_out_values, 0.0, None))
    in_weight = root_in[:, None] * root_in[None, :]      # (n1, n2)
    out_weight = root_out[:, None] * root_out[None, :]   # (m1, m2)
    lhs = np.einsum("acbd,cd->acbd", g1, in_weight) - np.einsum(
        "acbd,ab->acbd", g2, out_weight
    )
    return float(np.max(np.abs(lhs)))


def choi_gap(inst: TTRInstance) -> float:
    """Distance between the Petz map and the candidate tabletop reverse."""
    if inst.xi_prime is None:
        raise ValueError("a reverse ancilla is required to compute the gap")
    petz = petz_map(inst.channel, inst.gamma, inst.policy)
    reverse = tabletop_reverse(inst.dilation, inst.xi_prime, inst.policy)
    return channel_distance(petz, reverse)


def bayes_residual(inst: TTRInstance) -> float:
    """Defect of the retrodiction symmetry between forward and reverse weights.

    For eigenprojectors Pi_n of the prior and Pi'_m of the propagated prior,
    a tabletop reverse of the Petz map must satisfy
        r_n Tr(N(Pi_n) Pi'_m) = r'_m Tr(Nrev(Pi'_m) Pi_n).
    """
    if inst.xi_prime is None:
        raise ValueError("a reverse ancilla is required to compute the residual")
    eig_gamma = herm_eig(inst.gamma)
    eig_out = herm_eig(inst.gamma_out)
    reverse = tabletop_reverse(inst.dilation, inst.xi_prime, inst.policy)
    worst = 0.0
    for n in range(len(eig_gamma.values)):
        v = eig_gamma.vectors[:, n]
        pi_n = np.outer(v, v.conj())
        fwd = apply(inst.channel, pi_n)
        for m in range(len(eig_out.values)):
            w = eig_out.vectors[:, m]
            pi_m = np.outer(w, w.conj())
            lhs = eig_gamma.values[n] * np.trace(fwd @ pi_m).real
            rhs = eig_out.values[m] * np.trace(apply(reverse, pi_m) @ pi_n).real
            worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass(frozen=True)
class ProductPreservationReport:
    preserved: bool
    defect: float
    gamma_out: np.ndarray
    xi_out: np.ndarray


def product_preservation_check(
    d: Dilation,
    gamma: np.ndarray,
    policy: NumericPolicy | None = None,
) -> ProductPreservationReport:
    """Does the joint unitary map gamma x xi to an exact product state?

    Product preservation implies tabletop reversibility with the propagated
    ancilla as witness, but reversibility can hold without it.
    """
    pol = policy or d.policy
    joint = d.unitary @ kron(gamma, d.xi) @ d.unitary.conj().T
    gamma_out = partial_trace(joint, d.dim_s, d.dim_e, "S")
    xi_out = partial_trace(joint, d.dim_s, d.dim_e, "E")
    defect = frob_norm(joint - kron(gamma_out, xi_out))
    return ProductPreservationReport(
        preserved=defect <= pol.equality_tol,
        defect=float(defect),
        gamma_out=gamma_out,
        xi_out=xi_out,
    )


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal Hermitian basis: diagonal units, then real/imag pair sums."""
    basis: list[np.ndarray] = []
    for i in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1.0
        basis.append(m)
    inv_root2 = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = inv_root2
            m[j, i] = inv_root2
            basis.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = -1j * inv_root2
            m[j, i] = 1j * inv_root2
            basis.append(m)
    return basis


def reverse_choi_of_ancilla(d: Dilation, e_op: np.ndarray) -> np.ndarray:
    """Choi matrix of rho -> Tr_E(U†(rho x E)U) for an arbitrary ancilla operator.

    The reversed map is linear in the ancilla, so this extends the dilation
    construction off the density-matrix cone; it is the workhorse behind the
    feasibility search.
    """
    u4 = d.unitary.conj().T.reshape(d.dim_s, d.dim_e, d.dim_s, d.dim_e)
    # out[i, a, j, b] = [Tr_E(U†(|i><j| x E)U)]_{ab}
    j4 = np.einsum("aeif,fg,bejg->iajb", u4, np.asarray(e_op, dtype=complex), u4.conj(), optimize=True)
    n = d.dim_s * d.dim_s
    return j4.reshape(n, n)


@dataclass(frozen=True)
class ExactTTRReport:
    verdict: str                      # "feasible" | "infeasible" | "undetermined"
    spectral_residual: float | None
    choi_gap: float | None
    witness_xi_prime: np.ndarray | None
    degenerate_spectra: bool
    lstsq_residual: float
    min_eigenvalue: float

    @property
    def feasible(self) -> bool:
        return self.verdict == "feasible"


def _clip_to_density(m: np.ndarray, rank_tol: float) -> np.ndarray | None:
    eig = herm_eig(0.5 * (m + m.conj().T), tol=np.inf)
    if eig.values[0] < -rank_tol:
        return None
    w = np.clip(eig.values, 0.0, None)
    total = float(np.sum(w))
    if total <= 0:
        return None
    w = w / total
    return (eig.vectors * w) @ eig.vectors.conj().T


def feasible_xi_prime(
    d: Dilation,
    gamma: np.ndarray,
    policy: NumericPolicy | None = None,
) -> ExactTTRReport:
    """Search for a reverse ancilla that realizes the Petz map.

    The reverse Choi matrix is linear in the ancilla, so candidates live on
    an affine slice of Hermitian operators: solve the equality constraints by
    least squares, then push the minimum eigenvalue up over the solution
    set's nullspace by subgradient ascent.  A feasible verdict always ships a
    witness that has been re-certified through the Choi gap.
    """
    pol = policy or d.policy
    inst = TTRInstance(d, gamma, None, pol)
    petz_choi = petz_map(inst.channel, gamma, pol).choi
    degenerate = any(
        herm_eig(m).degenerate(pol.degeneracy_gap)
        for m in (gamma, inst.gamma_out, d.xi)
    )

    basis = hermitian_basis(d.dim_e)
    n_par = len(basis)
    columns = [reverse_choi_of_ancilla(d, g) for g in basis]
    a_cplx = np.stack([c.flatten() for c in columns], axis=1)
    rows_real = np.concatenate([a_cplx.real, a_cplx.imag], axis=0)
    trace_row = np.array([[np.trace(g).real for g in basis]])
    a_mat = np.concatenate([rows_real, trace_row], axis=0)
    b_vec = np.concatenate([petz_choi.flatten().real, petz_choi.flatten().imag, [1.0]])

    x0, _, rank, svals = np.linalg.lstsq(a_mat, b_vec, rcond=None)
    lstsq_residual = float(np.linalg.norm(a_mat @ x0 - b_vec))

    def assemble(x: np.ndarray) -> np.ndarray:
        m = np.zeros((d.dim_e, d.dim_e), dtype=complex)
        for coeff, g in zip(x, basis):
            m += coeff * g
        return m

    if lstsq_residual > pol.equality_tol * max(1.0, float(np.linalg.norm(b_vec))):
        return ExactTTRReport(
            verdict="infeasible",
            spectral_residual=None,
            choi_gap=None,
            witness_xi_prime=None,
            degenerate_spectra=degenerate,
            lstsq_residual=lstsq_residual,
            min_eigenvalue=float("nan"),
        )

    # nullspace of the constraint matrix parametrizes the solution set
    _, s_full, vt = np.linalg.svd(a_mat)
    tol_sv = max(a_mat.shape) * np.finfo(float).eps * (s_full[0] if len(s_full) else 1.0)
    null = vt[sum(s_full > tol_sv):].T  # (n_par, n_null)

    best_x = x0
    best_min_eig = float(np.linalg.eigvalsh(assemble(x0))[0].real)
    if null.shape[1] > 0:
        x = x0.copy()
        for it in range(1, MAX_ASCENT_ITERATIONS + 1):
            eig = herm_eig(0.5 * (assemble(x) + assemble(x).conj().T), tol=np.inf)
            lo = float(eig.values[0])
            if lo > best_min_eig:
                best_min_eig = lo
                best_x = x.copy()
            if best_min_eig > pol.rank_tol:
                break
            v = eig.vectors[:, 0]
            grad = np.array(
                [
                    sum(
                        coeff * float((v.conj() @ (g @ v)).real)
                        for coeff, g in zip(null[:, z], basis)
                    )
                    for z in range(null.shape[1])
                ]
            )
            norm = np.linalg.norm(grad)
            if norm < 1e-15:
                break
            x = x + null @ (grad / norm) / it

    witness = _clip_to_density(assemble(best_x), pol.rank_tol)
    if best_min_eig < -pol.rank_tol or witness is None:
        converged = null.shape[1] == 0 or best_min_eig < -1e-3
        return ExactTTRReport(
            verdict="infeasible" if converged else "undetermined",
            spectral_residual=None,
            choi_gap=None,
            witness_xi_prime=None,
            degenerate_spectra=degenerate,
            lstsq_residual=lstsq_residual,
            min_eigenvalue=best_min_eig,
        )

    cand = inst.with_xi_prime(witness)
    gap = choi_gap(cand)
    tm_res = exact_ttr_residual(cand)
    degenerate = degenerate or herm_eig(witness).degenerate(pol.degeneracy_gap)
    if gap > pol.equality_tol:
        return ExactTTRReport(
            verdict="undetermined",
            spectral_residual=tm_res,
            choi_gap=gap,
            witness_xi_prime=witness,
            degenerate_spectra=degenerate,
            lstsq_residual=lstsq_residual,
            min_eigenvalue=best_min_eig,
        )
    return ExactTTRReport(
        verdict="feasible",
        spectral_residual=tm_res,
        choi_gap=gap,
        witness_xi_prime=witness,
        degenerate_spectra=degenerate,
        lstsq_residual=lstsq_residual,
        min_eigenvalue=best_min_eig,
    )
