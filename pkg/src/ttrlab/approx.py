"""Order-by-order matching of the Petz recovery against the backwards dilation.

For a joint Hamiltonian family U_dt = exp(-i g H dt) the recovery-vs-reverse
question has a short-time refinement: expand both maps in dt and compare the
coefficients.  Zeroth order is free, and the first and second orders reduce to
operator identities built from two auxiliaries A and B that solve Lyapunov
equations weighted by sqrt(gamma).  This module evaluates those identities as
residuals, measures the finite-dt map mismatch, and fits its decay exponent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channels import Dilation, QuantumChannel, apply, channel_distance, channel_from_dilation
from .linalg import (
    frob_norm,
    hermitianize,
    kron,
    mat_inv_sqrt,
    mat_sqrt,
    partial_trace,
    require_density,
    require_full_rank,
    require_hermitian,
    sylvester_sqrt_solve,
    unitary_exp,
)
from .policy import DEFAULT_POLICY, NumericPolicy
from .reversal import hermitian_basis, petz_map, tabletop_reverse

SCALING_FLOOR = 1e-13
STEADY_PROBE_DT = 1e-3
STEADY_TOL = 1e-9
DEFAULT_DT_GRID: tuple[float, ...] = tuple(float(t) for t in np.logspace(-3.0, -1.0, 12))

SECOND_ORDER_MODES = ("general", "steady_commuting", "maximally_mixed")


@dataclass(frozen=True)
class HamiltonianDilation:
    """Joint Hamiltonian, ancilla state and coupling defining U_dt = exp(-i g H dt)."""

    dim_s: int
    dim_e: int
    h_tot: np.ndarray
    xi: np.ndarray
    g: float = 1.0
    policy: NumericPolicy = field(default=DEFAULT_POLICY, compare=False)

    def __post_init__(self) -> None:
        d = self.dim_s * self.dim_e
        h = require_hermitian(np.asarray(self.h_tot, dtype=complex), name="joint hamiltonian")
        if h.shape != (d, d):
            raise ValueError(
                f"joint hamiltonian shape {h.shape} does not match dims ({self.dim_s},{self.dim_e})"
            )
        xi = require_density(self.xi, self.policy, "ancilla state")
        if xi.shape != (self.dim_e, self.dim_e):
            raise ValueError(f"ancilla shape {xi.shape} does not match dim_e={self.dim_e}")
        object.__setattr__(self, "h_tot", h)
        object.__setattr__(self, "xi", xi)

    @property
    def hamiltonian(self) -> np.ndarray:
        """Coupling-scaled generator of the joint family."""
        return self.g * self.h_tot

    def unitary(self, dt: float) -> np.ndarray:
        return unitary_exp(self.hamiltonian, dt)

    def dilation(self, dt: float) -> Dilation:
        return Dilation(self.dim_s, self.dim_e, self.unitary(dt), self.xi, self.policy)

    def channel(self, dt: float) -> QuantumChannel:
        return channel_from_dilation(self.dilation(dt))


def _env_weighted(h: np.ndarray, sigma: np.ndarray, dim_s: int, dim_e: int) -> np.ndarray:
    """Tr_E(h (1 x sigma))."""
    return partial_trace(h @ kron(np.eye(dim_s), sigma), dim_s, dim_e)


def _sandwich(
    h: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    sigma: np.ndarray,
    dim_s: int,
    dim_e: int,
) -> np.ndarray:
    """Tr_E((left x 1) h (right x sigma))."""
    return partial_trace(kron(left, np.eye(dim_e)) @ h @ kron(right, sigma), dim_s, dim_e)


def _anti(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y + y @ x


def effective_hamiltonian(hd: HamiltonianDilation, state: np.ndarray) -> np.ndarray:
    """System-side generator Tr_E(H (1 x state)) induced by an environment state."""
    state = require_density(state, hd.policy, "environment state")
    if state.shape != (hd.dim_e, hd.dim_e):
        raise ValueError(f"environment state shape {state.shape} does not match dim_e={hd.dim_e}")
    return hermitianize(_env_weighted(hd.h_tot, state, hd.dim_s, hd.dim_e))


def a_operator(gamma: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Solution of sqrt(gamma) A + A sqrt(gamma) = -i[h, gamma] for full-rank gamma.

    This is the dt-derivative of (N_dt(gamma))^{1/2} when h generates the
    reduced first-order motion of gamma.
    """
    gamma = require_full_rank(np.asarray(gamma, dtype=complex), DEFAULT_POLICY, "prior")
    h = np.asarray(h, dtype=complex)
    comm = h @ gamma - gamma @ h
    return sylvester_sqrt_solve(gamma, -1j * comm)


def first_order_residual(
    hd: HamiltonianDilation,
    gamma: np.ndarray,
    xi_prime: np.ndarray,
) -> tuple[float, float]:
    """Frobenius defects of the two dt-linear matching identities."""
    pol = hd.policy
    gamma = require_density(gamma, pol, "prior")
    require_full_rank(gamma, pol, "prior")
    xi_prime = require_density(xi_prime, pol, "reverse ancilla")
    h = hd.hamiltonian
    ds, de = hd.dim_s, hd.dim_e
    s = mat_sqrt(gamma)
    si = mat_inv_sqrt(gamma, pol.rank_tol)
    heff = hermitianize(_env_weighted(h, hd.xi, ds, de))
    a = a_operator(gamma, heff)
    target = _env_weighted(h, xi_prime, ds, de)
    # a is d/dt of (N_dt(gamma))^{1/2}; the matching identity carries it with
    # the sign fixed by expanding (N_dt(gamma))^{-1/2}, which flips it.
    line1 = _sandwich(h, s, si, hd.xi, ds, de) + 1j * a @ si - target
    line2 = _sandwich(h, si, s, hd.xi, ds, de) - 1j * si @ a - target
    return float(frob_norm(line1)), float(frob_norm(line2))


def b_operator(hd: HamiltonianDilation, gamma: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Solution of sqrt(gamma) B + B sqrt(gamma) = C, the dt^2 Lyapunov auxiliary.

    C collects the quadratic terms of the recovery expansion: three products
    of the first-order auxiliary a minus the dissipative part of the forward
    dt^2 coefficient applied to gamma.  C is even in the sign of a.
    """
    pol = hd.policy
    gamma = require_density(gamma, pol, "prior")
    require_full_rank(gamma, pol, "prior")
    a = np.asarray(a, dtype=complex)
    h = hd.hamiltonian
    ds, de = hd.dim_s, hd.dim_e
    s = mat_sqrt(gamma)
    si = mat_inv_sqrt(gamma, pol.rank_tol)
    g_in = _env_weighted(h @ h, hd.xi, ds, de)
    forward_2 = partial_trace(h @ kron(gamma, hd.xi) @ h, ds, de) - 0.5 * _anti(g_in, gamma)
    c = a @ a + s @ a @ si @ a + a @ si @ a @ s - forward_2
    return sylvester_sqrt_solve(gamma, c, pol.rank_tol)


def is_steady(hd: HamiltonianDilation, gamma: np.ndarray) -> bool:
    """Invariance of gamma under the short-time channel and under its generator."""
    gamma = require_density(gamma, hd.policy, "prior")
    probe = apply(hd.channel(STEADY_PROBE_DT), gamma)
    if frob_norm(probe - gamma) > STEADY_TOL:
        return False
    h = hd.hamiltonian
    joint = kron(gamma, hd.xi)
    gen = partial_trace(h @ joint - joint @ h, hd.dim_s, hd.dim_e)
    return frob_norm(gen) <= STEADY_TOL


def second_order_residual(
    hd: HamiltonianDilation,
    gamma: np.ndarray,
    xi_prime: np.ndarray,
    mode: str = "general",
) -> float:
    """Worst-case defect of the dt^2 matching identity over a complete operator basis.

    The returned value also folds in the first-order defects, so a small
    residual certifies matching through second order, not second order alone.
    """
    pol = hd.policy
    gamma = require_density(gamma, pol, "prior")
    require_full_rank(gamma, pol, "prior")
    xi_prime = require_density(xi_prime, pol, "reverse ancilla")
    h = hd.hamiltonian
    ds, de = hd.dim_s, hd.dim_e
    eye_s = np.eye(ds)
    eye_e = np.eye(de)
    first = first_order_residual(hd, gamma, xi_prime)

    g_out = _env_weighted(h @ h, xi_prime, ds, de)

    def rhs(rho: np.ndarray) -> np.ndarray:
        return partial_trace(h @ kron(rho, xi_prime) @ h, ds, de) - 0.5 * _anti(g_out, rho)

    if mode == "general":
        s = mat_sqrt(gamma)
        si = mat_inv_sqrt(gamma, pol.rank_tol)
        heff = hermitianize(_env_weighted(h, hd.xi, ds, de))
        # expansion coefficient of (N_dt(gamma))^{-1/2}, the negative of a_operator
        a = -a_operator(gamma, heff)
        b = b_operator(hd, gamma, a)
        g_in = _env_weighted(h @ h, hd.xi, ds, de)

        def gen(m: np.ndarray) -> np.ndarray:
            return -1j * (heff @ m - m @ heff)

        def lhs(rho: np.ndarray) -> np.ndarray:
            x0 = si @ rho @ si
            out = s @ partial_trace(kron(eye_s, hd.xi) @ h @ kron(x0, eye_e) @ h, ds, de) @ s
            out -= 0.5 * (s @ g_in @ si @ rho + rho @ si @ g_in @ s)
            out -= s @ gen(x0 @ a @ si) @ s
            out -= s @ gen(si @ a @ x0) @ s
            out += a @ si @ rho @ si @ a
            out += rho @ si @ b + b @ si @ rho
            return out

    elif mode == "steady_commuting":
        if not is_steady(hd, gamma):
            raise ValueError("steady_commuting mode requires a steady prior")
        comm = kron(gamma, eye_e) @ h - h @ kron(gamma, eye_e)
        if frob_norm(comm) > pol.equality_tol:
            raise ValueError("steady_commuting mode requires [gamma x 1, H] = 0")
        g_in = _env_weighted(h @ h, hd.xi, ds, de)

        def lhs(rho: np.ndarray) -> np.ndarray:
            return (
                partial_trace(kron(eye_s, hd.xi) @ h @ kron(rho, eye_e) @ h, ds, de)
                - 0.5 * _anti(g_in, rho)
            )

    elif mode == "maximally_mixed":
        if frob_norm(gamma - eye_s / ds) > pol.equality_tol:
            raise ValueError("maximally_mixed mode requires gamma = 1/d")
        # the Lyapunov auxiliary B survives at gamma = 1/d and trades the H^2
        # anticommutator weight for the xi-sandwiched one
        h_tilde = partial_trace(h @ kron(eye_s, hd.xi) @ h, ds, de)

        def lhs(rho: np.ndarray) -> np.ndarray:
            return (
                partial_trace(kron(eye_s, hd.xi) @ h @ kron(rho, eye_e) @ h, ds, de)
                - 0.5 * _anti(h_tilde, rho)
            )

    else:
        raise ValueError(f"unknown mode {mode!r}; expected one of {SECOND_ORDER_MODES}")

    defect = max(frob_norm(lhs(rho) - rhs(rho)) for rho in hermitian_basis(ds))
    return float(max(defect, first[0], first[1]))


def map_mismatch(
    hd: HamiltonianDilation,
    gamma: np.ndarray,
    xi_prime: np.ndarray,
    dt: float,
) -> float:
    """Channel distance between the recovery of the dt-channel and the backwards dilation."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    fwd = hd.channel(dt)
    recovery = petz_map(fwd, gamma, hd.policy)
    reverse = tabletop_reverse(hd.dilation(dt), xi_prime, hd.policy)
    return channel_distance(recovery, reverse)


@dataclass(frozen=True)
class SlopeFit:
    exponent: float
    r_squared: float
    points_used: int


def scaling_exponent(mismatches: Iterable[tuple[float, float]]) -> SlopeFit:
    """Log-log slope of (dt, value) pairs, ignoring values at the numerical floor."""
    pts = [(float(dt), float(v)) for dt, v in mismatches if dt > 0 and v > SCALING_FLOOR]
    if len(pts) < 6:
        raise ValueError(
            f"scaling fit needs at least 6 points above {SCALING_FLOOR:g}, got {len(pts)}"
        )
    x = np.log(np.array([p[0] for p in pts]))
    y = np.log(np.array([p[1] for p in pts]))
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return SlopeFit(float(slope), float(r_squared), len(pts))


@dataclass(frozen=True)
class ApproxReport:
    """Residuals of the order-matching identities plus the measured decay of the mismatch."""

    order: int
    residual_terms: tuple[tuple[str, float], ...]
    dt_grid: tuple[float, ...]
    mismatches: tuple[float, ...]
    slope_fit: SlopeFit | None

    def __post_init__(self) -> None:
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        grid = tuple(float(t) for t in self.dt_grid)
        if any(t <= 0 for t in grid):
            raise ValueError("dt grid must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("dt grid must be strictly increasing")
        object.__setattr__(self, "dt_grid", grid)
        object.__setattr__(self, "mismatches", tuple(float(v) for v in self.mismatches))

    @property
    def max_residual(self) -> float:
        return max(v for _, v in self.residual_terms)


def approx_check(
    hd: HamiltonianDilation,
    gamma: np.ndarray,
    xi_prime: np.ndarray,
    order: int = 2,
    mode: str = "general",
    dt_grid: Sequence[float] = DEFAULT_DT_GRID,
) -> ApproxReport:
    """Evaluate the order-matching residuals and fit the mismatch decay on a dt grid."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    r1, r2 = first_order_residual(hd, gamma, xi_prime)
    terms: list[tuple[str, float]] = [("first_order_line1", r1), ("first_order_line2", r2)]
    if order == 2:
        terms.append((f"second_order_{mode}", second_order_residual(hd, gamma, xi_prime, mode)))
    grid = tuple(float(t) for t in dt_grid)
    mism = tuple(map_mismatch(hd, gamma, xi_prime, t) for t in grid)
    try:
        fit: SlopeFit | None = scaling_exponent(zip(grid, mism))
    except ValueError:
        fit = None
    return ApproxReport(order, tuple(terms), grid, mism, fit)
