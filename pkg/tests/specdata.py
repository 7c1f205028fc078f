"""Shared spec documents for the service and CLI tests."""

import numpy as np

from ttrlab.serialize import matrix_to_pairs
from ttrlab.service import example_spec

Z = np.diag([1.0, -1.0])


def cx_dict(**overrides):
    data = example_spec("controlled_x").model_dump(mode="json", exclude_none=True)
    data.update(overrides)
    return data


def bad_candidate():
    """X-coherent ancilla: cannot reverse a channel that kills X coherence."""
    return matrix_to_pairs(np.array([[0.5, 0.4], [0.4, 0.5]]))


def thermal_dict(**overrides):
    """Hopping interaction with matched Gibbs states: steady, reversal at the floor."""
    beta, j = 0.7, 0.6
    h_s = 0.5 * Z
    hop = np.zeros((4, 4), dtype=complex)
    hop[1, 2] = hop[2, 1] = j
    gibbs = np.diag(np.exp(-beta * np.diag(h_s)))
    gibbs = gibbs / gibbs.trace()
    data = {
        "dim_s": 2,
        "dim_e": 2,
        "h_s": matrix_to_pairs(h_s),
        "h_e": matrix_to_pairs(h_s),
        "h_i": matrix_to_pairs(hop),
        "xi": matrix_to_pairs(gibbs),
        "gamma": matrix_to_pairs(gibbs),
    }
    data.update(overrides)
    return data


def ladder_dict(**overrides):
    """Qubit against a three-level ladder; the prior drifts every collision."""
    h_s = np.diag([0.5, -0.5])
    h_e = np.diag([0.0, 1.0, 2.2])
    lower = np.zeros((3, 3))
    lower[0, 1] = 1.0
    lower[1, 2] = 0.7
    raise_s = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    h_i = 0.4 * (np.kron(raise_s, lower.conj().T) + np.kron(raise_s.conj().T, lower))
    data = {
        "dim_s": 2,
        "dim_e": 3,
        "h_s": matrix_to_pairs(h_s),
        "h_e": matrix_to_pairs(h_e),
        "h_i": matrix_to_pairs(h_i),
        "collision_rate": 0.4,
        "xi": matrix_to_pairs(np.diag([0.5, 0.3, 0.2])),
        "gamma": matrix_to_pairs(np.diag([0.65, 0.35])),
    }
    data.update(overrides)
    return data


def cold_dict():
    """Pure ancilla pumping the system toward a pure state: rank drains away."""
    hop = np.zeros((4, 4), dtype=complex)
    hop[1, 2] = hop[2, 1] = 0.6
    return {
        "dim_s": 2,
        "dim_e": 2,
        "h_s": matrix_to_pairs(0.5 * Z),
        "h_e": matrix_to_pairs(0.5 * Z),
        "h_i": matrix_to_pairs(hop),
        "collision_rate": 2.0,
        "xi": matrix_to_pairs(np.diag([0.0, 1.0])),
        "gamma": matrix_to_pairs(np.diag([0.4, 0.6])),
    }


def random_unitary_dict(seed, with_candidate=False):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    q, r = np.linalg.qr(m)
    u = q * (np.diag(r) / np.abs(np.diag(r)))

    def density(d):
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = a @ a.conj().T + 0.1 * np.eye(d)
        return rho / rho.trace()

    data = {
        "dim_s": 2,
        "dim_e": 2,
        "unitary": matrix_to_pairs(u),
        "xi": matrix_to_pairs(density(2)),
        "gamma": matrix_to_pairs(density(2)),
    }
    if with_candidate:
        data["xi_prime"] = matrix_to_pairs(density(2))
    return data
