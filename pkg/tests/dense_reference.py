"""Independent dense-matrix reference implementations used only by tests.

Everything here works on explicit 4x4 matrices with generic linear
algebra (numpy eig/det/inv), sharing no code with the block-scalar
production paths it is used to check.
"""

import math

import numpy as np

OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def dense_epr(r: float) -> np.ndarray:
    c2, s2 = math.cosh(2 * r), math.sinh(2 * r)
    z = np.diag([1.0, -1.0])
    out = np.zeros((4, 4))
    out[:2, :2] = c2 * np.eye(2)
    out[2:, 2:] = c2 * np.eye(2)
    out[:2, 2:] = s2 * z
    out[2:, :2] = s2 * z
    return out


def symplectic_moduli(sigma: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues as |eig(i Omega Sigma)|, one per mode, sorted."""
    evs = np.linalg.eigvals(1j * OMEGA @ sigma)
    return np.sort(np.abs(evs))[::2]


def entropy_term(x: float) -> float:
    if x <= 1.0:
        return 0.0
    return 0.5 * (x + 1) * math.log2(0.5 * (x + 1)) - 0.5 * (x - 1) * math.log2(0.5 * (x - 1))


def heterodyne_mutual_information(sigma: np.ndarray) -> float:
    """Classical Gaussian MI of dual-heterodyne outcomes via determinants."""
    outcomes = 0.5 * (sigma + np.eye(4))
    det_a = np.linalg.det(outcomes[:2, :2])
    det_b = np.linalg.det(outcomes[2:, 2:])
    det_full = np.linalg.det(outcomes)
    return 0.5 * math.log2(det_a * det_b / det_full)


def heterodyne_conditional(sigma: np.ndarray) -> np.ndarray:
    """CM of mode A after a heterodyne measurement of mode B."""
    a = sigma[:2, :2]
    b = sigma[2:, 2:]
    c = sigma[:2, 2:]
    return a - c @ np.linalg.inv(b + np.eye(2)) @ c.T

def holevo_reverse(sigma: np.ndarray) -> float:
    """chi(E:B) = S(AB) - S(A|y_B) for Eve holding a purification."""
    joint = sum(entropy_term(v) for v in symplectic_moduli(sigma))
    cond = heterodyne_conditional(sigma)
    nu_cond = math.sqrt(max(np.linalg.det(cond), 0.0))
    return joint - entropy_term(nu_cond)


def rr_heterodyne_rate(r: float, eta: float, eps: float, xi: float) -> float:
    """Single-mode heterodyne reverse-reconciliation rate, coded from scratch."""
    x = math.cosh(2 * r)
    y = eta * (math.cosh(2 * r) + eps) + (1.0 - eta)
    z = math.sqrt(eta) * math.sinh(2 * r)
    z_mat = np.diag([1.0, -1.0])
    sigma = np.zeros((4, 4))
    sigma[:2, :2] = x * np.eye(2)
    sigma[2:, 2:] = y * np.eye(2)
    sigma[:2, 2:] = z * z_mat
    sigma[2:, :2] = z * z_mat
    return xi * heterodyne_mutual_information(sigma) - holevo_reverse(sigma)


def dense_noiseless_op(sigma: np.ndarray, s: float, target: str) -> np.ndarray:
    """Q-function update done with explicit 4x4 inversions."""
    sig = np.linalg.inv(sigma + np.eye(4))
    sl = slice(0, 2) if target == "A" else slice(2, 4)
    other = slice(2, 4) if target == "A" else slice(0, 2)
    out = sig.copy()
    out[sl, sl] = s * s * (sig[sl, sl] - 0.5 * np.eye(2)) + 0.5 * np.eye(2)
    out[sl, other] = s * sig[sl, other]
    out[other, sl] = s * sig[other, sl]
    return np.linalg.inv(out) - np.eye(4)


def random_physical_cm(rng: np.random.Generator, max_var: float = 20.0):
    """Random (a, b, c) with both symplectic eigenvalues >= 1."""
    a = rng.uniform(1.0, max_var)
    b = rng.uniform(1.0, max_var)
    c_lim = math.sqrt(max(a * b - 1.0 - abs(b - a), 0.0))
    c = rng.uniform(-1.0, 1.0) * c_lim
    return a, b, c
