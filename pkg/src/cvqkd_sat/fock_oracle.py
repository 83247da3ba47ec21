"""Brute-force truncated-Fock-space oracle for verification.

This module re-derives the effect of noiseless attenuation/amplification
and the thermal-loss channel by direct photon-number arithmetic, so the
covariance-matrix pipeline can be checked against something that shares
none of its algebra.  It is imported by tests only, never by the
production modules.

States are stored as ensembles of unnormalized pure amplitude matrices
c[m, n] (A-photon index m, B-photon index n); a single component is a
pure state, several components represent a mixed state through its Kraus
decomposition.  Mixed states arise from the thermal-loss channel, which
is decomposed into a pure-loss stage followed by a quantum-limited
amplifier stage, each with a single-index Kraus family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import TwoModeCM

TAIL_TOL = 1e-8


class CutoffTooSmall(ValueError):
    """Truncated amplitudes have significant mass at the cutoff boundary."""


@dataclass(frozen=True)
class FockTwoModeState:
    """Two-mode state as an ensemble of pure amplitude matrices."""

    components: tuple[np.ndarray, ...]
    cutoff: int
    discarded_mass: float = 0.0

    @property
    def is_pure(self) -> bool:
        return len(self.components) == 1

    def norm_squared(self) -> float:
        return float(sum(np.sum(np.abs(c) ** 2) for c in self.components))

    def boundary_mass(self) -> float:
        """Probability mass sitting on the highest retained photon level."""
        total = self.norm_squared()
        edge = 0.0
        for c in self.components:
            edge += float(np.sum(np.abs(c[-1, :]) ** 2) + np.sum(np.abs(c[:-1, -1]) ** 2))
        return edge / total if total > 0.0 else math.inf


def epr_fock(r: float, cutoff: int) -> FockTwoModeState:
    """Two-mode squeezed vacuum amplitudes c[n, n] = sqrt(1-tanh^2 r) tanh^n r."""
    if r < 0.0:
        raise ValueError("squeezing parameter must be non-negative")
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    t = math.tanh(r)
    amps = np.zeros((cutoff + 1, cutoff + 1))
    amps[np.arange(cutoff + 1), np.arange(cutoff + 1)] = math.sqrt(1.0 - t * t) * t ** np.arange(
        cutoff + 1
    )
    truncated = t ** (2 * (cutoff + 1))
    return FockTwoModeState((amps,), cutoff, truncated)


def apply_fock_filter(state: FockTwoModeState, s: float, mode: str = "B") -> FockTwoModeState:
    """Multiply amplitudes by s^n on the targeted mode and renormalize.

    Realizes sqrt(T)^N (s < 1) or G^N (s > 1).  Raises CutoffTooSmall
    when the filtered state keeps more than TAIL_TOL of its mass at the
    cutoff boundary, which for s*tanh(r) >= 1 on a two-mode squeezed
    input is exactly the non-normalizable gain-bound regime.
    """
    if s <= 0.0:
        raise ValueError("filter scale must be positive")
    weights = s ** np.arange(state.cutoff + 1, dtype=float)
    scaled = []
    for c in state.components:
        scaled.append(c * weights[np.newaxis, :] if mode == "B" else c * weights[:, np.newaxis])
    total = float(sum(np.sum(np.abs(c) ** 2) for c in scaled))
    if not math.isfinite(total) or total == 0.0:
        raise CutoffTooSmall(f"filter scale {s} drove the truncated norm to {total}")
    out = FockTwoModeState(
        tuple(c / math.sqrt(total) for c in scaled), state.cutoff, state.discarded_mass
    )
    tail = out.boundary_mass()
    if tail > TAIL_TOL:
        raise CutoffTooSmall(f"boundary mass {tail} after filtering; increase the cutoff")
    return out


def _loss_kraus(eta: float, rank: int, cutoff: int) -> list[np.ndarray]:
    """Kraus family of the pure-loss channel, K_j losing j photons."""
    ns = np.arange(cutoff + 1)
    ops = []
    for j in range(rank + 1):
        op = np.zeros((cutoff + 1, cutoff + 1))
        for n in range(j, cutoff + 1):
            op[n - j, n] = math.sqrt(math.comb(n, j) * (1.0 - eta) ** j * eta ** (n - j))
        ops.append(op)
    del ns
    return ops


def _amp_kraus(gain: float, rank: int, cutoff: int) -> list[np.ndarray]:
    """Kraus family of the quantum-limited amplifier, L_l adding l photons."""
    if gain == 1.0:
        return [np.eye(cutoff + 1)]
    tanh2 = 1.0 - 1.0 / gain
    ops = []
    for l in range(rank + 1):
        op = np.zeros((cutoff + 1, cutoff + 1))
        for n in range(0, cutoff + 1 - l):
            op[n + l, n] = math.sqrt(
                math.comb(n + l, l) * tanh2**l * gain ** (-(n + 1))
            )
        ops.append(op)
    return ops


def thermal_loss_channel(
    state: FockTwoModeState, eta: float, epsilon: float, kraus_rank: int = 20
) -> FockTwoModeState:
    """Thermal-loss channel (transmissivity eta, input excess noise epsilon)
    acting on mode B, as a Kraus-component ensemble.

    The channel is split into pure loss at eta/G followed by a
    quantum-limited amplifier of gain G = 1 + eta*epsilon/2, matching the
    covariance map b -> eta*(b + epsilon) + 1 - eta.  Trace lost to the
    Kraus-rank truncation is added to discarded_mass.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError("transmissivity must be in (0, 1] for the Fock oracle")
    gain = 1.0 + eta * epsilon / 2.0
    eta_loss = eta / gain
    norm_in = state.norm_squared()

    loss_ops = _loss_kraus(eta_loss, kraus_rank, state.cutoff)
    amp_ops = _amp_kraus(gain, kraus_rank, state.cutoff)
    components = []
    for c in state.components:
        for k_loss in loss_ops:
            after_loss = c @ k_loss.T
            if not np.any(after_loss):
                continue
            for k_amp in amp_ops:
                comp = after_loss @ k_amp.T
                if np.any(comp):
                    components.append(comp)
    total = float(sum(np.sum(np.abs(c) ** 2) for c in components))
    deficiency = max(0.0, 1.0 - total / norm_in)
    scale = math.sqrt(total)
    return FockTwoModeState(
        tuple(c / scale for c in components),
        state.cutoff,
        state.discarded_mass + deficiency,
    )


def _ladder_apply(c: np.ndarray, mode: str):
    """Return (X c, P c) for the chosen mode, hbar = 2 quadratures."""
    n = c.shape[0]
    root = np.sqrt(np.arange(1, n))
    lower = np.zeros_like(c, dtype=complex)
    raise_ = np.zeros_like(c, dtype=complex)
    if mode == "A":
        lower[:-1, :] = root[:, np.newaxis] * c[1:, :]  # a|n> = sqrt(n)|n-1>
        raise_[1:, :] = root[:, np.newaxis] * c[:-1, :]
    else:
        lower[:, :-1] = root[np.newaxis, :] * c[:, 1:]
        raise_[:, 1:] = root[np.newaxis, :] * c[:, :-1]
    return lower + raise_, 1j * (raise_ - lower)


def moments_dense(state: FockTwoModeState) -> np.ndarray:
    """Dense 4x4 covariance matrix in (X_A, P_A, X_B, P_B) ordering."""
    norm = state.norm_squared()
    first = np.zeros(4)
    second = np.zeros((4, 4))
    for c in state.components:
        xa, pa = _ladder_apply(c, "A")
        xb, pb = _ladder_apply(c, "B")
        vecs = (xa, pa, xb, pb)
        for i in range(4):
            first[i] += np.real(np.vdot(c, vecs[i]))
            for j in range(i, 4):
                second[i, j] += np.real(np.vdot(vecs[i], vecs[j]))
    first /= norm
    second /= norm
    second = second + np.triu(second, 1).T
    return second - np.outer(first, first)


def cm_from_fock(state: FockTwoModeState, residual_tol: float = 1e-6) -> tuple[TwoModeCM, float]:
    """Project the Fock-state covariance onto block form.

    Returns the block CM and the worst deviation of the dense matrix from
    that form; a residual above residual_tol indicates a bug or a cutoff
    problem and raises.
    """
    dense = moments_dense(state)
    a = 0.5 * (dense[0, 0] + dense[1, 1])
    b = 0.5 * (dense[2, 2] + dense[3, 3])
    c = 0.5 * (dense[0, 2] - dense[1, 3])
    cm = TwoModeCM(a, b, c)
    residual = float(np.max(np.abs(dense - cm.dense())))
    if residual > residual_tol:
        raise ValueError(f"non-block covariance structure: residual {residual}")
    return cm, residual
