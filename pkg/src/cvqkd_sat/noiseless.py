"""Noiseless attenuation and amplification at the covariance-matrix level.

Both operations act as s^N on one mode (s = sqrt(T) < 1 for attenuation,
s = G > 1 for amplification).  They are Gaussian, so the state transform
is carried out on the Q-function: with sigma = (Sigma + I4)^-1 the
targeted mode's diagonal block maps to s^2*(sigma_1 - I2/2) + I2/2 and
the off-diagonal blocks pick up a factor s; the output CM is
sigma~^-1 - I4.  On block-form input everything stays block-form, so the
whole update reduces to scalar arithmetic on (a, b, c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .gaussian import TwoModeCM

GAIN_MARGIN = 1e-9


class GainBoundError(ValueError):
    """Amplification gain at or above the physical bound sqrt((V+1)/(V-1))."""


class GainUnbounded(Exception):
    """Signals that a vacuum-variance mode admits any finite gain."""


@dataclass(frozen=True)
class NoiselessOp:
    """One noiseless attenuation or amplification on a single supermode.

    kind is "attenuation" (strength T in (0, 1]) or "amplification"
    (strength G >= 1).  target selects mode "A" or "B" of the pair;
    index is the 1-based supermode the op is meant for.
    """

    kind: str
    strength: float
    target: str = "B"
    index: int = 1

    def __post_init__(self):
        if self.kind not in ("attenuation", "amplification"):
            raise ValueError(f"unknown op kind {self.kind!r}")
        if self.target not in ("A", "B"):
            raise ValueError(f"target must be 'A' or 'B', got {self.target!r}")
        if self.index < 1:
            raise ValueError("supermode index is 1-based")
        if self.kind == "attenuation" and not 0.0 < self.strength <= 1.0:
            raise ValueError(f"attenuation requires 0 < T <= 1, got {self.strength}")
        if self.kind == "amplification" and self.strength < 1.0:
            raise ValueError(f"amplification requires G >= 1, got {self.strength}")


def attenuation(t: float, target: str = "B", index: int = 1) -> NoiselessOp:
    return NoiselessOp("attenuation", t, target, index)


def amplification(g: float, target: str = "B", index: int = 1) -> NoiselessOp:
    return NoiselessOp("amplification", g, target, index)


def max_gain(variance: float) -> float:
    """Strict (exclusive) upper bound on the noiseless-amplifier gain.

    G_max = sqrt((V+1)/(V-1)) for the targeted mode's variance V.
    Raises GainUnbounded for V <= 1: a vacuum-variance mode acquires no
    photons to amplify, so any finite gain is admissible.
    """
    if variance <= 1.0:
        raise GainUnbounded(f"variance {variance} <= 1 admits any finite gain")
    return math.sqrt((variance + 1.0) / (variance - 1.0))


def gain_is_feasible(gain: float, variance: float) -> bool:
    """Whether `gain` respects the bound with a 1e-9 relative margin."""
    if gain <= 1.0:
        return True
    try:
        return gain <= max_gain(variance) * (1.0 - GAIN_MARGIN)
    except GainUnbounded:
        return True


def apply_noiseless_op(cm: TwoModeCM, op: NoiselessOp) -> TwoModeCM:
    """Apply a noiseless attenuation or amplification to one mode of `cm`.

    Identity strengths (T = 1, G = 1) return the input unchanged.
    Raises GainBoundError when an amplification gain is at or above
    max_gain of the targeted mode.
    """
    s = op.strength if op.kind == "amplification" else math.sqrt(op.strength)
    if s == 1.0:
        return cm

    a, b, c = cm.a, cm.b, cm.c
    target_variance = a if op.target == "A" else b
    if op.kind == "amplification" and not gain_is_feasible(s, target_variance):
        raise GainBoundError(
            f"gain {s} >= bound {max_gain(target_variance)} for V={target_variance}"
        )

    # sigma = (Sigma + I)^-1 in block coefficients: diag blocks of a
    # [[p*I, c*Z], [c*Z, q*I]] inverse swap places and pick up 1/det.
    p, q = a + 1.0, b + 1.0
    det = p * q - c * c
    sig_a, sig_b, sig_c = q / det, p / det, -c / det

    if op.target == "A":
        sig_a = s * s * (sig_a - 0.5) + 0.5
    else:
        sig_b = s * s * (sig_b - 0.5) + 0.5
    sig_c *= s

    det2 = sig_a * sig_b - sig_c * sig_c
    if det2 <= 0.0:
        raise GainBoundError(f"operation drives the CM singular (det {det2})")
    return TwoModeCM(sig_b / det2 - 1.0, sig_a / det2 - 1.0, -sig_c / det2)


def success_probability(gain: float, mean_photons: float) -> float:
    """Heralding success probability G^(-2*ceil(n_bar)) of the amplifier.

    With n_bar = 0 exactly the exponent is zero and the probability is 1;
    amplification of the vacuum always succeeds.
    """
    if gain < 1.0:
        raise ValueError(f"gain must be >= 1, got {gain}")
    if mean_photons < 0.0:
        raise ValueError(f"mean photon number must be >= 0, got {mean_photons}")
    return gain ** (-2.0 * math.ceil(mean_photons))
