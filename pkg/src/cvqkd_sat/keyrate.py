"""Secret key rates for the multi-mode protocol.

Per sub-channel the asymptotic reverse-reconciliation rate under
heterodyne detection is R_k = P_k * (xi * I_k - chi_k), where I_k is
Alice/Bob mutual information, chi_k the Holevo bound for Eve holding a
purification, and P_k the amplifier heralding probability (1 for
supermodes that are not amplified).  The total rate sums sub-channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .channel import ChannelParams, apply_channel
from .gaussian import (
    PHYSICALITY_TOL,
    SupermodeSpectrum,
    TwoModeCM,
    epr_cm,
    mean_photon_number,
    symplectic_eigenvalues,
)
from .noiseless import amplification, apply_noiseless_op, attenuation, success_probability


@dataclass(frozen=True)
class Protocol:
    """Full protocol configuration for one (multi-mode) key-rate evaluation.

    attenuation_t / amplifier_gain are the fixed op strengths (1.0 means
    no op); k_att / k_amp pick the supermode each op acts on.  The
    channel excess noise epsilon is identical across supermodes.
    """

    spectrum: SupermodeSpectrum
    epsilon: float = 0.05
    xi: float = 0.95
    attenuation_t: float = 1.0
    amplifier_gain: float = 1.0
    k_att: int = 1
    k_amp: int = 1
    clamp_negative_subchannels: bool = False

    def __post_init__(self):
        if not 0.0 < self.xi <= 1.0:
            raise ValueError(f"reconciliation efficiency must be in (0, 1], got {self.xi}")
        if self.epsilon < 0.0:
            raise ValueError(f"excess noise must be >= 0, got {self.epsilon}")
        if not 0.0 < self.attenuation_t <= 1.0:
            raise ValueError(f"attenuation T must be in (0, 1], got {self.attenuation_t}")
        if self.amplifier_gain < 1.0:
            raise ValueError(f"amplifier gain must be >= 1, got {self.amplifier_gain}")
        k = self.spectrum.num_supermodes
        if not (1 <= self.k_att <= k and 1 <= self.k_amp <= k):
            raise ValueError(f"op supermode indices must be in 1..{k}")

    def with_params(self, g: float, t: float, gain: float) -> Protocol:
        return replace(
            self,
            spectrum=self.spectrum.with_gain(g),
            attenuation_t=t,
            amplifier_gain=gain,
        )


@dataclass(frozen=True)
class SubchannelRate:
    k: int
    mutual_info: float
    holevo: float
    success_prob: float
    rate: float


@dataclass(frozen=True)
class KeyRateBreakdown:
    per_subchannel: tuple[SubchannelRate, ...]
    total: float


def mutual_information(cm: TwoModeCM) -> float:
    """Alice/Bob mutual information (bits/pulse) under dual heterodyne.

    I = log2[(x+1)(y+1) / ((x+1)(y+1) - z^2)] for the post-amplifier CM.
    """
    num = (cm.a + 1.0) * (cm.b + 1.0)
    den = num - cm.c**2
    if den <= 0.0:
        raise ValueError(f"(x+1)(y+1) <= z^2 for {cm}")
    return math.log2(num / den)


def conditional_variance(cm: TwoModeCM) -> float:
    """Variance of mode A conditioned on a heterodyne measurement of B.

    This is also the symplectic eigenvalue of the conditional CM,
    alpha_3 = x - z^2/(y+1).
    """
    alpha3 = cm.a - cm.c**2 / (cm.b + 1.0)
    if alpha3 < 1.0 - PHYSICALITY_TOL:
        raise ValueError(f"conditional variance {alpha3} below vacuum")
    return alpha3


def entropy_g(x: float) -> float:
    """Bosonic entropy g(x) = ((x+1)/2)log2((x+1)/2) - ((x-1)/2)log2((x-1)/2).

    g(1) = 0 is taken as the continuous limit; inputs within 1e-9 below 1
    are treated as round-off and clamped.
    """
    if x < 1.0:
        if x < 1.0 - PHYSICALITY_TOL:
            raise ValueError(f"entropy argument {x} < 1")
        x = 1.0
    if x == 1.0:
        return 0.0
    up, dn = 0.5 * (x + 1.0), 0.5 * (x - 1.0)
    return up * math.log2(up) - dn * math.log2(dn)


def holevo_bound(cm: TwoModeCM) -> float:
    """Eve's Holevo information chi(E:B) for the post-amplifier CM.

    chi = g(alpha1) + g(alpha2) - g(alpha3), with alpha1/alpha2 the
    symplectic eigenvalues of the joint CM and alpha3 the conditional
    eigenvalue after Bob's heterodyne measurement.
    """
    spec = symplectic_eigenvalues(cm)
    alpha3 = conditional_variance(cm)
    return entropy_g(spec.nu1) + entropy_g(spec.nu2) - entropy_g(alpha3)


def subchannel_rate(cm: TwoModeCM, xi: float, success_prob: float = 1.0) -> tuple[float, float, float]:
    """(I, chi, R) for one sub-channel: R = P * (xi*I - chi)."""
    if not 0.0 < xi <= 1.0:
        raise ValueError(f"reconciliation efficiency must be in (0, 1], got {xi}")
    if not 0.0 < success_prob <= 1.0:
        raise ValueError(f"success probability must be in (0, 1], got {success_prob}")
    info = mutual_information(cm)
    chi = holevo_bound(cm)
    return info, chi, success_prob * (xi * info - chi)


def subchannel_pipeline(protocol: Protocol, eta: float, k: int) -> tuple[TwoModeCM, float]:
    """Evolve supermode k through attenuation, channel and amplification.

    Returns the final CM and the amplifier success probability for this
    sub-channel.  Ops with strength exactly 1 are skipped, so the no-op
    protocol is reproduced bit-exactly.
    """
    cm = epr_cm(protocol.spectrum.squeezing(k))
    if k == protocol.k_att and protocol.attenuation_t != 1.0:
        cm = apply_noiseless_op(cm, attenuation(protocol.attenuation_t))
    cm = apply_channel(cm, ChannelParams(eta, protocol.epsilon))
    prob = 1.0
    if k == protocol.k_amp and protocol.amplifier_gain != 1.0:
        n_bar = mean_photon_number(cm.b)
        prob = success_probability(protocol.amplifier_gain, n_bar)
        cm = apply_noiseless_op(cm, amplification(protocol.amplifier_gain))
    return cm, prob


def total_rate(protocol: Protocol, eta: float) -> KeyRateBreakdown:
    """Total key rate (bits/pulse) over all sub-channels at transmissivity eta.

    Negative sub-channel rates are summed as-is by default; with
    clamp_negative_subchannels they contribute max(R_k, 0) instead, as an
    operator discarding unprofitable sub-channels would see.
    """
    records = []
    for k in range(1, protocol.spectrum.num_supermodes + 1):
        cm, prob = subchannel_pipeline(protocol, eta, k)
        info, chi, rate = subchannel_rate(cm, protocol.xi, prob)
        records.append(SubchannelRate(k, info, chi, prob, rate))
    if protocol.clamp_negative_subchannels:
        total = math.fsum(max(rec.rate, 0.0) for rec in records)
    else:
        total = math.fsum(rec.rate for rec in records)
    return KeyRateBreakdown(tuple(records), total)


PULSE_RATE_HZ = 76e6


def bits_per_second(rate_bits_per_pulse: float, pulse_rate_hz: float = PULSE_RATE_HZ) -> float:
    """Convert bits/pulse to bits/s at the source pulse rate (76 MHz default)."""
    return rate_bits_per_pulse * pulse_rate_hz
