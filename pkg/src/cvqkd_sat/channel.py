"""Thermal-loss sub-channel acting on the propagating mode B.

The channel is parameterized by transmissivity eta and input-referred
excess noise epsilon (added before the loss factor), realizing Eve's
entangling-cloner attack at the covariance-matrix level:

    (a, b, c) -> (a, eta*(b + epsilon) + 1 - eta, sqrt(eta)*c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .gaussian import TwoModeCM


@dataclass(frozen=True)
class ChannelParams:
    eta: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmissivity must be in [0, 1], got {self.eta}")
        if self.epsilon < 0.0:
            raise ValueError(f"excess noise must be >= 0, got {self.epsilon}")


def apply_channel(cm: TwoModeCM, params: ChannelParams) -> TwoModeCM:
    """Send mode B of `cm` through the thermal-loss channel."""
    eta, eps = params.eta, params.epsilon
    return TwoModeCM(
        cm.a,
        eta * (cm.b + eps) + (1.0 - eta),
        math.sqrt(eta) * cm.c,
    )
