"""Two-mode Gaussian states in covariance-matrix form.

All variances are in shot-noise units (hbar = 2 convention, vacuum = 1).
A two-mode covariance matrix is kept in the block form

    [[a*I2, c*Z], [c*Z, b*I2]],   Z = diag(1, -1),

which every operation in this package provably preserves, so states are
carried around as the scalar triple (a, b, c).  Dense 4x4 conversions
exist for cross-checks against generic eigen-solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PHYSICALITY_TOL = 1e-9


class PhysicalityError(ValueError):
    """Raised when a covariance matrix violates the uncertainty principle."""


@dataclass(frozen=True)
class TwoModeCM:
    """Block-form covariance matrix of one (A, B) mode pair.

    a, b are the quadrature variances of modes A and B, c the signed
    quadrature correlation, all in shot-noise units.
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a < 1.0 - PHYSICALITY_TOL or self.b < 1.0 - PHYSICALITY_TOL:
            raise PhysicalityError(
                f"mode variance below vacuum: a={self.a}, b={self.b}"
            )
        disc = (self.a + self.b) ** 2 - 4.0 * self.c**2
        if disc < -PHYSICALITY_TOL:
            raise PhysicalityError(
                f"no real symplectic spectrum: (a+b)^2 - 4c^2 = {disc}"
            )
        nu_min = 0.5 * (math.sqrt(max(disc, 0.0)) - abs(self.b - self.a))
        if nu_min < 1.0 - PHYSICALITY_TOL:
            raise PhysicalityError(f"symplectic eigenvalue {nu_min} < 1")

    def dense(self) -> np.ndarray:
        """Return the 4x4 matrix in (X_A, P_A, X_B, P_B) ordering."""
        a, b, c = self.a, self.b, self.c
        return np.array(
            [
                [a, 0.0, c, 0.0],
                [0.0, a, 0.0, -c],
                [c, 0.0, b, 0.0],
                [0.0, -c, 0.0, b],
            ]
        )

    def purity_defect(self) -> float:
        """|a*b - c^2 - 1|; zero for pure states."""
        return abs(self.a * self.b - self.c**2 - 1.0)


def cm_from_dense(mat: np.ndarray, tol: float = 1e-9) -> TwoModeCM:
    """Project a dense 4x4 CM back to block form, checking the residual."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got {mat.shape}")
    a = 0.5 * (mat[0, 0] + mat[1, 1])
    b = 0.5 * (mat[2, 2] + mat[3, 3])
    c = 0.5 * (mat[0, 2] - mat[1, 3])
    cm = TwoModeCM(a, b, c)
    residual = np.max(np.abs(mat - cm.dense()))
    if residual > tol:
        raise ValueError(f"matrix is not block-form: residual {residual}")
    return cm


@dataclass(frozen=True)
class SymplecticSpectrum:
    """Symplectic eigenvalues of a TwoModeCM, >= 1 for physical states."""

    nu1: float
    nu2: float


@dataclass(frozen=True)
class SupermodeSpectrum:
    """Normalized supermode coefficients and the overall PDC gain.

    The squeezing of supermode k is r_k = g * lambdas[k].  The lambdas
    are normalized so that sum(lambda_k^2) = 1, which makes the total
    mean photon number additive across supermodes.  The scenario
    constructors produce coefficients in descending order.
    """

    lambdas: tuple[float, ...]
    g: float
    scenario: str = "custom"

    def __post_init__(self):
        if len(self.lambdas) < 1:
            raise ValueError("need at least one supermode")
        if any(lam < 0.0 for lam in self.lambdas):
            raise ValueError("negative supermode coefficient")
        if self.g < 0.0:
            raise ValueError("negative PDC gain")
        norm = math.fsum(lam * lam for lam in self.lambdas)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"coefficients not normalized: sum of squares {norm}")

    @property
    def num_supermodes(self) -> int:
        return len(self.lambdas)

    def squeezing(self, k: int) -> float:
        """Squeezing parameter of 1-based supermode k."""
        return self.g * self.lambdas[k - 1]

    def with_gain(self, g: float) -> SupermodeSpectrum:
        return SupermodeSpectrum(self.lambdas, g, self.scenario)


def single_mode_spectrum(g: float, num_supermodes: int = 5) -> SupermodeSpectrum:
    """All weight on the first supermode; a good single-mode approximation."""
    lambdas = (1.0,) + (0.0,) * (num_supermodes - 1)
    return SupermodeSpectrum(lambdas, g, "single")


def exponential_spectrum(
    g: float, num_supermodes: int = 5, delta: float = 0.5
) -> SupermodeSpectrum:
    """Exponentially decaying coefficients lambda_k ~ exp(-delta*k)."""
    if delta < 0.0:
        raise ValueError("decay rate must be non-negative")
    raw = [math.exp(-delta * k) for k in range(1, num_supermodes + 1)]
    norm = math.sqrt(math.fsum(x * x for x in raw))
    return SupermodeSpectrum(tuple(x / norm for x in raw), g, "exponential")


def flat_spectrum(g: float, num_supermodes: int = 5) -> SupermodeSpectrum:
    """Identical coefficients lambda_k = 1/sqrt(K)."""
    lam = 1.0 / math.sqrt(num_supermodes)
    return SupermodeSpectrum((lam,) * num_supermodes, g, "flat")


def epr_cm(r: float) -> TwoModeCM:
    """Covariance matrix of a two-mode squeezed vacuum with squeezing r."""
    if r < 0.0:
        raise ValueError(f"squeezing parameter must be non-negative, got {r}")
    return TwoModeCM(math.cosh(2.0 * r), math.cosh(2.0 * r), math.sinh(2.0 * r))


def pdc_state(spectrum: SupermodeSpectrum) -> list[TwoModeCM]:
    """Per-supermode EPR covariance matrices of a PDC source.

    Supermodes are independent, so the global CM is block-diagonal and
    the list fully describes the state.
    """
    return [epr_cm(spectrum.squeezing(k)) for k in range(1, spectrum.num_supermodes + 1)]


def symplectic_eigenvalues(cm: TwoModeCM) -> SymplecticSpectrum:
    """Closed-form symplectic eigenvalues of a block-form CM.

    nu_{1,2} = [sqrt((a+b)^2 - 4c^2) +/- (b - a)] / 2, returned in that
    order (nu1 carries the +(b-a) sign).
    """
    disc = (cm.a + cm.b) ** 2 - 4.0 * cm.c**2
    if disc < 0.0:
        raise PhysicalityError(f"(a+b)^2 < 4c^2 for {cm}")
    root = math.sqrt(disc)
    return SymplecticSpectrum(
        0.5 * (root + (cm.b - cm.a)), 0.5 * (root - (cm.b - cm.a))
    )


def mean_photon_number(variance: float) -> float:
    """Mean photon number of a thermal mode with quadrature variance V."""
    if variance < 1.0 - PHYSICALITY_TOL:
        raise ValueError(f"variance {variance} below vacuum")
    return max(0.0, 0.5 * (variance - 1.0))
