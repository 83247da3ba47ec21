"""Elliptic-beam model of the satellite-to-ground downlink.

The received beam is a randomly displaced, broadened and rotated ellipse
described by five random variables {x, y, theta1, theta2, phi}.  Their
statistics follow from the scintillation index, which in turn follows
from the Rytov variance integrated over a Hufnagel-Valley turbulence
profile along the slant path.  The per-realization transmissivity
through a circular aperture involves the modified Bessel functions
I0/I1 and the Lambert W function; everything here is evaluated with
exponentially scaled Bessels and a log-argument Lambert W so that large
r0/W ratios cannot overflow.

All transmissivity math accepts scalars or numpy arrays.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class TurbulenceModelError(ValueError):
    """Beam-parameter statistics left the model's domain of validity."""


@dataclass(frozen=True)
class LinkGeometry:
    """Downlink geometry; lengths in meters, zenith angle in radians."""

    altitude: float
    ground_altitude: float
    zenith: float
    wavelength: float
    beam_waist: float
    aperture_radius: float

    def __post_init__(self):
        if not self.altitude > self.ground_altitude >= 0.0:
            raise ValueError("need altitude > ground_altitude >= 0")
        if not 0.0 <= self.zenith < math.pi / 2.0:
            raise ValueError("zenith angle must be in [0, pi/2)")
        if min(self.wavelength, self.beam_waist, self.aperture_radius) <= 0.0:
            raise ValueError("lengths must be positive")

    @property
    def path_length(self) -> float:
        """Slant distance L = (H - h0)/cos(zeta), flat-Earth secant geometry."""
        return (self.altitude - self.ground_altitude) / math.cos(self.zenith)

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength


@dataclass(frozen=True)
class TurbulenceProfile:
    """Hufnagel-Valley inputs: r.m.s. wind speed v (m/s) and ground-level
    structure constant A = Cn2(0) (m^-2/3).  Zero values give the
    turbulence-free limits used by delta-channel checks."""

    wind_speed: float = 6.0
    cn2_ground: float = 9.6e-14

    def __post_init__(self):
        if self.wind_speed < 0.0 or self.cn2_ground < 0.0:
            raise ValueError("turbulence parameters must be non-negative")


@dataclass(frozen=True)
class BeamStats:
    """Moments of the elliptic-beam variables plus the driving quantities."""

    var_xy: float
    mean_theta: float
    var_theta: float
    cov_theta: float
    sigma_i2: float
    omega: float
    sigma_r2: float


@dataclass(frozen=True)
class BeamSample:
    """One atmospheric realization and its transmissivity."""

    x: float
    y: float
    theta1: float
    theta2: float
    phi: float
    w1: float
    w2: float
    eta: float


@dataclass(frozen=True)
class BeamSampleSet:
    """Batch of realizations as parallel arrays (canonical Monte Carlo form)."""

    x: np.ndarray
    y: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    phi: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    eta: np.ndarray

    def __len__(self) -> int:
        return len(self.eta)

    def to_samples(self) -> list[BeamSample]:
        return [
            BeamSample(*(float(getattr(self, f)[i]) for f in
                         ("x", "y", "theta1", "theta2", "phi", "w1", "w2", "eta")))
            for i in range(len(self))
        ]


def cn2(h, profile: TurbulenceProfile):
    """Hufnagel-Valley refractive-index structure constant at altitude h (m)."""
    h = np.asarray(h, dtype=float)
    out = (
        0.00594
        * (profile.wind_speed / 27.0) ** 2
        * (h * 1e-5) ** 10
        * np.exp(-h / 1000.0)
        + 2.7e-16 * np.exp(-h / 1500.0)
        + profile.cn2_ground * np.exp(-h / 100.0)
    )
    return out if out.ndim else float(out)


def rytov_variance(geom: LinkGeometry, profile: TurbulenceProfile) -> float:
    """sigma_R^2 = 2.25 k^(7/6) sec^(11/6)(zeta) * int Cn2(h) (h-h0)^(5/6) dh."""
    h0, h1 = geom.ground_altitude, geom.altitude

    def integrand(h):
        return cn2(h, profile) * (h - h0) ** (5.0 / 6.0)

    # The profile varies on 100 m..1500 m scales near the ground; give the
    # adaptive rule explicit breakpoints there plus the 10 km wind bump.
    marks = [h0 + d for d in (50.0, 200.0, 1e3, 3e3, 1e4, 3e4) if h0 + d < h1]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(
                integrand, h0, h1, epsabs=0.0, epsrel=1e-8, limit=300, points=marks
            )
        except integrate.IntegrationWarning as exc:
            raise RuntimeError(f"Rytov quadrature did not converge: {exc}") from exc
    sec = 1.0 / math.cos(geom.zenith)
    return 2.25 * geom.wavenumber ** (7.0 / 6.0) * sec ** (11.0 / 6.0) * value


def scintillation_index(sigma_r2: float) -> float:
    """Andrews-Phillips scintillation index from the Rytov variance."""
    if sigma_r2 < 0.0:
        raise ValueError("Rytov variance must be non-negative")
    s65 = sigma_r2 ** (6.0 / 5.0)
    return math.expm1(
        0.49 * sigma_r2 / (1.0 + 1.11 * s65) ** (7.0 / 6.0)
        + 0.51 * sigma_r2 / (1.0 + 0.69 * s65) ** (5.0 / 6.0)
    )


def beam_moments(
    beam_waist: float, omega: float, sigma_i2: float
) -> tuple[float, float, float, float]:
    """(var_xy, mean_theta, var_theta, cov_theta) from the Fresnel parameter
    and scintillation index.  sigma_i2 = 0 is the diffraction-only limit:
    no wandering, no shape fluctuations, mean_theta = ln(1/omega^2)."""
    s = sigma_i2 * omega ** (5.0 / 6.0)
    q = (1.0 + 2.96 * s) ** 2
    var_xy = 0.33 * beam_waist**2 * sigma_i2 * omega ** (-7.0 / 6.0)
    mean_theta = math.log(q / (omega**2 * math.sqrt(q + 1.2 * s)))
    var_theta = math.log(1.0 + 1.2 * s / q)
    cov_arg = 1.0 - 0.8 * s / q
    if cov_arg <= 0.0:
        raise TurbulenceModelError(
            f"theta covariance log argument {cov_arg} <= 0: turbulence too strong"
        )
    return var_xy, mean_theta, var_theta, math.log(cov_arg)


def beam_stats(geom: LinkGeometry, profile: TurbulenceProfile) -> BeamStats:
    """Moments of {x, y, theta1, theta2} for the given link and turbulence."""
    omega = geom.wavenumber * geom.beam_waist**2 / (2.0 * geom.path_length)
    sigma_r2 = rytov_variance(geom, profile)
    sigma_i2 = scintillation_index(sigma_r2)
    var_xy, mean_theta, var_theta, cov_theta = beam_moments(geom.beam_waist, omega, sigma_i2)
    return BeamStats(var_xy, mean_theta, var_theta, cov_theta, sigma_i2, omega, sigma_r2)


def _lambertw_exp(log_arg):
    """Principal-branch Lambert W of exp(log_arg), safe for huge arguments."""
    y = np.asarray(log_arg, dtype=float)
    out = np.empty_like(y)
    direct = y < 700.0
    if np.any(direct):
        vals = special.lambertw(np.exp(y[direct]))
        assert np.all(np.abs(vals.imag) == 0.0)
        out[direct] = vals.real
    big = ~direct
    if np.any(big):
        # Solve w + ln w = y by Newton from the asymptotic start y - ln y.
        yb = y[big]
        w = yb - np.log(yb)
        for _ in range(6):
            w -= (w + np.log(w) - yb) / (1.0 + 1.0 / w)
        out[big] = w
    return out


def _log_ratio(x):
    """ln[2(1 - e^(-x/2)) / (1 - e^(-x) I0(x))] with a small-x series branch."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-5
    xs = np.where(small, 1.0, x)  # keep the direct branch free of 0/0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log(2.0 * (-np.expm1(-0.5 * xs)) / (1.0 - special.i0e(xs)))
    return np.where(small, 0.5 * x - 0.125 * x * x, direct)


def _shape(x):
    """Shaping exponent lambda(W) as a function of x = r0^2 W^2."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-5
    xs = np.where(small, 1.0, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 2.0 * xs * special.i1e(xs) / (1.0 - special.i0e(xs)) / _log_ratio(xs)
    return np.where(small, 2.0, direct)


def _scale(x):
    """Scaling function R(W) as a function of x = r0^2 W^2."""
    return _log_ratio(x) ** (-1.0 / _shape(x))


def transmissivity(x, y, w1, w2, phi, r0: float):
    """Transmissivity of a displaced rotated elliptic beam through a
    circular aperture of radius r0.

    Parameters are the beam-centroid offsets x, y, the semi-axes w1, w2,
    and the ellipse rotation angle phi (all lengths in the same unit as
    r0).  Scalars or broadcastable arrays are accepted.
    """
    x, y, w1, w2, phi = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y, w1, w2, phi))
    )
    if np.any(w1 <= 0.0) or np.any(w2 <= 0.0):
        raise ValueError("semi-axes must be positive")

    # eta0: transmissivity of the centered beam.
    u = r0**2 * (1.0 / w1**2 - 1.0 / w2**2)
    v = r0**2 * (1.0 / w1**2 + 1.0 / w2**2)
    bessel_term = special.i0e(np.abs(u)) * np.exp(np.abs(u) - v)

    circular = np.abs(w1 - w2) <= 1e-12 * np.maximum(w1, w2)
    d_inv = 1.0 / w1 - 1.0 / w2
    x_d = np.where(circular, 1.0, r0**2 * d_inv**2)  # masked-out lane placeholder
    prefactor = 2.0 * (-np.expm1(-0.5 * x_d))
    denom = np.where(circular, 1.0, np.abs(w1**2 - w2**2))
    ratio = (w1 + w2) ** 2 / denom
    deformation = np.where(
        circular,
        0.0,
        prefactor * np.exp(-((ratio / _scale(x_d)) ** _shape(x_d))),
    )
    eta0 = 1.0 - bessel_term - deformation

    # Pointing term: chi is the angle between the centroid direction and
    # the ellipse orientation; x_eff = r0^2 (2/W_eff)^2 is exactly the
    # Lambert W value in the W_eff definition.
    chi = phi - np.arctan2(y, x)
    log_arg = (
        np.log(4.0 * r0**2 / (w1 * w2))
        + (r0**2 / w1**2) * (1.0 + 2.0 * np.cos(chi) ** 2)
        + (r0**2 / w2**2) * (1.0 + 2.0 * np.sin(chi) ** 2)
    )
    x_eff = _lambertw_exp(log_arg)
    dist = np.hypot(x, y)
    eta = eta0 * np.exp(-((dist / (r0 * _scale(x_eff))) ** _shape(x_eff)))

    if np.any(eta < -1e-9) or np.any(eta > 1.0 + 1e-9):
        raise TurbulenceModelError(
            f"transmissivity left [0, 1]: range [{np.min(eta)}, {np.max(eta)}]"
        )
    eta = np.clip(eta, 0.0, 1.0)
    return eta if eta.ndim else float(eta)


def _theta_scales(stats: BeamStats) -> tuple[float, float]:
    """Spectral factors of the 2x2 theta covariance; round-off clamped to 0."""
    plus = stats.var_theta + stats.cov_theta
    minus = stats.var_theta - stats.cov_theta
    if min(plus, minus) < -1e-12:
        warnings.warn(
            f"theta covariance indefinite (eigenvalues {plus}, {minus}); clamping",
            stacklevel=2,
        )
    return math.sqrt(max(plus, 0.0) / 2.0), math.sqrt(max(minus, 0.0) / 2.0)


def sample_beams(
    geom: LinkGeometry,
    stats: BeamStats,
    rng: np.random.Generator,
    n: int,
    phi_max: float = math.pi / 2.0,
) -> BeamSampleSet:
    """Draw n atmospheric realizations (canonical order: x, y, theta, phi).

    phi is uniform on [0, phi_max); the default pi/2 covers the full
    transmissivity distribution because eta is invariant under
    (w1, w2, phi) -> (w2, w1, phi + pi/2) and under phi -> phi + pi.
    """
    scale_xy = math.sqrt(stats.var_xy)
    x = rng.normal(0.0, scale_xy, size=n)
    y = rng.normal(0.0, scale_xy, size=n)
    s_plus, s_minus = _theta_scales(stats)
    z1 = rng.normal(size=n)
    z2 = rng.normal(size=n)
    theta1 = stats.mean_theta + s_plus * z1 + s_minus * z2
    theta2 = stats.mean_theta + s_plus * z1 - s_minus * z2
    phi = rng.uniform(0.0, phi_max, size=n)
    w1 = geom.beam_waist * np.exp(theta1 / 2.0)
    w2 = geom.beam_waist * np.exp(theta2 / 2.0)
    eta = transmissivity(x, y, w1, w2, phi, geom.aperture_radius)
    return BeamSampleSet(x, y, theta1, theta2, phi, w1, w2, np.atleast_1d(eta))


def sample_beam(
    geom: LinkGeometry,
    stats: BeamStats,
    rng: np.random.Generator,
    phi_max: float = math.pi / 2.0,
) -> BeamSample:
    """Draw a single atmospheric realization."""
    return sample_beams(geom, stats, rng, 1, phi_max).to_samples()[0]


def mean_attenuation_db(etas) -> float:
    """Mean channel attenuation -10 log10(mean(eta)) in dB.

    An all-zero sample set has infinite attenuation and returns +inf.
    """
    etas = np.asarray(etas, dtype=float)
    if etas.size == 0:
        raise ValueError("need at least one transmissivity sample")
    if np.any(etas < 0.0) or np.any(etas > 1.0):
        raise ValueError("transmissivities must lie in [0, 1]")
    mean = float(np.mean(etas))
    if mean == 0.0:
        return math.inf
    return -10.0 * math.log10(mean)


def dump_beam_samples_csv(samples: BeamSampleSet, path) -> None:
    """Write one realization per row; full double precision."""
    with open(path, "w", newline="") as fh:
        fh.write("x,y,theta1,theta2,phi,W1,W2,eta\n")
        for i in range(len(samples)):
            row = (
                samples.x[i], samples.y[i], samples.theta1[i], samples.theta2[i],
                samples.phi[i], samples.w1[i], samples.w2[i], samples.eta[i],
            )
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
