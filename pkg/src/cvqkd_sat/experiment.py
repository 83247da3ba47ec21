"""Per-channel-use optimization and Monte Carlo averaging of the key rate.

For every transmissivity sample the total rate is maximized over the PDC
gain g, the transmitter attenuation T and the receiver amplifier gain G
(a coarse vectorized grid followed by a Nelder-Mead polish).  The
amplifier gain is parameterized as a fraction u in [0, 1] of the
physically admissible interval [1, min(G_cap, G_max*(1 - margin))],
which keeps every search point feasible while the bound moves with
(g, T, eta).  Feasibility searches for the maximal zenith angle and
excess noise bisect over a positive-mean-rate predicate.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize as sciopt

from .atmosphere import (
    BeamSampleSet,
    BeamStats,
    LinkGeometry,
    TurbulenceProfile,
    beam_stats,
    mean_attenuation_db,
    sample_beams,
)
from .keyrate import Protocol, total_rate
from .noiseless import GAIN_MARGIN, GainUnbounded, max_gain

VARIANTS = ("none", "att", "amp", "att+amp")


class NonMonotoneFeasibility(RuntimeError):
    """The positive-rate predicate was not monotone over the pre-scan."""

    def __init__(self, message: str, scan: list[tuple[float, bool]]):
        super().__init__(f"{message}; scan: {scan}")
        self.scan = scan


@dataclass(frozen=True)
class OptimizationConfig:
    """Search space and effort for the {g, T, G} maximization."""

    g_bounds: tuple[float, float] = (0.05, 3.0)
    t_bounds: tuple[float, float] = (0.05, 1.0)
    gain_cap: float = 10.0
    n_g: int = 20
    n_t: int = 15
    n_gain: int = 15
    polish: bool = True
    polish_maxiter: int = 150

    def __post_init__(self):
        if not 0.0 < self.g_bounds[0] <= self.g_bounds[1]:
            raise ValueError("invalid PDC gain bounds")
        if not 0.0 < self.t_bounds[0] <= self.t_bounds[1] <= 1.0:
            raise ValueError("attenuation bounds must lie in (0, 1]")
        if self.gain_cap < 1.0:
            raise ValueError("gain cap must be >= 1")
        if min(self.n_g, self.n_t, self.n_gain) < 1:
            raise ValueError("grid sizes must be positive")


@dataclass(frozen=True)
class MonteCarloConfig:
    n_samples: int = 1000
    seed: int = 0
    per_sample_optimization: bool = True

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("need at least one sample")


@dataclass(frozen=True)
class OptResult:
    g: float
    t: float
    gain: float
    rate: float


@dataclass(frozen=True)
class SampleRecord:
    eta: float
    g: float
    t: float
    gain: float
    rate: float


@dataclass(frozen=True)
class MeanRateResult:
    mean_rate: float
    mean_attenuation_db: float
    records: tuple[SampleRecord, ...]
    samples: BeamSampleSet | None = None


def _entropy_g_arr(x):
    x = np.maximum(x, 1.0)
    up = 0.5 * (x + 1.0)
    dn = 0.5 * (x - 1.0)
    dn_safe = np.where(dn > 0.0, dn, 1.0)
    return up * np.log2(up) - dn_safe * np.log2(dn_safe)


def _block_op_arr(a, b, c, s):
    """Vectorized noiseless op with scale s on mode B; s == 1 lanes pass through."""
    p, q = a + 1.0, b + 1.0
    det = p * q - c * c
    sig_a, sig_b, sig_c = q / det, p / det, -c / det
    sig_b = s * s * (sig_b - 0.5) + 0.5
    sig_c = s * sig_c
    det2 = sig_a * sig_b - sig_c * sig_c
    a2 = sig_b / det2 - 1.0
    b2 = sig_a / det2 - 1.0
    c2 = -sig_c / det2
    keep = s == 1.0
    return np.where(keep, a, a2), np.where(keep, b, b2), np.where(keep, c, c2)


def _gain_limit_arr(variance, gain_cap):
    """Upper end of the feasible gain interval for each lane."""
    with np.errstate(divide="ignore", invalid="ignore"):
        g_max = np.where(
            variance > 1.0,
            np.sqrt((variance + 1.0) / np.maximum(variance - 1.0, 1e-300)),
            np.inf,
        )
    return np.maximum(np.minimum(gain_cap, g_max * (1.0 - GAIN_MARGIN)), 1.0)


def _grid_rates(protocol: Protocol, eta: float, g_vals, t_vals, u_vals, free_gain, gain_cap):
    """Total rate over the (g, T, u) grid; returns (rates, gains) arrays.

    Mirrors keyrate.total_rate lane for lane (tested to agree to 1e-12);
    with free_gain the third axis is the feasible-gain fraction u,
    otherwise it carries the fixed protocol gain (lanes where that gain
    is infeasible get rate -inf).
    """
    g = np.asarray(g_vals, float)[:, None, None]
    t = np.asarray(t_vals, float)[None, :, None]
    u = np.asarray(u_vals, float)[None, None, :]
    shape = np.broadcast_shapes(g.shape, t.shape, u.shape)
    rates = np.zeros(shape)
    gains = np.ones(shape)
    infeasible = np.zeros(shape, dtype=bool)
    eps, xi = protocol.epsilon, protocol.xi
    errstate = np.errstate(invalid="ignore", divide="ignore", over="ignore")
    errstate.__enter__()

    for k in range(1, protocol.spectrum.num_supermodes + 1):
        r = g * protocol.spectrum.lambdas[k - 1]
        a = np.broadcast_to(np.cosh(2.0 * r), shape).copy()
        b = np.broadcast_to(np.cosh(2.0 * r), shape).copy()
        c = np.broadcast_to(np.sinh(2.0 * r), shape).copy()
        if k == protocol.k_att:
            a, b, c = _block_op_arr(a, b, c, np.sqrt(t))
        b = eta * (b + eps) + (1.0 - eta)
        c = math.sqrt(eta) * c
        prob = 1.0
        if k == protocol.k_amp:
            if free_gain:
                g_hi = _gain_limit_arr(b, gain_cap)
                gains = 1.0 + u * (g_hi - 1.0)
            else:
                gains = np.broadcast_to(u, shape).copy()
                infeasible |= (gains > 1.0) & (gains > _gain_limit_arr(b, np.inf))
            n_bar = np.maximum(0.5 * (b - 1.0), 0.0)
            prob = gains ** (-2.0 * np.ceil(n_bar))
            a, b, c = _block_op_arr(a, b, c, gains)
        # clamps guard the numerically degenerate near-gain-bound lanes
        # (variances ~ 1/margin); the winner is re-evaluated by the exact
        # scalar path before being reported
        num = (a + 1.0) * (b + 1.0)
        info = np.log2(num / np.maximum(num - c * c, 1e-300))
        disc = np.sqrt(np.maximum((a + b) ** 2 - 4.0 * c * c, 0.0))
        nu1 = 0.5 * (disc + (b - a))
        nu2 = 0.5 * (disc - (b - a))
        alpha3 = a - c * c / (b + 1.0)
        chi = _entropy_g_arr(nu1) + _entropy_g_arr(nu2) - _entropy_g_arr(alpha3)
        term = prob * (xi * info - chi)
        if protocol.clamp_negative_subchannels:
            term = np.maximum(term, 0.0)
        rates = rates + term

    rates = np.where(infeasible, -np.inf, rates)
    return rates, np.broadcast_to(gains, shape)


def _gain_upper(protocol: Protocol, eta: float, g: float, t: float, gain_cap: float) -> float:
    """Feasible-gain ceiling for the amplified supermode at (g, T, eta)."""
    k = protocol.k_amp
    r = protocol.spectrum.lambdas[k - 1] * g
    b = math.cosh(2.0 * r)
    if k == protocol.k_att and t != 1.0:
        a, c = b, math.sinh(2.0 * r)
        _, b, _ = _block_op_arr(np.float64(a), np.float64(b), np.float64(c), np.sqrt(t))
        b = float(b)
    b = eta * (b + protocol.epsilon) + (1.0 - eta)
    try:
        return max(min(gain_cap, max_gain(b) * (1.0 - GAIN_MARGIN)), 1.0)
    except GainUnbounded:
        return gain_cap


def optimize_rate(
    eta: float,
    epsilon: float,
    protocol: Protocol,
    config: OptimizationConfig = OptimizationConfig(),
    variant: str = "att+amp",
) -> OptResult:
    """Maximize the total rate at a fixed channel over the free parameters.

    variant selects which op strengths are optimized: "none" (g only),
    "amp" (g, G), "att" (g, T) or "att+amp" (g, T, G).  Parameters that
    are not freed keep the protocol's fixed values.  The reported rate is
    always a plain keyrate.total_rate evaluation at the optimum.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    protocol = replace(protocol, epsilon=epsilon)
    free_t = variant in ("att", "att+amp")
    free_gain = variant in ("amp", "att+amp")

    g_vals = np.geomspace(config.g_bounds[0], config.g_bounds[1], config.n_g)
    t_vals = (
        np.linspace(config.t_bounds[0], config.t_bounds[1], config.n_t)
        if free_t
        else np.array([protocol.attenuation_t])
    )
    u_vals = (
        np.linspace(0.0, 1.0, config.n_gain)
        if free_gain
        else np.array([protocol.amplifier_gain])
    )

    rates, gains = _grid_rates(
        protocol, eta, g_vals, t_vals, u_vals, free_gain, config.gain_cap
    )

    def evaluate(g, t, gain):
        return total_rate(protocol.with_params(g, t, gain), eta).total

    # The winning lane is re-evaluated through the scalar path; lanes it
    # rejects as unphysical (possible within round-off of the gain bound)
    # are masked out and the next-best lane is taken.
    rates = rates.copy()
    while True:
        flat = int(np.argmax(rates))
        if not math.isfinite(rates.flat[flat]):
            raise ValueError("no feasible point: fixed amplifier gain exceeds the bound")
        ig, it, iu = np.unravel_index(flat, rates.shape)
        best = (float(g_vals[ig]), float(t_vals[it]), float(gains[ig, it, iu]))
        try:
            best_rate = evaluate(*best)
            break
        except ValueError:
            rates.flat[flat] = -np.inf

    if config.polish:
        u0 = float(u_vals[iu]) if free_gain else 0.0
        x0, lo, hi = [math.log(best[0])], [math.log(config.g_bounds[0])], [math.log(config.g_bounds[1])]
        if free_t:
            x0.append(best[1])
            lo.append(config.t_bounds[0])
            hi.append(config.t_bounds[1])
        if free_gain:
            x0.append(u0)
            lo.append(0.0)
            hi.append(1.0)

        def unpack(x):
            g = math.exp(x[0])
            t = x[1] if free_t else protocol.attenuation_t
            if free_gain:
                g_hi = _gain_upper(protocol, eta, g, t, config.gain_cap)
                gain = 1.0 + x[-1] * (g_hi - 1.0)
            else:
                gain = protocol.amplifier_gain
            return g, t, gain

        def objective(x):
            try:
                return -evaluate(*unpack(x))
            except ValueError:
                return 1e9

        res = sciopt.minimize(
            objective,
            np.array(x0),
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={"maxiter": config.polish_maxiter, "xatol": 1e-5, "fatol": 1e-10},
        )
        cand = unpack(res.x)
        cand_rate = evaluate(*cand)
        if cand_rate > best_rate:
            best, best_rate = cand, cand_rate

    return OptResult(best[0], best[1], best[2], best_rate)


def evaluate_fixed(
    protocol: Protocol, eta: float, g: float, t: float, gain: float, gain_cap: float = math.inf
) -> SampleRecord:
    """Rate at fixed parameters, clamping the gain to feasibility at this eta."""
    g_hi = _gain_upper(protocol, eta, g, t, gain_cap)
    gain = min(gain, g_hi)
    rate = total_rate(protocol.with_params(g, t, gain), eta).total
    return SampleRecord(eta, g, t, gain, rate)


def _optimize_sample(args) -> SampleRecord:
    eta, epsilon, protocol, config, variant = args
    res = optimize_rate(eta, epsilon, protocol, config, variant)
    return SampleRecord(eta, res.g, res.t, res.gain, res.rate)


def _optimize_all(etas, protocol, config, variant, threads) -> list[SampleRecord]:
    jobs = [(float(eta), protocol.epsilon, protocol, config, variant) for eta in etas]
    if threads <= 1 or len(jobs) < 4:
        return [_optimize_sample(job) for job in jobs]
    chunk = max(1, len(jobs) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_optimize_sample, jobs, chunksize=chunk))


def mean_key_rate_from_stats(
    geom: LinkGeometry,
    stats: BeamStats,
    protocol: Protocol,
    mc: MonteCarloConfig,
    opt: OptimizationConfig = OptimizationConfig(),
    variant: str = "att+amp",
    threads: int = 1,
) -> MeanRateResult:
    """Monte Carlo mean rate over transmissivity samples drawn from `stats`.

    With per_sample_optimization the parameters are re-optimized for every
    sample (the channel is assumed measured within each coherence window);
    otherwise they are optimized once at the sample-mean transmissivity
    and held fixed, with the gain clamped to feasibility per sample.
    Results are deterministic for a given seed regardless of thread count.
    """
    rng = np.random.default_rng(mc.seed)
    batch = sample_beams(geom, stats, rng, mc.n_samples)
    etas = [float(v) for v in batch.eta]
    if mc.per_sample_optimization:
        records = _optimize_all(etas, protocol, opt, variant, threads)
    else:
        ref = optimize_rate(float(np.mean(batch.eta)), protocol.epsilon, protocol, opt, variant)
        records = [evaluate_fixed(protocol, eta, ref.g, ref.t, ref.gain, opt.gain_cap) for eta in etas]
    mean_rate = math.fsum(rec.rate for rec in records) / len(records)
    return MeanRateResult(mean_rate, mean_attenuation_db(batch.eta), tuple(records), batch)


def mean_key_rate(
    geom: LinkGeometry,
    profile: TurbulenceProfile,
    protocol: Protocol,
    mc: MonteCarloConfig,
    opt: OptimizationConfig = OptimizationConfig(),
    variant: str = "att+amp",
    threads: int = 1,
) -> MeanRateResult:
    """Monte Carlo mean rate for a satellite link (stats derived from geometry)."""
    return mean_key_rate_from_stats(
        geom, beam_stats(geom, profile), protocol, mc, opt, variant, threads
    )


def _bisect_feasible(predicate, lo, hi, tol, prescan, label):
    """Largest feasible value of a monotone predicate on [lo, hi].

    Returns None when even `lo` fails and `hi` when everything passes.
    A coarse pre-scan guards the monotonicity assumption; violations
    raise NonMonotoneFeasibility with the scan attached.
    """
    points = np.linspace(lo, hi, max(prescan, 2))
    flags = [bool(predicate(float(p))) for p in points]
    scan = list(zip((float(p) for p in points), flags))
    if not flags[0]:
        return None
    if all(flags):
        return hi
    first_false = flags.index(False)
    if any(flags[first_false:]):
        raise NonMonotoneFeasibility(f"{label} feasibility is not monotone", scan)
    lo, hi = float(points[first_false - 1]), float(points[first_false])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_zenith_angle(
    geom: LinkGeometry,
    profile: TurbulenceProfile,
    protocol: Protocol,
    mc: MonteCarloConfig,
    opt: OptimizationConfig = OptimizationConfig(),
    variant: str = "att+amp",
    zenith_hi: float = math.radians(85.0),
    tol: float = math.radians(0.5),
    prescan: int = 5,
    threads: int = 1,
) -> float | None:
    """Largest zenith angle (radians) with a positive mean key rate.

    geom.zenith is ignored; every evaluation reuses the same Monte Carlo
    seed so the predicate varies smoothly with the angle.
    """

    def predicate(zeta: float) -> bool:
        g = replace(geom, zenith=zeta)
        return mean_key_rate(g, profile, protocol, mc, opt, variant, threads).mean_rate > 0.0

    return _bisect_feasible(predicate, 0.0, zenith_hi, tol, prescan, "zenith")


def max_excess_noise(
    geom: LinkGeometry,
    profile: TurbulenceProfile,
    protocol: Protocol,
    mc: MonteCarloConfig,
    opt: OptimizationConfig = OptimizationConfig(),
    variant: str = "att+amp",
    eps_hi: float = 0.5,
    tol: float = 1e-3,
    prescan: int = 5,
    threads: int = 1,
) -> float | None:
    """Largest channel input excess noise (SNU) with a positive mean rate."""
    stats = beam_stats(geom, profile)

    def predicate(eps: float) -> bool:
        proto = replace(protocol, epsilon=eps)
        return (
            mean_key_rate_from_stats(geom, stats, proto, mc, opt, variant, threads).mean_rate
            > 0.0
        )

    return _bisect_feasible(predicate, 0.0, eps_hi, tol, prescan, "excess noise")


def write_records_csv(records, path, header_lines=()) -> None:
    """Per-sample records as CSV: eta, g, T, G, rate."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("eta,g,T,G,rate\n")
        for rec in records:
            fh.write(
                ",".join(repr(float(v)) for v in (rec.eta, rec.g, rec.t, rec.gain, rec.rate))
                + "\n"
            )
