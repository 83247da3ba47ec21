"""Command-line driver: JSON configs in, plot-ready CSV out.

Config keys carry explicit units (epsilon_snu, zenith_deg, altitude_km,
attenuation_db).  Unknown keys are a hard error; missing keys fall back
to documented defaults.  Every output CSV embeds the fully resolved
config and seed in '#' header comments, so any file can be reproduced
from itself.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .atmosphere import (
    LinkGeometry,
    TurbulenceProfile,
    beam_stats,
    dump_beam_samples_csv,
)
from .experiment import (
    VARIANTS,
    MonteCarloConfig,
    OptimizationConfig,
    max_excess_noise,
    max_zenith_angle,
    mean_key_rate_from_stats,
    optimize_rate,
    write_records_csv,
)
from .gaussian import exponential_spectrum, flat_spectrum, single_mode_spectrum
from .keyrate import Protocol

log = logging.getLogger("cvqkd_sat")

MODES = ("fixed-sweep", "satellite-mc", "zenith-feasibility", "noise-feasibility")


class ConfigError(ValueError):
    """Schema or invariant violation in a run configuration."""


@dataclass
class Violation:
    field: str
    message: str
    warning: bool = False

    def __str__(self):
        kind = "warning" if self.warning else "violation"
        return f"{kind}: {self.field}: {self.message}"


# Known keys per config block; anything else is rejected outright.
_SCHEMA = {
    "": {"mode", "protocol", "channel", "optimization", "monte_carlo", "feasibility", "output"},
    "protocol": {
        "num_supermodes", "spectrum", "decay_delta", "epsilon_snu", "xi",
        "strategy", "attenuation_supermode", "amplification_supermode",
        "attenuation_t", "amplifier_gain", "clamp_negative_subchannels",
    },
    "channel": {
        "attenuation_db", "altitude_km", "ground_altitude_m", "zenith_deg",
        "wavelength_nm", "beam_waist_m", "aperture_radius_m",
        "wind_speed_mps", "cn2_ground",
    },
    "optimization": {
        "variants", "g_bounds", "t_bounds", "gain_cap",
        "n_g", "n_t", "n_gain", "polish", "polish_maxiter",
    },
    "monte_carlo": {"num_samples", "seed", "per_sample_optimization", "threads"},
    "feasibility": {"zenith_hi_deg", "eps_hi_snu", "zenith_tol_deg", "eps_tol_snu", "prescan"},
    "output": {"dir", "prefix", "per_sample_records", "dump_beam_samples"},
}

_PROTOCOL_DEFAULTS = {
    "num_supermodes": 5,
    "spectrum": "exponential",
    "decay_delta": 0.5,
    "epsilon_snu": 0.05,
    "xi": 0.95,
    "strategy": "symmetric",
    "attenuation_supermode": 1,
    "amplification_supermode": 1,
    "attenuation_t": 1.0,
    "amplifier_gain": 1.0,
    "clamp_negative_subchannels": False,
}

_CHANNEL_DEFAULTS = {
    "attenuation_db": None,
    "altitude_km": 500.0,
    "ground_altitude_m": 0.0,
    "zenith_deg": 0.0,
    "wavelength_nm": 795.0,
    "beam_waist_m": 0.06,
    "aperture_radius_m": 1.0,
    "wind_speed_mps": 6.0,
    "cn2_ground": 9.6e-14,
}

_OPT_DEFAULTS = {
    "variants": ["none", "amp", "att+amp"],
    "g_bounds": [0.05, 3.0],
    "t_bounds": [0.05, 1.0],
    "gain_cap": 10.0,
    "n_g": 20,
    "n_t": 15,
    "n_gain": 15,
    "polish": True,
    "polish_maxiter": 150,
}

_MC_DEFAULTS = {
    "num_samples": 1000,
    "seed": 0,
    "per_sample_optimization": True,
    "threads": 1,
}

_FEAS_DEFAULTS = {
    "zenith_hi_deg": 85.0,
    "eps_hi_snu": 0.5,
    "zenith_tol_deg": 0.5,
    "eps_tol_snu": 1e-3,
    "prescan": 5,
}

_OUTPUT_DEFAULTS = {
    "dir": ".",
    "prefix": "run",
    "per_sample_records": False,
    "dump_beam_samples": False,
}


def _check_unknown_keys(config: dict) -> list[Violation]:
    out = []
    for key in config:
        if key not in _SCHEMA[""]:
            out.append(Violation(key, "unknown top-level key"))
    for block, allowed in _SCHEMA.items():
        if not block:
            continue
        section = config.get(block)
        if section is None:
            continue
        if not isinstance(section, dict):
            out.append(Violation(block, "must be an object"))
            continue
        for key in section:
            if key not in allowed:
                out.append(Violation(f"{block}.{key}", "unknown key"))
    return out


def _resolved(config: dict) -> dict:
    """Config with every default filled in (assumes keys already validated)."""
    out = {"mode": config.get("mode")}
    for block, defaults in (
        ("protocol", _PROTOCOL_DEFAULTS),
        ("channel", _CHANNEL_DEFAULTS),
        ("optimization", _OPT_DEFAULTS),
        ("monte_carlo", _MC_DEFAULTS),
        ("feasibility", _FEAS_DEFAULTS),
        ("output", _OUTPUT_DEFAULTS),
    ):
        section = dict(defaults)
        section.update(config.get(block, {}))
        out[block] = section
    return out


def validate_config(config: dict) -> list[Violation]:
    """Full schema and invariant check; returns every violation found."""
    issues = _check_unknown_keys(config)
    if issues:
        return issues

    mode = config.get("mode")
    if mode not in MODES:
        issues.append(Violation("mode", f"must be one of {MODES}, got {mode!r}"))

    cfg = _resolved(config)
    proto = cfg["protocol"]
    if proto["spectrum"] not in ("single", "exponential", "flat"):
        issues.append(Violation("protocol.spectrum", f"unknown scenario {proto['spectrum']!r}"))
    if proto["num_supermodes"] < 1:
        issues.append(Violation("protocol.num_supermodes", "must be >= 1"))
    if proto["decay_delta"] < 0:
        issues.append(Violation("protocol.decay_delta", "must be >= 0"))
    if isinstance(proto["epsilon_snu"], list) and mode != "zenith-feasibility":
        issues.append(
            Violation("protocol.epsilon_snu", "a list is only meaningful for zenith-feasibility")
        )
    for v in _as_list(proto["epsilon_snu"]):
        if v < 0:
            issues.append(Violation("protocol.epsilon_snu", "must be >= 0"))
    if not 0 < proto["xi"] <= 1:
        issues.append(Violation("protocol.xi", "must be in (0, 1]"))
    if proto["strategy"] not in ("symmetric", "asymmetric"):
        issues.append(Violation("protocol.strategy", "must be symmetric or asymmetric"))
    if not 0 < proto["attenuation_t"] <= 1:
        issues.append(Violation("protocol.attenuation_t", "must be in (0, 1]"))
    if proto["amplifier_gain"] < 1:
        issues.append(Violation("protocol.amplifier_gain", "must be >= 1"))
    k = proto["num_supermodes"]
    for name in ("attenuation_supermode", "amplification_supermode"):
        if not 1 <= proto[name] <= k:
            issues.append(Violation(f"protocol.{name}", f"must be in 1..{k}"))
    if proto["strategy"] == "symmetric" and (
        proto["attenuation_supermode"] != proto["amplification_supermode"]
    ):
        issues.append(
            Violation("protocol.strategy", "symmetric strategy needs equal op supermodes")
        )

    chan = cfg["channel"]
    if mode == "fixed-sweep":
        att = chan["attenuation_db"]
        if not att or not isinstance(att, list):
            issues.append(Violation("channel.attenuation_db", "fixed-sweep needs a dB list"))
        elif any(a < 0 for a in att):
            issues.append(Violation("channel.attenuation_db", "attenuations must be >= 0 dB"))
    else:
        for name, lo in (
            ("altitude_km", 0.0), ("wavelength_nm", 0.0),
            ("beam_waist_m", 0.0), ("aperture_radius_m", 0.0),
        ):
            for v in _as_list(chan[name]):
                if v <= lo:
                    issues.append(Violation(f"channel.{name}", f"must be > {lo}"))
        if chan["ground_altitude_m"] < 0:
            issues.append(Violation("channel.ground_altitude_m", "must be >= 0"))
        for v in _as_list(chan["zenith_deg"]):
            if not 0 <= v < 90:
                issues.append(Violation("channel.zenith_deg", "must be in [0, 90)"))
        if chan["wind_speed_mps"] < 0 or chan["cn2_ground"] < 0:
            issues.append(Violation("channel", "turbulence parameters must be >= 0"))

    opt = cfg["optimization"]
    if not 0 < opt["g_bounds"][0] <= opt["g_bounds"][1]:
        issues.append(Violation("optimization.g_bounds", "need 0 < lo <= hi"))
    if not 0 < opt["t_bounds"][0] <= opt["t_bounds"][1] <= 1:
        issues.append(Violation("optimization.t_bounds", "must lie in (0, 1]"))
    if opt["gain_cap"] < 1:
        issues.append(Violation("optimization.gain_cap", "must be >= 1"))
    for name in ("n_g", "n_t", "n_gain"):
        if opt[name] < 1:
            issues.append(Violation(f"optimization.{name}", "must be >= 1"))
    for v in opt["variants"]:
        if v not in VARIANTS:
            issues.append(Violation("optimization.variants", f"unknown variant {v!r}"))
    if proto["amplifier_gain"] > opt["gain_cap"]:
        issues.append(
            Violation(
                "protocol.amplifier_gain",
                f"exceeds optimization.gain_cap={opt['gain_cap']} "
                "(feasibility handled at runtime)",
                warning=True,
            )
        )

    mc = cfg["monte_carlo"]
    if mc["num_samples"] < 1:
        issues.append(Violation("monte_carlo.num_samples", "must be >= 1"))
    if mc["threads"] < 1:
        issues.append(Violation("monte_carlo.threads", "must be >= 1"))

    feas = cfg["feasibility"]
    if not 0 < feas["zenith_hi_deg"] < 90:
        issues.append(Violation("feasibility.zenith_hi_deg", "must be in (0, 90)"))
    if feas["eps_hi_snu"] <= 0:
        issues.append(Violation("feasibility.eps_hi_snu", "must be > 0"))
    return issues


def _as_list(value) -> list:
    return list(value) if isinstance(value, list) else [value]


def _build_protocol(proto: dict) -> Protocol:
    builders = {
        "single": lambda g: single_mode_spectrum(g, proto["num_supermodes"]),
        "exponential": lambda g: exponential_spectrum(g, proto["num_supermodes"], proto["decay_delta"]),
        "flat": lambda g: flat_spectrum(g, proto["num_supermodes"]),
    }
    spectrum = builders[proto["spectrum"]](1.0)
    return Protocol(
        spectrum=spectrum,
        epsilon=_as_list(proto["epsilon_snu"])[0],
        xi=proto["xi"],
        attenuation_t=proto["attenuation_t"],
        amplifier_gain=proto["amplifier_gain"],
        k_att=proto["attenuation_supermode"],
        k_amp=proto["amplification_supermode"],
        clamp_negative_subchannels=proto["clamp_negative_subchannels"],
    )


def _build_opt(opt: dict) -> OptimizationConfig:
    return OptimizationConfig(
        g_bounds=tuple(opt["g_bounds"]),
        t_bounds=tuple(opt["t_bounds"]),
        gain_cap=opt["gain_cap"],
        n_g=opt["n_g"],
        n_t=opt["n_t"],
        n_gain=opt["n_gain"],
        polish=opt["polish"],
        polish_maxiter=opt["polish_maxiter"],
    )


def _build_geometry(chan: dict, altitude_km: float, zenith_deg: float) -> LinkGeometry:
    return LinkGeometry(
        altitude=altitude_km * 1e3,
        ground_altitude=chan["ground_altitude_m"],
        zenith=math.radians(zenith_deg),
        wavelength=chan["wavelength_nm"] * 1e-9,
        beam_waist=chan["beam_waist_m"],
        aperture_radius=chan["aperture_radius_m"],
    )


def _write_csv(path: Path, cfg: dict, columns: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")
        fh.write(f"# seed: {cfg['monte_carlo']['seed']}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    log.info("wrote %s (%d rows)", path, len(rows))


def _fmt(value) -> str:
    return "none" if value is None else f"{value:.6g}"


def run_fixed_sweep(cfg: dict, outdir: Path) -> list[Path]:
    protocol = _build_protocol(cfg["protocol"])
    opt = _build_opt(cfg["optimization"])
    variants = cfg["optimization"]["variants"]
    eps = cfg["protocol"]["epsilon_snu"]
    columns = ["attenuation_db", "eta"]
    for v in variants:
        tag = v.replace("+", "_")
        columns += [f"rate_{tag}", f"g_{tag}", f"t_{tag}", f"gain_{tag}"]
    rows = []
    print(f"{'att dB':>8} " + " ".join(f"{('R '+v):>14}" for v in variants))
    for db in cfg["channel"]["attenuation_db"]:
        eta = 10.0 ** (-db / 10.0)
        row = [db, eta]
        shown = []
        for v in variants:
            res = optimize_rate(eta, eps, protocol, opt, v)
            row += [res.rate, res.g, res.t, res.gain]
            shown.append(res.rate)
        rows.append(row)
        print(f"{db:8.2f} " + " ".join(f"{r:14.6e}" for r in shown))
    path = outdir / f"{cfg['output']['prefix']}_fixed_sweep.csv"
    _write_csv(path, cfg, columns, rows)
    return [path]


def run_satellite_mc(cfg: dict, outdir: Path) -> list[Path]:
    chan = cfg["channel"]
    protocol = _build_protocol(cfg["protocol"])
    opt = _build_opt(cfg["optimization"])
    variants = cfg["optimization"]["variants"]
    mcd = cfg["monte_carlo"]
    mc = MonteCarloConfig(mcd["num_samples"], mcd["seed"], mcd["per_sample_optimization"])
    profile = TurbulenceProfile(chan["wind_speed_mps"], chan["cn2_ground"])

    columns = ["altitude_km", "zenith_deg", "mean_attenuation_db"]
    for v in variants:
        columns.append(f"mean_rate_{v.replace('+', '_')}")
    rows, extra_files = [], []
    points = [
        (alt, zen)
        for alt in _as_list(chan["altitude_km"])
        for zen in _as_list(chan["zenith_deg"])
    ]
    print(f"{'alt km':>8} {'zenith':>7} {'att dB':>8} " + " ".join(f"{('Rbar '+v):>14}" for v in variants))
    for alt, zen in points:
        geom = _build_geometry(chan, alt, zen)
        stats = beam_stats(geom, profile)
        row = [alt, zen]
        att_db = None
        shown = []
        for v in variants:
            res = mean_key_rate_from_stats(
                geom, stats, protocol, mc, opt, v, threads=mcd["threads"]
            )
            att_db = res.mean_attenuation_db
            shown.append(res.mean_rate)
            if cfg["output"]["per_sample_records"]:
                rec_path = outdir / (
                    f"{cfg['output']['prefix']}_records_a{alt:g}_z{zen:g}_{v.replace('+', '_')}.csv"
                )
                write_records_csv(
                    res.records, rec_path, [f"config: {json.dumps(cfg, sort_keys=True)}"]
                )
                extra_files.append(rec_path)
            if cfg["output"]["dump_beam_samples"] and v == variants[0]:
                dump_path = outdir / f"{cfg['output']['prefix']}_beams_a{alt:g}_z{zen:g}.csv"
                dump_beam_samples_csv(res.samples, dump_path)
                extra_files.append(dump_path)
        rows.append([alt, zen, att_db] + shown)
        print(f"{alt:8.1f} {zen:7.2f} {att_db:8.3f} " + " ".join(f"{r:14.6e}" for r in shown))
    path = outdir / f"{cfg['output']['prefix']}_satellite_mc.csv"
    _write_csv(path, cfg, columns, rows)
    return [path] + extra_files


def run_zenith_feasibility(cfg: dict, outdir: Path) -> list[Path]:
    chan, feas = cfg["channel"], cfg["feasibility"]
    protocol = _build_protocol(cfg["protocol"])
    opt = _build_opt(cfg["optimization"])
    variants = cfg["optimization"]["variants"]
    mcd = cfg["monte_carlo"]
    mc = MonteCarloConfig(mcd["num_samples"], mcd["seed"], mcd["per_sample_optimization"])
    profile = TurbulenceProfile(chan["wind_speed_mps"], chan["cn2_ground"])

    columns = ["altitude_km", "epsilon_snu"]
    for v in variants:
        columns.append(f"zenith_max_deg_{v.replace('+', '_')}")
    rows = []
    for alt in _as_list(chan["altitude_km"]):
        for eps in _as_list(cfg["protocol"]["epsilon_snu"]):
            geom = _build_geometry(chan, alt, 0.0)
            row = [alt, eps]
            for v in variants:
                zmax = max_zenith_angle(
                    geom, profile, replace(protocol, epsilon=eps), mc, opt, v,
                    zenith_hi=math.radians(feas["zenith_hi_deg"]),
                    tol=math.radians(feas["zenith_tol_deg"]),
                    prescan=feas["prescan"],
                    threads=mcd["threads"],
                )
                row.append(math.nan if zmax is None else math.degrees(zmax))
            rows.append(row)
            print(
                f"altitude {alt:g} km, eps {eps:g}: "
                + ", ".join(f"{v}: {_fmt(r)} deg" for v, r in zip(variants, row[2:]))
            )
    path = outdir / f"{cfg['output']['prefix']}_zenith_feasibility.csv"
    _write_csv(path, cfg, columns, rows)
    return [path]


def run_noise_feasibility(cfg: dict, outdir: Path) -> list[Path]:
    chan, feas = cfg["channel"], cfg["feasibility"]
    protocol = _build_protocol(cfg["protocol"])
    opt = _build_opt(cfg["optimization"])
    variants = cfg["optimization"]["variants"]
    mcd = cfg["monte_carlo"]
    mc = MonteCarloConfig(mcd["num_samples"], mcd["seed"], mcd["per_sample_optimization"])
    profile = TurbulenceProfile(chan["wind_speed_mps"], chan["cn2_ground"])

    columns = ["altitude_km", "zenith_deg"]
    for v in variants:
        columns.append(f"eps_max_snu_{v.replace('+', '_')}")
    rows = []
    for alt in _as_list(chan["altitude_km"]):
        for zen in _as_list(chan["zenith_deg"]):
            geom = _build_geometry(chan, alt, zen)
            row = [alt, zen]
            for v in variants:
                emax = max_excess_noise(
                    geom, profile, protocol, mc, opt, v,
                    eps_hi=feas["eps_hi_snu"],
                    tol=feas["eps_tol_snu"],
                    prescan=feas["prescan"],
                    threads=mcd["threads"],
                )
                row.append(math.nan if emax is None else emax)
            rows.append(row)
            print(
                f"altitude {alt:g} km, zenith {zen:g} deg: "
                + ", ".join(f"{v}: {_fmt(r)} SNU" for v, r in zip(variants, row[2:]))
            )
    path = outdir / f"{cfg['output']['prefix']}_noise_feasibility.csv"
    _write_csv(path, cfg, columns, rows)
    return [path]


_RUNNERS = {
    "fixed-sweep": run_fixed_sweep,
    "satellite-mc": run_satellite_mc,
    "zenith-feasibility": run_zenith_feasibility,
    "noise-feasibility": run_noise_feasibility,
}


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def resolve_config(raw: dict, overrides: argparse.Namespace | None = None) -> dict:
    issues = [v for v in validate_config(raw) if not v.warning]
    if issues:
        raise ConfigError("; ".join(str(v) for v in issues))
    if "xi" not in raw.get("protocol", {}):
        log.info("protocol.xi not given; defaulting to %.2f", _PROTOCOL_DEFAULTS["xi"])
    cfg = _resolved(raw)
    if overrides is not None:
        if overrides.seed is not None:
            cfg["monte_carlo"]["seed"] = overrides.seed
        if overrides.samples is not None:
            cfg["monte_carlo"]["num_samples"] = overrides.samples
        if overrides.threads is not None:
            cfg["monte_carlo"]["threads"] = overrides.threads
        if overrides.out is not None:
            cfg["output"]["dir"] = overrides.out
    return cfg


def cmd_run(args) -> int:
    cfg = resolve_config(load_config(args.config), args)
    outdir = Path(cfg["output"]["dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    files = _RUNNERS[cfg["mode"]](cfg, outdir)
    print("output files:")
    for f in files:
        print(f"  {f}")
    return 0


def cmd_validate(args) -> int:
    issues = validate_config(load_config(args.config))
    errors = [v for v in issues if not v.warning]
    if not issues:
        print("config is valid; no violations")
    for v in issues:
        print(str(v))
    return 1 if errors else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvqkd-sat",
        description="Multi-mode CV-QKD key rates over fixed and satellite channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a run configuration")
    p_run.add_argument("config", help="JSON run configuration")
    p_run.add_argument("--seed", type=int, default=None, help="override monte_carlo.seed")
    p_run.add_argument("--samples", type=int, default=None, help="override monte_carlo.num_samples")
    p_run.add_argument("--out", default=None, help="override output.dir")
    p_run.add_argument("--threads", type=int, default=None, help="override monte_carlo.threads")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a configuration without running it")
    p_val.add_argument("config", help="JSON run configuration")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
