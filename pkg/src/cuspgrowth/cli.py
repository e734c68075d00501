"""Command-line pipelines: build metrics, measure growth, certify exponents.

Every command reads a single JSON config (defaults filled in), writes
machine-readable reports that embed the config hash and all assumed
constants, and uses deterministic numerics, so identical config and seed
reproduce byte-identical outputs.

Exit codes: 0 success, 1 constraint violation, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bridge import BridgeError, BridgeSpec, Direction, check_epigraph_feasibility, verify_pinching
from .geometry import CuspModel, distance_rows, volume_rows
from .growth import cuspidal_F, growth_exponents, parabolic_counting
from .lattice import certificate as run_certificate
from .lattice import estimate_delta, partial_poincare
from .profile import (
    LogAreaProfile,
    ScheduleError,
    auto_schedule,
    build_area,
    desk_separation,
    make_schedule,
)
from .quadrature import QuadratureBudgetError

EXIT_OK = 0
EXIT_CONSTRAINT = 1
EXIT_NUMERICAL = 2

DEFAULT_CONFIG = {
    "alpha": 1.0,
    "beta": 2.5,
    "eta": 0.05,
    "schedule": {
        "Delta": "auto",
        "lambda0": "auto",
        "mu0": "auto",
        "A_sep": "aggressive",
        "n_min": 1,
        "n_max": 1,
    },
    "grids": {
        "R_min": 10,
        "R_max": 40,
        "pinch_samples": 10000,
        "band_samples": 1000,
    },
    "quadrature": {
        "cuspidal_rel_tol": 1e-6,
        "volume_rel_tol": 1e-3,
    },
    "certificate": {
        "s": "auto",
        "N_max": 1024,
        "N_extended": 262144,
        "d_const": 4.0,
        "A_bound_factor": 1.2,
        "L": 14,
        "depth_n": 1,
    },
    "poincare": {
        "L_max": 14,
        "R_cap": 16.0,
        "window": [10.0, 16.0],
    },
    "seed": 0,
    "threads": 1,
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        with open(path) as fh:
            config = _merge(config, json.load(fh))
    alpha, beta, eta = config["alpha"], config["beta"], config["eta"]
    if not (0.0 < alpha <= beta):
        raise ValueError("config requires 0 < alpha <= beta")
    if alpha < beta and not (0.0 < eta < alpha ** 2):
        raise ValueError("config requires 0 < eta < alpha^2")
    if config["threads"] < 1:
        raise ValueError("threads must be >= 1")
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_report(out_dir: Path, name: str, payload: dict, config: dict):
    payload = dict(payload)
    payload["config_sha256"] = config_hash(config)
    payload["seed"] = config["seed"]
    path = out_dir / name
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(out_dir: Path, name: str, header, rows):
    path = out_dir / name
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def resolve_schedule(config: dict):
    alpha, beta, eta = config["alpha"], config["beta"], config["eta"]
    sched = config["schedule"]
    a_sep = sched["A_sep"]
    if a_sep == "aggressive":
        a_sep = desk_separation(alpha, beta, eta)
    elif a_sep == "paper":
        from .bridge import required_separation
        a_sep = required_separation(alpha, beta, eta)[0]
    if sched["Delta"] == "auto" or sched["lambda0"] == "auto" or sched["mu0"] == "auto":
        return auto_schedule(alpha, beta, eta, sched["n_min"], sched["n_max"], a_sep=a_sep)
    return make_schedule(sched["Delta"], sched["lambda0"], sched["mu0"], a_sep,
                         sched["n_min"], sched["n_max"])


def build_profile(config: dict) -> LogAreaProfile:
    alpha, beta, eta = config["alpha"], config["beta"], config["eta"]
    if alpha == beta:
        return LogAreaProfile.constant(alpha)
    return build_area(resolve_schedule(config), alpha, beta, eta)


def _load_or_build_profile(args, config) -> LogAreaProfile:
    if getattr(args, "profile", None):
        return LogAreaProfile.from_json(args.profile)
    candidate = Path(args.out) / "profile.json"
    if candidate.exists():
        return LogAreaProfile.from_json(candidate)
    return build_profile(config)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_build_metric(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile = build_profile(config)
    profile.to_json(out / "profile.json")
    t_hi = profile.t_end * 1.05 if profile.t_end > 0 else 50.0
    grid = np.linspace(0.0, t_hi, 2001)
    write_csv(out, "curvature.csv", ["t", "u", "du", "d2u", "K"],
              [tuple(row) for row in profile.sample_rows(grid)])
    report = verify_pinching(profile, n_samples=config["grids"]["pinch_samples"])
    payload = {"pinch": report.as_dict(), "profile": profile.as_dict()["schedule"],
               "alpha": profile.alpha, "beta": profile.beta, "eta": profile.eta}
    write_report(out, "pinch_report.json", payload, config)
    print(f"pinch ratio range [{report.min_ratio:.6f}, {report.max_ratio:.6f}] "
          f"within [{report.lower_bound:.6f}, {report.upper_bound:.6f}]: "
          f"{report.within_bounds}")
    return EXIT_OK if report.within_bounds else EXIT_NUMERICAL


def cmd_feasibility(args, config) -> int:
    direction = Direction(args.direction)
    t0 = args.t0 if args.t0 is not None else args.t1 - 1.0
    t3 = args.t3 if args.t3 is not None else args.t2 + 1.0
    spec = BridgeSpec(t0=t0, t1=args.t1, t2=args.t2, t3=t3,
                      alpha=config["alpha"], beta=config["beta"], eta=config["eta"],
                      direction=direction)
    report = check_epigraph_feasibility(spec)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK if report.feasible else EXIT_CONSTRAINT


def cmd_distance(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile = _load_or_build_profile(args, config)
    model = CuspModel(profile)
    dxs = [float(v) for v in args.dx.split(",")]
    rows = distance_rows(model, dxs)
    write_csv(out, "distances.csv", ["dx", "exact", "quasigeodesic", "gap"], rows)
    return EXIT_OK


def cmd_volume(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile = _load_or_build_profile(args, config)
    model = CuspModel(profile)
    radii = [float(v) for v in args.radii.split(",")]
    rel_tol = config["quadrature"]["cuspidal_rel_tol"]
    rows = volume_rows(model, radii, lambda R: cuspidal_F(model, R, rel_tol=rel_tol))
    write_csv(out, "volumes.csv", ["R", "volume", "F", "volume_over_F"], rows)
    return EXIT_OK


def cmd_count(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile = _load_or_build_profile(args, config)
    model = CuspModel(profile)
    grid = np.arange(config["grids"]["R_min"], config["grids"]["R_max"] + 1, dtype=float)
    table = parabolic_counting(model, grid)
    u_half = profile.u(grid / 2.0)
    rows = list(zip(grid, table.log_values, u_half, table.log_values - u_half))
    write_csv(out, "counting.csv", ["R", "ln_vP", "u_half_R", "ln_vP_minus_u"], rows)
    return EXIT_OK


def cmd_cuspidal(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile = _load_or_build_profile(args, config)
    model = CuspModel(profile)
    radii = [float(v) for v in args.radii.split(",")] if args.radii else _aligned_radii(profile)
    rel_tol = config["quadrature"]["cuspidal_rel_tol"]
    rows = []
    for R in radii:
        logF = cuspidal_F(model, R, rel_tol=rel_tol)
        rows.append((R, logF, logF / R))
    write_csv(out, "cuspidal.csv", ["R", "ln_F", "ln_F_over_R"], rows)
    return EXIT_OK


def _aligned_radii(profile: LogAreaProfile):
    sched = profile.schedule
    if sched is None:
        return [4.0, 8.0, 12.0, 16.0]
    return [float(sched.delta ** n) for n in range(sched.n_min, sched.n_max + 1)]


def exponents_payload(profile: LogAreaProfile, config: dict) -> dict:
    """delta(P), delta^-(P) from the area identification, omega(F), and the
    volume-entropy lower bound max(delta lower bound, omega(F))."""
    model = CuspModel(profile)
    sched = profile.schedule
    alpha, beta = profile.alpha, profile.beta
    rel_tol = config["quadrature"]["cuspidal_rel_tol"]

    aligned, plateau = [], []
    if sched is not None:
        for n in range(sched.n_min, sched.n_max + 1):
            r_n, s_n = sched.plateau_beta(n)
            p_n, q_n = sched.plateau_alpha(n)
            aligned.extend(np.linspace(2.0 * r_n, 2.0 * s_n, 17))
            plateau.extend(np.linspace(2.0 * p_n, 2.0 * q_n, 17))
    else:
        aligned = plateau = list(np.linspace(10.0, 40.0, 31))
    aligned = np.asarray(aligned)
    plateau = np.asarray(plateau)
    delta_p = float(np.max(profile.u(aligned / 2.0) / aligned))
    delta_p_minus = float(np.min(profile.u(plateau / 2.0) / plateau))

    cusp_radii = _aligned_radii(profile)
    cusp_ratios = []
    for R in cusp_radii:
        logF = cuspidal_F(model, R, rel_tol=rel_tol)
        cusp_ratios.append({"R": R, "ln_F": logF, "ln_F_over_R": logF / R})
    omega_F = max(r["ln_F_over_R"] for r in cusp_ratios)
    epsilon_hat = omega_F - beta / 2.0

    return {
        "alpha": alpha,
        "beta": beta,
        "delta_P": delta_p,
        "delta_P_minus": delta_p_minus,
        "delta_P_theoretical": beta / 2.0 if sched is not None else alpha / 2.0,
        "omega_F": omega_F,
        "epsilon_hat": epsilon_hat,
        "cuspidal": cusp_ratios,
        "omega_X_lower": max(beta / 2.0, omega_F),
        "window_note": "all exponents are finite-window estimates",
    }


def cmd_exponents(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile = _load_or_build_profile(args, config)
    payload = exponents_payload(profile, config)
    write_report(out, "exponents.json", payload, config)
    print(f"delta(P)={payload['delta_P']:.6f} delta^-(P)={payload['delta_P_minus']:.6f} "
          f"omega(F)={payload['omega_F']:.6f} epsilon_hat={payload['epsilon_hat']:.3e}")
    return EXIT_OK


def cmd_poincare(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    s = args.s if args.s is not None else config["beta"] / 2.0 + 0.01
    L = args.L if args.L is not None else config["poincare"]["L_max"]
    partial = partial_poincare(s, L, config["alpha"])
    rows = [(m, count, val) for m, count, val in partial.annuli]
    write_csv(out, "poincare.csv", ["length", "word_count", "annulus_sum"], rows)
    write_report(out, "poincare.json", partial.as_dict(), config)
    print(f"partial Poincare sum at s={s}: {partial.value:.9f}")
    return EXIT_OK


def certificate_payload(profile: LogAreaProfile, config: dict,
                        epsilon_hat: float | None = None) -> dict:
    cert_cfg = config["certificate"]
    model = CuspModel(profile)
    beta = profile.beta
    if cert_cfg["s"] == "auto":
        if epsilon_hat is None:
            payload = exponents_payload(profile, config)
            epsilon_hat = payload["epsilon_hat"]
        s = beta / 2.0 + max(epsilon_hat, 1e-9) / 2.0
    else:
        s = float(cert_cfg["s"])
    partial = partial_poincare(s, cert_cfg["L"], profile.alpha)
    a_bound = partial.value * cert_cfg["A_bound_factor"]
    reports = []
    found = None
    N = 2
    while N <= cert_cfg["N_extended"]:
        rep = run_certificate(s, N, model, cert_cfg["d_const"], a_bound)
        reports.append({"N": N, "rho": rep.rho, "verdict": rep.verdict})
        if rep.verdict and found is None:
            found = rep
        if rep.verdict:
            break
        N *= 2
    best = found if found is not None else run_certificate(
        s, cert_cfg["N_max"], model, cert_cfg["d_const"], a_bound)
    return {
        "s": s,
        "A_bound": a_bound,
        "A_bound_factor": cert_cfg["A_bound_factor"],
        "poincare_partial": partial.value,
        "d_const": cert_cfg["d_const"],
        "depth_n": cert_cfg["depth_n"],
        "scan": reports,
        "certificate": best.as_dict(),
        "certified": best.verdict,
        "N_within_1000": any(r["verdict"] and r["N"] <= 1000 for r in reports),
    }


def cmd_certificate(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile = _load_or_build_profile(args, config)
    payload = certificate_payload(profile, config)
    write_report(out, "certificate.json", payload, config)
    cert = payload["certificate"]
    print(f"s={payload['s']:.6f} N={cert['N']} rho={cert['rho']:.6g} "
          f"certified={payload['certified']}")
    return EXIT_OK if payload["certified"] else EXIT_NUMERICAL


def cmd_counterexample(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    alpha, beta = config["alpha"], config["beta"]
    if not beta > 2.0 * alpha:
        print("counterexample hypothesis violated: need beta > 2*alpha", file=sys.stderr)
        return EXIT_CONSTRAINT

    stage = "build"
    try:
        profile = build_profile(config)
        profile.to_json(out / "profile.json")
        pinch = verify_pinching(profile, n_samples=config["grids"]["pinch_samples"])
        if not pinch.within_bounds:
            print("stage build: pinch verification failed", file=sys.stderr)
            return EXIT_NUMERICAL

        stage = "exponents"
        exponents = exponents_payload(profile, config)
        write_report(out, "exponents.json", exponents, config)

        stage = "certificate"
        cert = certificate_payload(profile, config, epsilon_hat=exponents["epsilon_hat"])
        write_report(out, "certificate.json", cert, config)
    except (ScheduleError, BridgeError, ValueError) as exc:
        print(f"stage {stage}: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (QuadratureBudgetError, RuntimeError) as exc:
        print(f"stage {stage}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    epsilon_hat = exponents["epsilon_hat"]
    verdict = bool(epsilon_hat > 0.0 and cert["certified"]
                   and cert["s"] < exponents["omega_X_lower"])
    payload = {
        "verdict": verdict,
        "pinch": pinch.as_dict(),
        "exponents": exponents,
        "certificate_summary": {
            "s": cert["s"],
            "N": cert["certificate"]["N"],
            "rho": cert["certificate"]["rho"],
            "certified": cert["certified"],
            "N_within_1000": cert["N_within_1000"],
        },
        "conclusion": {
            "delta_Gamma_upper": cert["s"],
            "omega_X_lower": exponents["omega_X_lower"],
            "strict_gap": exponents["omega_X_lower"] - cert["s"],
        },
        "assumptions": cert["certificate"]["assumptions"],
    }
    write_report(out, "counterexample.json", payload, config)

    print("counterexample pipeline summary")
    print(f"  curvature pinch: [{pinch.min_ratio:.4f}, {pinch.max_ratio:.4f}] "
          f"in [{pinch.lower_bound:.4f}, {pinch.upper_bound:.4f}]")
    print(f"  delta(P) = {exponents['delta_P']:.6f}, "
          f"delta^-(P) = {exponents['delta_P_minus']:.6f}")
    print(f"  omega(F) = {exponents['omega_F']:.6f} "
          f"(epsilon_hat = {epsilon_hat:.3e})")
    print(f"  certificate: delta(Gamma) <= s = {cert['s']:.6f} "
          f"at N = {cert['certificate']['N']} (rho = {cert['certificate']['rho']:.4g})")
    print(f"  verdict (volume entropy exceeds lattice exponent bound): {verdict}")
    return EXIT_OK if verdict else EXIT_NUMERICAL


def _lattice_delta(args, config) -> int:
    poin = config["poincare"]
    est = estimate_delta(poin["L_max"], config["alpha"], window=tuple(poin["window"]),
                         R_cap=poin["R_cap"])
    print(json.dumps(est.as_dict(), indent=2, sort_keys=True, default=float))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cuspgrowth",
        description="build pinched cusp metrics and measure their growth",
    )
    parser.add_argument("--config", help="JSON config path", default=None)
    parser.add_argument("--out", help="output directory", default="out")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (deterministic output regardless)")
    parser.add_argument("--seed", type=int, default=None, help="sampling seed")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("build-metric", help="build the profile and verify pinching")

    feas = sub.add_parser("feasibility", help="epigraph feasibility of one bridge")
    feas.add_argument("--t0", type=float, default=None)
    feas.add_argument("--t1", type=float, required=True)
    feas.add_argument("--t2", type=float, required=True)
    feas.add_argument("--t3", type=float, default=None)
    feas.add_argument("--direction", choices=[d.value for d in Direction],
                      default=Direction.ALPHA_TO_BETA.value)

    dist = sub.add_parser("distance", help="exact vs quasigeodesic distances")
    dist.add_argument("--dx", default="0.5,5,50,5000")
    dist.add_argument("--profile", default=None)

    vol = sub.add_parser("volume", help="ball-in-horoball volumes vs F(R)")
    vol.add_argument("--radii", default="4,8,12")
    vol.add_argument("--profile", default=None)

    cnt = sub.add_parser("count", help="parabolic orbit counting table")
    cnt.add_argument("--profile", default=None)

    cusp = sub.add_parser("cuspidal", help="cuspidal function table")
    cusp.add_argument("--radii", default=None)
    cusp.add_argument("--profile", default=None)

    expo = sub.add_parser("exponents", help="growth exponents of the built profile")
    expo.add_argument("--profile", default=None)

    poin = sub.add_parser("poincare", help="partial Poincare sums by annulus")
    poin.add_argument("--s", type=float, default=None)
    poin.add_argument("--L", type=int, default=None)

    cert = sub.add_parser("certificate", help="series convergence certificate")
    cert.add_argument("--profile", default=None)

    sub.add_parser("counterexample", help="full build/exponents/certificate pipeline")
    sub.add_parser("lattice-delta", help="free-lattice critical exponent estimate")
    return parser


_COMMANDS = {
    "build-metric": cmd_build_metric,
    "feasibility": cmd_feasibility,
    "distance": cmd_distance,
    "volume": cmd_volume,
    "count": cmd_count,
    "cuspidal": cmd_cuspidal,
    "exponents": cmd_exponents,
    "poincare": cmd_poincare,
    "certificate": cmd_certificate,
    "counterexample": cmd_counterexample,
    "lattice-delta": _lattice_delta,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.threads is not None:
            config["threads"] = args.threads
        if args.seed is not None:
            config["seed"] = args.seed
        return _COMMANDS[args.command](args, config)
    except (ScheduleError, BridgeError, ValueError) as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (QuadratureBudgetError, RuntimeError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
