"""Command line interface: ``liiss run``, ``liiss verify`` and ``liiss beta``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, InvariantViolation, LiissError, NumericalError, OutOfRegion
from .numerics import Trajectory, fmt17

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_SEED = 0x5EED


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays and map non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, data):
    with open(path, "w", newline="") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _strided(traj: Trajectory, stride: int) -> Trajectory:
    if stride == 1:
        return traj
    idx = np.arange(0, traj.t.size, stride)
    if idx[-1] != traj.t.size - 1:
        idx = np.append(idx, traj.t.size - 1)
    return Trajectory(traj.t[idx], traj.states[idx], traj.norm[idx], traj.input_integral[idx],
                      traj.blow_up_time, dict(traj.meta))


def _merge_checks(reports) -> tuple:
    violations = sum(len(r.violations) for r in reports)
    margins = [r.worst_margin for r in reports if math.isfinite(r.worst_margin)]
    return violations, (min(margins) if margins else None)


def _run_ode(ecfg, system: dict, out: str, plots: bool) -> dict:
    from .envelope import check_membership_BR, ode_certificate, verify_trajectory, write_envelope_csv
    from .lyapunov import dissipation_check
    from .ode_example import ode_dissipation_spec, ode_lyapunov, simulate, validate_gains

    ocfg = cfgmod.build_ode(system)
    mode = "closed" if ecfg.kind == "ode_closed" else "open"
    traj = simulate(ocfg, mode)
    _strided(traj, ecfg.stride).to_csv(os.path.join(out, "trajectory.csv"))
    reports, extra = [], {}
    if mode == "closed":
        reports.append(validate_gains(ocfg))
        reports.append(dissipation_check(traj, ode_lyapunov(ocfg), ode_dissipation_spec(ocfg),
                                         lambda t: abs(ocfg.d(t))))
    env_rep = None
    if ecfg.certificate:
        cert = ode_certificate(ocfg)
        x0 = float(traj.norm[0])
        info = {"construction": cert.construction, "R": cert.R, "r_cert": cert.r_cert,
                "x0_norm": x0}
        if check_membership_BR(cert, x0, 2.0 * traj.input_integral):
            env_rep = verify_trajectory(cert, traj)
            write_envelope_csv(env_rep, os.path.join(out, "envelope.csv"))
            reports.append(env_rep)
            info["status"] = "checked"
            info["envelope_violations"] = len(env_rep.violations)
        else:
            info["status"] = "initial state or input energy outside the certified ball B_R; not checked"
        extra["certificate"] = info
    if plots:
        from .plots import line_plot

        line_plot(os.path.join(out, "norm.svg"), [("|x(t)|", traj.t, traj.norm)],
                  title=f"{mode}-loop norm, A={ocfg.A:g}", ylabel="|x|")
        line_plot(os.path.join(out, "states.svg"),
                  [("x1", traj.t, traj.states[:, 0]), ("x2", traj.t, traj.states[:, 1])],
                  title=f"{mode}-loop states, A={ocfg.A:g}", ylabel="state")
        if env_rep is not None:
            rows = np.array([r[:3] for r in env_rep.rows])
            line_plot(os.path.join(out, "envelope.svg"),
                      [("|x(t)|", rows[:, 0], rows[:, 1]), ("envelope", rows[:, 0], rows[:, 2])],
                      title="LiISS envelope", ylabel="norm")
    return _summary(ecfg, traj, reports, extra)


def _run_pde(ecfg, system: dict, out: str, plots: bool) -> dict:
    from .pde_example import l2_dissipation_check, simulate, write_norm_series, write_snapshots

    pcfg = cfgmod.build_pde(system)
    traj = simulate(pcfg)
    write_norm_series(_strided(traj, ecfg.stride), os.path.join(out, "trajectory.csv"))
    write_snapshots(traj, os.path.join(out, "snapshots"))
    reports = [pcfg.growth_check()]
    xi = traj.meta["xi"]
    unforced = all(np.all(np.asarray(pcfg.u(xi, t)) == 0) for t in np.linspace(0.0, pcfg.T, 11))
    if unforced and not traj.blew_up:
        reports.append(l2_dissipation_check(traj, pcfg))
    extra = {"steps": traj.meta["steps"], "halvings": traj.meta["halvings"], "a_min": pcfg.a_min,
             "c_min": pcfg.c_min, "domain": [pcfg.xi_min, pcfg.xi_max]}
    if plots:
        from .plots import line_plot

        line_plot(os.path.join(out, "norm.svg"), [("|x(t)|_2", traj.t, traj.norm)],
                  title=f"PDE L2 norm, A1={system['A1']:g}", ylabel="L2 norm")
        snaps = sorted(traj.meta["snapshots"].items())
        line_plot(os.path.join(out, "snapshots.svg"), [(f"t={t:g}", xi, v) for t, v in snaps],
                  title="PDE snapshots", xlabel="xi", ylabel="x(xi, t)")
    return _summary(ecfg, traj, reports, extra)


def _summary(ecfg, traj: Trajectory, reports, extra: dict) -> dict:
    violations, worst = _merge_checks(reports)
    out = {"kind": ecfg.kind, "final_norm": traj.final_norm, "sup_norm": traj.sup_norm,
           "blow_up_time": traj.blow_up_time, "final_time": float(traj.t[-1]),
           "violations": violations, "worst_margin": worst,
           "checks": [r.summary() for r in reports]}
    out.update(extra)
    return out


def run_single(text: str, amplitude, out: str, plots: bool, seed: int) -> tuple:
    """Run one configuration (one sweep entry) and write its files under ``out``.

    Takes the raw configuration text so that it can execute in a worker process.
    Returns ``(summary, t, norm)``.
    """
    ecfg = cfgmod.load_text(text)
    system = dict(ecfg.system)
    if amplitude is not None:
        system[ecfg.amplitude_key()] = amplitude
    os.makedirs(out, exist_ok=True)
    if ecfg.kind == "pde":
        summary = _run_pde(ecfg, system, out, plots)
    else:
        summary = _run_ode(ecfg, system, out, plots)
    summary["amplitude"] = float(system[ecfg.amplitude_key()])
    summary["mirrors_figure"] = ecfg.mirrors_figure
    summary["seed"] = seed
    echo = dict(ecfg.raw)
    echo["system"] = system
    echo.pop("sweep", None)
    summary["config_echo"] = echo
    write_json(os.path.join(out, "summary.json"), summary)
    data = np.loadtxt(os.path.join(out, "trajectory.csv"), delimiter=",", skiprows=1, ndmin=2)
    norm_col = -2 if ecfg.kind != "pde" else 1
    return summary, data[:, 0], data[:, norm_col]


def _sweep(ecfg, out: str, plots: bool, seed: int, jobs: int) -> int:
    key = ecfg.amplitude_key()
    dirs = [os.path.join(out, f"{key}_{a:g}") for a in ecfg.sweep]
    args = [(ecfg.text, a, d, plots, seed) for a, d in zip(ecfg.sweep, dirs)]
    workers = max(1, min(jobs, len(args)))
    if workers == 1:
        results = [run_single(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_single, *a) for a in args]
            results = [f.result() for f in futures]
    runs = [r[0] for r in results]
    margins = [r["worst_margin"] for r in runs if r["worst_margin"] is not None]
    merged = {"kind": ecfg.kind, "mirrors_figure": ecfg.mirrors_figure, "sweep_key": key,
              "amplitudes": ecfg.sweep, "run_dirs": [os.path.basename(d) for d in dirs],
              "final_norm": [r["final_norm"] for r in runs], "sup_norm": [r["sup_norm"] for r in runs],
              "blow_up_time": [r["blow_up_time"] for r in runs],
              "violations": sum(r["violations"] for r in runs),
              "worst_margin": min(margins) if margins else None, "seed": seed,
              "config_echo": ecfg.raw}
    write_json(os.path.join(out, "summary.json"), merged)
    if plots:
        from .plots import line_plot

        line_plot(os.path.join(out, "norm_sweep.svg"),
                  [(f"{key}={a:g}", t, n) for a, (_, t, n) in zip(ecfg.sweep, results)],
                  title=f"norm for {key} in {ecfg.sweep}", ylabel="norm")
    return EXIT_VERIFY if merged["violations"] else EXIT_OK


def _beta_table(alpha: str, g: str, s_grid: str, t_grid: str):
    beta, (s0, s1, ns), (t0, t1, nt) = cfgmod.build_beta(
        {"alpha": alpha, "g": g, "s_grid": s_grid, "t_grid": t_grid})
    s = np.linspace(s0, s1, ns)
    t = np.linspace(t0, t1, nt)
    return s, t, beta.table(s, t)


def _write_beta_csv(fh, s, t, table):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["s", *(f"t={fmt17(v)}" for v in t)])
    for i, sv in enumerate(s):
        w.writerow([fmt17(sv), *(fmt17(v) for v in table[i])])


def _run_beta(ecfg, out: str, plots: bool, seed: int) -> int:
    from .comparison import verify_kl_table

    sy = ecfg.system
    s, t, table = _beta_table(sy["alpha"], sy["g"], sy["s_grid"], sy["t_grid"])
    with open(os.path.join(out, "beta.csv"), "w", newline="") as fh:
        _write_beta_csv(fh, s, t, table)
    rep = verify_kl_table(table, s, t)
    summary = {"kind": ecfg.kind, "mirrors_figure": ecfg.mirrors_figure, "final_norm": None,
               "sup_norm": float(np.max(table)), "blow_up_time": None, "violations": len(rep.violations),
               "worst_margin": None if math.isinf(rep.worst_margin) else rep.worst_margin,
               "checks": [rep.summary()], "seed": seed, "config_echo": ecfg.raw}
    write_json(os.path.join(out, "summary.json"), summary)
    if plots:
        from .plots import line_plot

        pick = np.unique(np.linspace(0, s.size - 1, min(8, s.size)).astype(int))
        line_plot(os.path.join(out, "beta.svg"), [(f"s={s[i]:.4g}", t, table[i]) for i in pick],
                  title="KL bound beta(s, t)", ylabel="beta")
    return EXIT_VERIFY if rep.violations else EXIT_OK


def _run_verify_suite(ecfg, out: str, seed: int) -> int:
    from .acceptance import run_all

    results = run_all(seed=seed, echo=lambda r: print(r.line(), flush=True))
    lines = [r.line() for r in results]
    with open(os.path.join(out, "verify.txt"), "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    failed = [r.number for r in results if not r.passed]
    write_json(os.path.join(out, "summary.json"),
               {"kind": ecfg.kind, "mirrors_figure": ecfg.mirrors_figure, "final_norm": None,
                "sup_norm": None, "blow_up_time": None, "violations": len(failed), "worst_margin": None,
                "failed_criteria": failed, "seed": seed, "config_echo": ecfg.raw})
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_run(args) -> int:
    ecfg = cfgmod.load(args.config)
    stem = os.path.splitext(os.path.basename(args.config))[0]
    out = args.out or ecfg.out_dir or os.path.join("liiss_out", stem)
    os.makedirs(out, exist_ok=True)
    plots = ecfg.plots and not args.no_plots
    if ecfg.kind == "verify_suite":
        return _run_verify_suite(ecfg, out, args.seed)
    if ecfg.kind == "beta_table":
        return _run_beta(ecfg, out, plots, args.seed)
    if ecfg.sweep:
        code = _sweep(ecfg, out, plots, args.seed, args.jobs)
    else:
        summary = run_single(ecfg.text, None, out, plots, args.seed)[0]
        code = EXIT_VERIFY if summary["violations"] else EXIT_OK
    print(f"wrote {out}")
    return code


def _parse_override(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"--override expects KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise ConfigError(f"--override value for {key!r} must be a number, got {value!r}") from None


def cmd_verify(args) -> int:
    from .acceptance import TITLES, run_all

    overrides = dict(_parse_override(o) for o in args.override)
    only = None
    if args.only:
        try:
            only = [int(v) for v in args.only.split(",")]
        except ValueError:
            raise ConfigError(f"--only expects comma separated criterion numbers, got {args.only!r}") from None
        bad = [n for n in only if n not in TITLES]
        if bad:
            raise ConfigError(f"unknown criterion number(s): {bad}")
    try:
        results = run_all(seed=args.seed, only=only, overrides=overrides,
                          echo=lambda r: print(r.line(args.timings), flush=True))
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    failed = [r.number for r in results if not r.passed]
    if failed:
        print(f"FAILED criteria: {', '.join(str(n) for n in failed)}")
        return EXIT_VERIFY
    print(f"all {len(results)} criteria passed")
    return EXIT_OK


def cmd_beta(args) -> int:
    s, t, table = _beta_table(args.alpha, args.g, args.s_grid, args.t_grid)
    _write_beta_csv(sys.stdout, s, t, table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liiss", description="Local integral ISS numerical laboratory.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a JSON experiment configuration")
    r.add_argument("config", help="path to the configuration file")
    r.add_argument("--out", help="output directory (default: outputs.dir or liiss_out/<name>)")
    r.add_argument("--no-plots", action="store_true", help="skip SVG plots")
    r.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default 0x5EED)")
    r.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1),
                   help="worker processes for sweeps")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--only", help="comma separated criterion numbers")
    v.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default 0x5EED)")
    v.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="replace a threshold, e.g. c5.final=1e-12 (test hook)")
    v.add_argument("--timings", action="store_true", help="append wall-clock seconds to each line")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("beta", help="print a KL bound table as CSV")
    b.add_argument("--alpha", required=True, help="class-K rate alpha(s), e.g. 's^2'")
    b.add_argument("--g", required=True, help="nonnegative gain g(t), e.g. '5/(1+t)'")
    b.add_argument("--s-grid", required=True, help="a:b:n")
    b.add_argument("--t-grid", required=True, help="a:b:n")
    b.set_defaults(func=cmd_beta)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"liiss: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"liiss: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvariantViolation, OutOfRegion, LiissError) as exc:
        print(f"liiss: invalid input ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
