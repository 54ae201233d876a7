"""Command-line front end.

Every subcommand follows the same contract: resolve a config (TOML
file, a previous run's ``manifest.json``, or built-in defaults), run
the scenario, write CSV artifacts plus an SVG summary into the output
directory, and drop a ``manifest.json`` that reproduces the run byte
for byte.  Exit codes: 0 success, 2 config problem, 3 scenario failure
(non-convergence, dynamic-range loss), 4 I/O.  Errors go to stderr as
one JSON object so callers never have to scrape prose.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from spinbayes import __version__
from spinbayes.artifacts import RunManifest, save_figure, write_csv
from spinbayes.clock import (
    ClockConfig,
    allan_deviation,
    pooled_deviation,
    run_clock,
    theoretical_adev,
)
from spinbayes.collective_spin import (
    OatParams,
    SqueezedStateModel,
    exact_optimal_twist_time,
    optimal_rotation_angle,
)
from spinbayes.config import parse_config, resolve_options
from spinbayes.errors import ConfigError, ScenarioError
from spinbayes.fringe import FringeConfig, fit_sine, fringe_grid, precision_vs_squeezing, simulate_fringe
from spinbayes.gravimetry import (
    RAMAN_K_EFF,
    GravimetryConfig,
    PhaseModel,
    build_schedule,
    run_gravimetry,
)
from spinbayes.noise import (
    NoiseSpec,
    fit_psd_slope,
    flicker_noise,
    make_rng,
    periodogram,
    random_walk_noise,
    split_streams,
    white_noise,
)
from spinbayes.session import SessionConfig, run_batch, sweep_imperfection

import matplotlib.pyplot as plt  # backend pinned to Agg by spinbayes.artifacts

OUT_ENV = "SPINBAYES_OUT"

_HELP = {
    "phase": "single-phase estimation, ideal and reshaped update streams",
    "sweep": "final precision versus a preparation imperfection",
    "gravimetry": "adaptive-T gravimeter run with precision-vs-time curve",
    "clock": "LO lock cycles and Allan deviation, squeezed vs coherent",
    "fringe": "conventional fringe scan and fit precision vs squeezing",
    "noise-check": "colored-noise generators against their target spectra",
}


def _noise_spec(cfg: dict[str, Any]) -> NoiseSpec:
    n = cfg["noise"]
    return NoiseSpec(
        p_d=n["p_d"], sigma_w=n["sigma_w"], sigma_f=n["sigma_f"], sigma_r=n["sigma_r"]
    )


def _map_ordered(fn: Callable, items: Sequence, threads: int | None) -> list:
    """Apply fn over items, optionally threaded, always in input order."""
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _emit(out: Path, name: str, header: Sequence[str], rows, outputs: list[str]) -> None:
    write_csv(out / name, header, rows)
    outputs.append(name)


# --------------------------------------------------------------------------
# runners; each returns the artifact names it wrote, in write order


def _run_phase(cfg: dict, out: Path, threads: int | None, svg: bool) -> list[str]:
    state = SqueezedStateModel.from_xi(cfg["n_atoms"], cfg["xi"], cfg["contrast"])
    noise = _noise_spec(cfg)
    outputs: list[str] = []
    steps = np.arange(1, cfg["n_steps"] + 1)
    curves = {}
    for lane, reshaped in (("ideal", False), ("reshaped", True)):
        scfg = SessionConfig(
            state=state,
            true_phi=cfg["true_phi"],
            n_steps=cfg["n_steps"],
            noise=noise,
            reshaped=reshaped,
            seed=cfg["seed"],
            grid_nodes=cfg["grid_nodes"],
        )
        batch = run_batch(scfg, cfg["trials"], threads=threads)
        rec = batch.records[0]
        _emit(
            out,
            f"phase_{lane}_steps.csv",
            ("l", "Phi", "m_z", "phi_est", "sigma_phi"),
            zip(steps.tolist(), rec.Phi, rec.m_z, rec.phi_est, rec.sigma_phi),
            outputs,
        )
        _emit(
            out,
            f"phase_{lane}_batch.csv",
            ("l", "mean_sigma", "err_mean", "err_std"),
            zip(steps.tolist(), batch.sigma_mean, batch.err_mean, batch.err_std),
            outputs,
        )
        curves[lane] = batch.sigma_mean
        print(f"phase [{lane}]: sigma after {cfg['n_steps']} steps = {batch.sigma_mean[-1]:.4e} rad")
    if svg:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.loglog(steps, curves["ideal"], label="ideal stream")
        ax.loglog(steps, curves["reshaped"], label="reshaped stream")
        ax.loglog(
            steps,
            1.0 / np.sqrt(cfg["n_atoms"] * steps),
            "k--",
            lw=0.8,
            label="projection-noise scaling",
        )
        ax.set_xlabel("measurement step l")
        ax.set_ylabel("posterior width [rad]")
        ax.legend(frameon=False, fontsize=8)
        save_figure(fig, out / "phase.svg")
        outputs.append("phase.svg")
    return outputs


_SWEEP_DEFAULTS = {
    "alpha_error": np.linspace(-0.2, 0.2, 9),
    "t_error": np.linspace(-0.25, 0.25, 9),
}


def _run_sweep(cfg: dict, out: Path, threads: int | None, svg: bool) -> list[str]:
    n = cfg["n_atoms"]
    chi_t = cfg["chi_t"] if cfg["chi_t"] is not None else exact_optimal_twist_time(n, 1.0)
    cfg["chi_t"] = float(chi_t)
    values = cfg["values"] if cfg["values"] is not None else _SWEEP_DEFAULTS[cfg["kind"]]
    cfg["values"] = [float(v) for v in values]
    scfg = SessionConfig(
        state=OatParams(n, chi_t, optimal_rotation_angle(n, chi_t)),
        true_phi=cfg["true_phi"],
        n_steps=cfg["n_steps"],
        noise=_noise_spec(cfg),
        seed=cfg["seed"],
        grid_nodes=cfg["grid_nodes"],
    )
    rows = sweep_imperfection(
        scfg, cfg["kind"], cfg["values"], repetitions=cfg["trials"], threads=threads
    )
    outputs: list[str] = []
    _emit(out, "sweep.csv", ("value", "precision"), rows, outputs)
    best = min(rows, key=lambda r: r[1])
    print(f"sweep [{cfg['kind']}]: best precision {best[1]:.4e} rad at value {best[0]:+.3f}")
    if svg:
        vals = [r[0] for r in rows]
        prec = [r[1] for r in rows]
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.plot(vals, prec, "o-", ms=3.5)
        ax.axvline(0.0, color="k", lw=0.6, ls=":")
        ax.axhline(1.0 / math.sqrt(n), color="k", lw=0.8, ls="--", label="coherent limit")
        ax.set_xlabel(f"relative {cfg['kind'].replace('_', ' ')}")
        ax.set_ylabel("median posterior width [rad]")
        ax.set_yscale("log")
        ax.legend(frameon=False, fontsize=8)
        save_figure(fig, out / "sweep.svg")
        outputs.append("sweep.svg")
    return outputs


def _gravimetry_state(cfg: dict) -> SqueezedStateModel:
    n, contrast = cfg["n_atoms"], cfg["contrast"]
    if cfg["chi_t"] is not None:
        p = OatParams(n, cfg["chi_t"], optimal_rotation_angle(n, cfg["chi_t"]))
        return SqueezedStateModel.from_oat(p, contrast)
    if cfg["xi"] is None:
        cfg["xi"] = 0.15  # headline squeezing of the desk-scale scenario
    return SqueezedStateModel.from_xi(n, cfg["xi"], contrast)


def _run_gravimetry(cfg: dict, out: Path, threads: int | None, svg: bool) -> list[str]:
    gcfg = GravimetryConfig(
        state=_gravimetry_state(cfg),
        schedule=build_schedule(cfg["T_max"], cfg["a"], cfg["M_a"], cfg["M"]),
        true_g=cfg["true_g"],
        g_prior=cfg["g_prior"],
        phase_model=PhaseModel.gravimetry(cfg["k_eff"]),
        noise=_noise_spec(cfg),
        reshaped=cfg["reshaped"],
        seed=cfg["seed"],
        grid_nodes=cfg["grid_nodes"],
        zoom_width=cfg["zoom_width"],
    )
    curve = run_gravimetry(gcfg, cfg["trials"], threads=threads)
    outputs: list[str] = []
    _emit(
        out,
        "gravimetry.csv",
        ("step", "T_l", "total_T", "dg_theory", "dg_batch", "g_est_mean"),
        zip(
            curve.steps.tolist(),
            curve.times,
            curve.total_time,
            curve.dg_theory,
            curve.dg_batch,
            curve.g_est_mean,
        ),
        outputs,
    )
    print(
        f"gravimetry: dg = {curve.dg_batch[-1]:.4e} m/s^2 over {cfg['trials']} trials "
        f"(theory {curve.dg_theory[-1]:.4e}, {curve.resets} resets)"
    )
    if svg:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.loglog(curve.total_time, curve.dg_batch, "o", ms=3.5, label="across trials")
        ax.loglog(curve.total_time, curve.dg_theory, "-", lw=1.0, label="theory")
        ax.set_xlabel("accumulated interrogation time [s]")
        ax.set_ylabel("precision [m/s^2]")
        ax.legend(frameon=False, fontsize=8)
        save_figure(fig, out / "gravimetry.svg")
        outputs.append("gravimetry.svg")
    return outputs


def _run_clock(cfg: dict, out: Path, threads: int | None, svg: bool) -> list[str]:
    xi = 10.0 ** (cfg["xi_db"] / 20.0)
    states = {
        "sss": SqueezedStateModel.from_xi(cfg["n_atoms"], xi, cfg["contrast"]),
        "scs": SqueezedStateModel.coherent(cfg["n_atoms"], cfg["contrast"]),
    }
    schedule = build_schedule(cfg["T_max"], cfg["a"], cfg["M_a"], cfg["M"])
    noise = _noise_spec(cfg)
    cycles = cfg["cycles"]
    multiples = []
    m = 1
    while 2 * m <= cycles:
        multiples.append(m)
        m *= 2
    if not multiples:
        raise ConfigError("need at least 2 cycles for a deviation estimate")
    multiples = np.asarray(multiples)

    def one_run(job: tuple[str, int]):
        label, i = job
        return run_clock(
            ClockConfig(
                state=states[label],
                schedule=schedule,
                noise=noise,
                cycles=cycles,
                reshaped=cfg["reshaped"],
                seed=cfg["seed"] + i,
                grid_nodes=cfg["grid_nodes"],
                zoom_width=cfg["zoom_width"],
            )
        )

    jobs = [(label, i) for label in ("sss", "scs") for i in range(cfg["trials"])]
    records = _map_ordered(one_run, jobs, threads)
    by_label = {
        "sss": records[: cfg["trials"]],
        "scs": records[cfg["trials"] :],
    }
    tau0 = by_label["sss"][0].cycle_duration
    taus = None
    adev = {}
    for label, recs in by_label.items():
        curves = []
        for rec in recs:
            taus, sigma = allan_deviation(rec.lo_tracking, tau0, multiples)
            curves.append(sigma)
        adev[label] = pooled_deviation(np.stack(curves))
    colors = ((0, noise.sigma_w), (1, noise.sigma_f), (2, noise.sigma_r))
    theory = np.sqrt(
        sum(theoretical_adev(beta, s, taus, tau0) ** 2 for beta, s in colors)
    )
    outputs: list[str] = []
    first = by_label["sss"][0]
    _emit(
        out,
        "clock_cycles.csv",
        ("cycle", "true_offset", "estimate", "residual"),
        zip(range(1, cycles + 1), first.true_offset, first.estimate, first.residual),
        outputs,
    )
    _emit(
        out,
        "clock_adev.csv",
        ("tau", "adev_sss", "adev_scs", "adev_theory"),
        zip(taus, adev["sss"], adev["scs"], theory),
        outputs,
    )
    print(
        f"clock: ADEV at tau = {tau0:.3f} s: squeezed {adev['sss'][0]:.4e}, "
        f"coherent {adev['scs'][0]:.4e}"
    )
    if svg:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.loglog(taus, adev["sss"], "o-", ms=3.5, label="squeezed")
        ax.loglog(taus, adev["scs"], "s-", ms=3.5, label="coherent")
        if np.any(theory > 0.0):
            ax.loglog(taus, theory, "k--", lw=0.8, label="free-running LO")
        ax.set_xlabel("averaging time tau [s]")
        ax.set_ylabel("overlapping Allan deviation [rad/s]")
        ax.legend(frameon=False, fontsize=8)
        save_figure(fig, out / "clock.svg")
        outputs.append("clock.svg")
    return outputs


def _run_fringe(cfg: dict, out: Path, threads: int | None, svg: bool) -> list[str]:
    fcfg = FringeConfig(
        n_atoms=cfg["n_atoms"],
        contrast=cfg["contrast"],
        T=cfg["T"],
        n_points=cfg["n_points"],
        shots=cfg["shots"],
        noise=_noise_spec(cfg),
        seed=cfg["seed"],
    )
    xis = cfg["xis"]
    # demo scan from the root stream; trial streams are spawned children
    grid = fringe_grid(fcfg.T, fcfg.n_points)
    sample = simulate_fringe(
        fcfg.state_for(xis[0]), fcfg.T, grid, fcfg.noise, rng=make_rng(cfg["seed"]),
        shots=fcfg.shots,
    )
    g_est, dg_fit = fit_sine(sample)
    outputs: list[str] = []
    _emit(out, "fringe_scan.csv", ("g", "P_e"), zip(sample.g_values, sample.p_e), outputs)
    points = precision_vs_squeezing(xis, fcfg, trials=cfg["trials"])
    _emit(
        out,
        "fringe_precision.csv",
        ("xi", "precision_mean", "precision_std"),
        [(p.xi, p.precision_mean, p.precision_std) for p in points],
        outputs,
    )
    print(f"fringe scan (xi = {xis[0]:g}): fit g = {g_est:+.4e} +/- {dg_fit:.4e} m/s^2")
    for p in points:
        print(
            f"fringe xi = {p.xi:g}: precision {p.precision_mean:.4e} "
            f"+/- {p.precision_std:.4e} m/s^2 ({p.failures} failed fits)"
        )
    if svg:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.2))
        theta = RAMAN_K_EFF * fcfg.T**2 * (np.asarray(sample.g_values) - g_est)
        design = np.column_stack([np.sin(theta), np.ones_like(theta)])
        coef, *_ = np.linalg.lstsq(design, sample.p_e, rcond=None)
        ax1.plot(sample.g_values, sample.p_e, ".", ms=3)
        ax1.plot(sample.g_values, design @ coef, "-", lw=1.0)
        ax1.set_xlabel("g [m/s^2]")
        ax1.set_ylabel("excited fraction")
        scan_sql = fcfg.sql_value() / math.sqrt(fcfg.total_shots)
        ax2.errorbar(
            [p.xi for p in points],
            [p.precision_mean for p in points],
            yerr=[p.precision_std for p in points],
            fmt="o",
            ms=3.5,
            capsize=2,
        )
        ax2.axhline(scan_sql, color="k", lw=0.8, ls="--", label="projection-noise limit")
        ax2.set_xscale("log")
        ax2.set_yscale("log")
        ax2.set_xlabel("squeezing xi")
        ax2.set_ylabel("fit precision [m/s^2]")
        ax2.legend(frameon=False, fontsize=8)
        save_figure(fig, out / "fringe.svg")
        outputs.append("fringe.svg")
    return outputs


def _run_noise_check(cfg: dict, out: Path, threads: int | None, svg: bool) -> list[str]:
    n, tau0, strength = cfg["n"], cfg["tau0"], cfg["strength"]
    streams = split_streams(cfg["seed"], 3)
    expected = {"white": 0.0, "flicker": 1.0, "random_walk": 2.0}
    series = {
        "white": white_noise(n, strength, streams[0], tau0),
        "flicker": flicker_noise(n, strength, streams[1], tau0),
        "random_walk": random_walk_noise(n, strength, streams[2], tau0),
    }
    outputs: list[str] = []
    _emit(
        out,
        "noise_series.csv",
        ("index", "white", "flicker", "random_walk"),
        zip(
            range(n),
            series["white"].samples,
            series["flicker"].samples,
            series["random_walk"].samples,
        ),
        outputs,
    )
    psd_rows: list[tuple] = []
    spectra = {}
    for name, ser in series.items():
        freqs, power = periodogram(ser)
        spectra[name] = (freqs, power)
        psd_rows.extend((f, p, name) for f, p in zip(freqs, power))
    _emit(out, "noise_psd.csv", ("frequency", "power", "color"), psd_rows, outputs)
    for name, spectrum in spectra.items():
        slope = fit_psd_slope(spectrum)
        print(f"{name}: fitted PSD slope {slope:.3f} (expected {expected[name]:.0f})")
    if svg:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for name, (freqs, power) in spectra.items():
            ax.loglog(freqs, power, lw=0.9, label=name.replace("_", " "))
        ax.set_xlabel("frequency [1/tau0]")
        ax.set_ylabel("power spectral density")
        ax.legend(frameon=False, fontsize=8)
        save_figure(fig, out / "noise.svg")
        outputs.append("noise.svg")
    return outputs


_RUNNERS: dict[str, Callable[[dict, Path, int | None, bool], list[str]]] = {
    "phase": _run_phase,
    "sweep": _run_sweep,
    "gravimetry": _run_gravimetry,
    "clock": _run_clock,
    "fringe": _run_fringe,
    "noise-check": _run_noise_check,
}


# --------------------------------------------------------------------------
# argument parsing and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinbayes",
        description="adaptive Bayesian interferometry with squeezed atomic states",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    for name, help_text in _HELP.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", type=Path, default=None, metavar="PATH",
                        help="TOML config, or a previous run's manifest.json")
        sp.add_argument("--out", type=Path, default=None, metavar="DIR",
                        help=f"output directory (default ${OUT_ENV} or ./spinbayes-runs)")
        sp.add_argument("--seed", type=int, default=None,
                        help="RNG seed; overrides the config value")
        if name != "noise-check":
            sp.add_argument("--trials", type=int, default=None,
                            help="independent repetitions; overrides the config value")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads for across-trial parallelism")
        sp.add_argument("--no-svg", action="store_true", help="skip figure output")
    return parser


def _out_dir(args: argparse.Namespace) -> Path:
    if args.out is not None:
        root = args.out
    else:
        env = os.environ.get(OUT_ENV)
        root = (Path(env) if env else Path("spinbayes-runs")) / args.subcommand
    root.mkdir(parents=True, exist_ok=True)
    return root


def _fail(kind: str, exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            try:
                cfg = parse_config(args.config, args.subcommand)
            except FileNotFoundError as exc:
                raise ConfigError(f"config file not found: {exc.filename}") from exc
        else:
            cfg = resolve_options(args.subcommand, {})
        if getattr(args, "trials", None) is not None:
            cfg["trials"] = args.trials
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None:
            raise ConfigError("no RNG seed: pass --seed or set 'seed' in the config")
        cfg["seed"] = int(seed)
        out = _out_dir(args)
        start = time.perf_counter()
        outputs = _RUNNERS[args.subcommand](cfg, out, args.threads, not args.no_svg)
        RunManifest(
            subcommand=args.subcommand,
            config=cfg,
            seed=cfg["seed"],
            version=__version__,
            outputs=tuple(outputs),
            duration_s=time.perf_counter() - start,
        ).write(out / "manifest.json")
        print(f"wrote {len(outputs)} artifact(s) + manifest.json under {out}")
        return 0
    except ConfigError as exc:
        return _fail("config", exc, 2)
    except ScenarioError as exc:
        return _fail("scenario", exc, 3)
    except OSError as exc:
        return _fail("io", exc, 4)


if __name__ == "__main__":
    raise SystemExit(main())
