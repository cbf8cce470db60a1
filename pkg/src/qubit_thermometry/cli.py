"""Command-line driver: trajectories, parameter sweeps, figure pipelines.

Subcommands
-----------
trajectory          integrate one scenario and write trajectory.csv
sweep-alpha         witness (and optionally Fisher) quantities per mixing value
sweep-temperature   Fisher quantities per bath temperature
dump-kernels        write the six kernels on the time grid
reproduce           canonical fig1 | fig2 | fig3 pipelines (CSV + SVG)

Configuration is a flat key=value text file (``--config``) plus per-parameter
command-line overrides; all floats are written with 17 significant digits so
runs are byte-reproducible.  Sweep points are independent tasks executed by a
process pool (``--workers``); outputs are assembled in sweep order and do not
depend on the worker count.
"""

from __future__ import annotations

import argparse
import math
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .dynamics import ProbeConfig, integrate, kernels_for
from .errors import ConfigurationError
from .kernels import QuadratureConfig, precompute
from .metrology import (
    StencilConfig,
    loglog_slope,
    markov_comparator,
    metrology_scan,
    stencil_kernel_sets,
)
from .spectral import SpectralDensity
from .svg import LinePlot
from .witness import coherence, non_markovianity, steady_coherence

__all__ = ["RunConfig", "main"]


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; defaults reproduce the headline scenario
    (T = 0.2 omega_c, eps = 0.5 omega_c, eta = 0.05, alpha = 1/2)."""

    epsilon: float = 0.5
    temperature: float = 0.2
    eta: float = 0.05
    omega_c: float = 1.0
    alpha: float = 0.5
    t_end: float = 50.0
    dt: float = 0.01
    alpha_min: float = 0.0
    alpha_max: float = 1.0
    alpha_count: int = 21
    temp_min: float = 0.01
    temp_max: float = 0.5
    temp_count: int = 15
    temp_log: bool = True
    times: tuple = (1.0, 5.0, 20.0, 50.0)
    window_frac: float = 0.2
    conv_tol: float = 1e-4
    rise_tol: float = 1e-10
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    omega_max_factor: float = 60.0
    panels_per_oscillation: int = 4
    resonance_guard: float = 1e-4
    delta_rel: float = 1e-7
    slope_fit_tmax: float = 0.05
    out_dir: str = "."
    workers: int = 1
    emit_svg: bool = False

    def __post_init__(self):
        if self.alpha_count < 1 or self.temp_count < 1:
            raise ConfigurationError("sweep counts must be >= 1")
        if self.alpha_count > 1 and not (self.alpha_min < self.alpha_max):
            raise ConfigurationError("alpha sweep range must be strictly increasing")
        if self.temp_count > 1 and not (self.temp_min < self.temp_max):
            raise ConfigurationError("temperature sweep range must be strictly increasing")
        delta = self.delta_rel * self.temp_min
        if self.temp_count and not (self.temp_min > 2.0 * delta / (1.0 - 2.0 * self.delta_rel)):
            raise ConfigurationError("temp_min too small: stencil shifts not positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @property
    def sd(self) -> SpectralDensity:
        return SpectralDensity(eta=self.eta, omega_c=self.omega_c)

    @property
    def quad(self) -> QuadratureConfig:
        return QuadratureConfig(
            rel_tol=self.rel_tol, abs_tol=self.abs_tol,
            omega_max_factor=self.omega_max_factor,
            panels_per_oscillation=self.panels_per_oscillation,
            resonance_guard=self.resonance_guard)

    @property
    def stencil(self) -> StencilConfig:
        return StencilConfig(delta_rel=self.delta_rel)

    def probe(self, alpha=None, T=None) -> ProbeConfig:
        return ProbeConfig(
            epsilon=self.epsilon,
            alpha=self.alpha if alpha is None else alpha,
            T=self.temperature if T is None else T,
            sd=self.sd, t_end=self.t_end, dt=self.dt)

    def alphas(self) -> np.ndarray:
        if self.alpha_count == 1:
            return np.array([self.alpha_min])
        return np.linspace(self.alpha_min, self.alpha_max, self.alpha_count)

    def temperatures(self) -> np.ndarray:
        if self.temp_count == 1:
            return np.array([self.temp_min])
        if self.temp_log:
            return np.geomspace(self.temp_min, self.temp_max, self.temp_count)
        return np.linspace(self.temp_min, self.temp_max, self.temp_count)


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _parse_value(name: str, kind, raw: str):
    if kind is bool:
        word = raw.strip().lower()
        if word not in _BOOL_WORDS:
            raise ConfigurationError(f"bad boolean for {name}: {raw!r}")
        return _BOOL_WORDS[word]
    if kind is tuple:
        raw = raw.strip()
        if not raw:
            return ()
        return tuple(float(v) for v in raw.split(","))
    return kind(raw)


def load_config(path: str, overrides: dict = None) -> RunConfig:
    """Flat key=value file; '#' starts a comment; later keys win."""
    kinds = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}
    values = {}
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"{path}:{lineno}: expected key=value")
                key, raw = (s.strip() for s in line.split("=", 1))
                if key not in kinds:
                    raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    values[key] = _parse_value(key, kinds[key], raw)
                except ValueError as exc:
                    raise ConfigurationError(f"{path}:{lineno}: {exc}") from exc
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    return RunConfig(**values)


def _g17(v) -> str:
    return f"{float(v):.17g}"


def _write_csv(path, header, rows, footer_lines=()):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")
        for line in footer_lines:
            fh.write(line + "\n")


def _check_times(cfg: RunConfig):
    times = tuple(t for t in cfg.times if t <= cfg.t_end + 1e-9)
    for t in times:
        i = round(t / cfg.dt)
        if abs(i * cfg.dt - t) > 1e-9 * max(1.0, t):
            raise ConfigurationError(f"probing time {t} is not on the dt={cfg.dt} grid")
    return times


# ----------------------------------------------------------------------------
# sweep tasks; the context travels through a module global so that forked
# pool workers inherit the (potentially large) kernel sets without pickling
# them per task

_CTX = {}


def _alpha_task(i: int):
    cfg: RunConfig = _CTX["cfg"]
    alpha = float(cfg.alphas()[i])
    probe = cfg.probe(alpha=alpha)
    traj = integrate(probe, _CTX["base_ks"])
    C = coherence(traj)
    n_c = non_markovianity(C, rise_tol=cfg.rise_tol)
    if _CTX["with_steady"]:
        steady, conv = steady_coherence(traj, cfg.window_frac, cfg.conv_tol)
    else:
        steady, conv = math.nan, False
    row = [alpha, n_c, steady, int(conv)]
    if _CTX["times"]:
        results = metrology_scan(probe, _CTX["times"], cfg.stencil, cfg.quad,
                                 sk=_CTX["sk"])
        row.extend(r.qfi for r in results)
    return i, row


def _temp_task(i: int):
    cfg: RunConfig = _CTX["cfg"]
    T = float(cfg.temperatures()[i])
    probe = cfg.probe(T=T)
    results = metrology_scan(probe, _CTX["times"], cfg.stencil, cfg.quad)
    return i, [[r.t, r.T, r.alpha, r.qfi, r.cfi_x, r.cfi_z, r.qcrb, r.markov_fisher]
               for r in results]


def _run_tasks(task, count: int, workers: int):
    # forked workers inherit _CTX; without fork semantics stay sequential
    use_pool = (workers > 1 and count > 1
                and multiprocessing.get_start_method(allow_none=True) in (None, "fork"))
    if not use_pool:
        results = [task(i) for i in range(count)]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, count)) as pool:
            results = list(pool.map(task, range(count)))
    return [row for _, row in sorted(results, key=lambda r: r[0])]


# ----------------------------------------------------------------------------
# subcommands

def cmd_trajectory(cfg: RunConfig) -> int:
    probe = cfg.probe()
    ks = kernels_for(probe, cfg.quad, workers=cfg.workers)
    traj = integrate(probe, ks)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "trajectory.csv")
    traj.to_csv(path)
    print(f"wrote {path}")
    if cfg.emit_svg:
        C = coherence(traj)
        plot = LinePlot(title=f"probe trajectory (alpha={cfg.alpha:g})",
                        xlabel="t [1/omega_c]", ylabel="Bloch components")
        plot.add(traj.grid, traj.dx, label="Dx")
        plot.add(traj.grid, traj.dy, label="Dy")
        plot.add(traj.grid, traj.dz, label="Dz")
        plot.add(traj.grid, C, label="C(t)")
        p1 = os.path.join(cfg.out_dir, "trajectory.svg")
        plot.write(p1)
        eq = LinePlot(title="equatorial plane", xlabel="Dx", ylabel="Dy")
        eq.add(traj.dx, traj.dy, label=f"alpha={cfg.alpha:g}")
        p2 = os.path.join(cfg.out_dir, "trajectory_equator.svg")
        eq.write(p2)
        print(f"wrote {p1}\nwrote {p2}")
    return 0


def cmd_dump_kernels(cfg: RunConfig) -> int:
    params = cfg.probe().kernel_params
    ks = precompute(params, cfg.t_end, cfg.dt, cfg.quad, workers=cfg.workers)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "kernels.csv")
    ks.to_csv(path)
    print(f"wrote {path}")
    return 0


def _steady_window_ok(cfg: RunConfig) -> bool:
    if cfg.epsilon > 0.0:
        period = 2.0 * math.pi / cfg.epsilon
        return cfg.window_frac * cfg.t_end >= 10.0 * period
    return True


def cmd_sweep_alpha(cfg: RunConfig, tag="sweep_alpha", base_ks=None) -> int:
    times = _check_times(cfg)
    probe0 = cfg.probe(alpha=0.0)
    if base_ks is None:
        base_ks = kernels_for(probe0, cfg.quad, workers=cfg.workers)
    sk = None
    if times:
        sk = stencil_kernel_sets(probe0, cfg.stencil, cfg.quad, base=base_ks)
    _CTX.update(cfg=cfg, base_ks=base_ks, sk=sk, times=times,
                with_steady=_steady_window_ok(cfg))
    rows = _run_tasks(_alpha_task, len(cfg.alphas()), cfg.workers)
    header = "alpha,N_C,steady_dx_abs,converged"
    header += "".join(f",qfi_t_{t:g}" for t in times)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"{tag}.csv")
    _write_csv(path, header,
               [",".join([_g17(v) if not isinstance(v, int) else str(v) for v in row])
                for row in rows])
    print(f"wrote {path}")
    if cfg.emit_svg:
        alphas = cfg.alphas()
        cols = list(zip(*rows))
        plot = LinePlot(title="witness quantities vs mixing", xlabel="alpha")
        plot.add(alphas, cols[1], label="N_C")
        plot.add(alphas, cols[2], label="|Dx(inf)|", dashed=True)
        p = os.path.join(cfg.out_dir, f"{tag}_witness.svg")
        plot.write(p)
        if times:
            qplot = LinePlot(title="QFI vs mixing", xlabel="alpha", ylabel="F_Q")
            for j, t in enumerate(times):
                qplot.add(alphas, cols[4 + j], label=f"t={t:g}")
            pq = os.path.join(cfg.out_dir, f"{tag}_qfi.svg")
            qplot.write(pq)
            print(f"wrote {pq}")
        print(f"wrote {p}")
    return 0


def cmd_sweep_temperature(cfg: RunConfig, tag="sweep_temperature") -> int:
    times = _check_times(cfg)
    if not times:
        raise ConfigurationError("temperature sweep needs at least one probing time")
    _CTX.update(cfg=cfg, times=times)
    groups = _run_tasks(_temp_task, len(cfg.temperatures()), cfg.workers)
    rows = [row for group in groups for row in group]
    footer = []
    temps = cfg.temperatures()
    t0 = min(times)
    fit_T = [T for T in temps if T <= cfg.slope_fit_tmax]
    fit_F = [row[3] for row in rows if row[0] == t0 and row[1] <= cfg.slope_fit_tmax]
    if len(fit_T) >= 2 and all(f > 0 for f in fit_F):
        slope = loglog_slope(fit_T, fit_F)
        footer.append(f"# low_T_slope_qfi = {slope:.6g} "
                      f"(log-log fit at t={t0:g} over T <= {cfg.slope_fit_tmax:g})")
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"{tag}.csv")
    _write_csv(path, "t,T,alpha,qfi,cfi_x,cfi_z,qcrb,markov_fisher",
               [",".join(_g17(v) for v in row) for row in rows], footer)
    print(f"wrote {path}")
    if cfg.emit_svg:
        qplot = LinePlot(title="QFI vs temperature", xlabel="T [omega_c]",
                         ylabel="F_Q", xlog=True, ylog=True)
        for t in times:
            sel = [(row[1], row[3]) for row in rows if row[0] == t and row[3] > 0]
            if sel:
                qplot.add(*zip(*sel), label=f"t={t:g}")
        if any(row[3] > 0 for row in rows):
            ref_F = next(row[3] for row in rows if row[0] == t0 and row[3] > 0)
            ref_T = next(row[1] for row in rows if row[0] == t0 and row[3] > 0)
            qplot.add(temps, [ref_F * (T / ref_T) ** 2 for T in temps],
                      label="T^2 guide", dashed=True)
        qplot.add(temps, [markov_comparator(cfg.epsilon, T)[0] for T in temps],
                  label="Born-Markov", dashed=True)
        p = os.path.join(cfg.out_dir, f"{tag}_qfi.svg")
        qplot.write(p)
        mplot = LinePlot(title="measurement Fisher information",
                         xlabel="T [omega_c]", ylabel="F_C", xlog=True, ylog=True)
        for t in times:
            selx = [(row[1], row[4]) for row in rows if row[0] == t and row[4] > 0]
            selz = [(row[1], row[5]) for row in rows if row[0] == t and row[5] > 0]
            if selx:
                mplot.add(*zip(*selx), label=f"sx t={t:g}")
            if selz:
                mplot.add(*zip(*selz), label=f"sz t={t:g}", dashed=True)
        p2 = os.path.join(cfg.out_dir, f"{tag}_measurements.svg")
        mplot.write(p2)
        print(f"wrote {p}\nwrote {p2}")
    return 0


def cmd_reproduce(cfg: RunConfig, which: str) -> int:
    if which == "fig1":
        # coherence trapping and re-coherence vs mixing; long horizon so the
        # trailing window holds >= 10 precession periods
        fig_cfg = replace(cfg, t_end=200.0, window_frac=0.65, times=(),
                          emit_svg=True)
        probe0 = fig_cfg.probe(alpha=0.0)
        ks = kernels_for(probe0, fig_cfg.quad, workers=fig_cfg.workers)
        rc = cmd_sweep_alpha(fig_cfg, tag="fig1_sweep", base_ks=ks)
        eq = LinePlot(title="equatorial Bloch path", xlabel="Dx", ylabel="Dy")
        for alpha in (0.0, 0.5, 1.0):
            traj = integrate(fig_cfg.probe(alpha=alpha), ks)
            n_show = traj.index_of(50.0) + 1
            eq.add(traj.dx[:n_show], traj.dy[:n_show], label=f"alpha={alpha:g}")
        path = os.path.join(fig_cfg.out_dir, "fig1_equator.svg")
        eq.write(path)
        print(f"wrote {path}")
        return rc
    if which == "fig2":
        fig_cfg = replace(cfg, t_end=50.0, times=(1.0, 5.0, 20.0, 50.0),
                          emit_svg=True)
        return cmd_sweep_alpha(fig_cfg, tag="fig2_sweep")
    if which == "fig3":
        fig_cfg = replace(cfg, alpha=0.5, t_end=20.0, times=(1.0, 5.0, 20.0),
                          emit_svg=True)
        return cmd_sweep_temperature(fig_cfg, tag="fig3_sweep")
    raise ConfigurationError(f"unknown figure {which!r}")


# ----------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value configuration file")
    common.add_argument("--out", dest="out_dir", metavar="DIR", help="output directory")
    common.add_argument("--workers", type=int, metavar="N", help="parallel sweep workers")
    common.add_argument("--svg", dest="emit_svg", action="store_const", const=True,
                        help="emit SVG plots next to the CSV output")
    for flag, dest, kind in (
            ("--alpha", "alpha", float), ("--temp", "temperature", float),
            ("--epsilon", "epsilon", float), ("--eta", "eta", float),
            ("--omega-c", "omega_c", float), ("--t-end", "t_end", float),
            ("--dt", "dt", float), ("--alpha-count", "alpha_count", int),
            ("--temp-min", "temp_min", float), ("--temp-max", "temp_max", float),
            ("--temp-count", "temp_count", int)):
        common.add_argument(flag, dest=dest, type=kind)
    common.add_argument("--times", dest="times",
                        type=lambda s: tuple(float(v) for v in s.split(",") if v),
                        help="comma-separated probing times")

    parser = argparse.ArgumentParser(
        prog="qtherm",
        description="Nonequilibrium single-qubit thermometry of an Ohmic bath")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("trajectory", parents=[common],
                   help="integrate one scenario and write trajectory.csv")
    sub.add_parser("sweep-alpha", parents=[common],
                   help="witness and Fisher quantities across the coupling mix")
    sub.add_parser("sweep-temperature", parents=[common],
                   help="Fisher quantities across bath temperatures")
    sub.add_parser("dump-kernels", parents=[common],
                   help="write the six Bloch kernels on the time grid")
    rep = sub.add_parser("reproduce", parents=[common],
                         help="run a canonical figure pipeline")
    rep.add_argument("figure", choices=("fig1", "fig2", "fig3"))
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {f.name: getattr(args, f.name)
                 for f in fields(RunConfig) if hasattr(args, f.name)}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "trajectory":
            return cmd_trajectory(cfg)
        if args.command == "sweep-alpha":
            return cmd_sweep_alpha(cfg)
        if args.command == "sweep-temperature":
            return cmd_sweep_temperature(cfg)
        if args.command == "dump-kernels":
            return cmd_dump_kernels(cfg)
        if args.command == "reproduce":
            return cmd_reproduce(cfg, args.figure)
        raise ConfigurationError(f"unknown command {args.command!r}")
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"qtherm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
