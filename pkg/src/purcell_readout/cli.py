"""Command-line pipelines: one subcommand per reproduced figure or table.

Each subcommand writes CSV files into ``--out`` and prints a short summary.
Without ``--config`` the bundled published-parameter configuration is used.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .counting import (ReadoutConfig, dead_time_correct, optimize_threshold,
                       readout_histograms)
from .fitters import fit_exponential, fit_lorentzian, read_xy_csv
from .liouville import (CompositeState, HilbertSpec, build_model, calibrate_omega,
                        converged_steady_state, decay_curve)
from .protocol import (ProtocolConfig, protocol_report, segment_sweep, simulate_protocol,
                       sweep_to_csv)
from .qed import MHZ, cooperativity, lineshape_scan


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(x) -> str:
    return f"{x:.9g}"


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _readout_params(cfg, spec):
    """System parameters for one readout window, with the drive resolved."""
    params = cfg.system
    if spec.delta_a is not None:
        params = params.replace(delta_a=spec.delta_a)
    if spec.delta_c is not None:
        params = params.replace(delta_c=spec.delta_c)
    if spec.calibrate_rc is not None:
        omega = calibrate_omega(params, spec.calibrate_rc, cfg.hilbert.n_fock)
        params = params.replace(omega=omega)
    elif spec.omega is not None:
        params = params.replace(omega=spec.omega)
    return params


def _emission(cfg, params) -> float:
    model, state = converged_steady_state(params, cfg.hilbert.n_fock)
    return 2.0 * params.kappa * state.expect(model.number_op)


def cmd_rates(cfg, out: Path, stream) -> None:
    if not cfg.readout:
        raise cfgmod.ConfigError("readout: at least one [readout.<label>] section is required")
    det = cfg.detector
    rows = []
    for spec in cfg.readout:
        params = _readout_params(cfg, spec)
        rc = _emission(cfg, params)
        if spec.detected_rate is not None:
            detected = spec.detected_rate
        else:
            incident = det.efficiency * rc + det.background_rate
            detected = incident / (1.0 + incident * det.dead_time)
        corrected = dead_time_correct(detected, det.dead_time)
        rows.append([_g(spec.duration * 1e9), _g(rc / 1e6), _g(detected / 1e6), _g(corrected / 1e6)])
        print(f"[{spec.label}] Omega = 2pi x {params.omega / MHZ:.4g} MHz  R_c = {rc / 1e6:.4g} Mcps  "
              f"detected = {detected / 1e6:.4g} Mcps  corrected = {corrected / 1e6:.4g} Mcps", file=stream)
    path = _write(out, "rates.csv", _csv(
        ["readout_time_ns", "calc_Rc_Mcps", "detected_Mcps", "corrected_Mcps"], rows))
    print(f"wrote {path}", file=stream)


def cmd_decay(cfg, out: Path, stream) -> None:
    params = cfg.system.replace(omega=0.0)
    model = build_model(params, HilbertSpec(2))  # single excitation, no drive
    t = np.linspace(0.0, cfg.decay.t_max, cfg.decay.n_points)
    times, flux = decay_curve(model, CompositeState.excited(2), t)
    start = cfg.decay.window_start
    if start is None:
        start = float(times[np.argmax(flux)])
    fit = fit_exponential(times, flux, window_start=start)
    rep = cooperativity(params)
    path = _write(out, "decay.csv", _csv(
        ["time_ns", "flux_per_s"], [[_g(a * 1e9), _g(b)] for a, b in zip(times, flux)]))
    _write(out, "decay_fit.csv", fit.to_csv())
    print(f"C = {rep.c_real:.4g}  Purcell lifetime 1/(2 gamma (2C+1)) = {rep.lifetime_enhanced * 1e9:.4g} ns",
          file=stream)
    print(f"fit window starts at {start * 1e9:.4g} ns; fitted lifetime = "
          f"{fit.params['lifetime'] * 1e9:.4g} ns (converged: {fit.converged})", file=stream)
    print(f"wrote {path}", file=stream)


def cmd_scan(cfg, out: Path, stream) -> None:
    params = cfg.system
    if params.omega == 0:
        params = params.replace(omega=0.1 * params.gamma)
    n = int(round(cfg.scan.span / cfg.scan.step))
    grid = cfg.scan.step * np.arange(-n, n + 1)
    d, r = lineshape_scan(params, grid, scan=cfg.scan.mode)
    fit = fit_lorentzian(d, r)
    rep = cooperativity(params)
    path = _write(out, "scan.csv", _csv(
        ["detuning_mhz", "rate_per_s"], [[_g(a / MHZ), _g(b)] for a, b in zip(d, r)]))
    _write(out, "scan_fit.csv", fit.to_csv())
    print(f"C = {rep.c_real:.4g}  (2C+1) 2 gamma = 2pi x {rep.fwhm_enhanced / MHZ:.4g} MHz", file=stream)
    print(f"fitted FWHM = 2pi x {fit.params['fwhm'] / MHZ:.4g} MHz (scan mode {cfg.scan.mode}, "
          f"converged: {fit.converged})", file=stream)
    print(f"wrote {path}", file=stream)


def cmd_readout(cfg, out: Path, stream) -> None:
    if not cfg.readout:
        raise cfgmod.ConfigError("readout: at least one [readout.<label>] section is required")
    det = cfg.detector
    rows = []
    for spec in cfg.readout:
        if spec.bright_rate is not None:
            bright = spec.bright_rate
        else:
            bright = det.efficiency * _emission(cfg, _readout_params(cfg, spec)) + det.background_rate
        rc = ReadoutConfig(spec.duration, bright, det.background_rate, spec.depump_rate, spec.survival)
        hb, hd = readout_histograms(rc, det, cfg.n_trials, cfg.seed, cfg.workers)
        res = optimize_threshold(hb, hd)
        _write(out, f"readout_{spec.label}_bright.csv", hb.to_csv())
        _write(out, f"readout_{spec.label}_dark.csv", hd.to_csv())
        surv = "" if spec.survival is None else _g(spec.survival)
        rows.append([spec.label, _g(spec.duration * 1e9), _g(bright / 1e6), res.threshold,
                     _g(res.infidelity), _g(res.dark_error), _g(res.bright_error), surv])
        print(f"[{spec.label}] input {bright / 1e6:.4g} Mcps  N_thr = {res.threshold}  "
              f"infidelity = {res.infidelity:.3g}  fidelity = {100 * (1 - res.infidelity):.4f}%",
              file=stream)
    path = _write(out, "readout_summary.csv", _csv(
        ["label", "readout_time_ns", "bright_input_Mcps", "threshold", "infidelity",
         "dark_error", "bright_error", "survival"], rows))
    print(f"wrote {path}", file=stream)


def cmd_prep(cfg, out: Path, stream) -> None:
    proto = cfg.protocol
    if proto is None:
        raise cfgmod.ConfigError("protocol: section is required")
    pump = cfg.pump_model()
    reports = segment_sweep(pump, proto.total_pump_time, proto.readout_time, proto.n_max,
                            proto.initial_state)
    times = np.array([r.mean_time for r in reports])
    best = int(np.argmin(times)) + 1
    path = _write(out, "prep_sweep.csv", sweep_to_csv(reports))
    print(f"tau = {pump.tau * 1e6:.4g} us  r = {pump.r:g}", file=stream)
    print(f"best N = {best}  <t> = {times[best - 1] * 1e6:.4g} us  "
          f"speed-up T_P/<t> = {proto.total_pump_time / times[best - 1]:.3g}", file=stream)
    n = proto.n_segments or best
    pc = ProtocolConfig(proto.total_pump_time, n, proto.readout_time, proto.initial_state)
    mc = simulate_protocol(pump, pc, proto.n_trials, cfg.seed, cfg.workers)
    exact = protocol_report(pump, pc)
    print(f"N = {n}: closed form <t> = {exact.mean_time * 1e6:.6g} us, Monte Carlo "
          f"{mc.mean_time * 1e6:.6g} +- {mc.mean_time_stderr * 1e6:.2g} us, "
          f"failure = {exact.failure_prob:.3g}", file=stream)
    print(f"wrote {path}", file=stream)


def cmd_fit(path: str, model: str, window_start: float, out: Path, stream) -> None:
    x, y = read_xy_csv(Path(path).read_text(encoding="utf-8"))
    if model == "exponential":
        fit = fit_exponential(x, y, window_start=window_start)
    else:
        fit = fit_lorentzian(x, y)
    _write(out, f"fit_{model}.csv", fit.to_csv())
    stream.write(fit.to_text())
    if not fit.converged:
        raise RuntimeError(f"fit did not converge: {fit.message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration (default: bundled published parameters)")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--workers", type=int, help="override run.workers")
    common.add_argument("--out", default=".", help="output directory for CSV files")
    parser = argparse.ArgumentParser(prog="purcell-readout", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("rates", parents=[common], help="cavity emission and dead-time-corrected rates")
    sub.add_parser("decay", parents=[common], help="fluorescence decay curve and lifetime fit")
    sub.add_parser("scan", parents=[common], help="weak-drive line shape and FWHM fit")
    sub.add_parser("readout", parents=[common], help="count histograms and readout fidelity")
    sub.add_parser("prep", parents=[common], help="segment sweep of accelerated state preparation")
    fit = sub.add_parser("fit", parents=[common], help="fit an exponential or Lorentzian to x,y CSV")
    fit.add_argument("file")
    fit.add_argument("--model", choices=["exponential", "lorentzian"], required=True)
    fit.add_argument("--window-start", type=float, default=-np.inf,
                     help="first x value included in an exponential fit")
    return parser


def main(argv=None, stream=None) -> int:
    stream = stream or sys.stdout
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "fit":
            cmd_fit(args.file, args.model, args.window_start, out, stream)
            return 0
        if args.config:
            cfg = cfgmod.load(args.config)
        else:
            cfg = cfgmod.loads(cfgmod.published_config_text())
        if args.seed is not None:
            cfg.seed = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise cfgmod.ConfigError("--workers: must be >= 1")
            cfg.workers = args.workers
        commands = {"rates": cmd_rates, "decay": cmd_decay, "scan": cmd_scan,
                    "readout": cmd_readout, "prep": cmd_prep}
        commands[args.command](cfg, out, stream)
    except (OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
