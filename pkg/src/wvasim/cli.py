"""Command-line runner: parameter sweeps, figure recipes and artifact output.

Every output directory gets a ``manifest.json`` with the resolved setup (in
config units), its hash, the command, trial count and package version, so
each CSV row can be traced back to (setup hash, seed, command). Outputs are
byte-identical for the same manifest and seed, whatever the worker count.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .config import ConfigError, OpticalSetup, FIGURE_BETAS_DEG, load_config
from .constants import ATTOSECOND, DEG
from .detector import row_profile
from .estimator import (OutOfCalibratedRange, estimate_delay, fit_calibration, register_1d,
                        write_estimates_csv)
from .io import write_pgm, write_profiles_csv, write_table
from .metrology import (fisher_empirical, fisher_theoretical, snr_subgrouped,
                        write_metrology_csv, ZeroVarianceError)
from .polarization import tilt_to_delay
from .simulation import Simulator

COMMANDS = ("simulate", "estimate", "fisher", "snr", "calibrate", "reproduce-fig2", "reproduce-fig3")
DEFAULT_TRIALS = 20
# noisy estimates may fall slightly outside the calibrated delay span
RANGE_EXTENSION = 0.25
THEORY_POINTS = 50


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunManifest:
    setup: OpticalSetup
    command: str
    output_dir: Path
    trials: int = DEFAULT_TRIALS
    dump_frames: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def to_json(self):
        return {
            "command": self.command,
            "trials": self.trials,
            "seed": self.setup.seed,
            "dump_frames": self.dump_frames,
            "setup_hash": self.setup.digest(),
            "version": __version__,
            "setup": self.setup.to_config_dict(),
        }


@dataclass
class BetaSweep:
    """Everything measured for one symmetric post-selection pair."""

    beta_deg: float
    setup: OpticalSetup
    thetas: np.ndarray
    taus: np.ndarray
    profiles: list          # per theta: (trials, rows) array
    shifts: np.ndarray      # (thetas, trials), metres, fringe order unwrapped
    calibration: object
    tau_hat: np.ndarray     # (thetas, trials), NaN where out of range
    seeds: list             # per theta: list of seed tuples
    period: float


def worker_count():
    raw = os.environ.get("WVASIM_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"WVASIM_WORKERS must be an integer, got {raw!r}") from None
    return max(1, n)


def _simulate_item(args):
    setup, tau, seeds, keep_frames = args
    sim = Simulator(setup)
    profiles, frames = [], []
    for seed in seeds:
        frame = sim.frame(tau, seed)
        profiles.append(row_profile(frame))
        if keep_frames:
            frames.append(frame)
    return np.stack(profiles), frames


def _map(fn, items):
    workers = worker_count()
    if workers == 1 or len(items) == 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sweep_beta(setup, beta_index, trials, frame_sink=None):
    """Simulate, register, calibrate and invert one (+beta, -beta) sweep.

    The zero-tilt frames, averaged over trials, are the registration
    reference. Frame ``i`` at tilt ``j`` uses the stream
    ``(seed, beta_index, j, i)``.
    """
    beta_deg = setup.beta_u / DEG
    thetas = np.asarray(setup.theta_list, dtype=float)
    if thetas[0] != 0.0:
        raise SweepError(f"beta={beta_deg:g} deg: theta_list must start at 0 for the reference")
    sim = Simulator(setup)
    taus = np.array([tilt_to_delay(t, setup.n0, setup.omega) for t in thetas])
    seeds = [[(setup.seed, beta_index, j, i) for i in range(trials)] for j in range(thetas.size)]
    keep = frame_sink is not None
    results = _map(_simulate_item, [(setup, float(t), s, keep) for t, s in zip(taus, seeds)])
    profiles = [r[0] for r in results]
    if keep:
        for j, (_, frames) in enumerate(results):
            for i, frame in enumerate(frames):
                frame_sink(beta_index, j, i, frame)

    reference = profiles[0].mean(axis=0)
    period_px = sim.fringe_period_px
    pitch = setup.pixel_pitch
    raw = np.empty((thetas.size, trials))
    for j, prof in enumerate(profiles):
        for i, p in enumerate(prof):
            try:
                raw[j, i] = register_1d(reference, p, setup.upsampling, weighting="poisson",
                                        pixel_pitch=pitch).shift_pixels
            except ValueError as exc:
                raise SweepError(f"beta={beta_deg:g} deg theta={thetas[j] / DEG:g} deg "
                                 f"seed={seeds[j][i]}: {exc}") from exc
    # registration is blind to whole fringe periods; follow the sweep continuously
    centre = np.unwrap(np.median(raw, axis=1), period=period_px)
    raw += np.round((centre[:, None] - raw) / period_px) * period_px
    shifts = raw * pitch

    try:
        calibration = fit_calibration(taus, shifts.mean(axis=1), sim.theory_shift,
                                      beta=setup.beta_u)
    except ValueError as exc:
        raise SweepError(f"beta={beta_deg:g} deg: calibration failed: {exc}") from exc
    tau_hat = np.full_like(shifts, np.nan)
    for j in range(thetas.size):
        for i in range(trials):
            try:
                tau_hat[j, i] = estimate_delay(shifts[j, i], calibration, tau_hint=taus[j],
                                               extend=RANGE_EXTENSION)
            except OutOfCalibratedRange:
                pass
            except ValueError as exc:
                raise SweepError(f"beta={beta_deg:g} deg theta={thetas[j] / DEG:g} deg "
                                 f"seed={seeds[j][i]}: {exc}") from exc
    return BetaSweep(beta_deg, setup, thetas, taus, profiles, shifts, calibration, tau_hat,
                     seeds, sim.fringe_period)


def _beta_setups(manifest, figure_betas):
    if figure_betas:
        return [manifest.setup.with_betas(b) for b in FIGURE_BETAS_DEG]
    return [manifest.setup]


def _frame_sink(manifest, beta_setups):
    if not manifest.dump_frames:
        return None
    folder = manifest.output_dir / "frames"
    folder.mkdir(parents=True, exist_ok=True)

    def sink(b, j, i, frame):
        name = f"beta{beta_setups[b].beta_u / DEG:g}_theta{j:02d}_trial{i:03d}.pgm"
        write_pgm(folder / name, frame, beta_setups[b].noise)
    return sink


def run_sweep(manifest, figure_betas=False):
    """Run the sweep behind ``manifest.command`` and write its artifacts.

    Returns the list of per-beta sweeps.
    """
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    setups = _beta_setups(manifest, figure_betas)
    sink = _frame_sink(manifest, setups)
    sweeps = [sweep_beta(s, b, manifest.trials, sink) for b, s in enumerate(setups)]
    (out / "manifest.json").write_text(json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n")
    return sweeps


def _estimate_rows(sweeps):
    rows = []
    for sw in sweeps:
        for j, (theta, tau) in enumerate(zip(sw.thetas, sw.taus)):
            for i in range(sw.shifts.shape[1]):
                rows.append({
                    "beta_deg": float(sw.beta_deg),
                    "theta_deg": float(theta / DEG),
                    "tau_as": float(tau / ATTOSECOND),
                    "shift_um": float(sw.shifts[j, i] * 1e6),
                    "tau_hat_as": float(sw.tau_hat[j, i] / ATTOSECOND),
                    "seed": ":".join(str(s) for s in sw.seeds[j][i]),
                })
    return rows


def _write_calibration(out, sweeps):
    write_table(out / "calibration.csv",
                ["beta_deg", "scale", "offset_um", "residual_rms_um", "tau_min_as", "tau_max_as",
                 "fringe_period_um"],
                [[float(sw.beta_deg), sw.calibration.scale, sw.calibration.offset * 1e6,
                  sw.calibration.residual_rms * 1e6, sw.taus[0] / ATTOSECOND,
                  sw.taus[-1] / ATTOSECOND, sw.period * 1e6] for sw in sweeps])
    rows = []
    for sw in sweeps:
        for theta, tau, s in zip(sw.thetas, sw.taus, sw.shifts.mean(axis=1)):
            rows.append([float(sw.beta_deg), float(theta / DEG), float(tau / ATTOSECOND),
                         float(s * 1e6), float(sw.calibration(tau) * 1e6),
                         float(sw.calibration.model(tau) * 1e6)])
    write_table(out / "calibration_points.csv",
                ["beta_deg", "theta_deg", "tau_as", "shift_mean_um", "fit_um", "theory_um"], rows)


def _write_delay_table(out, sweeps):
    rows = []
    for sw in sweeps:
        for tau, est in zip(sw.taus, sw.tau_hat):
            good = est[np.isfinite(est)]
            mean = float(good.mean() / ATTOSECOND) if good.size else math.nan
            std = float(good.std(ddof=1) / ATTOSECOND) if good.size > 1 else math.nan
            rows.append([float(sw.beta_deg), float(tau / ATTOSECOND), mean, std,
                         int(est.size - good.size)])
    write_table(out / "delay_table.csv",
                ["beta_deg", "tau_as", "tau_hat_mean_as", "tau_hat_std_as", "out_of_range"], rows)


def _metrology_rows(sweeps, with_snr):
    rows = []
    for sw in sweeps:
        sim = Simulator(sw.setup)
        for j, tau in enumerate(sw.taus):
            if tau <= 0:
                continue
            f = fisher_theoretical(sim, float(tau))
            snr_mean = snr_std = math.nan
            if with_snr:
                est = sw.tau_hat[j][np.isfinite(sw.tau_hat[j])]
                try:
                    rep = snr_subgrouped(est, sw.setup.snr_group_size)
                    snr_mean, snr_std = rep.mean_snr, rep.snr_std
                except (ValueError, ZeroVarianceError):
                    pass
            rows.append({"beta_deg": sw.beta_deg, "tau_as": tau / ATTOSECOND,
                         "per_photon_F": f.per_photon_fisher, "total_F": f.total_fisher,
                         "crb_std_as": f.crb_std / ATTOSECOND, "snr_limit": f.snr_limit,
                         "snr_mean": snr_mean, "snr_std": snr_std})
    return rows


def _write_fisher_empirical(out, sweeps):
    rows = []
    for sw in sweeps:
        data = {float(t): list(p) for t, p in zip(sw.taus, sw.profiles)}
        for r in fisher_empirical(data, seed=sw.setup.seed):
            rows.append([float(sw.beta_deg), r.tau / ATTOSECOND, r.per_photon_fisher,
                         r.total_fisher, r.fisher_std, r.snr_limit])
    write_table(out / "fisher_empirical.csv",
                ["beta_deg", "tau_as", "per_photon_F", "total_F", "total_F_std", "snr_limit"], rows)


def _write_theory_curves(out, sweeps):
    rows = []
    for sw in sweeps:
        sim = Simulator(sw.setup)
        for tau in np.linspace(sw.taus[-1] / THEORY_POINTS, sw.taus[-1], THEORY_POINTS):
            f = fisher_theoretical(sim, float(tau))
            rows.append({"beta_deg": sw.beta_deg, "tau_as": tau / ATTOSECOND,
                         "per_photon_F": f.per_photon_fisher, "total_F": f.total_fisher,
                         "crb_std_as": f.crb_std / ATTOSECOND, "snr_limit": f.snr_limit,
                         "snr_mean": math.nan, "snr_std": math.nan})
    write_metrology_csv(out / "fig3_theory.csv", rows)


def _write_mean_profiles(out, sweeps):
    cols = {}
    for sw in sweeps:
        for theta, prof in zip(sw.thetas, sw.profiles):
            cols[f"beta{sw.beta_deg:g}_theta{theta / DEG:.4f}"] = prof.mean(axis=0)
    write_profiles_csv(out / "profiles.csv", cols)


def execute(manifest):
    out = manifest.output_dir
    cmd = manifest.command
    sweeps = run_sweep(manifest, figure_betas=cmd.startswith("reproduce"))
    if cmd == "simulate":
        _write_mean_profiles(out, sweeps)
    elif cmd == "estimate":
        write_estimates_csv(out / "estimates.csv", _estimate_rows(sweeps))
    elif cmd == "calibrate":
        _write_calibration(out, sweeps)
    elif cmd == "fisher":
        write_metrology_csv(out / "metrology.csv", _metrology_rows(sweeps, with_snr=False))
        _write_fisher_empirical(out, sweeps)
    elif cmd == "snr":
        write_metrology_csv(out / "metrology.csv", _metrology_rows(sweeps, with_snr=True))
    elif cmd == "reproduce-fig2":
        _write_calibration(out, sweeps)
        write_estimates_csv(out / "estimates.csv", _estimate_rows(sweeps))
        _write_delay_table(out, sweeps)
    elif cmd == "reproduce-fig3":
        _write_theory_curves(out, sweeps)
        _write_fisher_empirical(out, sweeps)
        write_metrology_csv(out / "fig3_points.csv", _metrology_rows(sweeps, with_snr=True))
    return sweeps


def build_parser():
    parser = argparse.ArgumentParser(prog="wvasim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="flat TOML config (defaults if omitted)")
        p.add_argument("--out", type=Path, default=Path("wvasim-out"), help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help="frames per tilt")
        p.add_argument("--dump-frames", action="store_true", help="also write PGM frames")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        setup = load_config(args.config) if args.config else OpticalSetup()
        if args.seed is not None:
            setup = replace(setup, seed=args.seed)
        manifest = RunManifest(setup, args.command, args.out, args.trials, args.dump_frames)
        execute(manifest)
    except (ConfigError, SweepError, ValueError) as exc:
        print(f"wvasim {args.command}: error: {exc}", file=sys.stderr)
        return 2
    print(f"wvasim {args.command}: wrote artifacts to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
