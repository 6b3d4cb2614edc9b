"""Scenario runner: one subcommand per experiment, delimited-text outputs.

Every run writes its tables plus a manifest into the configured output
directory.  All tables carry the config hash and seed on their first line;
rerunning with the same config and seed reproduces them byte for byte.  The
manifest additionally records versions and wall-clock timings, so it is the
one file excluded from the byte-identity guarantee.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config, validate
from .experiments import (
    BellSettings,
    bell_counts,
    bell_curve,
    bell_parameter,
    conditional_profile,
    epr_reid,
    run_tomography_experiment,
    spectrum_fwhm,
    spiral_scan,
    spiral_spectrum,
    tomography_settings,
    angular_scan,
)
from .spdc import PumpSpec, build_state, sinc_ring_profile, transverse_mode_count
from .numerics import PolarGrid
from .tomography import (
    DensityMatrix,
    concurrence,
    fidelity,
    linear_entropy,
    reconstruct,
    save_density_matrix,
)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class RunContext:
    """Collects output files and timings for one subcommand invocation."""

    def __init__(self, config: ScenarioConfig, out_dir: Path, command: str):
        self.config = config
        self.out_dir = out_dir
        self.command = command
        self.files: list[str] = []
        self.timings: list[tuple[str, float]] = []
        self._t0 = time.perf_counter()
        out_dir.mkdir(parents=True, exist_ok=True)

    def mark(self, stage: str):
        now = time.perf_counter()
        self.timings.append((stage, now - self._t0))
        self._t0 = now

    def write_table(self, name: str, columns, rows):
        path = self.out_dir / name
        lines = [f"# config_hash={self.config.hash()} seed={self.config.seed}"]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        path.write_text("\n".join(lines) + "\n")
        self.files.append(name)

    def write_manifest(self):
        lines = [f"command = {self.command}",
                 f"config_hash = {self.config.hash()}",
                 f"seed = {self.config.seed}",
                 f"oamsim_version = {__version__}",
                 f"numpy_version = {np.__version__}",
                 f"scipy_version = {scipy.__version__}",
                 f"python_version = {sys.version.split()[0]}",
                 f"outputs = {','.join(self.files)}"]
        for stage, elapsed in self.timings:
            lines.append(f"elapsed_s.{stage} = {elapsed:.3f}")
        lines.append("# config echo")
        lines.extend(self.config.canonical_lines())
        (self.out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _stage_seed(config: ScenarioConfig, stage: int) -> int:
    """Deterministic per-stage seed: first word of SeedSequence([seed, stage])."""
    return int(np.random.SeedSequence([config.seed, stage]).generate_state(1)[0])


def _grid(config: ScenarioConfig) -> PolarGrid:
    pump_waist = config["source.pump_waist_mm"] * 1e-3
    meas_waist = pump_waist / config["source.gamma"]
    return PolarGrid(r_max=6.0 * max(pump_waist, meas_waist),
                     n_r=config["source.grid_points_radial"],
                     n_phi=config["source.grid_points_azimuthal"])


def _state(config: ScenarioConfig, ell_max: int, with_offset: bool = True):
    offset_waists = config["source.signal_offset_waists"] if with_offset else 0.0
    meas_waist = config["source.pump_waist_mm"] * 1e-3 / config["source.gamma"]
    return build_state(
        PumpSpec(waist=config["source.pump_waist_mm"] * 1e-3),
        gamma=config["source.gamma"],
        ell_max=ell_max,
        grid=_grid(config),
        signal_offset=(offset_waists * meas_waist, 0.0),
    )


def run_spiral(config: ScenarioConfig, ctx: RunContext):
    ell_max = config["source.ell_max"]
    state = _state(config, ell_max)
    ctx.mark("build_state")
    ells = np.arange(-ell_max, ell_max + 1)
    scan = spiral_scan(state, ells, ells, config.detector(), _stage_seed(config, 0),
                       pair_rate=config["experiment.pair_rate"])
    ctx.mark("scan")
    ctx.write_table("spiral_matrix.csv",
                    ("ell_a", "ell_b", "ideal_rate", "count", "accidental"), scan.rows())
    s_ells, s_ideal, s_counts = spiral_spectrum(scan)
    ctx.write_table("spiral_spectrum.csv", ("ell", "ideal_rate", "count"),
                    zip(s_ells, s_ideal, s_counts))
    fwhm = spectrum_fwhm(s_ells.astype(float), s_counts.astype(float))
    ctx.write_table("spiral_summary.csv", ("fwhm", "peak_count"),
                    [(fwhm, int(s_counts.max()))])
    ctx.mark("write")


def run_angular(config: ScenarioConfig, ctx: RunContext):
    state = _state(config, config["experiment.epr_ell_max"])
    ctx.mark("build_state")
    n = config["experiment.angular_points"]
    betas = np.linspace(-math.pi, math.pi, n, endpoint=False)
    scan = angular_scan(state, config["experiment.sector_width_rad"], betas, betas,
                        config.detector(), _stage_seed(config, 1),
                        pair_rate=config["experiment.pair_rate"])
    ctx.mark("scan")
    ctx.write_table("angular_map.csv",
                    ("beta_a", "beta_b", "ideal_rate", "count", "accidental"), scan.rows())
    xs, ps = conditional_profile(scan, fixed_value=0.0)
    ctx.write_table("angular_conditional.csv", ("beta_a", "probability"), zip(xs, ps))
    ctx.mark("write")


def run_epr_reid(config: ScenarioConfig, ctx: RunContext):
    ell_max = config["experiment.epr_ell_max"]
    state = _state(config, ell_max)
    ctx.mark("build_state")
    det = config.detector()
    rate = config["experiment.pair_rate"]
    ells = np.arange(-ell_max, ell_max + 1)
    spiral = spiral_scan(state, ells, np.array([0]), det, _stage_seed(config, 0),
                         pair_rate=rate)
    betas = np.linspace(-math.pi, math.pi, config["experiment.angular_points"], endpoint=False)
    angular = angular_scan(state, config["experiment.sector_width_rad"], betas,
                           np.array([0.0]), det, _stage_seed(config, 1), pair_rate=rate)
    ctx.mark("scan")
    ell_profile = conditional_profile(spiral, fixed_value=0.0)
    phi_profile = conditional_profile(angular, fixed_value=0.0)
    result = epr_reid(ell_profile, phi_profile)
    rows = [("ell", x, p, result.ell_fit(x)) for x, p in zip(*ell_profile)]
    rows += [("phi", x, p, result.angle_fit(x)) for x, p in zip(*phi_profile)]
    ctx.write_table("epr_profiles.csv", ("profile", "x", "probability", "fit"), rows)
    ctx.write_table("epr_summary.csv",
                    ("delta_ell_sq", "delta_phi_sq", "product", "violated",
                     "discrete_ell_var", "discrete_phi_var"),
                    [(result.delta_ell_sq, result.delta_phi_sq, result.product,
                      result.violated, result.discrete_ell_var, result.discrete_phi_var)])
    ctx.mark("write")


def run_bell(config: ScenarioConfig, ctx: RunContext):
    ell = config["bell.ell"]
    state = _state(config, ell, with_offset=False)
    ctx.mark("build_state")
    det = config.detector()
    rate = config["experiment.pair_rate"]
    thetas = np.linspace(0.0, math.pi / ell, config["bell.curve_points"], endpoint=False)
    curve = bell_curve(state, ell, 0.0, thetas, det, _stage_seed(config, 0), pair_rate=rate)
    settings = BellSettings.canonical(ell)
    counts, rates = bell_counts(state, settings, det, _stage_seed(config, 1), pair_rate=rate)
    s_value, sigma = bell_parameter(counts, settings)
    ctx.mark("scan")
    ctx.write_table("bell_curve.csv",
                    ("theta_b", "ideal_rate", "count", "accidental"), curve.rows())
    count_rows = []
    shift = settings.shift
    for k, (ta, tb) in enumerate(settings.base_pairs()):
        for c, (da, db) in enumerate(((0.0, 0.0), (shift, shift), (shift, 0.0), (0.0, shift))):
            count_rows.append((k, c, ta + da, tb + db, rates[k, c], int(counts[k, c])))
    ctx.write_table("bell_counts.csv",
                    ("pair", "offset", "theta_a", "theta_b", "ideal_rate", "count"), count_rows)
    n_sigma = (s_value - 2.0) / sigma if sigma > 0 else float("inf")
    ctx.write_table("bell_summary.csv",
                    ("ell", "s_value", "sigma_s", "n_sigma_above_2", "violated"),
                    [(ell, s_value, sigma, n_sigma, s_value > 2.0)])
    ctx.mark("write")


def run_tomo(config: ScenarioConfig, ctx: RunContext):
    d = config["tomo.d"]
    ell_values = list(config["tomo.ell_values"])
    state = _state(config, max(abs(e) for e in ell_values), with_offset=False)
    ctx.mark("build_state")
    target_ket = state.restricted_ket(ell_values)
    rho_true = DensityMatrix.from_ket(d, target_ket)
    settings = tomography_settings(d, ell_values)
    records = run_tomography_experiment(rho_true, settings, config.detector(),
                                        _stage_seed(config, 0),
                                        flux=config["experiment.pair_rate"])
    ctx.mark("counts")
    report = reconstruct(records, settings, d, seed=_stage_seed(config, 1))
    ctx.mark("reconstruct")
    ctx.write_table("tomo_counts.csv",
                    ("index", "arm_a", "arm_b", "ideal_rate", "count", "accidental"),
                    [(r.setting_id, s.label_a, s.label_b, r.ideal_rate, r.count,
                      r.accidental_estimate) for r, s in zip(records, settings)])
    save_density_matrix(ctx.out_dir / "tomo_rho.csv", report.rho)
    ctx.files.append("tomo_rho.csv")
    fid = fidelity(rho_true, report.rho)
    entropy = linear_entropy(report.rho)
    threshold_p = config.threshold_fraction()
    threshold_fid = threshold_p + (1.0 - threshold_p) / d**2
    columns = ["d", "chi_squared", "flux", "converged", "fidelity_vs_target",
               "linear_entropy", "threshold_p", "threshold_fidelity", "above_threshold"]
    values = [d, report.chi_squared, report.flux, report.converged, fid,
              entropy, threshold_p, threshold_fid, fid > threshold_fid]
    if d == 2:
        columns.append("concurrence")
        values.append(concurrence(report.rho))
    ctx.write_table("tomo_summary.csv", columns, [tuple(values)])
    ctx.mark("write")


def run_ring(config: ScenarioConfig, ctx: RunContext):
    crystal = config.crystal()
    rs = np.linspace(0.0, config["ring.r_max_mm"] * 1e-3, config["ring.points"])
    profile = sinc_ring_profile(rs, crystal)
    ctx.write_table("ring_profile.csv", ("r_mm", "intensity"),
                    zip(rs * 1e3, profile))
    ctx.mark("write")


def run_modes(config: ScenarioConfig, ctx: RunContext):
    wavelength = 2.0 * config["source.pump_wavelength_nm"] * 1e-9
    count = transverse_mode_count(config["modes.area_mm2"] * 1e-6,
                                  config["modes.solid_angle_sr"], wavelength)
    ctx.write_table("modes_summary.csv",
                    ("area_mm2", "solid_angle_sr", "wavelength_nm", "mode_count"),
                    [(config["modes.area_mm2"], config["modes.solid_angle_sr"],
                      wavelength * 1e9, count)])
    ctx.mark("write")


RUNNERS = {
    "spiral": run_spiral,
    "angular": run_angular,
    "epr-reid": run_epr_reid,
    "bell": run_bell,
    "tomo": run_tomo,
    "ring": run_ring,
    "modes": run_modes,
}


def _parse_overrides(pairs) -> dict:
    overrides = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oamsim",
        description="Simulate and analyze orbital-angular-momentum photon entanglement experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("spiral", "joint OAM coincidence matrix, spiral spectrum and its width"),
        ("angular", "sector-hologram orientation map and conditional profile"),
        ("epr-reid", "conditional-variance product for OAM and angular position"),
        ("bell", "analyzer-rotation fringe and the four-correlation Bell parameter"),
        ("tomo", "two-qudit state tomography, reconstruction and metrics"),
        ("ring", "far-field phase-matching ring profile"),
        ("modes", "etendue-limited transverse mode count"),
        ("validate", "check a configuration and list every violated invariant"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="path to a key = value configuration file")
        cmd.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                         help="override a configuration entry (repeatable)")
        if name != "validate":
            cmd.add_argument("--out", help="output directory (overrides output_dir)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, _parse_overrides(args.overrides))
        problems = validate(config)
        if args.command == "validate":
            for problem in problems:
                print(problem)
            return 1 if problems else 0
        if problems:
            for problem in problems:
                print(f"config error: {problem}", file=sys.stderr)
            return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out) if args.out else Path(config.output_dir)
    try:
        ctx = RunContext(config, out_dir, args.command)
        RUNNERS[args.command](config, ctx)
        ctx.write_manifest()
    except Exception as exc:  # runtime failure after a valid config
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
