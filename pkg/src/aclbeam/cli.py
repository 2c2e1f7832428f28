"""Batch front door: TOML config in, CSV/JSON artifacts out.

Subcommands: derive, simulate, spectrum, resonance, verify-theorem1,
compare, decay.  Every run writes a manifest.json (config hash, tool
version, output list) next to its outputs; identical config and seed
produce byte-identical files.

Exit codes: 0 success, 2 config error, 3 precondition violation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import sys as _sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import (
    NEAR_RESONANCE_TOL,
    RESONANCE_TOL,
    compare_coupled_decoupled,
    comparison_to_csv,
    fit_decay_rate,
    resonance_scan,
    scan_to_csv,
)
from .dynamics import random_smooth_state, simulate, trajectory_to_csv
from .errors import (
    AclBeamError,
    ConvergenceFailure,
    DegenerateWaveSpeeds,
    DimensionMismatch,
    InsufficientSamples,
    InvalidConfig,
    InvalidRatio,
    NonpositiveEnergy,
    NotResonant,
    SingularStepMatrix,
    TooLargeForDense,
)
from .fem import Mesh, assemble
from .params import (
    BeamConfig,
    CoreParams,
    FeedbackGains,
    LayerParams,
    Model,
    derive_constants,
    validate_config,
)
from .spectral import build_resonant_mode, classify, generator_spectrum, spectrum_report, strong_form_residual

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4

_PRECONDITION_ERRORS = (NotResonant, DegenerateWaveSpeeds, InvalidRatio,
                        InsufficientSamples, TooLargeForDense, DimensionMismatch)
_NUMERICAL_ERRORS = (ConvergenceFailure, SingularStepMatrix, NonpositiveEnergy)

#: acceptance thresholds used by verify-theorem1
THEOREM1_STRONG_FORM_TOL = 1e-10
THEOREM1_BOUNDARY_TOL = 1e-12

#: every config key with its documented default (unknown keys are an error)
DEFAULT_CONFIG = {
    "model": "electrostatic",   # electrostatic | magnetic | decoupled
    "L": 1.0,                   # beam length
    "layer1": {"rho": 1.0, "h": 1.0, "alpha1": 1.0, "gamma": 0.0, "beta": 1.0, "mu": 1.0},
    "layer2": {"rho": 1.0, "h": 1.0, "G2": 1.0},
    "layer3": {"rho": 1.0, "h": 1.0, "alpha1": 1.0, "gamma": 0.0, "beta": 1.0, "mu": 1.0},
    "gains": {"k1": 1.0, "k2": 1.0, "s1": 1.0, "s3": 1.0},
    "numerics": {
        "n_elems": 32,          # uniform elements
        "dt": 1e-3,             # implicit midpoint step
        "horizon": 20.0,        # simulated time
        "sample_every": 10,     # sampling stride in steps
        "seed": 12345,          # xorshift64* seed for random initial data
    },
    "scan": {
        "gamma_min": 0.0,       # resonance-scan grid
        "gamma_max": 2.0,
        "points": 81,
        "n_max": 9,             # odd-pair search bound
        "tol": RESONANCE_TOL,
        "near_tol": NEAR_RESONANCE_TOL,
    },
    "theorem1": {"n": 2, "m": 1},  # odd-ratio indices for verify-theorem1
}


@dataclass
class RunConfig:
    """Resolved beam + numerics configuration of one CLI invocation."""

    beam: BeamConfig
    n_elems: int
    dt: float
    horizon: float
    sample_every: int
    seed: int
    scan: dict
    theorem1: dict
    resolved: dict

    @property
    def mesh(self) -> Mesh:
        return Mesh(n_elems=self.n_elems, L=self.beam.L)


def _merge_strict(defaults: dict, user: dict, path: str = "") -> dict:
    merged = {}
    for key, default in defaults.items():
        if key in user:
            value = user[key]
            if isinstance(default, dict):
                if not isinstance(value, dict):
                    raise InvalidConfig([f"config key {path}{key} must be a table"])
                merged[key] = _merge_strict(default, value, f"{path}{key}.")
            else:
                merged[key] = value
        else:
            merged[key] = dict(default) if isinstance(default, dict) else default
    unknown = sorted(set(user) - set(defaults))
    if unknown:
        raise InvalidConfig([f"unknown config key: {path}{key}" for key in unknown])
    return merged


def _beam_from_dict(resolved: dict) -> BeamConfig:
    try:
        model = Model(resolved["model"])
    except ValueError:
        raise InvalidConfig(
            [f"model must be one of {[m.value for m in Model]} (got {resolved['model']!r})"]
        ) from None

    def layer(section: dict) -> LayerParams:
        return LayerParams(rho=float(section["rho"]), h=float(section["h"]),
                           alpha1=float(section["alpha1"]), gamma=float(section["gamma"]),
                           beta=float(section["beta"]), mu=float(section["mu"]))

    beam = BeamConfig(
        L=float(resolved["L"]),
        layer1=layer(resolved["layer1"]),
        layer2=CoreParams(rho=float(resolved["layer2"]["rho"]),
                          h=float(resolved["layer2"]["h"]),
                          G2=float(resolved["layer2"]["G2"])),
        layer3=layer(resolved["layer3"]),
        gains=FeedbackGains(**{k: float(v) for k, v in resolved["gains"].items()}),
        model=model,
    )
    return validate_config(beam)


def load_run_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Parse a TOML config (or use the documented defaults) plus flag overrides."""
    user: dict = {}
    if path is not None:
        file_path = Path(path)
        if not file_path.exists():
            raise FileNotFoundError(f"config file not found: {file_path}")
        try:
            user = tomllib.loads(file_path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise InvalidConfig([f"config file {file_path} is not valid TOML: {exc}"]) from exc

    resolved = _merge_strict(DEFAULT_CONFIG, user)
    for key, value in (overrides or {}).items():
        if value is not None:
            resolved["numerics"][key] = value

    numerics = resolved["numerics"]
    if int(numerics["n_elems"]) < 1:
        raise InvalidConfig([f"numerics.n_elems must be >= 1 (got {numerics['n_elems']})"])
    if not float(numerics["dt"]) > 0:
        raise InvalidConfig([f"numerics.dt must be positive (got {numerics['dt']})"])
    if float(numerics["horizon"]) < 0:
        raise InvalidConfig([f"numerics.horizon must be nonnegative (got {numerics['horizon']})"])
    if int(numerics["sample_every"]) < 1:
        raise InvalidConfig([f"numerics.sample_every must be >= 1 (got {numerics['sample_every']})"])

    return RunConfig(
        beam=_beam_from_dict(resolved),
        n_elems=int(numerics["n_elems"]),
        dt=float(numerics["dt"]),
        horizon=float(numerics["horizon"]),
        sample_every=int(numerics["sample_every"]),
        seed=int(numerics["seed"]),
        scan=resolved["scan"],
        theorem1=resolved["theorem1"],
        resolved=resolved,
    )


# ---------------------------------------------------------------------------
# deterministic serialization
# ---------------------------------------------------------------------------

def _canonical_json(obj, indent: int = 0) -> str:
    """JSON with sorted keys and %.17g floats; deterministic across runs."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  "{key}": {_canonical_json(obj[key], indent + 1)}'
                 for key in sorted(obj)]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_canonical_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        text = f"{obj:.17g}"
        if not any(ch in text for ch in ".eE"):
            text += ".0"  # keep floats typed as floats on round trip
        return text
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _config_hash(resolved: dict) -> str:
    return hashlib.sha256(_canonical_json(resolved).encode()).hexdigest()


def _write_outputs(out_dir: Path, run: RunConfig, command: str, files: dict) -> list:
    """Write every artifact plus the manifest; returns the output paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, content in files.items():
        target = out_dir / name
        target.write_text(content)
        written.append(name)
    manifest = {
        "command": command,
        "config_sha256": _config_hash(run.resolved),
        "version": __version__,
        "outputs": sorted(written),
    }
    (out_dir / "manifest.json").write_text(_canonical_json(manifest) + "\n")
    return written


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _derived_dict(run: RunConfig) -> dict:
    derived = derive_constants(run.beam)

    def layer_dict(lay):
        return {
            "alpha": lay.alpha,
            "zeta_plus": lay.zeta_plus,
            "zeta_minus": lay.zeta_minus,
            "ratio": lay.ratio,
            "b_plus": lay.b_plus,
            "b_minus": lay.b_minus,
        }

    return {
        "m": derived.m, "K1": derived.K1, "K2": derived.K2, "H": derived.H,
        "layer1": layer_dict(derived.layer1), "layer3": layer_dict(derived.layer3),
    }


def cmd_derive(run: RunConfig, out_dir: Path) -> int:
    payload = _canonical_json(_derived_dict(run)) + "\n"
    print(payload, end="")
    _write_outputs(out_dir, run, "derive", {"derived.json": payload})
    return EXIT_OK


def _simulate_run(run: RunConfig):
    system = assemble(run.beam, run.mesh)
    initial = random_smooth_state(system, seed=run.seed)
    return simulate(system, initial, dt=run.dt, horizon=run.horizon,
                    sample_every=run.sample_every)


def _summary_line(traj) -> str:
    e0, e_end = traj.total_energy[0], traj.total_energy[-1]
    line = (f"simulate: samples={len(traj.times)} E0={e0:.17g} "
            f"E_end={e_end:.17g} ratio={e_end / e0:.17g}")
    try:
        fit = fit_decay_rate(traj)
        line += f" omega={fit.omega:.17g}"
    except AclBeamError:
        pass
    return line


def cmd_simulate(run: RunConfig, out_dir: Path) -> int:
    traj = _simulate_run(run)
    buf = io.StringIO()
    trajectory_to_csv(traj, buf)
    _write_outputs(out_dir, run, "simulate", {"trajectory.csv": buf.getvalue()})
    print(_summary_line(traj))
    return EXIT_OK


def cmd_decay(run: RunConfig, out_dir: Path) -> int:
    traj = _simulate_run(run)
    fit = fit_decay_rate(traj)
    buf = io.StringIO()
    trajectory_to_csv(traj, buf)
    decay = {
        "omega": fit.omega, "window": list(fit.window),
        "residual": fit.residual, "n_samples": fit.n_samples,
        "E0": float(traj.total_energy[0]), "E_end": float(traj.total_energy[-1]),
    }
    _write_outputs(out_dir, run, "decay",
                   {"trajectory.csv": buf.getvalue(),
                    "decay.json": _canonical_json(decay) + "\n"})
    print(f"decay: omega={fit.omega:.17g} residual={fit.residual:.17g} "
          f"n_samples={fit.n_samples}")
    return EXIT_OK


def cmd_spectrum(run: RunConfig, out_dir: Path) -> int:
    system = assemble(run.beam, run.mesh)
    spectrum = generator_spectrum(system)
    counts = classify(spectrum)
    report = spectrum_report(spectrum)
    _write_outputs(out_dir, run, "spectrum",
                   {"spectrum.json": _canonical_json(report) + "\n"})
    print(f"spectrum: n_modes={len(spectrum.eigenvalues)} "
          f"imaginary_axis={counts.imaginary_axis} "
          f"strictly_stable={counts.strictly_stable} unstable={counts.unstable} "
          f"abscissa={spectrum.abscissa:.17g}")
    return EXIT_OK


def cmd_resonance(run: RunConfig, out_dir: Path) -> int:
    scan = run.scan
    gammas = np.linspace(float(scan["gamma_min"]), float(scan["gamma_max"]),
                         int(scan["points"]))
    result = resonance_scan(run.beam, gammas, n_max=int(scan["n_max"]),
                            tol=float(scan["tol"]), near_tol=float(scan["near_tol"]))
    buf = io.StringIO()
    scan_to_csv(result, buf)
    _write_outputs(out_dir, run, "resonance", {"resonance_scan.csv": buf.getvalue()})
    print(f"resonance: points={len(result.gammas)} flagged={int(result.flagged.sum())} "
          f"near_flagged={int(result.near_flagged.sum())}")
    return EXIT_OK


def cmd_verify_theorem1(run: RunConfig, out_dir: Path) -> int:
    if run.beam.model is not Model.MAGNETIC:
        raise NotResonant("verify-theorem1 needs model = 'magnetic'")
    n, m = int(run.theorem1["n"]), int(run.theorem1["m"])
    derived = derive_constants(run.beam)
    mode = build_resonant_mode(derived, n=n, m=m, L=run.beam.L)
    boundary = mode.boundary_residuals()
    strong = strong_form_residual(mode, derived)

    system = assemble(run.beam, run.mesh)
    spectrum = generator_spectrum(system)
    idx = spectrum.nearest(1j * mode.tau)
    lam = complex(spectrum.eigenvalues[idx])

    report = {
        "n": n, "m": m, "tau": mode.tau,
        "gamma": run.beam.layer1.gamma,
        "strong_form_residual": strong,
        "boundary_residuals": boundary,
        "n_elems": run.n_elems,
        "eigenvalue": {"re": lam.real, "im": lam.imag},
        "eigenvalue_abs_error": abs(lam - 1j * mode.tau),
    }
    _write_outputs(out_dir, run, "verify-theorem1",
                   {"theorem1_report.json": _canonical_json(report) + "\n"})
    ok = (strong <= THEOREM1_STRONG_FORM_TOL
          and max(boundary.values()) <= THEOREM1_BOUNDARY_TOL)
    print(f"verify-theorem1: tau={mode.tau:.17g} strong_form_residual={strong:.3e} "
          f"matched_eigenvalue={lam.real:.3e}{lam.imag:+.6f}j "
          f"{'OK' if ok else 'RESIDUAL TOO LARGE'}")
    if not ok:
        raise ConvergenceFailure("analytic mode residuals exceed tolerances")
    return EXIT_OK


def cmd_compare(run: RunConfig, out_dir: Path) -> int:
    result = compare_coupled_decoupled(run.beam, run.mesh)
    buf = io.StringIO()
    comparison_to_csv(result, buf)
    _write_outputs(out_dir, run, "compare", {"compare.csv": buf.getvalue()})
    low = result.abs_diff[:5].mean() if len(result) >= 5 else float("nan")
    high = result.abs_diff[-5:].mean() if len(result) >= 5 else float("nan")
    print(f"compare: pairs={len(result)} mean_diff_low5={low:.17g} "
          f"mean_diff_high5={high:.17g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "derive": cmd_derive,
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "resonance": cmd_resonance,
    "verify-theorem1": cmd_verify_theorem1,
    "compare": cmd_compare,
    "decay": cmd_decay,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aclbeam",
        description="Simulation and spectral analysis of the three-layer ACL cantilever",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="TOML config file (defaults used when omitted)")
    parser.add_argument("--out", default="aclbeam-out", help="output directory")
    parser.add_argument("--n-elems", type=int, help="override numerics.n_elems")
    parser.add_argument("--dt", type=float, help="override numerics.dt")
    parser.add_argument("--seed", type=int, help="override numerics.seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        run = load_run_config(
            args.config,
            overrides={"n_elems": args.n_elems, "dt": args.dt, "seed": args.seed},
        )
        return _COMMANDS[args.command](run, Path(args.out))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except InvalidConfig as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=_sys.stderr)
        return EXIT_CONFIG
    except _PRECONDITION_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_PRECONDITION
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
