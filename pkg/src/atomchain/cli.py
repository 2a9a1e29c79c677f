"""Command line front end with deterministic, manifest-stamped outputs.

Every run writes a manifest.json next to its data files recording the
resolved configuration, seed, conventions in force, self-check outcomes and
the produced filenames.  All table files are byte-identical across reruns
and across --threads settings: BLAS libraries are pinned to a single thread
before numpy is first imported (parallelism happens at the realization
level inside the ensemble module, which writes into preallocated slots),
and floats are serialized with shortest round-trip repr.  The manifest is
deterministic except for its wall_clock_seconds field.

Exit codes: 0 success, 2 configuration or usage error, 3 runtime or
self-check failure, 4 I/O error.
"""

from __future__ import annotations

import os

for _var in (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(_var, "1")

import argparse
import json
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .chain_model import ChainConfig, ConfigError, GAMMA0, read_config, validate
from .collective_couplings import build_couplings
from .dynamics import (
    Propagator,
    far_field_intensity,
    far_field_ring,
    momentum_distribution,
    populations,
    propagate_to,
    spin_wave,
)
from .ensemble import (
    SCALAR_OBSERVABLES,
    EnsembleSpec,
    compare_configs,
    reciprocal_twin,
    run_ensemble,
)
from .hamiltonian import assemble
from .scattering import (
    gamma_sqrt,
    representation_equivalence_check,
    reciprocity_defect,
    s_matrix,
    spectrum_scan,
    transmittance,
)
from .spectrum import (
    bloch_bands,
    decay_modes,
    default_k_grid,
    guided_group_velocity,
    transparency_window,
)

CONVENTIONS = {
    "units": "gamma0 = 1, wavelength = 1, k0 = 2*pi",
    "flattening": "site-major, plus branch before minus branch",
    "momentum_transform": "psi_s(k) = sum_n exp(-i (k - s*k_c) z_n) c_ns",
    "transparency_window": "real-energy span of the dark upper Bloch branch on the chain's own k grid",
    "disorder": "uniform on [-sqrt(3W), sqrt(3W)], identical shift for both internal states",
    "smoothing": "boxcar over energy samples, window rounded to the grid step",
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_table(path: str, header: list[str], rows, fmt: str) -> None:
    if fmt == "json":
        payload = {"columns": header, "rows": [[_coerce(v) for v in row] for row in rows]}
        with open(path, "w", newline="\n") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        return
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _coerce(value):
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def _table_name(stem: str, fmt: str) -> str:
    return f"{stem}.{'json' if fmt == 'json' else 'csv'}"


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{flag} expects comma separated numbers, got {text!r}") from exc


# ----------------------------------------------------------------- commands


def cmd_dispersion(args, vc, seed, outdir, fmt):
    bands = bloch_bands(vc, default_k_grid(vc, args.n_k))
    rows = zip(
        bands.k_grid,
        bands.upper.real,
        bands.upper.imag,
        bands.lower.real,
        bands.lower.imag,
        bands.polarization_weight_upper,
    )
    name = _table_name("bands", fmt)
    write_table(
        os.path.join(outdir, name),
        ["k", "re_upper", "im_upper", "re_lower", "im_lower", "pol_weight_upper"],
        rows,
        fmt,
    )
    checks = []
    max_im = float(max(bands.upper.imag.max(), bands.lower.imag.max()))
    checks.append(CheckResult("bands_non_amplifying", max_im <= 1e-6, max_im, 1e-6))
    if abs(np.sin(vc.mixing_angle)) < 1e-12:
        probe = np.linspace(0.2, 0.8, 5) * np.pi / vc.lattice_const
        fwd = bloch_bands(vc, probe)
        bwd = bloch_bands(vc, -probe)
        asym = float(
            max(
                np.max(np.abs(fwd.upper - bwd.upper)),
                np.max(np.abs(fwd.lower - bwd.lower)),
            )
        )
        checks.append(CheckResult("bands_even_in_k", asym < 1e-9, asym, 1e-9))
    extras = {"transparency_window": transparency_window(vc)}
    return [name], checks, extras


def cmd_transmit(args, vc, seed, outdir, fmt):
    couplings = build_couplings(vc)
    h = assemble(vc, couplings)
    half = gamma_sqrt(decay_modes(couplings))
    energies = np.linspace(args.e_min, args.e_max, args.n_e)
    source = 0 if args.source is None else args.source
    target = vc.n_atoms - 1 if args.target is None else args.target
    for site, flag in ((source, "--source"), (target, "--target")):
        if not 0 <= site < vc.n_atoms:
            raise ConfigError(f"{flag} site {site} outside chain of {vc.n_atoms} atoms")
    scan = spectrum_scan(h, half, energies, source, target, smoothing_window=args.smoothing)
    name = _table_name("transmit", fmt)
    write_table(
        os.path.join(outdir, name),
        [
            "energy",
            "t_forward",
            "t_backward",
            "t_forward_smoothed",
            "t_backward_smoothed",
            "unitarity_defect",
        ],
        zip(
            scan.energies,
            scan.forward,
            scan.backward,
            scan.forward_smoothed,
            scan.backward_smoothed,
            scan.unitarity_defect,
        ),
        fmt,
    )
    checks = []
    worst = float(scan.unitarity_defect.max())
    checks.append(CheckResult("unitarity", worst < 1e-8, worst, 1e-8))
    if abs(np.sin(vc.mixing_angle)) < 1e-12:
        asym = float(np.max(np.abs(scan.forward - scan.backward)))
        checks.append(CheckResult("direction_symmetry", asym < 1e-8, asym, 1e-8))
    extras = {"reciprocity_defect": reciprocity_defect(vc, couplings)}
    return [name], checks, extras


def _default_times(vc, n0: int) -> list[float]:
    speed = guided_group_velocity(vc)
    if speed > 1e-9:
        t_edge = (vc.n_atoms - 1 - n0) * vc.lattice_const / speed
        t_return = (vc.n_atoms - 1) * vc.lattice_const / speed
        return [0.5 * t_edge, t_edge, t_edge + t_return]
    return [6.5, 13.0, 26.0]


def cmd_evolve(args, vc, seed, outdir, fmt):
    n0 = min(100, vc.n_atoms // 2) if args.n0 is None else args.n0
    try:
        state0 = spin_wave(
            vc,
            n0=n0,
            width_sq=args.width_sq,
            k_carrier=args.k_carrier,
            excited_fraction=args.excited_fraction,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    times = (
        _parse_float_list(args.times, "--times") if args.times else _default_times(vc, n0)
    )
    if any(t < 0 for t in times):
        raise ConfigError("--times must be non-negative")
    times = sorted(times)

    couplings = build_couplings(vc)
    propagator = Propagator(assemble(vc, couplings))
    ring = far_field_ring(vc, n_angles=args.n_angles)

    pop_rows, mom_rows, norm_rows = [], [], []
    outputs = []
    states = [propagate_to(state0, propagator, t) for t in times]
    for idx, (t, state) in enumerate(zip(times, states)):
        p_plus, p_minus = populations(state)
        for site in range(vc.n_atoms):
            pop_rows.append((t, site, p_plus[site], p_minus[site]))
        mom = momentum_distribution(state, vc)
        for k, a, b in zip(mom.k_grid, mom.p_plus, mom.p_minus):
            mom_rows.append((t, k, a, b))
        norm_rows.append((t, state.norm))
        intensity = far_field_intensity(state, ring, vc)
        name = _table_name(f"intensity_{idx}", fmt)
        write_table(
            os.path.join(outdir, name),
            ["x", "z", "intensity"],
            zip(ring[:, 0], ring[:, 2], intensity),
            fmt,
        )
        outputs.append(name)

    for stem, header, rows in (
        ("populations", ["time", "site", "p_plus", "p_minus"], pop_rows),
        ("momentum", ["time", "k", "psi2_plus", "psi2_minus"], mom_rows),
        ("norms", ["time", "norm"], norm_rows),
    ):
        name = _table_name(stem, fmt)
        write_table(os.path.join(outdir, name), header, rows, fmt)
        outputs.append(name)

    checks = []
    norms = [state0.norm] + [s.norm for s in states]
    growth = float(max(b - a for a, b in zip(norms[:-1], norms[1:])))
    checks.append(CheckResult("norm_non_increasing", growth <= 1e-12, growth, 1e-12))

    probe = states[-1]
    dt = 1e-4
    if times[-1] > 2 * dt:
        # norm loss rate must match the decay-matrix expectation value
        before = propagate_to(state0, propagator, times[-1] - dt)
        after = propagate_to(state0, propagator, times[-1] + dt)
        fd_rate = (after.norm - before.norm) / (2 * dt)
        expected = -float(np.real(probe.amps.conj() @ (couplings.decay @ probe.amps)))
        denom = max(abs(expected), 1e-300)
        rel = abs(fd_rate - expected) / denom
        checks.append(CheckResult("norm_loss_rate", rel < 1e-4, rel, 1e-4))

        # one long step must equal two half steps
        half = propagate_to(state0, propagator, times[-1] / 2)
        composed = propagate_to(half, propagator, times[-1])
        comp = float(np.linalg.norm(composed.amps - probe.amps))
        checks.append(CheckResult("composition", comp < 1e-9, comp, 1e-9))

    extras = {"snapshot_times": times, "spin_wave_center": n0}
    return outputs, checks, extras


def cmd_disorder(args, vc, seed, outdir, fmt):
    sqrt_w = _parse_float_list(args.sqrt_w, "--sqrt-w")
    if any(s < 0 for s in sqrt_w):
        raise ConfigError("--sqrt-w values must be non-negative")
    observables = ("survival", "kspace_ipr", "realspace_ipr")
    spec = EnsembleSpec(
        base_config=vc.as_config(),
        w_values=tuple(s * s for s in sqrt_w),
        n_realizations=args.realizations,
        master_seed=seed,
        observation_time=args.time,
        observables=observables,
        n0=min(100, vc.n_atoms // 2),
        max_workers=args.threads,
    )

    outputs, checks = [], []
    extras = {"sqrt_w": sqrt_w, "paired": not args.single}

    def dump_result(result, tag):
        for obs in SCALAR_OBSERVABLES:
            rows = []
            for wi, s in enumerate(sqrt_w):
                for ri in range(spec.n_realizations):
                    rows.append((s, ri, result.scalars[obs][wi, ri]))
            name = _table_name(f"{obs}_{tag}" if tag else obs, fmt)
            write_table(
                os.path.join(outdir, name), ["sqrt_w", "realization", "value"], rows, fmt
            )
            outputs.append(name)
        agg_rows = []
        for obs in SCALAR_OBSERVABLES:
            for wi, s in enumerate(sqrt_w):
                mean, sem, n = result.aggregates[obs][wi]
                agg_rows.append((tag or "base", obs, s, mean, sem, int(n)))
        return agg_rows

    if args.single:
        result = run_ensemble(spec)
        agg_rows = dump_result(result, "")
        extras["transparency_window"] = result.transparency_window
        zero_std = _zero_disorder_spread(result, sqrt_w)
    else:
        comparison = compare_configs(spec, vc.as_config(), reciprocal_twin(vc.as_config()))
        agg_rows = dump_result(comparison.result_a, "base")
        agg_rows += dump_result(comparison.result_b, "twin")
        diff_rows = []
        for obs in SCALAR_OBSERVABLES:
            for wi, s in enumerate(sqrt_w):
                diff_rows.append(
                    (
                        obs,
                        s,
                        comparison.diff_mean[obs][wi],
                        comparison.diff_sem[obs][wi],
                        comparison.z_score[obs][wi],
                    )
                )
        name = _table_name("paired_diff", fmt)
        write_table(
            os.path.join(outdir, name),
            ["observable", "sqrt_w", "diff_mean", "diff_sem", "z"],
            diff_rows,
            fmt,
        )
        outputs.append(name)
        extras["transparency_window_base"] = comparison.result_a.transparency_window
        extras["transparency_window_twin"] = comparison.result_b.transparency_window
        zero_std = max(
            _zero_disorder_spread(comparison.result_a, sqrt_w),
            _zero_disorder_spread(comparison.result_b, sqrt_w),
        )

    name = _table_name("aggregate", fmt)
    write_table(
        os.path.join(outdir, name),
        ["config", "observable", "sqrt_w", "mean", "sem", "n"],
        agg_rows,
        fmt,
    )
    outputs.append(name)
    if 0.0 in sqrt_w:
        checks.append(CheckResult("zero_disorder_spread", zero_std == 0.0, zero_std, 0.0))
    return outputs, checks, extras


def _zero_disorder_spread(result, sqrt_w) -> float:
    # peak-to-peak, not std: the mean of n identical floats rounds at the ulp
    spread = 0.0
    for wi, s in enumerate(sqrt_w):
        if s == 0.0:
            for obs in SCALAR_OBSERVABLES:
                spread = max(spread, float(np.ptp(result.scalars[obs][wi])))
    return spread


def cmd_verify(args, vc, seed, outdir, fmt):
    """Invariant suite on a small chain; no data files, checks only."""
    checks = []
    for angle in (0.0, np.pi / 4):
        tag = "reciprocal" if angle == 0.0 else "directional"
        small = validate(
            replace(vc.as_config(), n_atoms=24, mixing_angle=angle)
        )
        couplings = build_couplings(small)
        h = assemble(small, couplings)
        anti = float(
            np.max(np.abs((h.matrix - h.matrix.conj().T) + 1j * couplings.decay))
        )
        checks.append(CheckResult(f"{tag}_anti_hermitian", anti < 1e-12, anti, 1e-12))

        eigs = np.linalg.eigvals(h.matrix)
        trace_defect = abs(float(np.sum(eigs.imag)) + small.n_atoms * GAMMA0) / (
            small.n_atoms * GAMMA0
        )
        checks.append(
            CheckResult(f"{tag}_decay_trace", trace_defect < 1e-10, trace_defect, 1e-10)
        )

        modes = decay_modes(couplings)
        half = gamma_sqrt(modes)
        rng = np.random.default_rng(0)
        energies = rng.uniform(-3, 8, size=5)
        worst_unit, worst_sym = 0.0, 0.0
        for energy in energies:
            result = s_matrix(float(energy), h, half)
            worst_unit = max(worst_unit, result.unitarity_defect)
            fwd = transmittance(result, 0, small.n_atoms - 1)
            bwd = transmittance(result, small.n_atoms - 1, 0)
            worst_sym = max(worst_sym, abs(fwd - bwd))
        checks.append(CheckResult(f"{tag}_unitarity", worst_unit < 1e-8, worst_unit, 1e-8))
        if angle == 0.0:
            checks.append(
                CheckResult(f"{tag}_symmetry", worst_sym < 1e-10, worst_sym, 1e-10)
            )

        report = representation_equivalence_check(small, couplings)
        checks.append(
            CheckResult(
                f"{tag}_normal_mode_equiv",
                report.normal_mode_defect < 1e-10,
                report.normal_mode_defect,
                1e-10,
            )
        )
        checks.append(
            CheckResult(
                f"{tag}_detector_equiv", report.detector_defect < 1e-4,
                report.detector_defect, 1e-4,
            )
        )
    return [], checks, {}


COMMANDS = {
    "dispersion": cmd_dispersion,
    "transmit": cmd_transmit,
    "evolve": cmd_evolve,
    "disorder": cmd_disorder,
    "verify": cmd_verify,
}


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atomchain",
        description="Collective photon transport on a driven two-branch atomic chain.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p):
        p.add_argument("--config", required=True, help="key=value chain configuration file")
        p.add_argument("--out", required=True, help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="realization-level workers")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("dispersion", help="Bloch bands and transparency window")
    common(p)
    p.add_argument("--n-k", type=int, default=1024)

    p = sub.add_parser("transmit", help="two-directional transmittance scan")
    common(p)
    p.add_argument("--e-min", type=float, default=-4.0)
    p.add_argument("--e-max", type=float, default=10.0)
    p.add_argument("--n-e", type=int, default=500)
    p.add_argument("--smoothing", type=float, default=0.05 * GAMMA0)
    p.add_argument("--source", type=int, default=None)
    p.add_argument("--target", type=int, default=None)

    p = sub.add_parser("evolve", help="spin-wave launch, bounce and emission pattern")
    common(p)
    p.add_argument("--n0", type=int, default=None, help="wave packet center site")
    p.add_argument("--width-sq", type=float, default=60.0)
    p.add_argument("--k-carrier", type=float, default=0.0)
    p.add_argument("--excited-fraction", type=float, default=0.2)
    p.add_argument("--times", type=str, default=None, help="comma list of snapshot times")
    p.add_argument("--n-angles", type=int, default=360)

    p = sub.add_parser("disorder", help="seeded disorder ensembles, optionally paired")
    common(p)
    p.add_argument("--sqrt-w", type=str, default="0,0.625,1.0")
    p.add_argument("--realizations", type=int, default=50)
    p.add_argument("--time", type=float, default=13.0)
    p.add_argument("--single", action="store_true", help="skip the zero-angle twin")

    p = sub.add_parser("verify")  # intentionally undocumented maintenance suite
    common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()

    try:
        config, file_seed = read_config(args.config)
        vc = validate(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 4

    seed = args.seed if args.seed is not None else (file_seed if file_seed is not None else 0)

    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return 4

    fmt = args.format
    try:
        outputs, checks, extras = COMMANDS[args.command](args, vc, seed, args.out, fmt)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # runtime/self-consistency problems map to 3
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    manifest = {
        "subcommand": args.command,
        "package_version": __version__,
        "config": {
            "n_atoms": vc.n_atoms,
            "lattice_const": vc.lattice_const,
            "delta_shift": vc.delta_shift,
            "mixing_angle": vc.mixing_angle,
            "control_wavevector": vc.control_wavevector,
            "detuning": vc.detuning,
            "gamma0": vc.gamma0,
        },
        "seed": seed,
        "threads": args.threads,
        "format": fmt,
        "conventions": CONVENTIONS,
        "extras": extras,
        "self_checks": [
            {"name": c.name, "passed": bool(c.passed), "value": c.value, "limit": c.limit}
            for c in checks
        ],
        "outputs": outputs,
        "wall_clock_seconds": time.monotonic() - started,
    }
    try:
        with open(os.path.join(args.out, "manifest.json"), "w", newline="\n") as fh:
            json.dump(manifest, fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        print(f"cannot write manifest: {exc}", file=sys.stderr)
        return 4

    failed = [c for c in checks if not c.passed]
    for check in checks:
        status = "ok" if check.passed else "FAIL"
        print(f"[{status}] {check.name}: {check.value:.3e} (limit {check.limit:.3e})")
    if failed:
        print(f"{len(failed)} self-check(s) failed", file=sys.stderr)
        return 3
    print(f"wrote {len(outputs)} file(s) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
