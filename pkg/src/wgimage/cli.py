"""Command-line surface: config-driven pipeline orchestration.

Subcommands
-----------
modes       print the mode table and propagating counts
synthesize  write point-source data and the assembled data matrix
image       read a data matrix, add noise per config, write the volume
psf         write the squared point-spread volume for a given anchor
verify      run the numerical cross-checks and write a JSON report
export      convert volumes between CSV and legacy VTK

Any failure exits nonzero with a machine-readable JSON error report on
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import imaging, operators, verification
from .config import RunConfig, load_config
from .errors import ValidationError, WaveguideError
from .green import GreenEvaluator


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wgimage",
        description="Sampling-type imaging in a terminating rectangular waveguide",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        p.add_argument("--config", required=needs_config, help="JSON run configuration")
        p.add_argument("--output", help="output directory (overrides config)")
        p.add_argument("--threads", type=int, help="worker thread cap (overrides config)")
        p.add_argument("--seed", type=int, help="noise seed (overrides config)")
        p.add_argument("--model", choices=["born", "ls"], help="forward model (overrides config)")

    add_common(sub.add_parser("modes", help="print the mode table and counts"))
    add_common(sub.add_parser("synthesize", help="synthesize scattered data and the data matrix"))
    p = sub.add_parser("image", help="image from a stored data matrix")
    add_common(p)
    p.add_argument("--input", help="data matrix file (default <output>/data_matrix.wgus)")
    p = sub.add_parser("psf", help="point-spread volume for an anchor point")
    add_common(p)
    p.add_argument("--xstar", required=True, help="anchor point, e.g. 5,5,-5")
    add_common(sub.add_parser("verify", help="run numerical cross-checks"))
    p = sub.add_parser("export", help="convert a volume between CSV and VTK")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.threads is not None:
        if args.threads < 1:
            raise ValidationError("threads", "must be at least 1")
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.noise_seed = args.seed
    if args.model is not None:
        cfg.model = operators.ForwardModel(args.model, cfg.model.tol, cfg.model.max_iter)
    if args.output is not None:
        cfg.output_dir = args.output
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _evaluator(cfg: RunConfig) -> GreenEvaluator:
    return GreenEvaluator(cfg.basis())


def cmd_modes(cfg: RunConfig, args) -> int:
    basis = cfg.basis()
    print(f"{'index':>5} {'family':>6} {'pair':>9} {'cutoff':>12} {'axial':>24} {'propagating':>11}")
    idx = 0
    for modes_list in (basis.te_modes, basis.tm_modes):
        for m in modes_list:
            idx += 1
            ax = f"{m.axial.real:.6g}{m.axial.imag:+.6g}j"
            print(
                f"{idx:>5} {m.family:>6} {str(m.pair):>9} {m.cutoff:>12.8f} {ax:>24} "
                f"{str(m.propagating).lower():>11}"
            )
    print(f"M={basis.M} N={basis.N} total propagating={basis.M + basis.N}")
    return 0


def cmd_synthesize(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    ev = _evaluator(cfg)
    data = operators.synthesize_data(ev, cfg.scene, cfg.grid, cfg.model)
    operators.write_point_source_data(out / "point_source.wgus", data)
    dm = imaging.assemble_data_matrix(data, ev.basis)
    imaging.write_data_matrix(out / "data_matrix.wgus", dm)
    print(f"wrote {out / 'point_source.wgus'} and {out / 'data_matrix.wgus'}")
    print(f"scene voxels={cfg.scene.n_voxels} M={dm.basis.M} N={dm.basis.N}")
    return 0


def cmd_image(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    path = Path(args.input) if args.input else out / "data_matrix.wgus"
    dm = imaging.read_data_matrix(path)
    if cfg.noise_level > 0:
        dm = imaging.add_noise(dm, cfg.noise_level, cfg.noise_seed)
    vol = imaging.image_volume(dm, cfg.lattice, threads=cfg.threads)
    imaging.write_volume_csv(out / "image.csv", vol)
    imaging.write_volume_vtk(out / "image.vtk", vol)
    print(
        f"wrote {out / 'image.csv'} and {out / 'image.vtk'} "
        f"(noise level={cfg.noise_level}, seed={cfg.noise_seed})"
    )
    return 0


def cmd_psf(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    try:
        x_star = np.array([float(t) for t in args.xstar.split(",")])
        if x_star.size != 3:
            raise ValueError
    except ValueError:
        raise ValidationError("xstar", f"expected three comma-separated numbers, got {args.xstar!r}")
    vol = imaging.psf_volume(cfg.basis(), x_star, cfg.lattice, threads=cfg.threads)
    imaging.write_volume_csv(out / "psf.csv", vol)
    imaging.write_volume_vtk(out / "psf.vtk", vol)
    print(f"wrote {out / 'psf.csv'} and {out / 'psf.vtk'}")
    return 0


def cmd_verify(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    ev = _evaluator(cfg)
    report = verification.run_checks(ev, cfg.scene, cfg.grid, cfg.model, seed=cfg.noise_seed)
    for name, entry in report["checks"].items():
        verdict = "PASS" if entry["pass"] else "FAIL"
        print(f"{verdict} {name}: residual {entry['residual']:.3e} (tol {entry['tolerance']:.1e})")
    with open(out / "verify_report.json", "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    print(f"wrote {out / 'verify_report.json'}")
    return 0 if report["all_pass"] else 1


def cmd_export(args) -> int:
    src, dst = Path(args.input), Path(args.output)
    if src.suffix == ".csv":
        vol = imaging.read_volume_csv(src)
    elif src.suffix == ".vtk":
        vol = imaging.read_volume_vtk(src)
    else:
        raise ValidationError("input", f"cannot infer format from suffix {src.suffix!r}")
    if dst.suffix == ".csv":
        imaging.write_volume_csv(dst, vol)
    elif dst.suffix == ".vtk":
        imaging.write_volume_vtk(dst, vol)
    else:
        raise ValidationError("output", f"cannot infer format from suffix {dst.suffix!r}")
    print(f"wrote {dst}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "export":
            return cmd_export(args)
        cfg = _apply_overrides(load_config(args.config), args)
        handler = {
            "modes": cmd_modes,
            "synthesize": cmd_synthesize,
            "image": cmd_image,
            "psf": cmd_psf,
            "verify": cmd_verify,
        }[args.command]
        return handler(cfg, args)
    except WaveguideError as exc:
        report = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ValidationError):
            report["field"] = exc.field
        json.dump(report, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
