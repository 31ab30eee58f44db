"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime or
numerical error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .errors import ConfigError, PatError
from .experiment import (
    METRICS_HEADER,
    PSNR_IDENTICAL,
    build_setup,
    noise_std,
    psnr,
    rel_l2_error,
    reconstruct,
    run_comparison,
    simulate_clean,
)
from .filters import FilterSpec, build_filter, frequency_response
from .image import make_paper_phantom
from .io import export_pgm, read_array, write_array, write_csv
from .rng import gaussian_noise
from .selftest import run_selftest

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--workers", type=int, default=1, help="threads for operator blocks")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="patrelax", description="Relaxed-fidelity PAT reconstruction toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate band-limited noisy data")
    s.add_argument("--config")
    s.add_argument("--out", required=True)

    s = sub.add_parser("reconstruct", parents=[common], help="reconstruct one data set")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--fidelity", required=True, choices=["l2", "gauss", "bandpass", "delta"])
    s.add_argument("--out", required=True)

    s = sub.add_parser("evaluate", parents=[common], help="PSNR / relative error vs a reference")
    s.add_argument("--recon", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("filter-response", parents=[common], help="export a filter's magnitude")
    s.add_argument("--config")
    s.add_argument("--which", required=True, choices=["system", "gauss", "bandpass"])
    s.add_argument("--out", required=True)

    s = sub.add_parser("run-experiment", parents=[common], help="full three-way comparison")
    s.add_argument("--config")
    s.add_argument("--out")

    sub.add_parser("selftest", parents=[common], help="adjoint, prox and tiny-solve checks")
    return p


def _experiment(args):
    cfg = cfgmod.load(args.config, args.seed)
    return cfg, cfgmod.to_experiment(cfg, workers=args.workers)


def cmd_simulate(args) -> int:
    _, exp = _experiment(args)
    setup = build_setup(exp)
    x0 = make_paper_phantom(exp.grid)
    clean = simulate_clean(x0, setup.psf, setup.A)
    data = clean + gaussian_noise(clean.shape, noise_std(clean, exp.noise), exp.noise.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_array(out / "phantom.rtkd", x0.values)
    write_array(out / "sinogram.rtkd", data)
    write_array(out / "sinogram_clean.rtkd", clean)
    export_pgm(x0, out / "phantom.pgm")
    print(f"wrote {out}/phantom.rtkd and {out}/sinogram.rtkd {data.shape}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg, exp = _experiment(args)
    setup = build_setup(exp)
    data = read_array(args.data)
    if data.shape != setup.model.data_shape:
        raise ConfigError("--data", f"shape {data.shape} != {setup.model.data_shape}")
    if args.fidelity == "l2":
        fid = "l2"
    elif args.fidelity == "delta":
        fid = FilterSpec.delta()
    else:
        fid = cfgmod.filter_spec(cfg, args.fidelity)
    image, trace, _ = reconstruct(data, fid, setup)
    out = Path(args.out)
    write_array(out, image.values)
    trace.write_csv(out.with_suffix(".trace.csv"))
    export_pgm(image, out.with_suffix(".pgm"))
    print(f"wrote {out} after {exp.solver.iterations} iterations")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    x = read_array(args.recon)
    ref = read_array(args.ref)
    p = psnr(x, ref)
    row = ["recon", "identical" if p == PSNR_IDENTICAL else p, rel_l2_error(x, ref)]
    write_csv(args.out, ["name", "psnr", "rel_l2_error"], [row])
    print(f"psnr {row[1]} rel_l2_error {row[2]:.6g}")
    return EXIT_OK


def cmd_filter_response(args) -> int:
    cfg, exp = _experiment(args)
    spec = cfgmod.filter_spec(cfg, args.which)
    fr = frequency_response(build_filter(spec, exp.time.samples, exp.time.dt))
    write_csv(args.out, ["freq", "magnitude"], zip(fr.freqs, fr.magnitude))
    print(f"wrote {len(fr.freqs)} bins to {args.out}")
    return EXIT_OK


def cmd_run_experiment(args) -> int:
    cfg, exp = _experiment(args)
    out = args.out or cfg["out_dir"]
    if out is None:
        raise ConfigError("out_dir", "no output directory given (use --out)")
    report = run_comparison(exp, out)
    for row in report.metrics_rows():
        print(",".join(str(v) for v in row))
    print(f"outputs in {out}; columns {','.join(METRICS_HEADER)}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    ok = run_selftest(print)
    return EXIT_OK if ok else EXIT_RUNTIME


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "filter-response": cmd_filter_response,
    "run-experiment": cmd_run_experiment,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.command is None:
        print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PatError, OSError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
