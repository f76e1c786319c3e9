"""Command-line entry point: ``mcv2x {sweep,validate,reproduce-figures,sample-drops}``.

Exit codes: 0 success or validation pass, 1 validation failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, CoverageError
from .experiments import (
    FIGURE_TRIALS,
    default_output_dir,
    emit_csv,
    figure_presets,
    gnuplot_script,
    load_config,
    parse_config,
    run_sweep,
    validate,
)
from .montecarlo import SimulationConfig, simulate_drops, write_drops_csv

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("mcv2x")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parse_override(item: str):
    key, sep, value = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override must look like KEY=VALUE, got {item!r}")
    key = key.strip()
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()  # bare strings such as kind=alpha
    return key, parsed


def _resolve(args):
    overrides = dict(_parse_override(s) for s in args.set or [])
    for name in ("trials", "seed", "kind"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.config:
        return load_config(args.config, overrides)
    return parse_config("", overrides)


def _sim_config(args) -> SimulationConfig:
    return SimulationConfig(fading=args.fading, domain=args.domain)


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_sweep(args) -> int:
    params, spec = _resolve(args)
    curve = run_sweep(spec, params, workers=args.workers, sim=_sim_config(args))
    path = emit_csv(curve, _out_dir(args) / f"{args.name or spec.kind}.csv")
    if args.gnuplot:
        path.with_suffix(".gp").write_text(gnuplot_script(curve, path.name))
    print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    params, spec = _resolve(args)
    trials = args.trials if args.trials is not None else spec.trials
    report = validate(params, trials=trials, seed=spec.seed, workers=args.workers)
    for line in report.lines():
        print(line)
    if args.out:
        path = _out_dir(args) / "validation.csv"
        path.write_text(report.to_csv())
        print(path)
    print("OVERALL:", "PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_reproduce(args) -> int:
    params, spec = _resolve(args)
    trials = args.trials if args.trials is not None else FIGURE_TRIALS
    out = _out_dir(args)
    presets = figure_presets(trials=trials, seed=spec.seed)
    for name in args.figures or sorted(presets):
        if name not in presets:
            raise ConfigError(f"unknown figure {name!r}; choose from {sorted(presets)}")
        log.info("running %s", name)
        curve = run_sweep(presets[name], params, workers=args.workers, sim=_sim_config(args))
        path = emit_csv(curve, out / f"{name}.csv")
        path.with_suffix(".gp").write_text(gnuplot_script(curve, path.name))
        print(path)
    return EXIT_OK


def cmd_sample_drops(args) -> int:
    params, spec = _resolve(args)
    trials = args.trials if args.trials is not None else spec.trials
    drops = simulate_drops(params, trials, spec.seed, (params.m,), _sim_config(args), args.workers)
    path = _out_dir(args) / (args.name or f"drops_m{params.m}.csv")
    write_drops_csv(drops, path)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcv2x", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="flat TOML config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config field (repeatable)")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-o", "--out", help="output directory (default: $MCV2X_OUTPUT_DIR or .)")
    common.add_argument("--fading", choices=("common", "independent"), default="common")
    common.add_argument("--domain", choices=("displaced", "raw", "transformed"), default="displaced")

    p = sub.add_parser("sweep", parents=[common], help="run one sweep and write CSV")
    p.add_argument("--kind", choices=("threshold", "alpha", "density", "connectivity-diff"))
    p.add_argument("--name", help="output file stem")
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", parents=[common], help="analytic vs simulation agreement suite")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reproduce-figures", parents=[common], help="run the fig2..fig5 presets")
    p.add_argument("figures", nargs="*", help="subset of fig2 fig3 fig4 fig5")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("sample-drops", parents=[common], help="export raw per-drop SINR samples")
    p.add_argument("--name", help="output file name")
    p.set_defaults(func=cmd_sample_drops)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
