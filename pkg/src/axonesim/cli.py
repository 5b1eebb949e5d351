"""Command-line entry point: simulate | analyze | sweep | sensitivity | cluster | params.

Every command reads one JSON config (``--config``, defaulting to the
embedded baseline), applies ``--set key=value`` overrides, and writes its
outputs next to a manifest that embeds the full canonical config.
Re-running a manifest as the config reproduces the outputs byte for byte.

Exit codes: 0 ok, 2 config error, 3 CFL violation, 4 non-finite state,
5 no bifurcation in the scanned interval.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import hopf, measure
from .config import (ConfigError, RunConfig, default_config, load_config,
                     manifest_for, write_manifest)
from .measure import NoOscillation, OdeEngine, PdeEngine
from .params import TransitionRates, rates_from_atp
from .pde import CFLViolation, Grid, Recorder, equilibrium_state, random_shift_state, run
from .spectral import FourierState, NonFinite, integrate
from .timeseries import TimeSeries

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CFL = 3
EXIT_NONFINITE = 4
EXIT_NO_BIFURCATION = 5


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_table(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _rate_family(config: RunConfig):
    params = config.params
    scale = config.a1_scale
    if scale == 1.0:
        return lambda om: rates_from_atp(params, om)

    def family(om: float) -> TransitionRates:
        base = rates_from_atp(params, om)
        return TransitionRates(ell=base.ell, a0=base.a0,
                               odd_cos={1: scale * base.a1},
                               odd_sin={1: scale * base.b1})

    return family


def _series_for(config: RunConfig) -> TimeSeries:
    params = config.params
    rates = _rate_family(config)(params.Omega)
    if config.engine_kind == "ode":
        eng = config.engine
        state = FourierState.equilibrium(params, rates, n_max=eng["n_max"],
                                         x0=config.x0)
        t_end = config.t_end if config.t_end is not None \
            else config.steps * eng["dt"]
        return integrate(state, params, rates, t_end, eng["dt"],
                         record_stride=config.record_stride)
    eng = config.engine
    dt = eng["dt"]
    if dt is None:
        dt = measure.suggest_dt(params, config.delta, eng["J"],
                                eng["cfl_fraction"], config.x0)
    grid = Grid.for_cells(params.ell, eng["J"], dt)
    if config.model_kind == "n_row":
        state = random_shift_state(grid, params, rates, config.n_rows,
                                   config.seed, xbar=config.x0)
    else:
        state = equilibrium_state(config.model_kind, grid, params, rates,
                                  x0=config.x0)
    steps = config.steps if config.steps is not None \
        else max(1, int(round(config.t_end / dt)))
    return run(state, grid, params, rates, steps,
               Recorder(stride=config.record_stride))


def _engine_for(config: RunConfig):
    if config.engine_kind == "ode":
        return OdeEngine(dt=config.engine["dt"], n_max=config.engine["n_max"])
    return PdeEngine(J=config.engine["J"], dt=config.engine["dt"],
                     cfl_fraction=config.engine["cfl_fraction"],
                     record_stride=config.record_stride)


def cmd_simulate(config: RunConfig, out: str) -> int:
    csv_path = f"{out}.csv"
    manifest_path = f"{out}.manifest.json"
    try:
        series = _series_for(config)
    except CFLViolation as exc:
        if exc.partial is not None:
            exc.partial.write_csv(csv_path)
            write_manifest(manifest_path, manifest_for(
                config, "simulate", [csv_path], truncated=True,
                extra={"error": str(exc)}))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CFL
    except NonFinite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    series.write_csv(csv_path)
    write_manifest(manifest_path,
                   manifest_for(config, "simulate", [csv_path]))
    return EXIT_OK


def cmd_analyze(config: RunConfig, out: str) -> int:
    report_path = f"{out}.report.json"
    manifest_path = f"{out}.manifest.json"
    family = None if config.a1_scale == 1.0 else _rate_family(config)
    try:
        report = hopf.bifurcation_report(config.params, rate_family=family,
                                         n_rows=config.n_rows)
        doc = report.to_dict()
        code = EXIT_OK
    except hopf.NoSignChange as exc:
        doc = {"validity": {"onset_found": False}, "error": str(exc)}
        code = EXIT_NO_BIFURCATION
    with open(report_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(manifest_path, manifest_for(
        config, "analyze", [report_path],
        extra={"valid": all(doc["validity"].values())}))
    return code


def cmd_sweep(config: RunConfig, out: str, deltas: list[float]) -> int:
    rows = measure.sweep_delta(deltas, _engine_for(config), config.params,
                               seed=config.seed)
    csv_path = f"{out}.sweep.csv"
    _write_table(csv_path, ["delta", "amplitude", "frequency", "status"],
                 [[r.delta, r.amplitude, r.frequency, r.status] for r in rows])
    write_manifest(f"{out}.manifest.json", manifest_for(
        config, "sweep", [csv_path], extra={"deltas": deltas}))
    return EXIT_OK


def cmd_sensitivity(config: RunConfig, out: str, param: str,
                    rel_range: float, points: int) -> int:
    rows = measure.sensitivity_scan(param, config.params, rel_range=rel_range,
                                    points=points, delta=config.delta,
                                    engine=_engine_for(config)
                                    if config.engine_kind == "ode" else None,
                                    seed=config.seed)
    csv_path = f"{out}.sensitivity.csv"
    _write_table(csv_path, [param, "amplitude", "frequency", "status"],
                 [[r.value, r.amplitude, r.frequency, r.status] for r in rows])
    write_manifest(f"{out}.manifest.json", manifest_for(
        config, "sensitivity", [csv_path],
        extra={"param": param, "rel_range": rel_range, "points": points}))
    return EXIT_OK


def cmd_cluster(config: RunConfig, out: str) -> int:
    if config.model_kind != "n_row":
        raise ConfigError("cluster requires model.kind = n_row")
    csv_path = f"{out}.csv"
    json_path = f"{out}.clusters.json"
    try:
        series = _series_for(config)
    except CFLViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CFL
    series.write_csv(csv_path)
    transient = int(0.6 * len(series))
    try:
        result = measure.detect_clusters(series, transient=transient)
        doc = {
            "clusters": [list(c) for c in result.clusters],
            "phases": list(result.phases),
            "amplitudes": list(result.amplitudes),
            "frequency": result.frequency,
            "amplitude_spread": result.amplitude_spread,
            "frequency_spread": result.frequency_spread,
            "antiphase": result.antiphase,
            "oscillating": True,
        }
    except NoOscillation as exc:
        doc = {"oscillating": False, "error": str(exc)}
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(f"{out}.manifest.json", manifest_for(
        config, "cluster", [csv_path, json_path]))
    return EXIT_OK


def cmd_params() -> int:
    print(json.dumps(default_config(), indent=2, sort_keys=True))
    return EXIT_OK


def _parse_deltas(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --deltas list: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axonesim",
        description="Motor-row sliding simulator and oscillation-onset analyzer")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config (or manifest) path")
        p.add_argument("--out", help="output path prefix")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       dest="overrides", help="override a config leaf by dotted path")

    common(sub.add_parser("simulate", help="run one model and write the trace"))
    common(sub.add_parser("analyze", help="onset quantities and spectrum report"))
    p_sweep = sub.add_parser("sweep", help="amplitude/frequency vs delta")
    common(p_sweep)
    p_sweep.add_argument("--deltas", default="0.05,0.1,0.15,0.2,0.25,0.3",
                         help="comma-separated list of delta values")
    p_sens = sub.add_parser("sensitivity", help="+/- scan of one parameter")
    common(p_sens)
    p_sens.add_argument("--param", choices=("k", "eta", "ell"), required=True)
    p_sens.add_argument("--rel-range", type=float, default=0.05)
    p_sens.add_argument("--points", type=int, default=11)
    common(sub.add_parser("cluster", help="N-row run plus cluster partition"))
    sub.add_parser("params", help="print the default configuration")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "params":
        return cmd_params()
    try:
        config = load_config(args.config, args.overrides)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("seed must be a 64-bit unsigned integer")
            config = RunConfig.from_dict({**config.data, "seed": args.seed})
        out = args.out or config.output
        if args.command == "simulate":
            return cmd_simulate(config, out)
        if args.command == "analyze":
            return cmd_analyze(config, out)
        if args.command == "sweep":
            return cmd_sweep(config, out, _parse_deltas(args.deltas))
        if args.command == "sensitivity":
            return cmd_sensitivity(config, out, args.param,
                                   args.rel_range, args.points)
        if args.command == "cluster":
            return cmd_cluster(config, out)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CFLViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CFL
    except NonFinite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE


if __name__ == "__main__":
    sys.exit(main())
