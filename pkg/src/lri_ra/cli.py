"""Command line entry point: ``lri-ra run|sweep|trace``."""

import argparse
import logging
import sys
from pathlib import Path

from . import runner
from .config import ConfigError, SimConfig, load_config, parse_overrides
from .export import write_config_echo, write_results
from .strategy import write_snapshots
from .traffic import write_traffic_trace

log = logging.getLogger("lri_ra")


def _common(p):
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value (repeatable)")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--seed", type=int, help="base seed (overrides base_seed)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for replications")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="lri-ra", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run one experiment"))
    sw = sub.add_parser("sweep", help="run one experiment per parameter value")
    _common(sw)
    sw.add_argument("--param", required=True, choices=sorted(runner.SWEEPABLE))
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--schemes", help="comma-separated schemes, default: config scheme")
    tr = sub.add_parser("trace", help="dump per-frame traces of a single replication")
    _common(tr)
    tr.add_argument("--replication", type=int, default=0)
    return parser


def resolve_config(args):
    config = load_config(args.config) if args.config else SimConfig()
    changes = parse_overrides(args.overrides)
    if args.seed is not None:
        changes["base_seed"] = args.seed
    return config.replace(**changes) if changes else config.validate()


def _values(text, parameter):
    cast = int if parameter in ("beta", "n_devices", "k_slots") else float
    return [cast(v) for v in text.split(",") if v.strip()]


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "run":
        result = runner.run_experiment(config, jobs=args.jobs)
        write_results(args.out, [result])
        agg = result.aggregate
        print(f"{config.scheme}: T = {agg['T']['mean']:.4f} +/- {agg['T']['ci95']:.4f}, "
              f"L = {agg['L']['mean']:.4f} +/- {agg['L']['ci95']:.4f} "
              f"({agg['T']['n']}/{config.replications} replications defined)")
    elif args.command == "sweep":
        schemes = args.schemes.split(",") if args.schemes else None
        try:
            results = runner.sweep(config, args.param, _values(args.values, args.param),
                                   schemes=[s.strip().upper() for s in schemes] if schemes else None,
                                   jobs=args.jobs)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if not results:
            print("nothing to run")
            return 0
        write_results(args.out, results, parameter=args.param,
                      extra={"sweep": {"parameter": args.param, "values": args.values}})
        for r in results:
            value = r.config.to_dict()[args.param]
            print(f"{args.param}={value} {r.config.scheme}: T = {r.aggregate['T']['mean']:.4f}")
    else:
        rep = runner.run_replication(config, args.replication, keep_traces=True)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        write_config_echo(out / "config_echo.json", config, {"replication": args.replication})
        rep.learn_trace.write_csv(out / "trace.csv.gz")
        rep.measure_trace.write_csv(out / "measure_trace.csv.gz")
        write_traffic_trace(out / "traffic.csv", rep.learn_traffic)
        write_snapshots(out / "strategies.csv", list(rep.snapshots) + [("final", rep.strategies)])
        print(f"wrote traces for replication {args.replication} to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
