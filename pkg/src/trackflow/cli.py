"""Command-line front end: scenario runs, calibration tables, road networks."""

import argparse
import json
import os
import sys

from .bounds import nob_table
from .model import AffineExecTime
from .netgen import generate_road_network, place_cameras
from .scenario import ConfigError, Scenario, load_config
from .tracking import save_placement

DEFAULT_RATES = [1] + list(range(10, 1001, 10))  # 1, 10, 20, ..., 1000


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    scn = Scenario(cfg, realtime=(args.mode == "realtime"), time_scale=args.time_scale)
    collector = scn.run()
    os.makedirs(args.out, exist_ok=True)
    collector.write_events_csv(os.path.join(args.out, "events.csv"))
    collector.write_timeline_csv(os.path.join(args.out, "timeline.csv"))
    collector.write_summary_json(os.path.join(args.out, "summary.json"))
    print(json.dumps(collector.summary(), sort_keys=True))
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    try:
        c0, c1 = (int(x) for x in args.xi.split(","))
    except ValueError:
        raise ConfigError(f"--xi expects 'c0,c1', got {args.xi!r}") from None
    xi = AffineExecTime(c0, c1, m_max=args.m_max)
    table = nob_table(xi, args.gamma, DEFAULT_RATES)
    with open(args.out, "w") as f:
        f.write(f"# rate_hz batch_size (headroom {args.gamma} ms)\n")
        for rate in sorted(table):
            f.write(f"{rate} {table[rate]}\n")
    print(f"wrote {len(table)} entries to {args.out}")
    return 0


def _cmd_make_network(args: argparse.Namespace) -> int:
    net, start = generate_road_network(
        args.vertices, args.edges, args.mean_length, args.seed
    )
    net.to_file(args.out)
    line = (
        f"wrote {len(net.vertices)} vertices / {net.edge_count()} edges to "
        f"{args.out} (mean edge {net.mean_edge_length():.1f} m, start vertex {start})"
    )
    if args.placement:
        placement = place_cameras(net, start, args.cameras)
        save_placement(placement, args.placement)
        line += f"; placed {len(placement)} cameras in {args.placement}"
    print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackflow",
        description="Deadline-aware streaming pipeline simulator for camera networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario config")
    p.add_argument("--config", required=True, help="path to a key = value config file")
    p.add_argument("--out", required=True, help="output directory for csv/json results")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--mode", choices=("des", "realtime"), default="des")
    p.add_argument("--time-scale", type=float, default=1.0,
                   help="realtime pacing factor (virtual seconds per wall second)")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("calibrate", help="write a rate -> batch-size table")
    p.add_argument("--xi", required=True, help="affine cost coefficients 'c0,c1' in ms")
    p.add_argument("--gamma", type=int, required=True, help="headroom budget in ms")
    p.add_argument("--out", required=True, help="output table path")
    p.add_argument("--m-max", type=int, default=25)
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("make-network", help="generate a synthetic road network")
    p.add_argument("--out", required=True, help="output graph path (edge list)")
    p.add_argument("--vertices", type=int, default=1000)
    p.add_argument("--edges", type=int, default=2817)
    p.add_argument("--mean-length", type=float, default=84.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--placement", default="", help="also write a camera placement here")
    p.add_argument("--cameras", type=int, default=1000)
    p.set_defaults(fn=_cmd_make_network)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
