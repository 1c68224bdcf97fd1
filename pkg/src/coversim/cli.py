"""
coversim command line.

    coversim prioritymap RASTER --avg-r N [--close-r 5] [--open-r 10] [--out DIR]
    coversim simulate --config PATH [--out DIR] [--snapshot-every S] [--dry-run]
    coversim report LOG [--out DIR]
    coversim synth [--out FILE]

``--config`` also accepts the name of a bundled scenario (``desk``, ``fullsize``).

Log CSV columns, in order: step, t, J, J_near, min_dist, fallbacks, then per
drone i: x_i, y_i, ux_i, uy_i, speed_i, h_i. Numbers use 9 significant digits.

Exit codes: 0 success, 1 usage error, 2 input-data error, 3 runtime failure.
"""

import argparse
from dataclasses import replace
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .cbf_controller import CoincidentDronesError, QPInfeasible
from .config import ConfigError, dump_config, load_config
from .field_model import write_psi_raster
from .priority_pipeline import CategoricalMap, build_priority
from .rasters import InputDataError, read_raster, write_csv_raster, write_p2

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("coversim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _manifest(out_dir, config_echo, inputs, outputs, started):
    path = os.path.join(out_dir, "manifest.json")
    from .scenarios import file_digest

    data = {
        "version": __version__,
        "config": config_echo,
        "inputs": {p: file_digest(p) for p in inputs},
        "outputs": sorted(outputs + [path]),
        "wall_clock_s": round(time.time() - started, 3),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
    return path


def cmd_prioritymap(args):
    started = time.time()
    values, pitch, meta = read_raster(args.raster)
    cat = CategoricalMap((values > 0).astype(np.uint8), pitch)
    pm = build_priority(cat, args.close_r, args.open_r, args.avg_r, args.phi_max)
    os.makedirs(args.out, exist_ok=True)
    is_p2 = "maxval" in meta
    out = os.path.join(args.out, "priority.pgm" if is_p2 else "priority.csv")
    if is_p2:
        write_p2(out, pm.values, pm.pitch, phi_max=args.phi_max)
    else:
        write_csv_raster(out, pm.values, pm.pitch)
    echo = {"close_r": args.close_r, "open_r": args.open_r, "avg_r": args.avg_r,
            "phi_max": args.phi_max, "pitch_m": pitch, "shape": list(pm.shape)}
    _manifest(args.out, echo, [os.path.abspath(args.raster)], [out], started)
    print(out)
    return EXIT_OK


def _resolve_config(arg):
    if not os.path.exists(arg) and os.sep not in arg and not arg.endswith(".ini"):
        from .scenarios import scenario_path
        try:
            return scenario_path(arg)
        except FileNotFoundError:
            pass
    return arg


def cmd_simulate(args):
    from .scenarios import prepare
    from .sim_engine import run

    started = time.time()
    cfg = load_config(_resolve_config(args.config))
    if args.snapshot_every is not None:
        cfg = replace(cfg, sim_engine=replace(cfg.sim_engine, snapshot_every=args.snapshot_every))
    resolved = dump_config(cfg)
    if args.dry_run:
        sys.stdout.write(resolved)
        return EXIT_OK
    os.makedirs(args.out, exist_ok=True)
    world = prepare(cfg)
    log.info("grid %s, %d cells dropped outside the grid, J(0) from %.6g of %.6g importance kept",
             world.grid.shape, world.grid.dropped, world.kept_phi, world.total_phi)
    result = run(cfg, world)
    outputs = []
    cfg_path = os.path.join(args.out, "config.resolved.ini")
    with open(cfg_path, "w") as fh:
        fh.write(resolved)
    outputs.append(cfg_path)
    log_path = os.path.join(args.out, "log.csv")
    result.write_csv(log_path)
    outputs.append(log_path)
    for t, psi in result.snapshots:
        p = os.path.join(args.out, f"psi_t{t:09.3f}.csv")
        write_psi_raster(p, world.grid.with_psi(psi))
        outputs.append(p)
    if result.checkpoints:
        p = os.path.join(args.out, "checkpoints.csv")
        result.write_checkpoints(p, cfg.sim_engine.checkpoints)
        outputs.append(p)
    raster = cfg.field_model.raster
    inputs = [raster] if raster != "synthetic" else []
    _manifest(args.out, resolved, inputs, outputs, started)
    print(log_path)
    return EXIT_OK


def cmd_report(args):
    from .report import format_summary, read_log, summarize, write_figures

    data = read_log(args.log)
    print(format_summary(summarize(data, args.threshold)))
    out = args.out or os.path.dirname(os.path.abspath(args.log))
    if not args.no_figures:
        for p in write_figures(data, out, snapshot_dir=os.path.dirname(os.path.abspath(args.log))):
            log.info("wrote %s", p)
    return EXIT_OK


def cmd_synth(args):
    from .scenarios import synthetic_orchard

    cat = synthetic_orchard(args.width, args.height, args.pitch, args.seed)
    write_p2(args.out, cat.values, cat.pitch)
    print(args.out)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="coversim", description="Angle-aware multi-drone coverage simulator")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    pm = sub.add_parser("prioritymap", help="categorical canopy raster -> priority raster")
    pm.add_argument("raster")
    pm.add_argument("--out", default=".")
    pm.add_argument("--close-r", type=int, default=5)
    pm.add_argument("--open-r", type=int, default=10)
    pm.add_argument("--avg-r", type=int, required=True)
    pm.add_argument("--phi-max", type=float, default=1.0)
    pm.set_defaults(func=cmd_prioritymap)

    sm = sub.add_parser("simulate", help="run a coverage scenario")
    sm.add_argument("--config", required=True)
    sm.add_argument("--out", default="run")
    sm.add_argument("--snapshot-every", type=float, default=None, metavar="SECONDS")
    sm.add_argument("--dry-run", action="store_true")
    sm.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("report", help="summarize a simulation log and render figures")
    rp.add_argument("log")
    rp.add_argument("--out", default=None)
    rp.add_argument("--threshold", type=float, default=0.01)
    rp.add_argument("--no-figures", action="store_true")
    rp.set_defaults(func=cmd_report)

    sy = sub.add_parser("synth", help="write the synthetic orchard canopy raster (P2)")
    sy.add_argument("--out", default="orchard.pgm")
    sy.add_argument("--width", type=float, default=24.0)
    sy.add_argument("--height", type=float, default=39.0)
    sy.add_argument("--pitch", type=float, default=0.05)
    sy.add_argument("--seed", type=int, default=7)
    sy.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputDataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CoincidentDronesError, QPInfeasible) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
