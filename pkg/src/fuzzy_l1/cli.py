"""Command line entry point.

Exit codes: 0 success, 1 validation or usage error, 2 runtime error,
3 simulation diverged when the scenario does not expect it.
"""

import argparse
import json
import sys
from pathlib import Path

from . import config, mopso, sim, tuning

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _bundled_names():
    return sorted(p.stem for p in config.data_dir().glob("*.json")
                  if p.stem not in ("trms_base", "best_compromise"))


def _print_errors(exc):
    for path, msg in exc.errors:
        print(f"invalid: {path}: {msg}", file=sys.stderr)


def _simulate(sc, args):
    out = Path(args.out or Path("out") / sc.name)
    out.mkdir(parents=True, exist_ok=True)
    tr = sim.run_scenario(sc, args.engine)
    sim.emit_csv(tr, out / "trace.csv")
    rms = None if tr.diverged else [float(v) for v in sim.rms_error(tr)]
    sim.emit_meta(tr, out / "meta.json", rms_error_5s=rms)
    if not args.no_plot:
        from .plotting import emit_plot

        emit_plot(tr, out / "trace.svg")
    state = "diverged" if tr.diverged else "bounded"
    print(f"{sc.name}: {state}, {len(tr)} rows -> {out}")
    if tr.diverged and not sc.expect_divergence:
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_simulate(args):
    return _simulate(config.load(args.config), args)


def cmd_scenario(args):
    return _simulate(config.load_bundled(args.name), args)


def cmd_validate(args):
    config.load(args.config)
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_tune(args):
    sc, cfg, opts = tuning.load_campaign(args.config)
    over = {k: getattr(args, k) for k in ("generations", "population", "seed") if getattr(args, k) is not None}
    if over:
        from dataclasses import replace

        cfg = replace(cfg, **over)
    workers = args.workers or opts["workers"]

    def progress(gen, glob, objs):
        if not args.quiet:
            print(f"generation {gen + 1}/{cfg.generations}: front {len(glob)}", file=sys.stderr)

    out = Path(args.out or "tune_out")
    res, best = tuning.run_tuning(sc, cfg, out, workers=workers, install=args.install, progress=progress)
    if not args.no_plot:
        from .plotting import emit_pareto_plot

        emit_pareto_plot(res.pareto.entries, out / "pareto.svg", best=best, history=res.history)
    print(f"front {len(res.pareto)} points, best compromise E={best[1][0]:.6g} U={best[1][1]:.6g} -> {out}")
    return EXIT_OK


def cmd_pareto(args):
    hist = tuning.read_history(args.history)
    front = tuning.front_from_history(hist, args.size)
    best = mopso.best_compromise(front)
    out = Path(args.out or Path(args.history).parent)
    out.mkdir(parents=True, exist_ok=True)
    tuning.write_pareto(front, out / "pareto.csv")
    with open(out / "best_compromise.json", "w") as fh:
        json.dump(tuning.compromise_record(best, source=str(args.history)), fh, indent=2)
    if not args.no_plot:
        from .plotting import emit_pareto_plot

        emit_pareto_plot(front, out / "pareto.svg", best=best, history=hist)
    print(f"front {len(front)} points, best compromise E={best[1][0]:.6g} U={best[1][1]:.6g} -> {out}")
    return EXIT_OK


def make_parser():
    ap = _Parser(prog="fuzzy-l1", description="Fuzzy-scheduled L1 adaptive control of a twin rotor model.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sim_opts(p):
        p.add_argument("--out", help="output directory (default out/<scenario>)")
        p.add_argument("--engine", choices=("kernel", "reference"), default="kernel")
        p.add_argument("--no-plot", action="store_true", help="skip the SVG figure")

    p = sub.add_parser("simulate", help="run one scenario config")
    p.add_argument("config")
    sim_opts(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("scenario", help="run a bundled scenario")
    p.add_argument("name", choices=_bundled_names())
    sim_opts(p)
    p.set_defaults(fn=cmd_scenario)

    p = sub.add_parser("tune", help="run a MOPSO tuning campaign")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--install", action="store_true", help="make the result the bundled default filter")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("pareto", help="re-extract front and compromise from history.csv")
    p.add_argument("history")
    p.add_argument("--out")
    p.add_argument("--size", type=int, default=50)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(fn=cmd_pareto)

    p = sub.add_parser("validate", help="check a scenario config")
    p.add_argument("config")
    p.set_defaults(fn=cmd_validate)
    return ap


def main(argv=None):
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except config.ConfigError as exc:
        _print_errors(exc)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID if args.command in ("validate", "simulate") else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
