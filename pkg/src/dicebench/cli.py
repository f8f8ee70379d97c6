"""``dicebench`` command line: synth, optimal, descend, sweep, verify, figures.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .descent import CE_DEFAULT_FACTOR, DescentConfig, run_ce_descent, run_descent
from .errors import DiceBenchError
from .experiments import (
    CONFIG_KEYS,
    checks_csv,
    emit_figure_data,
    fmt,
    parse_sweep_config,
    run_sweep,
    trace_csv,
    verify_theorems,
)
from .grid import MarginalMap, l1_norm, parse_dims, read_grid, threshold, write_grid
from .optimal import MAX_VOLUME, MIN_VOLUME, optimal_segmentation, solve_optimal_dice
from .synth import SynthConfig, make_synthetic

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE = 0, 1, 2

OPTIMAL_REPORT_COLUMNS = [
    "sup_dice", "tau", "below_mass", "tie_mass", "above_mass", "argmax_threshold_value", "degenerate",
    "mode", "volume", "vol_min", "vol_max", "m_volume", "ce_volume",
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(","))


def _descent_args(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--record", type=_int_list, default=(1, 10, 20, 100, 200))
    p.add_argument("--gamma-factor", type=float, default=None,
                   help=f"gamma = factor * N (default 10 for soft-Dice, {CE_DEFAULT_FACTOR:g} for CE)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dicebench", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic marginal")
    p.add_argument("--rho", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=float, default=0.2)
    p.add_argument("--dims", type=parse_dims, default=(200, 200))
    p.add_argument("--amplitude", type=float, default=0.05)
    p.add_argument("--correlation", type=float, default=0.1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("optimal", help="optimal Dice segmentation of a marginal")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--mode", choices=["min", "max"], default="max")
    p.add_argument("--out", required=True)
    p.add_argument("--report")

    p = sub.add_parser("descend", help="gradient descent trace for one marginal")
    p.add_argument("--marginal", required=True)
    p.add_argument("--loss", choices=["soft-dice", "ce"], default="soft-dice")
    _descent_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="Table-1 style sweep from a config file",
                       epilog="config keys:\n" + CONFIG_KEYS, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="overrides output_dir from the config")

    p = sub.add_parser("verify", help="run the theorem verification suites")
    p.add_argument("--dims", type=parse_dims, default=(100, 100))
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the check table as CSV")

    p = sub.add_parser("figures", help="export grids and curves for iterate panels")
    p.add_argument("--marginal", required=True)
    _descent_args(p)
    p.add_argument("--case", default=None)
    p.add_argument("--out", required=True)
    return ap


def _cfg(args, default_factor=10.0) -> DescentConfig:
    factor = args.gamma_factor if args.gamma_factor is not None else default_factor
    return DescentConfig(factor, args.iters, args.record, args.seed)


def cmd_synth(args) -> int:
    cfg = SynthConfig(args.dims, args.radius, args.rho, args.amplitude, args.correlation, args.seed)
    m = make_synthetic(cfg)
    write_grid(m, args.out)
    print(f"wrote {args.out}  dims={'x'.join(map(str, m.dims))}  |m|_1={l1_norm(m):.6f}")
    return EXIT_OK


def cmd_optimal(args) -> int:
    m = read_grid(args.inp, MarginalMap)
    sol = solve_optimal_dice(m)
    smin = optimal_segmentation(sol, m, MIN_VOLUME)
    smax = optimal_segmentation(sol, m, MAX_VOLUME)
    s = smin if args.mode == "min" else smax
    write_grid(s, args.out)
    row = [sol.sup_dice, sol.tau, sol.below_mass, sol.tie_mass, sol.above_mass, sol.argmax_threshold_value,
           sol.degenerate, args.mode, l1_norm(s), l1_norm(smin), l1_norm(smax), l1_norm(m),
           l1_norm(threshold(m, 0.5))]
    text = ",".join(OPTIMAL_REPORT_COLUMNS) + "\n" + ",".join(fmt(v) for v in row) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_descend(args) -> int:
    m = read_grid(args.marginal, MarginalMap)
    if args.loss == "ce":
        trace = run_ce_descent(m, _cfg(args, CE_DEFAULT_FACTOR))
    else:
        sol = solve_optimal_dice(m)
        trace = run_descent(m, _cfg(args), optimal_segmentation(sol, m, MAX_VOLUME))
    text = trace_csv(trace)
    Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    path = Path(args.config)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DiceBenchError(str(exc)) from exc
    spec = parse_sweep_config(text, path.parent)
    if args.out_dir:
        spec.output_dir = args.out_dir
    report = run_sweep(spec)
    for row in report.rows:
        last = report.record_at[-1]
        if row.status == "ok":
            print(f"{row.case:>14}  e0_{last}={row.e0[last]:.4f}  e1_{last}={row.e1[last]:.4f}  "
                  f"sup_dice={row.sup_dice:.4f}")
        else:
            print(f"{row.case:>14}  {row.status}")
    print(f"wrote {Path(spec.output_dir) / 'report.csv'}")
    return EXIT_OK if all(r.status == "ok" for r in report.rows) else EXIT_USAGE


def cmd_verify(args) -> int:
    checks = verify_theorems(args.dims, args.trials, args.seed)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.suite:<12} {c.name}  margin={c.margin:.3g} {c.detail}")
    if args.out:
        Path(args.out).write_text(checks_csv(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY_FAILED


def cmd_figures(args) -> int:
    m = read_grid(args.marginal, MarginalMap)
    sol = solve_optimal_dice(m)
    s_star = optimal_segmentation(sol, m, MAX_VOLUME)
    trace = run_descent(m, _cfg(args), s_star, snapshot=True)
    case = args.case or Path(args.marginal).stem
    for p in emit_figure_data(m, trace, s_star, args.out, case):
        print(p)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "optimal": cmd_optimal,
    "descend": cmd_descend,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "figures": cmd_figures,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DiceBenchError, ValueError, OSError) as exc:
        print(f"dicebench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
