"""Command-line front end: ``estranet detect | sweep | chart | generate``.

Exit codes: 0 success, 1 usage, 2 data error, 3 solver error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .chart import build_chart, load_result, to_svg, to_tsv
from .dual import SolverConfig
from .graph import ParseError, load_snapshots, write_snapshots
from .lpa import ConvergenceError
from .pipeline import PipelineConfig, run_pipeline
from .synthetic import HiddenGroupSpec, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("estranet")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Keys use flag names with or without dashes."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _env_seed() -> int:
    raw = os.environ.get("ESTRANET_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"ESTRANET_SEED must be an integer, got {raw!r}") from None


def _delta(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0 or math.isnan(v):
        raise argparse.ArgumentTypeError(f"delta must lie in [0, 1], got {text}")
    return v


def _deltas(text: str) -> list[float]:
    return [_delta(tok) for tok in text.replace(",", " ").split()]


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="base seed (default: $ESTRANET_SEED or 0)")
    p.add_argument("--lambda-max", type=float, default=10.0)
    p.add_argument("--xtol", type=float, default=1e-2, help="Brent tolerance on lambda")
    p.add_argument("--max-runs", type=int, default=200, help="cap on runs per dual evaluation")
    p.add_argument("--warm-start", action="store_true", help="start label search from previous labels")
    p.add_argument("--jaccard-common-only", action="store_true",
                   help="measure community overlap on shared nodes only")
    p.add_argument("--config", help="key=value file supplying flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="estranet", description="Temporal communities with bounded estrangement.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="run the pipeline and write the result JSON")
    p.add_argument("snapshots", help="snapshot file or directory of <t>.edges files")
    p.add_argument("--delta", type=_delta, default=0.05)
    p.add_argument("--report-loss", action="store_true", help="also record the unconstrained Q")
    p.add_argument("--out", help="result JSON path (default: stdout)")
    p.add_argument("--svg", help="also write the evolution chart as SVG")
    p.add_argument("--tsv", help="also write the evolution chart as TSV")
    _add_solver_flags(p)

    p = sub.add_parser("sweep", help="average E and Q loss over a list of delta values")
    p.add_argument("snapshots")
    p.add_argument("--deltas", type=_deltas, default=[0.01, 0.025, 0.05, 0.1, 0.2, 0.5, 1.0])
    p.add_argument("--out", help="TSV path (default: stdout)")
    _add_solver_flags(p)

    p = sub.add_parser("chart", help="render a result JSON as an evolution chart")
    p.add_argument("result")
    p.add_argument("--svg")
    p.add_argument("--tsv")
    p.add_argument("--cell", type=int, default=8, help="cell size in pixels")

    p = sub.add_parser("generate", help="write a synthetic hidden-group snapshot file")
    p.add_argument("--n-nodes", type=int, default=40)
    p.add_argument("--m-background", type=int, default=80)
    p.add_argument("--m-extra", type=int, default=20)
    p.add_argument("--n-snapshots", type=int, default=40)
    p.add_argument("--phase", action="append", metavar="T0-T1:NODES",
                   help="active group for a snapshot range, e.g. 0-19:0-9 (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="snapshot file path (default: stdout)")
    p.add_argument("--config")
    return parser


def _int_set(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def parse_phase(text: str) -> tuple[range, tuple]:
    try:
        window, members = text.split(":", 1)
        times = _int_set(window)
        return range(min(times), max(times) + 1), tuple(_int_set(members))
    except ValueError:
        raise UsageError(f"bad --phase {text!r}; expected e.g. 0-19:0-9") from None


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in read_config(cfg_path).items():
            if key not in known or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                conv = action.type or str
                try:
                    defaults[key] = conv(value)
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"config {key}: {exc}") from None
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if getattr(args, "seed", 0) is None:
        args.seed = _env_seed()
    return args


def _solver(args) -> SolverConfig:
    try:
        return SolverConfig(
            lambda_max=args.lambda_max,
            xtol=args.xtol,
            max_runs=args.max_runs,
            initial_runs=min(10, args.max_runs),
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(path) -> list:
    if not os.path.exists(path):
        raise DataError(f"{path}: no such file or directory")
    try:
        snaps = load_snapshots(path)
    except ParseError as exc:
        raise DataError(str(exc)) from None
    if not snaps:
        raise DataError(f"{path}: no snapshots")
    return snaps


def _emit(text: str, dest) -> None:
    if dest is None or dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


def result_json(result) -> str:
    return json.dumps(result.to_json(), indent=2) + "\n"


def cmd_detect(args) -> int:
    snaps = _load(args.snapshots)
    cfg = PipelineConfig(_solver(args), args.report_loss, args.warm_start, args.jaccard_common_only)
    result = run_pipeline(snaps, args.delta, cfg)
    for r in result.records:
        if r.loss is not None and r.loss < -1e-6:
            log.warning("t=%s: negative modularity loss %.3g from run sampling", r.t, r.loss)
    doc = result_json(result)
    _emit(doc, args.out)
    if args.svg or args.tsv:
        chart = build_chart(json.loads(doc))
        if args.svg:
            _emit(to_svg(chart), args.svg)
        if args.tsv:
            _emit(to_tsv(chart), args.tsv)
    return EXIT_OK


def sweep(snaps, deltas, cfg: PipelineConfig) -> list[tuple[float, float, float]]:
    """``(delta, mean E, mean Q loss)`` per delta, averaged over all snapshots."""
    cfg = PipelineConfig(cfg.solver, True, cfg.warm_start, cfg.jaccard_common_only)
    rows = []
    for d in deltas:
        res = run_pipeline(snaps, d, cfg)
        e = math.fsum(r.E for r in res.records) / len(res.records)
        loss = math.fsum(r.loss for r in res.records) / len(res.records)
        rows.append((d, e, loss))
    return rows


def cmd_sweep(args) -> int:
    snaps = _load(args.snapshots)
    cfg = PipelineConfig(_solver(args), True, args.warm_start, args.jaccard_common_only)
    lines = ["delta\tavg_E\tavg_Q_loss"]
    for d, e, loss in sweep(snaps, args.deltas, cfg):
        lines.append(f"{d!r}\t{e!r}\t{loss!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_chart(args) -> int:
    if not (args.svg or args.tsv):
        raise UsageError("chart needs --svg and/or --tsv")
    try:
        chart = build_chart(load_result(args.result))
    except OSError as exc:
        raise DataError(str(exc)) from None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if args.svg:
        _emit(to_svg(chart, args.cell), args.svg)
    if args.tsv:
        _emit(to_tsv(chart), args.tsv)
    return EXIT_OK


def cmd_generate(args) -> int:
    spec = HiddenGroupSpec(
        n_nodes=args.n_nodes,
        m_background=args.m_background,
        m_extra=args.m_extra,
        n_snapshots=args.n_snapshots,
        seed=args.seed,
    )
    if args.phase:
        spec.phases = [parse_phase(s) for s in args.phase]
    try:
        snaps = generate(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out is None or args.out == "-":
        write_snapshots(snaps, sys.stdout)
    else:
        write_snapshots(snaps, args.out)
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "sweep": cmd_sweep, "chart": cmd_chart, "generate": cmd_generate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2),
            format="%(levelname)s %(name)s: %(message)s",
        )
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"estranet: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"estranet: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"estranet: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
