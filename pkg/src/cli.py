"""Command-line surface: ``umbilic-mirror <command> [flags]``.

Reports go to stdout, JSON log lines to stderr and artifacts to ``--out``.
Exit status is 0 on success, 1 for failed verification or inconsistent glue
data, 2 for configuration errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import sys
import time
from collections.abc import Callable, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from src.codec import (
    monodromy_report,
    parse_loop,
    read_json,
    verification_report,
    wall_report,
    write_caustic_csv,
    write_json,
    write_mirror_csv,
    write_trajectory_csv,
)
from src.config import OUTPUT_FORMATS, ConfigError, RunConfig, load_run_config, parse_extra
from src.errors import InvalidLoop, UmbilicError
from src.fixtures import fixture_inventory
from src.flow import terminal_key
from src.homology import format_matrix
from src.logger import create_logger
from src.models import BasePoint, Caustic, RegionGraph, WallCatalogue
from src.monodromy import FULL_POLICY, NO_TWIST, compose_loop
from src.service import StratificationService
from src.strata import ring_loop
from src.svg import caustic_figure, graph_figure

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

Handler = Callable[[StratificationService, RunConfig, argparse.Namespace], int]


def _grid(text: str) -> tuple[int, int]:
    try:
        rings, angles = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like RxA, got {text!r}") from None
    return rings, angles


def _point(text: str) -> BasePoint:
    try:
        x1, x2 = (float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"point must look like X1,X2, got {text!r}") from None
    return BasePoint(x1=x1, x2=x2)


def _extra(text: str) -> tuple[str, float]:
    key, separator, value = text.partition("=")
    if not separator:
        raise argparse.ArgumentTypeError(f"extra term must look like i,j=c, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"extra coefficient {value!r} is not a number") from None


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", help="built-in generating function (umbilic, symmetric_umbilic)")
    common.add_argument("--function", type=Path, help="generating function JSON file")
    common.add_argument("--eps", type=float, help="coefficient of y1^2 + y2^2 (default 0.1)")
    common.add_argument(
        "--extra",
        type=_extra,
        action="append",
        metavar="I,J=C",
        help="extra perturbation monomial c y1^i y2^j; repeatable",
    )
    common.add_argument("--window", type=float, help="half-width of the square base window")
    common.add_argument("--grid", type=_grid, metavar="RxA", help="inner scan rings x angular spokes")
    common.add_argument("--tol-newton", type=float, help="Newton step tolerance (default 1e-12)")
    common.add_argument("--tol-integrator", type=float, help="integrator rtol; atol is 1e-3 of it")
    common.add_argument("--tol-wall", type=float, help="wall bisection tolerance (default 1e-6)")
    common.add_argument("--workers", type=int, help="scan worker processes (1..32)")
    common.add_argument("--seed", type=int, help="seed for sampling and random loops")
    common.add_argument("--out", type=Path, help="artifact directory (default ./out)")
    common.add_argument(
        "--format",
        dest="formats",
        choices=OUTPUT_FORMATS,
        action="append",
        help="artifact format; repeatable (default all)",
    )
    common.add_argument("--config", type=Path, help="TOML or JSON run configuration")
    common.add_argument(
        "--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR")
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="umbilic-mirror",
        description="Caustic, wall-crossing and monodromy data of the perturbed elliptic umbilic.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    caustic = commands.add_parser("caustic", parents=[common], help="trace the caustic and its cusps")
    caustic.set_defaults(handler=cmd_caustic)

    walls = commands.add_parser("walls", parents=[common], help="locate walls and print their glue")
    walls.set_defaults(handler=cmd_walls)

    graph = commands.add_parser("graph", parents=[common], help="build the full region graph")
    graph.set_defaults(handler=cmd_graph)

    monodromy = commands.add_parser("monodromy", parents=[common], help="compose a loop's monodromy")
    monodromy.add_argument(
        "--loop",
        required=True,
        help='loop JSON (inline or a file): {"base":..,"crossings":[..]} or {"ring": k}',
    )
    monodromy.add_argument("--graph", type=Path, help="region graph JSON; computed when omitted")
    monodromy.add_argument("--no-twist", action="store_true", help="drop the twist-line glue")
    monodromy.set_defaults(handler=cmd_monodromy)

    verify = commands.add_parser("verify", parents=[common], help="check the wall-crossing identities")
    mode = verify.add_mutually_exclusive_group()
    mode.add_argument("--fixtures", action="store_true", help="exact fixture suite (default)")
    mode.add_argument("--numeric", action="store_true", help="also check the computed stratification")
    verify.add_argument("--list", action="store_true", help="list the fixture cases and exit")
    verify.set_defaults(handler=cmd_verify)

    sheets = commands.add_parser("sheets", parents=[common], help="sheet permutation around the caustic")
    sheets.add_argument("--radius", type=float, help="circle radius (default half the window)")
    sheets.set_defaults(handler=cmd_sheets)

    separatrices = commands.add_parser(
        "separatrices", parents=[common], help="trace the saddle separatrices over one base point"
    )
    separatrices.add_argument("--at", type=_point, metavar="X1,X2", help="base point (default x*)")
    separatrices.set_defaults(handler=cmd_separatrices)

    mirror = commands.add_parser("mirror-sample", parents=[common], help="sample the mirror data on a grid")
    mirror.add_argument("--n", type=int, default=21, help="grid points per axis")
    mirror.set_defaults(handler=cmd_mirror_sample)
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""

    config = load_run_config(args.config) if args.config is not None else RunConfig()
    if args.preset is not None and args.function is None:
        config = replace(config, function_path=None)
    changes: dict[str, Any] = {
        "preset": args.preset,
        "function_path": args.function,
        "eps": args.eps,
        "window": args.window,
        "out": args.out,
        "formats": tuple(dict.fromkeys(args.formats)) if args.formats else None,
        "extra": parse_extra(dict(args.extra)) if args.extra else None,
        "newton_tolerance": args.tol_newton,
        "wall_tolerance": args.tol_wall,
        "scan_workers": args.workers,
        "seed": args.seed,
    }
    if args.tol_integrator is not None:
        changes["integrator_rtol"] = args.tol_integrator
        changes["integrator_atol"] = args.tol_integrator * 1e-3
    if args.grid is not None:
        changes["grid_inner"], changes["grid_angles"] = args.grid
    return config.with_overrides(**changes)


def _output_dir(config: RunConfig) -> Path:
    config.out.mkdir(parents=True, exist_ok=True)
    return config.out


def _describe_caustic(caustic: Caustic) -> str:
    if caustic.degenerate:
        return f"caustic degenerates to the point ({caustic.center[0]:.6g}, {caustic.center[1]:.6g})\n"
    lines = [f"caustic: {len(caustic.points)} points, {len(caustic.cusps)} cusps"]
    lines += [
        f"  cusp {cusp.id}: ({cusp.point[0]:+.6f}, {cusp.point[1]:+.6f}) merges s{cusp.pair[0]} s{cusp.pair[1]}"
        for cusp in caustic.cusps
    ]
    return "\n".join(lines) + "\n"


def cmd_caustic(service: StratificationService, config: RunConfig, _args: argparse.Namespace) -> int:
    caustic = service.caustic(config)
    out = _output_dir(config)
    if "json" in config.formats:
        write_json(out / "caustic.json", caustic)
    if "csv" in config.formats:
        write_caustic_csv(out / "caustic.csv", caustic)
    if "svg" in config.formats:
        caustic_figure(caustic).save(out / "caustic.svg")
    sys.stdout.write(_describe_caustic(caustic))
    return EXIT_OK


def cmd_walls(service: StratificationService, config: RunConfig, _args: argparse.Namespace) -> int:
    strat = service.stratify(config)
    graph = strat.graph
    out = _output_dir(config)
    if "json" in config.formats:
        write_json(out / "walls.json", WallCatalogue(walls=graph.walls, twist_lines=graph.twist_lines))
    if "svg" in config.formats:
        shown = [wall.id for wall in graph.all_walls if wall.kind != "fold"]
        graph_figure(graph, strat.caustic, shown).save(out / "walls.svg")
    sys.stdout.write(wall_report(graph))
    return EXIT_OK


def cmd_graph(service: StratificationService, config: RunConfig, _args: argparse.Namespace) -> int:
    strat = service.stratify(config)
    graph = strat.graph
    out = _output_dir(config)
    if "json" in config.formats:
        write_json(out / "graph.json", graph)
    if "csv" in config.formats:
        write_caustic_csv(out / "caustic.csv", strat.caustic)
    if "svg" in config.formats:
        graph_figure(graph, strat.caustic).save(out / "graph.svg")
    inside = sum(1 for region in graph.regions if region.inside)
    lines = [
        f"regions: {len(graph.regions)} ({inside} inside the caustic)",
        f"walls: {len(graph.walls)}, twist lines: {len(graph.twist_lines)}",
    ]
    lines += [f"  cusp {cusp.id} s{cusp.pair[0]}s{cusp.pair[1]} case ({cusp.case})" for cusp in graph.cusps]
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _read_text(source: str) -> str:
    if source.lstrip().startswith("{"):
        return source
    try:
        return Path(source).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {source}: {exc.strerror}") from exc


def _load_graph(path: Path) -> RegionGraph:
    try:
        return read_json(RegionGraph, path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except (ValidationError, ValueError) as exc:
        raise ConfigError(f"{path} is not a region graph: {exc}") from exc


def cmd_monodromy(service: StratificationService, config: RunConfig, args: argparse.Namespace) -> int:
    parsed = parse_loop(_read_text(args.loop))
    if args.graph is not None:
        if isinstance(parsed, int):
            raise InvalidLoop("ring loops need a computed stratification; drop --graph")
        graph, loop = _load_graph(args.graph), parsed
    else:
        strat = service.stratify(config)
        graph = strat.graph
        loop = ring_loop(strat, parsed) if isinstance(parsed, int) else parsed
    result = compose_loop(graph, loop, NO_TWIST if args.no_twist else FULL_POLICY)
    if "json" in config.formats:
        write_json(_output_dir(config) / "monodromy.json", result)
    sys.stdout.write(monodromy_report(result))
    return EXIT_OK


def cmd_verify(service: StratificationService, config: RunConfig, args: argparse.Namespace) -> int:
    if args.list:
        for name, family, description in fixture_inventory():
            sys.stdout.write(f"{name:<20} {family:<14} {description}\n")
        return EXIT_OK
    report = service.verify_numeric(config) if args.numeric else service.verify_fixtures(config)
    if "json" in config.formats:
        write_json(_output_dir(config) / "verification.json", report)
    sys.stdout.write(verification_report(report))
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_sheets(service: StratificationService, config: RunConfig, args: argparse.Namespace) -> int:
    result = service.sheet_monodromy(config, args.radius)
    if "json" in config.formats:
        write_json(_output_dir(config) / "sheets.json", result)
    sys.stdout.write(
        f"permutation: {list(result.permutation)} after {result.steps} steps\n"
        f"{format_matrix(result.matrix)}\n"
    )
    return EXIT_OK


def cmd_separatrices(service: StratificationService, config: RunConfig, args: argparse.Namespace) -> int:
    found = service.separatrices(config, args.at)
    out = _output_dir(config)
    lines: list[str] = []
    for position, separatrices in enumerate(found, start=1):
        name = separatrices.saddle if separatrices.saddle != "unlabeled" else f"saddle{position}"
        for branch in separatrices.branches:
            if "csv" in config.formats:
                write_trajectory_csv(out / f"separatrix-{name}-{branch.branch}.csv", branch)
            lines.append(f"{name} {branch.branch}: {terminal_key(branch.terminal)}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_mirror_sample(service: StratificationService, config: RunConfig, args: argparse.Namespace) -> int:
    if args.n < 2:
        raise ConfigError("--n must be at least 2")
    samples = service.mirror_sample(config, args.n)
    path = write_mirror_csv(_output_dir(config) / "mirror.csv", samples)
    sys.stdout.write(f"{len(samples)} sheet samples written to {path}\n")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logger = create_logger(level=args.log_level)
    handler: Handler = args.handler
    started = time.monotonic()
    try:
        config = build_config(args)
        service = StratificationService(workers=config.settings.scan_workers)
        status = handler(service, config, args)
    except ConfigError as exc:
        status = EXIT_CONFIG
        logger.error("command_failed", extra={"command": args.command, "code": "config_error"})
        sys.stderr.write(f"error: {exc}\n")
    except UmbilicError as exc:
        status = exc.exit_code
        logger.error("command_failed", extra={"command": args.command, "code": exc.code})
        sys.stderr.write(f"error [{exc.code}]: {exc.message}\n")
    logger.info(
        "command_completed",
        extra={
            "command": args.command,
            "exit_code": status,
            "duration_ms": round((time.monotonic() - started) * 1000, 3),
        },
    )
    return status
