"""Canonical JSON, CSV dumps and plain-text reports."""

from __future__ import annotations

import csv
import json
from collections.abc import Sequence
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from src.errors import InvalidLoop, InvalidPerturbation, UmbilicError
from src.homology import format_matrix
from src.models import (
    Caustic,
    Crossing,
    GeneratingFunction,
    Loop,
    MirrorSample,
    MonodromyResult,
    RegionGraph,
    Trajectory,
    VerificationReport,
)
from src.monodromy import crossing_glue

ModelT = TypeVar("ModelT", bound=BaseModel)


def dumps(model: BaseModel) -> str:
    """Sorted keys and fixed indentation, so load + dump is byte-identical."""

    return json.dumps(model.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def loads(model_type: type[ModelT], text: str) -> ModelT:
    return model_type.model_validate(json.loads(text))


def write_json(path: Path, model: BaseModel) -> Path:
    path.write_text(dumps(model), encoding="utf-8")
    return path


def read_json(model_type: type[ModelT], path: Path) -> ModelT:
    return loads(model_type, path.read_text(encoding="utf-8"))


def load_generating_function(path: Path) -> GeneratingFunction:
    """Read ``{"monomials": [{"i": .., "j": .., "c": ..}, ...]}``."""

    try:
        return read_json(GeneratingFunction, path)
    except (ValidationError, json.JSONDecodeError) as exc:
        raise InvalidPerturbation(f"{path} is not a valid generating function: {exc}") from exc


def parse_loop(text: str) -> Loop | int:
    """A loop document, or the ring index of ``{"ring": k}``."""

    try:
        payload: Any = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidLoop(f"loop is not valid JSON: {exc.msg}") from exc
    if isinstance(payload, dict) and set(payload) == {"ring"}:
        if not isinstance(payload["ring"], int) or isinstance(payload["ring"], bool):
            raise InvalidLoop("ring must be an integer")
        return payload["ring"]
    try:
        return Loop.model_validate(payload)
    except ValidationError as exc:
        raise InvalidLoop(f"malformed loop: {exc.error_count()} validation errors") from exc


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_caustic_csv(path: Path, caustic: Caustic) -> Path:
    rows = [
        (k, x[0], x[1], y[0], y[1])
        for k, (x, y) in enumerate(zip(caustic.points, caustic.preimages, strict=True))
    ]
    return _write_rows(path, ("index", "x1", "x2", "y1", "y2"), rows)


def write_trajectory_csv(path: Path, trajectory: Trajectory) -> Path:
    rows = [(t, y[0], y[1]) for t, y in zip(trajectory.times, trajectory.samples, strict=True)]
    return _write_rows(path, ("t", "y1", "y2"), rows)


def write_mirror_csv(path: Path, samples: Sequence[MirrorSample]) -> Path:
    rows = [
        (s.x1, s.x2, s.sheet, s.y1, s.y2, s.h, s.weight_real, s.weight_imag) for s in samples
    ]
    return _write_rows(path, ("x1", "x2", "sheet", "y1", "y2", "h", "re", "im"), rows)


def _indent(text: str, prefix: str = "  ") -> str:
    return "\n".join(prefix + line for line in text.splitlines())


def wall_report(graph: RegionGraph) -> str:
    """Every wall's glue matrix for a crossing from its left to its right side."""

    sections = []
    for wall in graph.all_walls:
        title = f"{wall.id} ({wall.kind}) R{wall.left} -> R{wall.right}"
        if wall.pair is not None and wall.kind == "bifurcation":
            title += f" s{wall.pair[0]}->s{wall.pair[1]} tau={wall.tau}"
        if wall.dying is not None:
            title += f" dying s{wall.dying}"
        try:
            glue, _ = crossing_glue(graph, wall.left, Crossing(wall=wall.id, direction=1))
        except UmbilicError as exc:
            sections.append(f"{title}\n  unavailable: {exc.message}")
            continue
        sections.append(
            f"{title}\n  chain:\n{_indent(format_matrix(glue.chain_map), '    ')}"
            f"\n  homology:\n{_indent(format_matrix(glue.induced), '    ')}"
        )
    return "\n\n".join(sections) + "\n"


def monodromy_report(result: MonodromyResult) -> str:
    lines = [f"loop based at R{result.loop.base}:"]
    for step in result.steps:
        arrow = "+" if step.direction == 1 else "-"
        lines.append(f"  {arrow}{step.wall}\n{_indent(format_matrix(step.induced), '    ')}")
    lines.append("product:")
    lines.append(_indent(format_matrix(result.matrix)))
    lines.append(f"identity: {'yes' if result.is_identity else 'no'}")
    return "\n".join(lines) + "\n"


def verification_report(report: VerificationReport) -> str:
    lines = [
        f"{'PASS' if item.passed else 'FAIL'}  {item.name}" + (f"  ({item.detail})" if item.detail and not item.passed else "")
        for item in report.items
    ]
    summary = report.summary
    lines.append(f"{summary.passed}/{summary.total} passed, {summary.failed} failed ({report.mode})")
    return "\n".join(lines) + "\n"
