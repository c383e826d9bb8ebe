"""Local analytic data of the mirror bundle: sheets, connection, potentials, weights."""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from src.config import Settings
from src.errors import DegenerateFiber, PatchNotSimplyConnected, SheetCollision, SolverDivergence, WeightOverflow
from src.family import SaddleLabeler, critical_points, default_labeler, solve_fiber, value
from src.logger import get_logger
from src.models import (
    BasePoint,
    ConnectionSample,
    CriticalPoint,
    FiberData,
    FramePotential,
    GeneratingFunction,
    MirrorSample,
    Point,
    Sheet,
    SheetData,
)

ConnectionPotential = Callable[[str, BasePoint], float]
"""Real potential A(x) of the flat connection on one sheet; zero unless supplied."""

_WEIGHT_EXPONENT_LIMIT = 700.0

logger = get_logger("mirror")


def _sheet_labels(fiber: FiberData) -> tuple[Sheet, ...]:
    if fiber.labeled:
        return tuple(Sheet(label=point.label, y=point.y) for point in fiber.points)
    return tuple(Sheet(label=f"p{k + 1}", y=point.y) for k, point in enumerate(fiber.points))


def sheets(
    f: GeneratingFunction,
    x: BasePoint,
    settings: Settings | None = None,
    labeler: SaddleLabeler | None = None,
    w: Point = (0.0, 0.0),
) -> SheetData:
    """Points of L over ``x``, labeled by continuation when f has a caustic interior."""

    settings = settings or Settings()
    fiber = critical_points(f, x, settings, labeler)
    return SheetData(base=x, sheets=_sheet_labels(fiber), w=w)


def _match(current: SheetData, points: Sequence[CriticalPoint], settings: Settings) -> SheetData | None:
    old = np.array([sheet.y for sheet in current.sheets])
    new = np.array([point.y for point in points])
    if len(new) > 1:
        spacing = cdist(new, new)
        np.fill_diagonal(spacing, math.inf)
        if float(spacing.min()) < settings.continuation_tolerance:
            return None
    cost = cdist(old, new)
    rows, cols = linear_sum_assignment(cost)
    separation = cdist(old, old)
    np.fill_diagonal(separation, math.inf)
    scale = separation.min(axis=1) if len(old) > 1 else np.full(len(old), math.inf)
    moved: list[Sheet] = [current.sheets[0]] * len(old)
    for row, col in zip(rows, cols, strict=True):
        if cost[row, col] > settings.label_ratio * scale[row]:
            return None
        moved[row] = Sheet(label=current.sheets[row].label, y=(float(new[col][0]), float(new[col][1])))
    return SheetData(base=current.base, sheets=tuple(moved), w=current.w)


def _advance(f: GeneratingFunction, current: SheetData, target: Point, settings: Settings) -> SheetData:
    origin = np.array(current.base.pair)
    delta = np.array(target) - origin
    if not np.any(delta):
        return current
    min_step = 0.5**settings.max_halvings
    t, step = 0.0, 1.0
    while t < 1.0:
        step = min(step, 1.0 - t)
        upcoming = 1.0 if t + step >= 1.0 - 1e-15 else t + step
        base = BasePoint(x1=float(origin[0] + upcoming * delta[0]), x2=float(origin[1] + upcoming * delta[1]))
        matched: SheetData | None = None
        try:
            points = solve_fiber(f, base, settings)
            if len(points) == len(current.sheets):
                matched = _match(current, points, settings)
        except (DegenerateFiber, SolverDivergence):
            matched = None
        if matched is None:
            if step > min_step:
                step /= 2.0
                continue
            raise SheetCollision(f"sheets cannot be followed through x={base.pair}")
        current = matched.model_copy(update={"base": base})
        t = upcoming
        step *= 2.0
    return current


def continue_sheets(
    f: GeneratingFunction,
    start: SheetData,
    path: Sequence[Point],
    settings: Settings | None = None,
) -> tuple[SheetData, ...]:
    """Follow every sheet of ``start`` along the polyline ``path``; one SheetData per vertex."""

    settings = settings or Settings()
    current = start
    samples = []
    for point in path:
        current = _advance(f, current, point, settings)
        samples.append(current)
    return tuple(samples)


def closing_permutation(start: SheetData, end: SheetData) -> tuple[int, ...]:
    """Index of the starting sheet each continued sheet lands on."""

    permutation = tuple(
        int(np.argmin([math.dist(sheet.y, other.y) for other in start.sheets])) for sheet in end.sheets
    )
    if sorted(permutation) != list(range(len(start.sheets))):
        raise SheetCollision("continued sheets do not return onto distinct starting sheets")
    return permutation


def connection_form(data: SheetData) -> ConnectionSample:
    """A_i = i (y_i1 dz1 + y_i2 dz2), one diagonal term per sheet."""

    return ConnectionSample(
        base=data.base,
        labels=tuple(sheet.label for sheet in data.sheets),
        imaginary=tuple(sheet.y for sheet in data.sheets),
    )


def _legendre(f: GeneratingFunction, x: BasePoint, y: Point) -> float:
    return x.x1 * y[0] + x.x2 * y[1] - value(f, y)


def legendre_potential(
    f: GeneratingFunction,
    label: str,
    x: BasePoint,
    settings: Settings | None = None,
    start: SheetData | None = None,
) -> float:
    """h(x) = x . y(x) - f(y(x)) on one sheet.

    With ``start`` the sheet is continued from there, and the straight path is
    compared against the path through the corner (x1, start x2).
    """

    settings = settings or Settings()
    if start is None:
        return _legendre(f, x, sheets(f, x, settings).sheet(label).y)
    direct = continue_sheets(f, start, [x.pair], settings)[-1].sheet(label).y
    corner = (x.x1, start.base.x2)
    around = continue_sheets(f, start, [corner, x.pair], settings)[-1].sheet(label).y
    if math.dist(direct, around) > 10.0 * settings.continuation_tolerance:
        raise PatchNotSimplyConnected(
            f"sheet {label} reaches x={x.pair} at different points along different paths"
        )
    return _legendre(f, x, direct)


def legendre_gradient(
    f: GeneratingFunction,
    label: str,
    x: BasePoint,
    settings: Settings | None = None,
    step: float = 1e-4,
) -> Point:
    """Central differences of the Legendre potential; equals the sheet position."""

    settings = settings or Settings()
    start = sheets(f, x, settings)
    gradient = []
    for axis in range(2):
        shift = np.zeros(2)
        shift[axis] = step
        forward = BasePoint(x1=x.x1 + shift[0], x2=x.x2 + shift[1])
        backward = BasePoint(x1=x.x1 - shift[0], x2=x.x2 - shift[1])
        ahead = continue_sheets(f, start, [forward.pair], settings)[-1].sheet(label).y
        behind = continue_sheets(f, start, [backward.pair], settings)[-1].sheet(label).y
        gradient.append((_legendre(f, forward, ahead) - _legendre(f, backward, behind)) / (2.0 * step))
    return (gradient[0], gradient[1])


def frame_weight(h: float, connection: float, dh_dx: Point, w: Point) -> complex:
    """exp[2 pi (h/2 - A/(4 pi) + i dh/dx . w)]."""

    exponent = math.pi * h - connection / 2.0
    if abs(exponent) > _WEIGHT_EXPONENT_LIMIT:
        raise WeightOverflow(f"frame weight exponent {exponent:.4g} is out of floating range")
    phase = 2.0 * math.pi * (dh_dx[0] * w[0] + dh_dx[1] * w[1])
    return complex(np.exp(complex(exponent, phase)))


def frame_potential(
    f: GeneratingFunction,
    data: SheetData,
    label: str,
    connection: ConnectionPotential | None = None,
) -> FramePotential:
    y = data.sheet(label).y
    h = _legendre(f, data.base, y)
    a = connection(label, data.base) if connection is not None else 0.0
    weight = frame_weight(h, a, y, data.w)
    return FramePotential(label=label, h=h, connection=a, weight_real=weight.real, weight_imag=weight.imag)


@dataclass(frozen=True, slots=True)
class SheetTransport:
    samples: tuple[SheetData, ...]
    potentials: tuple[tuple[FramePotential, ...], ...]
    permutation: tuple[int, ...]


def transport_sheets(
    f: GeneratingFunction,
    points: Sequence[Point],
    settings: Settings | None = None,
    connection: ConnectionPotential | None = None,
) -> SheetTransport:
    """Carry sheets and their potentials once around the closed path ``points``."""

    settings = settings or Settings()
    start = sheets(f, BasePoint(x1=points[0][0], x2=points[0][1]), settings)
    samples = (start, *continue_sheets(f, start, [*points[1:], points[0]], settings))
    potentials = tuple(
        tuple(frame_potential(f, data, sheet.label, connection) for sheet in data.sheets) for data in samples
    )
    return SheetTransport(
        samples=samples,
        potentials=potentials,
        permutation=closing_permutation(start, samples[-1]),
    )


def sample_grid(
    f: GeneratingFunction,
    box: tuple[float, float, float, float],
    n: int,
    settings: Settings | None = None,
    connection: ConnectionPotential | None = None,
    w: Point = (0.0, 0.0),
) -> tuple[MirrorSample, ...]:
    """Sheets, potentials and weights on an n x n grid over ``box`` = (x1 min, x1 max, x2 min, x2 max)."""

    settings = settings or Settings()
    started = time.monotonic()
    labeler = default_labeler(f, settings)
    rows: list[MirrorSample] = []
    skipped = 0
    for x1 in np.linspace(box[0], box[1], n):
        for x2 in np.linspace(box[2], box[3], n):
            base = BasePoint(x1=float(x1), x2=float(x2))
            try:
                data = sheets(f, base, settings, labeler, w)
            except (DegenerateFiber, SolverDivergence):
                skipped += 1
                continue
            for sheet in data.sheets:
                potential = frame_potential(f, data, sheet.label, connection)
                rows.append(
                    MirrorSample(
                        x1=base.x1,
                        x2=base.x2,
                        sheet=sheet.label,
                        y1=sheet.y[0],
                        y2=sheet.y[1],
                        h=potential.h,
                        weight_real=potential.weight_real,
                        weight_imag=potential.weight_imag,
                    )
                )
    logger.info(
        "mirror_grid_completed",
        extra={
            "rows": len(rows),
            "skipped": skipped,
            "duration_ms": round((time.monotonic() - started) * 1000, 3),
        },
    )
    return tuple(rows)
