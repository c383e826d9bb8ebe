"""Caustic tracing, polar scans of the base window and region-graph assembly.

The base window is scanned on a polar grid about the reference point x*.
Every grid node carries a labeled fiber and its flow signature; nodes with
equal signatures that touch on the grid form a region, and every grid edge
joining two regions is bisected down to the wall that separates them.
"""

from __future__ import annotations

import itertools
import math
import time
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from src.config import ConfigError, Settings
from src.errors import (
    ArrangementFailure,
    DegenerateFiber,
    IntegrationFailure,
    LabelMismatch,
    NearWall,
    OpenCurve,
    PlacementConflict,
    SolverDivergence,
    UnresolvedWall,
)
from src.family import (
    FloatArray,
    SaddleLabeler,
    critical_points,
    default_labeler,
    det_hessian,
    det_hessian_gradient,
    gradient,
    hessian,
    max_det_hessian_point,
    solve_fiber,
)
from src.flow import flow_signature, stable_branches, unstable_branches
from src.homology import ALL_SADDLES, wall_tau
from src.logger import get_logger
from src.models import (
    SADDLE_LABELS,
    BasePoint,
    Caustic,
    Crossing,
    Cusp,
    CuspCase,
    FiberData,
    FoldArc,
    GeneratingFunction,
    IncidenceMatrix,
    Loop,
    Point,
    Region,
    RegionGraph,
    Trajectory,
    Wall,
    WallKind,
    saddle_index,
)
from src.monodromy import resolve_taus

Signature = tuple[str, ...]

_TWO_PI = 2.0 * math.pi
_CIRCLE_SAMPLES = 64
_MAX_ROTATION = math.radians(80.0)
_MAX_SPLITS = 4

logger = get_logger("strata")


# Caustic ---------------------------------------------------------------------


def _correct(f: GeneratingFunction, guess: FloatArray, settings: Settings) -> FloatArray | None:
    """Newton projection of ``guess`` onto det Hess f = 0 along the gradient of det Hess."""

    y = np.asarray(guess, dtype=float).copy()
    for _ in range(50):
        value = det_hessian(f, y)
        direction = det_hessian_gradient(f, y)
        norm2 = float(direction @ direction)
        if norm2 == 0.0:
            return None
        step = (value / norm2) * direction
        y = y - step
        if float(np.linalg.norm(step)) <= settings.newton_tolerance * (1.0 + float(np.linalg.norm(y))):
            break
    if abs(det_hessian(f, y)) > settings.residual_tolerance:
        return None
    return y


def _tangent(f: GeneratingFunction, y: FloatArray, previous: FloatArray | None) -> FloatArray:
    g = det_hessian_gradient(f, y)
    tangent = np.array([-g[1], g[0]]) / float(np.linalg.norm(g))
    if previous is not None and float(tangent @ previous) < 0.0:
        tangent = -tangent
    return tangent


def _kernel(f: GeneratingFunction, y: FloatArray, previous: FloatArray | None) -> FloatArray:
    eigenvalues, vectors = np.linalg.eigh(hessian(f, y))
    kernel = vectors[:, int(np.argmin(np.abs(eigenvalues)))]
    if previous is not None and float(kernel @ previous) < 0.0:
        kernel = -kernel
    return kernel


def _start_point(f: GeneratingFunction, y0: FloatArray, settings: Settings) -> FloatArray:
    direction = np.array([1.0, 0.0])
    outer = 1e-3
    while det_hessian(f, y0 + outer * direction) > 0.0:
        outer *= 2.0
        if outer > 1e3:
            raise OpenCurve("det Hess f stays positive along the search ray")
    radius = brentq(
        lambda r: det_hessian(f, y0 + r * direction),
        0.0,
        outer,
        xtol=settings.newton_tolerance,
    )
    return y0 + radius * direction


def _trace_curve(f: GeneratingFunction, start: FloatArray, y0: FloatArray, settings: Settings) -> list[FloatArray]:
    samples = 24 * settings.grid_angles
    initial_step = _TWO_PI * float(np.linalg.norm(start - y0)) / samples
    step = initial_step
    points = [start]
    tangent = _tangent(f, start, None)
    travelled = 0.0
    for _ in range(50 * samples):
        current = points[-1]
        corrected = _correct(f, current + step * tangent, settings)
        if corrected is None or float(np.linalg.norm(corrected - current)) > 3.0 * step:
            step /= 2.0
            if step < 1e-6 * initial_step:
                raise OpenCurve(f"continuation of the critical curve stalled near y={tuple(current)}")
            continue
        travelled += float(np.linalg.norm(corrected - current))
        if travelled > 4.0 * initial_step and float(np.linalg.norm(corrected - start)) < 1.5 * step:
            return points
        points.append(corrected)
        tangent = _tangent(f, corrected, tangent)
        step = min(2.0 * step, initial_step)
    raise OpenCurve(f"critical curve did not close after {len(points)} steps")


def _cusp_indicator(f: GeneratingFunction, y: FloatArray, kernel: FloatArray) -> float:
    return float(det_hessian_gradient(f, y) @ kernel)


def _refine_cusp(
    f: GeneratingFunction,
    first: FloatArray,
    second: FloatArray,
    kernel: FloatArray,
    settings: Settings,
) -> FloatArray:
    def along(u: float) -> FloatArray:
        corrected = _correct(f, first + u * (second - first), settings)
        if corrected is None:
            raise OpenCurve("corrector failed while refining a cusp")
        return corrected

    def indicator(u: float) -> float:
        y = along(u)
        return _cusp_indicator(f, y, _kernel(f, y, kernel))

    u = brentq(indicator, 0.0, 1.0, xtol=1e-13)
    return along(u)


def trace_caustic(
    f: GeneratingFunction,
    settings: Settings | None = None,
    labeler: SaddleLabeler | None = None,
) -> Caustic:
    """Trace det Hess f = 0 by predictor-corrector continuation and map it to the base.

    Cusps sit where the Hessian kernel is tangent to the critical curve; the
    arcs between consecutive cusps carry the saddle that dies with n there.
    """

    settings = settings or Settings()
    started = time.monotonic()
    y0, maximum = max_det_hessian_point(f)
    if maximum <= settings.degenerate_hessian_tolerance:
        center = tuple(float(v) for v in gradient(f, y0))
        logger.info(
            "strata_caustic_completed",
            extra={"degenerate": True, "duration_ms": round((time.monotonic() - started) * 1000, 3)},
        )
        return Caustic(
            degenerate=True,
            center=(center[0], center[1]),
            points=((center[0], center[1]),),
            preimages=((float(y0[0]), float(y0[1])),),
        )

    labeler = labeler or default_labeler(f, settings)
    if labeler is None:
        raise SolverDivergence("the caustic is nondegenerate but no interior reference point exists")

    curve = _trace_curve(f, _start_point(f, y0, settings), y0, settings)
    kernels: list[FloatArray] = []
    for point in curve:
        kernels.append(_kernel(f, point, kernels[-1] if kernels else None))
    indicators = [_cusp_indicator(f, y, k) for y, k in zip(curve, kernels, strict=True)]

    count = len(curve)
    cusp_at: dict[int, FloatArray] = {}
    for index in range(count):
        following = (index + 1) % count
        next_value = indicators[following]
        if following == 0 and float(kernels[-1] @ kernels[0]) < 0.0:
            next_value = -next_value
        if indicators[index] * next_value < 0.0:
            cusp_y = _refine_cusp(f, curve[index], curve[following], kernels[index], settings)
            local = hessian(f, cusp_y)
            image_speed = float(np.linalg.norm(local @ _tangent(f, cusp_y, None)))
            if image_speed > 1e-3 * float(np.linalg.norm(local)) + settings.cusp_tolerance:
                logger.warning(
                    "cusp_tangent_residual",
                    extra={"y": tuple(float(v) for v in cusp_y), "residual": image_speed},
                )
            cusp_at[index] = cusp_y

    center = labeler.reference.pair
    images = [np.asarray(gradient(f, y), dtype=float) for y in curve]
    arcs, cusps = _arcs(f, curve, images, cusp_at, center, labeler, settings)
    caustic = Caustic(
        degenerate=False,
        center=center,
        points=tuple((float(x[0]), float(x[1])) for x in images),
        preimages=tuple((float(y[0]), float(y[1])) for y in curve),
        arcs=arcs,
        cusps=cusps,
    )
    if len(cusps) % 2 != 1:
        logger.warning("cusp_parity_even", extra={"cusps": len(cusps)})
    logger.info(
        "strata_caustic_completed",
        extra={
            "degenerate": False,
            "points": count,
            "cusps": len(cusps),
            "duration_ms": round((time.monotonic() - started) * 1000, 3),
        },
    )
    return caustic


def _as_point(vector: Sequence[float] | FloatArray) -> Point:
    return (float(vector[0]), float(vector[1]))


def _arcs(
    f: GeneratingFunction,
    curve: list[FloatArray],
    images: list[FloatArray],
    cusp_at: Mapping[int, FloatArray],
    center: Point,
    labeler: SaddleLabeler,
    settings: Settings,
) -> tuple[tuple[FoldArc, ...], tuple[Cusp, ...]]:
    count = len(curve)
    order = sorted(cusp_at)
    if not order:
        dying = _dying_label(f, curve, images, count // 2, labeler, settings)
        arc = FoldArc(
            id=0,
            dying=dying,
            polyline=tuple(_as_point(x) for x in images),
            preimages=tuple(_as_point(y) for y in curve),
            cusps=(-1, -1),
        )
        return (arc,), ()

    arcs: list[FoldArc] = []
    for position, index in enumerate(order):
        end_index = order[(position + 1) % len(order)]
        span = (end_index - index) % count or count
        members = [(index + step) % count for step in range(1, span + 1)]
        ys = [cusp_at[index], *(curve[k] for k in members), cusp_at[end_index]]
        xs = [np.asarray(gradient(f, y), dtype=float) for y in ys]
        middle = members[len(members) // 2] if members else index
        arcs.append(
            FoldArc(
                id=position,
                dying=_dying_label(f, curve, images, middle, labeler, settings),
                polyline=tuple(_as_point(x) for x in xs),
                preimages=tuple(_as_point(y) for y in ys),
                cusps=(position, (position + 1) % len(order)),
            )
        )

    cusps: list[Cusp] = []
    for position, index in enumerate(order):
        before, after = arcs[position - 1], arcs[position]
        if before.dying == after.dying:
            raise ArrangementFailure(
                f"cusp {position} joins two folds killing the same saddle s{after.dying}"
            )
        y = cusp_at[index]
        x = np.asarray(gradient(f, y), dtype=float)
        axis = x - np.asarray(center)
        axis /= float(np.linalg.norm(axis))
        pair = sorted((before.dying, after.dying))
        cusps.append(
            Cusp(
                id=position,
                point=_as_point(x),
                preimage=_as_point(y),
                pair=(pair[0], pair[1]),
                axis=_as_point(axis),
            )
        )
    return tuple(arcs), tuple(cusps)


def _dying_label(
    f: GeneratingFunction,
    curve: list[FloatArray],
    images: list[FloatArray],
    index: int,
    labeler: SaddleLabeler,
    settings: Settings,
) -> int:
    """Label of the saddle that merges with n at sample ``index`` of the fold."""

    count = len(curve)
    tangent = images[(index + 1) % count] - images[index - 1]
    normal = np.array([-tangent[1], tangent[0]]) / float(np.linalg.norm(tangent))
    extent = max(float(np.linalg.norm(x - images[0])) for x in images)
    for scale in (1e-3, 1e-2, 3e-2):
        for sign in (1.0, -1.0):
            candidate = images[index] + sign * scale * extent * normal
            base = BasePoint(x1=float(candidate[0]), x2=float(candidate[1]))
            try:
                if len(solve_fiber(f, base, settings)) != 4:
                    continue
                fiber = labeler.label(base)
            except (DegenerateFiber, SolverDivergence):
                continue
            nearest = min(fiber.saddles, key=lambda point: math.dist(point.y, curve[index]))
            return saddle_index(nearest.label)
    raise ArrangementFailure(f"cannot identify the dying saddle near x={_as_point(images[index])}")


def check_window(caustic: Caustic, window: float) -> None:
    """The analysis window must contain the whole caustic."""

    if caustic.degenerate:
        return
    widest = max(max(abs(x1), abs(x2)) for x1, x2 in caustic.points)
    if widest >= window:
        raise ConfigError(
            f"window half-width {window} does not contain the caustic (reaches {widest:.4g})"
        )


# Polar scan ------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ScanNode:
    ring: int
    spoke: int
    point: Point
    fiber: FiberData | None
    signature: Signature | None

    @property
    def valid(self) -> bool:
        return self.fiber is not None and self.signature is not None


@dataclass(frozen=True, slots=True)
class PolarScan:
    center: Point
    radii: tuple[float, ...]
    angles: tuple[float, ...]
    nodes: tuple[ScanNode, ...]

    def node(self, ring: int, spoke: int) -> ScanNode:
        return self.nodes[ring * len(self.angles) + spoke]


@dataclass(frozen=True, slots=True)
class _SpokeTask:
    function: GeneratingFunction
    labeler: SaddleLabeler | None
    settings: Settings
    center: Point
    spoke: int
    angle: float
    radii: tuple[float, ...]


def _fiber_at(
    f: GeneratingFunction,
    labeler: SaddleLabeler | None,
    settings: Settings,
    x: BasePoint,
    start: FiberData | None = None,
) -> FiberData:
    if labeler is None:
        return critical_points(f, x, settings, None)
    if start is None:
        return labeler.label(x)
    return labeler.label_from(start, x)


def reliable(signature: Signature) -> bool:
    """False when some branch is undecided or ends on a saddle, i.e. x lies on a wall."""

    for entry in signature[1:]:
        _, branches = entry.split(":", 1)
        stable, unstable = branches.split("|")
        for key in (*stable.split(","), *unstable.split(",")):
            if key in ("?", "unlabeled") or key in SADDLE_LABELS:
                return False
        if "n" in unstable.split(","):
            return False
    return True


def _signature(f: GeneratingFunction, fiber: FiberData, settings: Settings) -> Signature | None:
    try:
        signature = flow_signature(f, fiber, settings)
    except IntegrationFailure:
        return None
    return signature if reliable(signature) else None


def _scan_spoke(task: _SpokeTask) -> tuple[ScanNode, ...]:
    nodes: list[ScanNode] = []
    previous = task.labeler.reference_fiber if task.labeler is not None else None
    cos, sin = math.cos(task.angle), math.sin(task.angle)
    for ring, radius in enumerate(task.radii):
        point = (task.center[0] + radius * cos, task.center[1] + radius * sin)
        base = BasePoint(x1=point[0], x2=point[1])
        try:
            fiber = _fiber_at(task.function, task.labeler, task.settings, base, previous)
        except (DegenerateFiber, SolverDivergence):
            nodes.append(ScanNode(ring=ring, spoke=task.spoke, point=point, fiber=None, signature=None))
            continue
        previous = fiber
        nodes.append(
            ScanNode(
                ring=ring,
                spoke=task.spoke,
                point=point,
                fiber=fiber,
                signature=_signature(task.function, fiber, task.settings),
            )
        )
    return tuple(nodes)


def scan_radii(caustic: Caustic, window: float, settings: Settings) -> tuple[float, ...]:
    """Linear rings through the caustic, then geometric rings out to the window corner."""

    center = np.asarray(caustic.center)
    extent = 0.0
    if not caustic.degenerate:
        extent = max(float(np.linalg.norm(np.asarray(x) - center)) for x in caustic.points)
    extent = max(extent, 0.02 * window)
    inner = 1.6 * extent
    radii = [inner * k / settings.grid_inner for k in range(1, settings.grid_inner + 1)]
    corner = window * math.sqrt(2.0) + float(np.linalg.norm(center))
    if corner > inner:
        ratio = (corner / inner) ** (1.0 / settings.grid_outer)
        radii += [inner * ratio**k for k in range(1, settings.grid_outer + 1)]
    return tuple(radii)


def _map(executor: Executor | None, function: Callable[..., object], items: Iterable[object]) -> Iterator[object]:
    if executor is None:
        return map(function, items)
    return executor.map(function, items)


def scan_window(
    f: GeneratingFunction,
    caustic: Caustic,
    window: float,
    settings: Settings | None = None,
    labeler: SaddleLabeler | None = None,
    executor: Executor | None = None,
) -> PolarScan:
    """Label fibers and flow signatures on a polar grid about the caustic centre."""

    settings = settings or Settings()
    started = time.monotonic()
    radii = scan_radii(caustic, window, settings)
    angles = tuple((m + 0.5) * _TWO_PI / settings.grid_angles for m in range(settings.grid_angles))
    tasks = [
        _SpokeTask(f, labeler, settings, caustic.center, spoke, angle, radii)
        for spoke, angle in enumerate(angles)
    ]
    spokes = list(_map(executor, _scan_spoke, tasks))
    nodes = tuple(
        spokes[spoke][ring]  # type: ignore[index]
        for ring in range(len(radii))
        for spoke in range(len(angles))
    )
    logger.info(
        "strata_scan_completed",
        extra={
            "nodes": len(nodes),
            "invalid": sum(1 for node in nodes if not node.valid),
            "duration_ms": round((time.monotonic() - started) * 1000, 3),
        },
    )
    return PolarScan(center=caustic.center, radii=radii, angles=angles, nodes=nodes)


def _neighbours(scan: PolarScan) -> Iterator[tuple[int, int]]:
    spokes = len(scan.angles)
    for ring in range(len(scan.radii)):
        for spoke in range(spokes):
            here = ring * spokes + spoke
            yield here, ring * spokes + (spoke + 1) % spokes
            if ring + 1 < len(scan.radii):
                yield here, (ring + 1) * spokes + spoke


def node_regions(scan: PolarScan) -> tuple[int, ...]:
    """Region index of every node (-1 for unusable nodes), by connected components."""

    size = len(scan.nodes)
    rows: list[int] = []
    cols: list[int] = []
    for first, second in _neighbours(scan):
        a, b = scan.nodes[first], scan.nodes[second]
        if a.valid and b.valid and a.signature == b.signature:
            rows.append(first)
            cols.append(second)
    adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size)).tocsr()
    _, components = connected_components(adjacency, directed=False)
    numbering: dict[int, int] = {}
    regions: list[int] = []
    for index, node in enumerate(scan.nodes):
        if not node.valid:
            regions.append(-1)
            continue
        component = int(components[index])
        regions.append(numbering.setdefault(component, len(numbering)))
    return tuple(regions)


def _region_labels(fiber: FiberData) -> tuple[int, ...]:
    if fiber.inside_caustic:
        return ALL_SADDLES
    if not fiber.labeled:
        return (1, 2)
    return fiber.saddle_indices


def incidence_from_signature(signature: Signature) -> IncidenceMatrix:
    entries = [0, 0, 0]
    for label, (stable, _) in _branch_table(signature).items():
        if "n" in stable:
            entries[saddle_index(label) - 1] = 1  # type: ignore[arg-type]
    return IncidenceMatrix(entries=(entries[0], entries[1], entries[2]))


def _branch_table(signature: Signature) -> dict[str, tuple[tuple[str, ...], tuple[str, ...]]]:
    table: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {}
    for entry in signature[1:]:
        label, branches = entry.split(":", 1)
        stable, unstable = branches.split("|")
        table[label] = (tuple(stable.split(",")), tuple(unstable.split(",")))
    return table


def build_regions(scan: PolarScan, assignment: Sequence[int]) -> tuple[Region, ...]:
    count = max(assignment, default=-1) + 1
    points = np.array([node.point for node in scan.nodes])
    regions: list[Region] = []
    for region_id in range(count):
        members = [k for k, value in enumerate(assignment) if value == region_id]
        others = [k for k, value in enumerate(assignment) if value not in (-1, region_id)]
        if others:
            clearance = cdist(points[members], points[others]).min(axis=1)
            rep_index = members[int(np.argmax(clearance))]
        else:
            rep_index = members[0]
        node = scan.nodes[rep_index]
        assert node.fiber is not None and node.signature is not None
        inside = node.fiber.inside_caustic
        regions.append(
            Region(
                id=region_id,
                rep=node.point,
                inside=inside,
                incidence=incidence_from_signature(node.signature) if inside else None,
                labels=_region_labels(node.fiber),
            )
        )
    return tuple(regions)


# Label cuts ------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class LabelCut:
    """Ray from a cusp along which outside labels j and k trade places.

    Continuation from x* switches them along the cusp axis; a nonzero
    ``rotation`` moves the switch onto the rotated ray by renaming the
    fibers in the wedge between the two.
    """

    cusp: int
    point: Point
    pair: tuple[int, int]
    axis: Point
    rotation: float = 0.0

    @property
    def direction(self) -> Point:
        return _rotate(self.axis, self.rotation)

    def segment(self, window: float) -> tuple[Point, Point]:
        return self.point, _window_exit(self.point, self.direction, window)

    def swaps(self, x: Point) -> bool:
        if self.rotation == 0.0:
            return False
        delta = math.atan2(x[1] - self.point[1], x[0] - self.point[0]) - math.atan2(self.axis[1], self.axis[0])
        delta = (delta + math.pi) % _TWO_PI - math.pi
        if self.rotation > 0.0:
            return 0.0 < delta < self.rotation
        return self.rotation < delta < 0.0


def swap_signature(signature: Signature, pair: tuple[int, int]) -> Signature:
    """``signature`` with the saddle labels of ``pair`` exchanged."""

    names = {f"s{pair[0]}": f"s{pair[1]}", f"s{pair[1]}": f"s{pair[0]}"}
    entries = []
    for entry in signature[1:]:
        label, branches = entry.split(":", 1)
        stable, unstable = (
            ",".join(sorted(names.get(key, key) for key in part.split(",")))
            for part in branches.split("|")
        )
        entries.append(f"{names.get(label, label)}:{stable}|{unstable}")
    return (signature[0], *sorted(entries))


def swap_fiber(fiber: FiberData, pair: tuple[int, int]) -> FiberData:
    names = {f"s{pair[0]}": f"s{pair[1]}", f"s{pair[1]}": f"s{pair[0]}"}
    points = tuple(
        point.model_copy(update={"label": names.get(point.label, point.label)}) for point in fiber.points
    )
    return fiber.model_copy(update={"points": points})


def apply_cuts(
    point: Point,
    fiber: FiberData | None,
    signature: Signature | None,
    cuts: Sequence[LabelCut],
) -> tuple[FiberData | None, Signature | None]:
    """Move the outside labels of a fiber from the axis cuts onto ``cuts``."""

    for cut in cuts:
        if fiber is None or fiber.inside_caustic or not fiber.labeled or not cut.swaps(point):
            continue
        third = next(label for label in ALL_SADDLES if label not in cut.pair)
        if third not in fiber.saddle_indices:
            continue
        fiber = swap_fiber(fiber, cut.pair)
        signature = swap_signature(signature, cut.pair) if signature is not None else None
    return fiber, signature


def relabel_scan(scan: PolarScan, cuts: Sequence[LabelCut]) -> PolarScan:
    nodes = []
    for node in scan.nodes:
        fiber, signature = apply_cuts(node.point, node.fiber, node.signature, cuts)
        nodes.append(ScanNode(ring=node.ring, spoke=node.spoke, point=node.point, fiber=fiber, signature=signature))
    return PolarScan(center=scan.center, radii=scan.radii, angles=scan.angles, nodes=tuple(nodes))


def cut_region_pairs(
    scan: PolarScan, assignment: Sequence[int], pair: tuple[int, int]
) -> set[tuple[int, int]]:
    """Region pairs on the two sides of the grid edges where labels ``pair`` switch."""

    found: set[tuple[int, int]] = set()
    for first, second in _neighbours(scan):
        a, b = scan.nodes[first], scan.nodes[second]
        if not (a.valid and b.valid) or assignment[first] == assignment[second]:
            continue
        assert a.fiber is not None and b.fiber is not None
        if a.fiber.inside_caustic or b.fiber.inside_caustic:
            continue
        changed = set(_region_labels(a.fiber)) ^ set(_region_labels(b.fiber))
        if changed == set(pair):
            found.add((min(assignment[first], assignment[second]), max(assignment[first], assignment[second])))
    return found


def _rotations() -> Iterator[float]:
    yield 0.0
    for degree in range(1, int(round(math.degrees(_MAX_ROTATION))) + 1):
        yield math.radians(degree)
        yield -math.radians(degree)


def place_label_cuts(
    scan: PolarScan, cusps: Sequence[Cusp], window: float
) -> tuple[PolarScan, tuple[LabelCut, ...]]:
    """Rotate each cusp cut by the smallest angle that leaves it between one pair of regions.

    A cut that meets a bifurcation wall borders two pairs of regions; the
    rays are also kept pairwise disjoint.
    """

    chosen: list[LabelCut] = []
    for cusp in cusps:
        for rotation in _rotations():
            cut = LabelCut(cusp=cusp.id, point=cusp.point, pair=cusp.pair, axis=cusp.axis, rotation=rotation)
            segment = cut.segment(window)
            if any(_segments_cross(*segment, *other.segment(window)) for other in chosen):
                continue
            trial = relabel_scan(scan, (*chosen, cut))
            assignment = node_regions(trial)
            if all(len(cut_region_pairs(trial, assignment, item.pair)) == 1 for item in (*chosen, cut)):
                break
        else:
            raise PlacementConflict(
                f"the cut of cusp pair {cusp.pair} borders more than one pair of regions at every rotation"
            )
        if rotation:
            logger.warning("twist_line_rotated", extra={"cusp": cusp.id, "rotation": round(rotation, 6)})
        chosen.append(cut)
    return relabel_scan(scan, chosen), tuple(chosen)


# Wall location ---------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class _EdgeTask:
    function: GeneratingFunction
    labeler: SaddleLabeler | None
    settings: Settings
    first: ScanNode
    second: ScanNode
    kind: WallKind


@dataclass(frozen=True, slots=True)
class EdgeCrossing:
    """A grid edge bisected down to one wall; ``signatures`` are the flow pictures on its two sides.

    ``regions`` is filled in once the signatures are matched to scan regions.
    """

    kind: WallKind
    first: tuple[int, int]
    second: tuple[int, int]
    point: Point
    step: Point
    signatures: tuple[Signature, Signature]
    pair: tuple[int, int] | None = None
    regions: tuple[int, int] = (-1, -1)


def _midpoint(a: Point, b: Point) -> Point:
    return (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]))


def _unit(a: Point, b: Point) -> Point:
    length = math.dist(a, b)
    return ((b[0] - a[0]) / length, (b[1] - a[1]) / length)


def _bisect_fold(task: _EdgeTask) -> Point:
    inside = task.first.fiber is not None and task.first.fiber.inside_caustic
    lo, hi = task.first.point, task.second.point
    while math.dist(lo, hi) > task.settings.wall_tolerance:
        mid = _midpoint(lo, hi)
        try:
            count = len(solve_fiber(task.function, BasePoint(x1=mid[0], x2=mid[1]), task.settings))
        except (DegenerateFiber, SolverDivergence):
            return mid
        if (count == 4) == inside:
            lo = mid
        else:
            hi = mid
    return _midpoint(lo, hi)


def _nearest_saddle(
    branches: Sequence[Trajectory], fiber: FiberData, exclude: str
) -> str | None:
    best: tuple[float, str | None] = (math.inf, None)
    for trajectory in branches:
        samples = np.array(trajectory.samples)
        for point in fiber.saddles:
            if point.label == exclude:
                continue
            distance = float(np.min(np.linalg.norm(samples - np.array(point.y), axis=1)))
            if distance < best[0]:
                best = (distance, point.label)
    return best[1]


def separatrix_pair(
    f: GeneratingFunction,
    fiber: FiberData,
    before: Signature,
    after: Signature,
    settings: Settings,
) -> tuple[int, int]:
    """(source, target) of the saddle connection between two signatures.

    The source's unstable branch and the target's stable branch change
    terminal across the wall; when only one of them is visible in the
    signatures the other is the saddle the changed branch passes nearest.
    """

    old, new = _branch_table(before), _branch_table(after)
    if set(old) != set(new):
        raise UnresolvedWall("saddle labels differ across a bifurcation wall")
    sources = sorted(label for label in old if old[label][1] != new[label][1])
    targets = sorted(label for label in old if old[label][0] != new[label][0])
    if len(sources) == 1 and len(targets) == 0:
        saddle = fiber.point(sources[0])  # type: ignore[arg-type]
        target = _nearest_saddle(unstable_branches(f, fiber, saddle, settings), fiber, sources[0])
        targets = [target] if target else []
    elif len(targets) == 1 and len(sources) == 0:
        saddle = fiber.point(targets[0])  # type: ignore[arg-type]
        source = _nearest_saddle(stable_branches(f, fiber, saddle, settings), fiber, targets[0])
        sources = [source] if source else []
    if len(sources) != 1 or len(targets) != 1 or sources[0] == targets[0]:
        raise UnresolvedWall(
            f"ambiguous separatrix at x={fiber.base.pair}: sources {sources}, targets {targets}"
        )
    pair = (saddle_index(sources[0]), saddle_index(targets[0]))  # type: ignore[arg-type]

    if fiber.inside_caustic:
        changed = [
            k + 1
            for k, (a, b) in enumerate(
                zip(
                    incidence_from_signature(before).entries,
                    incidence_from_signature(after).entries,
                    strict=True,
                )
            )
            if a != b
        ]
        if changed and changed != [pair[1]]:
            raise UnresolvedWall(
                f"incidence changes in s{changed} but the separatrix enters s{pair[1]} "
                f"at x={fiber.base.pair}"
            )
    return pair


def _bisect_bifurcation(task: _EdgeTask) -> tuple[EdgeCrossing, ...]:
    assert task.first.fiber is not None and task.first.signature is not None
    assert task.second.signature is not None
    return _split_bifurcation(
        task,
        task.first.point,
        task.first.fiber,
        task.first.signature,
        task.second.point,
        task.second.signature,
        0,
    )


def _split_bifurcation(
    task: _EdgeTask,
    lo: Point,
    lo_fiber: FiberData,
    lo_signature: Signature,
    hi: Point,
    hi_signature: Signature,
    depth: int,
) -> tuple[EdgeCrossing, ...]:
    """Bisect [lo, hi]; a third signature splits the edge there and both halves recurse."""

    key = ((task.first.ring, task.first.spoke), (task.second.ring, task.second.spoke))
    step = _unit(task.first.point, task.second.point)
    while math.dist(lo, hi) > task.settings.wall_tolerance:
        mid = _midpoint(lo, hi)
        base = BasePoint(x1=mid[0], x2=mid[1])
        try:
            fiber = _fiber_at(task.function, task.labeler, task.settings, base, lo_fiber)
            signature = flow_signature(task.function, fiber, task.settings)
        except (DegenerateFiber, SolverDivergence, IntegrationFailure):
            break
        if not reliable(signature):
            break
        if signature == lo_signature:
            lo, lo_fiber = mid, fiber
        elif signature == hi_signature:
            hi = mid
        else:
            if depth >= _MAX_SPLITS:
                raise UnresolvedWall(f"the grid edge through x={mid} crosses more walls than it can separate")
            return (
                *_split_bifurcation(task, lo, lo_fiber, lo_signature, mid, signature, depth + 1),
                *_split_bifurcation(task, mid, fiber, signature, hi, hi_signature, depth + 1),
            )
    pair: tuple[int, int] | None = None
    if lo_fiber.labeled:
        pair = separatrix_pair(task.function, lo_fiber, lo_signature, hi_signature, task.settings)
    return (
        EdgeCrossing(
            kind="bifurcation",
            first=key[0],
            second=key[1],
            point=_midpoint(lo, hi),
            step=step,
            signatures=(lo_signature, hi_signature),
            pair=pair,
        ),
    )


def _locate_crossing(task: _EdgeTask) -> tuple[EdgeCrossing, ...]:
    assert task.first.signature is not None and task.second.signature is not None
    key = ((task.first.ring, task.first.spoke), (task.second.ring, task.second.spoke))
    step = _unit(task.first.point, task.second.point)
    signatures = (task.first.signature, task.second.signature)
    if task.kind == "fold":
        point = _bisect_fold(task)
    elif task.kind == "twist_line":
        point = _midpoint(task.first.point, task.second.point)
    else:
        return _bisect_bifurcation(task)
    return (
        EdgeCrossing(kind=task.kind, first=key[0], second=key[1], point=point, step=step, signatures=signatures),
    )


def _edge_kind(a: ScanNode, b: ScanNode) -> WallKind:
    assert a.fiber is not None and b.fiber is not None
    if a.fiber.inside_caustic != b.fiber.inside_caustic:
        return "fold"
    if not a.fiber.inside_caustic and _region_labels(a.fiber) != _region_labels(b.fiber):
        return "twist_line"
    return "bifurcation"


def _region_with(scan: PolarScan, assignment: Sequence[int], signature: Signature, point: Point) -> int:
    best: tuple[float, int] = (math.inf, -1)
    for node, region in zip(scan.nodes, assignment, strict=True):
        if region != -1 and node.signature == signature:
            distance = math.dist(node.point, point)
            if distance < best[0]:
                best = (distance, region)
    if best[1] == -1:
        raise UnresolvedWall(f"the region met near x={point} never appears on the scan grid")
    return best[1]


def locate_crossings(
    f: GeneratingFunction,
    scan: PolarScan,
    assignment: Sequence[int],
    settings: Settings,
    labeler: SaddleLabeler | None,
    executor: Executor | None = None,
) -> tuple[EdgeCrossing, ...]:
    tasks = []
    ends = []
    for first, second in _neighbours(scan):
        if assignment[first] == -1 or assignment[second] == -1:
            continue
        if assignment[first] == assignment[second]:
            continue
        a, b = scan.nodes[first], scan.nodes[second]
        tasks.append(_EdgeTask(f, labeler, settings, a, b, _edge_kind(a, b)))
        ends.append({a.signature: assignment[first], b.signature: assignment[second]})
    crossings: list[EdgeCrossing] = []
    split = 0
    for known, found in zip(ends, _map(executor, _locate_crossing, tasks), strict=True):
        split += len(found) > 1  # type: ignore[arg-type]
        for crossing in found:  # type: ignore[attr-defined]
            regions = tuple(
                known[signature] if signature in known else _region_with(scan, assignment, signature, crossing.point)
                for signature in crossing.signatures
            )
            crossings.append(replace(crossing, regions=regions))
    if split:
        logger.info("crossing_split", extra={"edges": split})
    return tuple(crossings)


# Wall assembly ---------------------------------------------------------------


def _ordered_polyline(points: Sequence[Point]) -> tuple[Point, ...]:
    if len(points) < 3:
        return tuple(points)
    array = np.array(points)
    centred = array - array.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    order = np.argsort(centred @ vt[0])
    return tuple(_as_point(array[k]) for k in order)


def _angle_polyline(points: Sequence[Point], center: Point) -> tuple[Point, ...]:
    return tuple(
        sorted(points, key=lambda p: math.atan2(p[1] - center[1], p[0] - center[0]) % _TWO_PI)
    )


def _cross(a: Point, b: Point) -> float:
    return a[0] * b[1] - a[1] * b[0]


@dataclass
class _WallDraft:
    kind: WallKind
    regions: tuple[int, int]
    pair: tuple[int, int] | None
    points: list[Point] = field(default_factory=list)
    steps: list[Point] = field(default_factory=list)


def _drafts(crossings: Sequence[EdgeCrossing]) -> list[_WallDraft]:
    drafts: dict[tuple[WallKind, int, int, tuple[int, int] | None], _WallDraft] = {}
    for crossing in crossings:
        a, b = crossing.regions
        step = crossing.step
        if a > b:
            a, b = b, a
            step = (-step[0], -step[1])
        key = (crossing.kind, a, b, crossing.pair)
        draft = drafts.setdefault(key, _WallDraft(crossing.kind, (a, b), crossing.pair))
        draft.points.append(crossing.point)
        draft.steps.append(step)
    return [drafts[key] for key in sorted(drafts, key=lambda k: (k[0], k[1], k[2], k[3] or (0, 0)))]


def _oriented(draft: _WallDraft, center: Point) -> tuple[int, int, list[Point]]:
    """(left, right, left-to-right steps) with left-to-right counterclockwise about ``center``."""

    votes = sum(
        _cross((point[0] - center[0], point[1] - center[1]), step)
        for point, step in zip(draft.points, draft.steps, strict=True)
    )
    a, b = draft.regions
    if votes >= 0:
        return a, b, list(draft.steps)
    return b, a, [(-s[0], -s[1]) for s in draft.steps]


def _nearest_pair(first: Sequence[Point], second: Sequence[Point]) -> tuple[int, int, float]:
    distances = cdist(np.array(first), np.array(second))
    i, j = np.unravel_index(int(np.argmin(distances)), distances.shape)
    return int(i), int(j), float(distances[i, j])


def assemble_walls(
    scan: PolarScan,
    regions: Sequence[Region],
    crossings: Sequence[EdgeCrossing],
) -> tuple[tuple[Wall, ...], dict[tuple[int, int], tuple[int, int]]]:
    """Fold and bifurcation walls, plus the sides of every label cut keyed by cusp pair."""

    by_id = {region.id: region for region in regions}
    center = scan.center
    walls: list[Wall] = []
    cut_sides: dict[tuple[int, int], tuple[int, int]] = {}
    inside_walls: list[tuple[Wall, list[Point], list[Point]]] = []
    outside_drafts: list[tuple[int, int, int, list[Point], list[Point], tuple[int, int] | None]] = []

    counter = itertools.count()
    for draft in _drafts(crossings):
        first, second = (by_id[k] for k in draft.regions)
        if draft.kind == "fold":
            outside, inside = (first, second) if second.inside else (second, first)
            dying = sorted(set(ALL_SADDLES) - set(outside.labels))
            if len(dying) != 1:
                raise LabelMismatch(
                    f"regions {outside.id} and {inside.id} do not differ by one saddle"
                )
            walls.append(
                Wall(
                    id=f"fold-{next(counter)}",
                    kind="fold",
                    polyline=_angle_polyline(draft.points, center),
                    left=outside.id,
                    right=inside.id,
                    dying=dying[0],
                )
            )
        elif draft.kind == "twist_line":
            changed = tuple(sorted(set(first.labels) ^ set(second.labels)))
            if len(changed) != 2:
                raise ArrangementFailure(f"label cut between regions {first.id}, {second.id}")
            j, k = changed
            left = first if k not in first.labels else second
            right = second if left is first else first
            if (j, k) in cut_sides and cut_sides[(j, k)] != (left.id, right.id):
                raise PlacementConflict(
                    f"the cut of cusp pair {(j, k)} borders more than one pair of regions"
                )
            cut_sides[(j, k)] = (left.id, right.id)
        else:
            left, right, steps = _oriented(draft, center)
            if first.inside:
                assert by_id[left].incidence is not None and by_id[right].incidence is not None
                tau = None
                if draft.pair is not None:
                    tau = wall_tau(
                        by_id[left].incidence.entries,  # type: ignore[union-attr]
                        by_id[right].incidence.entries,  # type: ignore[union-attr]
                        draft.pair,
                    )
                wall = Wall(
                    id=f"bif-{next(counter)}",
                    kind="bifurcation",
                    polyline=_ordered_polyline(draft.points),
                    left=left,
                    right=right,
                    inside=True,
                    pair=draft.pair,
                    tau=tau,
                )
                walls.append(wall)
                inside_walls.append((wall, draft.points, steps))
            else:
                outside_drafts.append(
                    (next(counter), left, right, draft.points, steps, draft.pair)
                )

    for number, left, right, points, steps, pair in outside_drafts:
        labels = by_id[left].labels
        dying = next((label for label in ALL_SADDLES if label not in labels), None)
        if pair is not None and dying in pair:
            raise LabelMismatch(f"outside separatrix {pair} involves the absent saddle s{dying}")
        tau: int | None = None
        partners = [item for item in inside_walls if item[0].pair == pair and pair is not None]
        if partners:
            best = min(partners, key=lambda item: _nearest_pair(item[1], points)[2])
            i, j, _ = _nearest_pair(best[1], points)
            if best[0].tau is not None:
                agree = best[2][i][0] * steps[j][0] + best[2][i][1] * steps[j][1] >= 0.0
                tau = best[0].tau if agree else -best[0].tau
        walls.append(
            Wall(
                id=f"bif-{number}",
                kind="bifurcation",
                polyline=_ordered_polyline(points),
                left=left,
                right=right,
                pair=pair,
                dying=dying,
                tau=tau,
            )
        )
    return tuple(walls), cut_sides


# Twist lines -----------------------------------------------------------------


def _window_exit(origin: Point, direction: Point, window: float) -> Point:
    limits = []
    for axis in (0, 1):
        if abs(direction[axis]) > 1e-15:
            bound = window if direction[axis] > 0 else -window
            limits.append((bound - origin[axis]) / direction[axis])
    t = max(min(value for value in limits if value > 0), 0.0) if any(v > 0 for v in limits) else 0.0
    return (origin[0] + t * direction[0], origin[1] + t * direction[1])


def _segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    def orient(a: Point, b: Point, c: Point) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0.0 and d3 * d4 < 0.0


def _crosses(segment: tuple[Point, Point], polyline: Sequence[Point]) -> bool:
    return any(
        _segments_cross(segment[0], segment[1], polyline[k], polyline[k + 1])
        for k in range(len(polyline) - 1)
    )


def _rotate(vector: Point, angle: float) -> Point:
    c, s = math.cos(angle), math.sin(angle)
    return (c * vector[0] - s * vector[1], s * vector[0] + c * vector[1])


def install_twist_lines(
    graph: RegionGraph,
    cuts: Sequence[LabelCut],
    window: float,
    sides: Mapping[tuple[int, int], tuple[int, int]],
) -> RegionGraph:
    """Add one half-line per cusp, from the cusp along its label cut to the window edge.

    ``sides`` gives (left, right) region ids per cusp pair: left borders the
    fold of the higher label, right the fold of the lower one.
    """

    obstacles = [wall for wall in graph.walls if wall.kind == "bifurcation"]
    twist_lines: list[Wall] = []
    for cut in cuts:
        if cut.pair not in sides:
            raise PlacementConflict(f"no regions found on either side of the cut through cusp {cut.cusp}")
        left, right = sides[cut.pair]
        segment = cut.segment(window)
        met = [wall.id for wall in obstacles if _crosses(segment, wall.polyline)]
        if met:
            logger.warning("twist_line_meets_wall", extra={"cusp": cut.cusp, "walls": met})
        twist_lines.append(
            Wall(
                id=f"twist-{cut.cusp}",
                kind="twist_line",
                polyline=segment,
                left=left,
                right=right,
                cusp=cut.cusp,
                pair=cut.pair,
                rotation=cut.rotation,
            )
        )
    return graph.model_copy(update={"twist_lines": tuple(twist_lines)})


# Loops -----------------------------------------------------------------------


def _segment_distance(point: Point, a: Point, b: Point) -> float:
    ab = (b[0] - a[0], b[1] - a[1])
    length2 = ab[0] ** 2 + ab[1] ** 2
    if length2 == 0.0:
        return math.dist(point, a)
    t = max(0.0, min(1.0, ((point[0] - a[0]) * ab[0] + (point[1] - a[1]) * ab[1]) / length2))
    return math.dist(point, (a[0] + t * ab[0], a[1] + t * ab[1]))


def polyline_distance(point: Point, polyline: Sequence[Point]) -> float:
    if len(polyline) == 1:
        return math.dist(point, polyline[0])
    return min(_segment_distance(point, polyline[k], polyline[k + 1]) for k in range(len(polyline) - 1))


def _crossings_between(
    graph: RegionGraph, region: int, following: int, middle: Point | None
) -> list[Crossing]:
    walls = graph.walls_between(region, following)
    if walls:
        if len(walls) > 1 and middle is not None:
            wall = min(walls, key=lambda item: polyline_distance(middle, item.polyline))
        else:
            wall = walls[0]
        return [Crossing(wall=wall.id, direction=1 if wall.left == region else -1)]
    # a sliver region the grid skipped between two neighbouring nodes
    bridges = [
        other.id
        for other in graph.regions
        if other.id not in (region, following)
        and graph.walls_between(region, other.id)
        and graph.walls_between(other.id, following)
    ]
    if not bridges:
        raise ArrangementFailure(f"no wall separates regions {region} and {following}")
    if middle is not None:

        def clearance(other: int) -> float:
            walls = graph.walls_between(region, other) + graph.walls_between(other, following)
            return min(polyline_distance(middle, wall.polyline) for wall in walls)

        bridges.sort(key=clearance)
    via = bridges[0]
    return [
        *_crossings_between(graph, region, via, middle),
        *_crossings_between(graph, via, following, middle),
    ]


def loop_from_regions(
    graph: RegionGraph, regions: Sequence[int], points: Sequence[Point] | None = None
) -> Loop:
    """Close a cyclic sequence of region ids into a loop of wall crossings."""

    sequence: list[tuple[int, Point | None]] = []
    for k, region in enumerate(regions):
        point = points[k] if points is not None else None
        if not sequence or sequence[-1][0] != region:
            sequence.append((region, point))
    if len(sequence) > 1 and sequence[0][0] == sequence[-1][0]:
        sequence.pop()
    if not sequence:
        raise ArrangementFailure("a loop needs at least one region")

    crossings: list[Crossing] = []
    if len(sequence) > 1:
        for k, (region, point) in enumerate(sequence):
            following, next_point = sequence[(k + 1) % len(sequence)]
            middle = _midpoint(point, next_point) if point is not None and next_point is not None else None
            crossings += _crossings_between(graph, region, following, middle)
    return Loop(base=sequence[0][0], crossings=tuple(crossings))


def junction_loops(scan: PolarScan, assignment: Sequence[int], graph: RegionGraph) -> tuple[Loop, ...]:
    """Loops around grid cells whose corners lie in three or more regions."""

    spokes = len(scan.angles)
    loops: list[Loop] = []
    seen: set[tuple[tuple[str, int], ...]] = set()
    for ring in range(len(scan.radii) - 1):
        for spoke in range(spokes):
            corners = (
                ring * spokes + spoke,
                ring * spokes + (spoke + 1) % spokes,
                (ring + 1) * spokes + (spoke + 1) % spokes,
                (ring + 1) * spokes + spoke,
            )
            regions = [assignment[k] for k in corners]
            if -1 in regions or len(set(regions)) < 3:
                continue
            try:
                loop = loop_from_regions(graph, regions, [scan.nodes[k].point for k in corners])
            except ArrangementFailure:
                continue
            key = tuple(sorted((c.wall, c.direction) for c in loop.crossings))
            if key not in seen:
                seen.add(key)
                loops.append(loop)
    return tuple(loops)


def ring_loop(strat: Stratification, ring: int = -1) -> Loop:
    """Loop along one scan ring; the outermost ring encloses the whole caustic."""

    scan = strat.scan
    spokes = len(scan.angles)
    index = ring % len(scan.radii)
    members = [(index * spokes + spoke) for spoke in range(spokes)]
    regions = [strat.assignment[k] for k in members if strat.assignment[k] != -1]
    points = [scan.nodes[k].point for k in members if strat.assignment[k] != -1]
    return loop_from_regions(strat.graph, regions, points)


# Point location --------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class _PointTask:
    function: GeneratingFunction
    labeler: SaddleLabeler | None
    settings: Settings
    point: Point
    cuts: tuple[LabelCut, ...] = ()


def _sample_point(task: _PointTask) -> tuple[Point, FiberData | None, Signature | None]:
    base = BasePoint(x1=task.point[0], x2=task.point[1])
    try:
        fiber = _fiber_at(task.function, task.labeler, task.settings, base)
    except (DegenerateFiber, SolverDivergence):
        return task.point, None, None
    cut_fiber, signature = apply_cuts(task.point, fiber, _signature(task.function, fiber, task.settings), task.cuts)
    return task.point, cut_fiber, signature


def locate_region(strat: Stratification, point: Point, signature: Signature) -> int | None:
    """Region whose scan nodes share ``signature`` and lie nearest to ``point``."""

    best: tuple[float, int | None] = (math.inf, None)
    for node, region in zip(strat.scan.nodes, strat.assignment, strict=True):
        if region == -1 or node.signature != signature:
            continue
        distance = math.dist(node.point, point)
        if distance < best[0]:
            best = (distance, region)
    return best[1]


def _regions_on(
    strat: Stratification, points: Sequence[Point], executor: Executor | None
) -> tuple[list[int], list[Point], list[FiberData]]:
    tasks = [_PointTask(strat.function, strat.labeler, strat.settings, point, strat.cuts) for point in points]
    regions: list[int] = []
    kept: list[Point] = []
    fibers: list[FiberData] = []
    for point, fiber, signature in _map(executor, _sample_point, tasks):  # type: ignore[misc]
        if fiber is None or signature is None:
            continue
        region = locate_region(strat, point, signature)
        if region is not None:
            regions.append(region)
            kept.append(point)
            fibers.append(fiber)
    return regions, kept, fibers


def sample_region_interior(
    strat: Stratification,
    region_id: int,
    count: int,
    rng: np.random.Generator,
    executor: Executor | None = None,
) -> tuple[tuple[Point, FiberData], ...]:
    """Random points of a region, jittered around its scan nodes and confirmed by signature."""

    members = [k for k, value in enumerate(strat.assignment) if value == region_id]
    spacing = min(
        min(b - a for a, b in zip((0.0, *strat.scan.radii), strat.scan.radii, strict=False)),
        strat.scan.radii[0] * _TWO_PI / len(strat.scan.angles),
    )
    found: list[tuple[Point, FiberData]] = []
    for _ in range(4):
        picks = rng.choice(members, size=2 * count)
        offsets = rng.uniform(-0.25 * spacing, 0.25 * spacing, size=(2 * count, 2))
        points = [
            (strat.scan.nodes[k].point[0] + dx, strat.scan.nodes[k].point[1] + dy)
            for k, (dx, dy) in zip(picks, offsets, strict=True)
        ]
        regions, kept, fibers = _regions_on(strat, points, executor)
        found += [(p, fib) for r, p, fib in zip(regions, kept, fibers, strict=True) if r == region_id]
        if len(found) >= count:
            break
    if len(found) < count:
        logger.warning(
            "region_samples_short", extra={"region": region_id, "wanted": count, "found": len(found)}
        )
    return tuple(found[:count])


# Cusps -----------------------------------------------------------------------


def _cusp_radius(graph: RegionGraph, cusp: Cusp, scale: float) -> float:
    radius = 0.2 * scale
    for wall in graph.walls:
        if wall.kind == "bifurcation":
            radius = min(radius, 0.5 * polyline_distance(cusp.point, wall.polyline))
    for other in graph.cusps:
        if other.id != cusp.id:
            radius = min(radius, 0.4 * math.dist(other.point, cusp.point))
    return radius


def analyse_cusp(
    strat: Stratification, cusp: Cusp, executor: Executor | None = None
) -> tuple[Cusp, Loop]:
    """Case, neighbouring regions and a canonical loop for one cusp.

    The loop starts on the side of the fold killing the lower label, enters
    through that fold and leaves through the other one.
    """

    graph = strat.graph
    extent = max(math.dist(p, strat.caustic.center) for p in strat.caustic.points)
    radius = _cusp_radius(graph, cusp, extent)
    angles = [k * _TWO_PI / _CIRCLE_SAMPLES for k in range(_CIRCLE_SAMPLES)]
    points = [
        (cusp.point[0] + radius * math.cos(a), cusp.point[1] + radius * math.sin(a)) for a in angles
    ]
    regions, kept, _ = _regions_on(strat, points, executor)
    loop = loop_from_regions(graph, regions, kept)

    j, k = cusp.pair
    visits = _visits(graph, loop)
    entering = [
        n for n, (crossing, wall, source, target) in enumerate(visits)
        if wall.kind == "fold" and wall.dying == j and not graph.region(source).inside
    ]
    if not entering:
        loop = _reverse(loop, visits)
        visits = _visits(graph, loop)
        entering = [
            n for n, (crossing, wall, source, target) in enumerate(visits)
            if wall.kind == "fold" and wall.dying == j and not graph.region(source).inside
        ]
    if not entering:
        raise ArrangementFailure(f"loop around cusp {cusp.id} never enters through fold s{j}")
    start = entering[0]
    rotated = visits[start:] + visits[:start]
    entry_region = rotated[0][2]
    inside_region = rotated[0][3]
    exit_region = next(
        (target for _, wall, _, target in rotated if wall.kind == "fold" and wall.dying == k),
        None,
    )
    if exit_region is None:
        raise ArrangementFailure(f"loop around cusp {cusp.id} never leaves through fold s{k}")
    incidence = graph.region(inside_region).incidence
    assert incidence is not None
    third = next(label for label in ALL_SADDLES if label not in cusp.pair)
    case: CuspCase = "a" if incidence.entries[third - 1] == 1 else "b"
    canonical = Loop(base=entry_region, crossings=tuple(item[0] for item in rotated))
    return (
        cusp.model_copy(
            update={
                "case": case,
                "entry_region": entry_region,
                "inside_region": inside_region,
                "exit_region": exit_region,
            }
        ),
        canonical,
    )


def _visits(graph: RegionGraph, loop: Loop) -> list[tuple[Crossing, Wall, int, int]]:
    visits = []
    region = loop.base
    for crossing in loop.crossings:
        wall = graph.wall(crossing.wall)
        target = wall.right if crossing.direction == 1 else wall.left
        visits.append((crossing, wall, region, target))
        region = target
    return visits


def _reverse(loop: Loop, visits: Sequence[tuple[Crossing, Wall, int, int]]) -> Loop:
    crossings = tuple(
        Crossing(wall=crossing.wall, direction=-crossing.direction)  # type: ignore[arg-type]
        for crossing, _, _, _ in reversed(visits)
    )
    return Loop(base=loop.base, crossings=crossings)


# Pipeline --------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Stratification:
    """In-process bundle of everything the stratification pipeline computed."""

    function: GeneratingFunction
    settings: Settings
    window: float
    caustic: Caustic
    scan: PolarScan
    assignment: tuple[int, ...]
    graph: RegionGraph
    labeler: SaddleLabeler | None
    cusp_loops: Mapping[int, Loop] = field(default_factory=dict)
    cuts: tuple[LabelCut, ...] = ()


def stratify(
    f: GeneratingFunction,
    window: float,
    settings: Settings | None = None,
    executor: Executor | None = None,
) -> Stratification:
    """Trace, scan and assemble the full region graph of the window."""

    settings = settings or Settings()
    started = time.monotonic()
    labeler = default_labeler(f, settings)
    caustic = trace_caustic(f, settings, labeler)
    check_window(caustic, window)
    scan = scan_window(f, caustic, window, settings, labeler, executor)
    cuts: tuple[LabelCut, ...] = ()
    if caustic.cusps:
        scan, cuts = place_label_cuts(scan, caustic.cusps, window)
    assignment = node_regions(scan)
    regions = build_regions(scan, assignment)
    crossings = locate_crossings(f, scan, assignment, settings, labeler, executor)
    walls, cut_sides = assemble_walls(scan, regions, crossings)
    graph = RegionGraph(regions=regions, walls=walls, cusps=caustic.cusps, center=scan.center)
    if cuts:
        graph = install_twist_lines(graph, cuts, window, cut_sides)

    strat = Stratification(
        function=f,
        settings=settings,
        window=window,
        caustic=caustic,
        scan=scan,
        assignment=assignment,
        graph=graph,
        labeler=labeler,
        cuts=cuts,
    )
    cusps: list[Cusp] = []
    cusp_loops: dict[int, Loop] = {}
    for cusp in graph.cusps:
        analysed, loop = analyse_cusp(strat, cusp, executor)
        cusps.append(analysed)
        cusp_loops[cusp.id] = loop
    graph = graph.model_copy(update={"cusps": tuple(cusps)})
    graph = graph.model_copy(update={"junctions": junction_loops(scan, assignment, graph)})
    graph = resolve_taus(graph)

    logger.info(
        "strata_graph_completed",
        extra={
            "regions": len(graph.regions),
            "inside_regions": sum(1 for region in graph.regions if region.inside),
            "walls": len(graph.walls),
            "twist_lines": len(graph.twist_lines),
            "junctions": len(graph.junctions),
            "duration_ms": round((time.monotonic() - started) * 1000, 3),
        },
    )
    return Stratification(
        function=f,
        settings=settings,
        window=window,
        caustic=caustic,
        scan=scan,
        assignment=assignment,
        graph=graph,
        labeler=labeler,
        cusp_loops=cusp_loops,
        cuts=cuts,
    )


def locate_bifurcation_walls(
    f: GeneratingFunction,
    window: float,
    settings: Settings | None = None,
    executor: Executor | None = None,
) -> tuple[Wall, ...]:
    return tuple(
        wall for wall in stratify(f, window, settings, executor).graph.walls if wall.kind == "bifurcation"
    )


def build_region_graph(
    f: GeneratingFunction,
    window: float,
    settings: Settings | None = None,
    executor: Executor | None = None,
) -> RegionGraph:
    return stratify(f, window, settings, executor).graph


def leading_form(f: GeneratingFunction) -> GeneratingFunction:
    """Top-degree homogeneous part of ``f``."""

    return GeneratingFunction(monomials=f.homogeneous_part(f.degree))


def asymptotic_wall_angles(f: GeneratingFunction, settings: Settings | None = None, samples: int = 180) -> tuple[float, ...]:
    """Directions of the bifurcation half-lines of the homogeneous leading form of ``f``.

    The leading form is scale invariant, so its walls are rays from the origin;
    they are found by bisecting signature changes along the unit circle.
    """

    settings = settings or Settings()
    form = leading_form(f)

    def signature_at(theta: float) -> Signature | None:
        base = BasePoint(x1=math.cos(theta), x2=math.sin(theta))
        try:
            fiber = critical_points(form, base, settings, None)
            signature = flow_signature(form, fiber, settings)
        except (DegenerateFiber, SolverDivergence, IntegrationFailure, NearWall):
            return None
        return signature if reliable(signature) else None

    grid = [(k + 0.5) * _TWO_PI / samples for k in range(samples)]
    values = [signature_at(theta) for theta in grid]
    angles: list[float] = []
    for k in range(samples):
        lo, hi = grid[k], grid[(k + 1) % samples] + (_TWO_PI if k == samples - 1 else 0.0)
        lo_sig, hi_sig = values[k], values[(k + 1) % samples]
        if lo_sig is None or hi_sig is None or lo_sig == hi_sig:
            continue
        while hi - lo > 1e-8:
            mid = 0.5 * (lo + hi)
            mid_sig = signature_at(mid)
            if mid_sig == lo_sig:
                lo = mid
            elif mid_sig == hi_sig:
                hi = mid
            else:
                break
        angles.append((0.5 * (lo + hi)) % _TWO_PI)
    return tuple(sorted(angles))
