"""Gradient flow of f_x: trajectories, saddle separatrices and incidence matrices.

The Morse function is -f_x. Its descending flow is dy/dt = +grad f_x, so the
index-2 point n is a source and f_x increases along forward trajectories.
Stable branches of a saddle are traced backward in time (dy/dt = -grad f_x).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import replace
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from src.config import Settings
from src.errors import DegenerateLeadingForm, IntegrationFailure, NearWall, NotInsideCaustic
from src.family import FloatArray, SaddleLabeler, compile_function, critical_points, hessian
from src.logger import get_logger
from src.models import (
    BasePoint,
    Branch,
    Converged,
    CriticalPoint,
    Escaped,
    FiberData,
    FlowDirection,
    GeneratingFunction,
    IncidenceMatrix,
    Label,
    Sector,
    SectorDecomposition,
    SectorKind,
    Separatrices,
    Terminal,
    Trajectory,
    Undecided,
)

_TWO_PI = 2.0 * math.pi
_SAMPLES = 3600

logger = get_logger("flow")


def _leading_form(f: GeneratingFunction) -> tuple[int, tuple[tuple[int, int, float], ...]]:
    for degree in (4, 3):
        terms = tuple((item.i, item.j, item.c) for item in f.homogeneous_part(degree))
        if terms:
            return degree, terms
    raise DegenerateLeadingForm("the cubic and quartic parts of f vanish identically")


def _form(terms: Sequence[tuple[int, int, float]], theta: FloatArray | float) -> FloatArray:
    cos, sin = np.cos(theta), np.sin(theta)
    return np.asarray(sum(c * cos**i * sin**j for i, j, c in terms), dtype=float)


def asymptotic_sectors(f: GeneratingFunction) -> SectorDecomposition:
    """Angular sectors where f grows (ascent) or decays (descent) without bound."""

    degree, terms = _leading_form(f)
    grid = (np.arange(_SAMPLES) + 0.5) * _TWO_PI / _SAMPLES
    values = _form(terms, grid)
    zeros: list[float] = []
    for k in range(_SAMPLES):
        a, b = grid[k], grid[(k + 1) % _SAMPLES] + (_TWO_PI if k == _SAMPLES - 1 else 0.0)
        if values[k] * values[(k + 1) % _SAMPLES] < 0.0:
            zero = brentq(lambda theta: float(_form(terms, theta)), a, b, xtol=1e-14)
            zeros.append(zero % _TWO_PI)
    zeros.sort()

    intervals: list[tuple[float, float]] = []
    if not zeros:
        intervals.append((0.0, _TWO_PI))
    else:
        for k, start in enumerate(zeros):
            end = zeros[k + 1] if k + 1 < len(zeros) else zeros[0] + _TWO_PI
            intervals.append((start, end))

    ascent: list[tuple[float, float]] = []
    descent: list[tuple[float, float]] = []
    for start, end in intervals:
        margin = 0.0 if not zeros else min(0.05, 0.25 * (end - start))
        sign = float(_form(terms, 0.5 * (start + end)))
        (ascent if sign > 0 else descent).append((start + margin, end - margin))

    def build(items: list[tuple[float, float]], kind: SectorKind) -> tuple[Sector, ...]:
        ordered = sorted(items, key=lambda item: (0.5 * (item[0] + item[1])) % _TWO_PI)
        return tuple(
            Sector(id=k, start=start, end=end, kind=kind) for k, (start, end) in enumerate(ordered)
        )

    return SectorDecomposition(
        degree=degree,
        zeros=tuple(zeros),
        ascent=build(ascent, "ascent"),
        descent=build(descent, "descent"),
    )


@lru_cache(maxsize=64)
def cached_sectors(f: GeneratingFunction) -> SectorDecomposition:
    return asymptotic_sectors(f)


def classify_angle(decomposition: SectorDecomposition, kind: SectorKind, theta: float) -> int:
    """Sector id containing ``theta``, or the angularly nearest one in a margin gap."""

    sectors = decomposition.ascent if kind == "ascent" else decomposition.descent
    if not sectors:
        raise DegenerateLeadingForm(f"leading form has no {kind} sector")
    best, best_distance = sectors[0].id, math.inf
    for sector in sectors:
        width = sector.end - sector.start
        offset = (theta - sector.start) % _TWO_PI
        if offset <= width:
            return sector.id
        distance = min(offset - width, _TWO_PI - offset)
        if distance < best_distance:
            best, best_distance = sector.id, distance
    return best


class _DistanceEvent:
    """Event g(y) = |y - centre| - radius for ``solve_ivp``."""

    def __init__(self, centre: Sequence[float], radius: float, direction: float) -> None:
        self.centre = (float(centre[0]), float(centre[1]))
        self.radius = radius
        self.terminal = True
        self.direction = direction

    def __call__(self, _t: float, y: FloatArray) -> float:
        return math.hypot(y[0] - self.centre[0], y[1] - self.centre[1]) - self.radius


def integrate_descending(
    f: GeneratingFunction,
    x: BasePoint,
    y0: Sequence[float],
    settings: Settings | None = None,
    *,
    direction: FlowDirection = "forward",
    targets: Sequence[CriticalPoint] = (),
    convergence_radius: float | None = None,
    branch: Branch | None = None,
) -> Trajectory:
    """Integrate the descending flow of -f_x from ``y0``.

    ``direction="backward"`` reverses time. The run stops on reaching a target
    critical point, on leaving the escape radius, or at ``max_time``.
    """

    settings = settings or Settings()
    radius = convergence_radius or settings.convergence_radius
    start = np.asarray(y0, dtype=float)
    for target in targets:
        if math.dist(target.y, start) <= radius:
            return Trajectory(
                samples=((float(start[0]), float(start[1])),),
                times=(0.0,),
                terminal=Converged(target=target.label, target_y=target.y),
                direction=direction,
                branch=branch,
            )

    compiled = compile_function(f)
    sign = 1.0 if direction == "forward" else -1.0
    x1, x2 = x.pair

    def field(_t: float, y: FloatArray) -> list[float]:
        g1, g2 = compiled.gradient(y[0], y[1])
        return [sign * (g1 - x1), sign * (g2 - x2)]

    events = [_DistanceEvent((0.0, 0.0), settings.escape_radius, 1.0)]
    events += [_DistanceEvent(target.y, radius, -1.0) for target in targets]
    solution = solve_ivp(
        field,
        (0.0, settings.max_time),
        start,
        method="DOP853",
        rtol=settings.integrator_rtol,
        atol=settings.integrator_atol,
        events=events,
    )
    if solution.status == -1 or not np.all(np.isfinite(solution.y)):
        raise IntegrationFailure(f"flow integration failed at x={x.pair}: {solution.message}")

    samples = tuple((float(a), float(b)) for a, b in zip(solution.y[0], solution.y[1]))
    terminal: Terminal = Undecided()
    if solution.status == 1:
        fired = [k for k, times in enumerate(solution.t_events) if len(times)]
        if fired and fired[0] == 0:
            kind: SectorKind = "ascent" if direction == "forward" else "descent"
            theta = math.atan2(samples[-1][1], samples[-1][0]) % _TWO_PI
            terminal = Escaped(
                sector=classify_angle(cached_sectors(f), kind, theta), sector_kind=kind
            )
        elif fired:
            target = targets[fired[0] - 1]
            terminal = Converged(target=target.label, target_y=target.y)
    return Trajectory(
        samples=samples,
        times=tuple(float(t) for t in solution.t),
        terminal=terminal,
        direction=direction,
        branch=branch,
    )


def _eigenvectors(f: GeneratingFunction, saddle: CriticalPoint) -> tuple[FloatArray, FloatArray, float]:
    eigenvalues, vectors = np.linalg.eigh(hessian(f, saddle.y))
    if not eigenvalues[0] < 0.0 < eigenvalues[1]:
        raise ValueError(f"critical point at {saddle.y} is not a saddle")

    def oriented(vector: FloatArray) -> FloatArray:
        pivot = int(np.argmax(np.abs(vector)))
        return vector if vector[pivot] > 0 else -vector

    scale = min(1.0, float(np.min(np.abs(eigenvalues))))
    return oriented(vectors[:, 0]), oriented(vectors[:, 1]), scale


def _others(fiber: FiberData, saddle: CriticalPoint) -> tuple[CriticalPoint, ...]:
    return tuple(point for point in fiber.points if point.y != saddle.y)


def stable_branches(
    f: GeneratingFunction,
    fiber: FiberData,
    saddle: CriticalPoint,
    settings: Settings | None = None,
) -> tuple[Trajectory, Trajectory]:
    settings = settings or Settings()
    stable, _, scale = _eigenvectors(f, saddle)
    offset = settings.seed_offset * scale
    targets = _others(fiber, saddle)
    centre = np.array(saddle.y)
    return (
        integrate_descending(
            f, fiber.base, centre + offset * stable, settings,
            direction="backward", targets=targets, branch="stable+",
        ),
        integrate_descending(
            f, fiber.base, centre - offset * stable, settings,
            direction="backward", targets=targets, branch="stable-",
        ),
    )


def unstable_branches(
    f: GeneratingFunction,
    fiber: FiberData,
    saddle: CriticalPoint,
    settings: Settings | None = None,
) -> tuple[Trajectory, Trajectory]:
    settings = settings or Settings()
    _, unstable, scale = _eigenvectors(f, saddle)
    offset = settings.seed_offset * scale
    targets = _others(fiber, saddle)
    centre = np.array(saddle.y)
    return (
        integrate_descending(
            f, fiber.base, centre + offset * unstable, settings,
            direction="forward", targets=targets, branch="unstable+",
        ),
        integrate_descending(
            f, fiber.base, centre - offset * unstable, settings,
            direction="forward", targets=targets, branch="unstable-",
        ),
    )


def saddle_separatrices(
    f: GeneratingFunction,
    x: BasePoint,
    saddle: CriticalPoint,
    settings: Settings | None = None,
    fiber: FiberData | None = None,
) -> Separatrices:
    """The four branches of ``saddle``: stable traced backward, unstable forward."""

    settings = settings or Settings()
    if saddle.morse_index != 1:
        raise ValueError("separatrices are defined for Morse index 1 points only")
    fiber = fiber or critical_points(f, x, settings)
    return Separatrices(
        saddle=saddle.label,
        y=saddle.y,
        branches=(
            *stable_branches(f, fiber, saddle, settings),
            *unstable_branches(f, fiber, saddle, settings),
        ),
    )


def incidence_matrix(
    f: GeneratingFunction,
    x: BasePoint,
    settings: Settings | None = None,
    labeler: SaddleLabeler | None = None,
    fiber: FiberData | None = None,
) -> IncidenceMatrix:
    """Entry i is 1 iff a backward-traced stable branch of s_i reaches n."""

    settings = settings or Settings()
    fiber = fiber or critical_points(f, x, settings, labeler)
    if fiber.node is None:
        raise NotInsideCaustic(f"x={x.pair} is outside the caustic: the fiber has no node")
    if not fiber.labeled:
        raise NotInsideCaustic(f"fiber at x={x.pair} carries no saddle labels")

    entries: list[int] = []
    multiplicity: list[int] = []
    for label in ("s1", "s2", "s3"):
        hits = 0
        for branch in stable_branches(f, fiber, fiber.point(label), settings):
            terminal = branch.terminal
            if isinstance(terminal, Undecided):
                raise NearWall(f"stable branch of {label} undecided at x={x.pair}")
            if isinstance(terminal, Converged):
                if terminal.target != "n":
                    raise NearWall(
                        f"stable branch of {label} reaches {terminal.target} at x={x.pair}"
                    )
                hits += 1
        entries.append(1 if hits else 0)
        multiplicity.append(hits)
    return IncidenceMatrix(
        entries=(entries[0], entries[1], entries[2]),
        multiplicity=(multiplicity[0], multiplicity[1], multiplicity[2]),
    )


def terminal_key(terminal: Terminal) -> str:
    """Short stable token: a label, +k / -k for ascent / descent sectors, or ``?``."""

    if isinstance(terminal, Converged):
        return terminal.target
    if isinstance(terminal, Escaped):
        return f"{'+' if terminal.sector_kind == 'ascent' else '-'}{terminal.sector}"
    return "?"


BranchTerminals = tuple[str, str, str, str]


def branch_terminals(
    f: GeneratingFunction, fiber: FiberData, saddle: CriticalPoint, settings: Settings
) -> BranchTerminals:
    stable = stable_branches(f, fiber, saddle, settings)
    unstable = unstable_branches(f, fiber, saddle, settings)
    keys = [terminal_key(trajectory.terminal) for trajectory in (*stable, *unstable)]
    return (keys[0], keys[1], keys[2], keys[3])


def flow_signature(
    f: GeneratingFunction, fiber: FiberData, settings: Settings | None = None
) -> tuple[str, ...]:
    """Discrete flow picture at a base point; constant on each region.

    Entries are ``label:stable|unstable`` with each branch pair sorted so the
    signature does not depend on eigenvector orientation.
    """

    settings = settings or Settings()
    entries = []
    for saddle in fiber.saddles:
        keys = branch_terminals(f, fiber, saddle, settings)
        stable = ",".join(sorted(keys[:2]))
        unstable = ",".join(sorted(keys[2:]))
        entries.append(f"{saddle.label}:{stable}|{unstable}")
    side = "in" if fiber.inside_caustic else "out"
    return (side, *sorted(entries))


def closest_approach(
    trajectory: Trajectory, fiber: FiberData, exclude: Label
) -> tuple[Label, float]:
    """The critical point (other than ``exclude``) that ``trajectory`` passes nearest."""

    samples = np.array(trajectory.samples)
    best: tuple[Label, float] = ("unlabeled", math.inf)
    for point in fiber.points:
        if point.label == exclude:
            continue
        distance = float(np.min(np.linalg.norm(samples - np.array(point.y), axis=1)))
        if distance < best[1]:
            best = (point.label, distance)
    return best


def reintegrate_forward(
    f: GeneratingFunction,
    fiber: FiberData,
    saddle: CriticalPoint,
    trajectory: Trajectory,
    settings: Settings | None = None,
    radius: float = 1e-4,
    reach: float = 0.1,
) -> Trajectory:
    """Run a backward-traced stable branch forward again until it is back at its saddle.

    The run starts from the last sample within ``reach`` of the saddle; the
    transverse error grows about as fast as the distance to the saddle shrinks.
    """

    settings = settings or Settings()
    tight = replace(
        settings,
        integrator_rtol=min(settings.integrator_rtol, 1e-12),
        integrator_atol=min(settings.integrator_atol, 1e-14),
    )
    distances = np.linalg.norm(np.array(trajectory.samples) - np.array(saddle.y), axis=1)
    within = np.flatnonzero(distances <= reach)
    start = trajectory.samples[int(within[-1])] if within.size else trajectory.samples[0]
    return integrate_descending(
        f,
        fiber.base,
        start,
        tight,
        direction="forward",
        targets=(saddle,),
        convergence_radius=radius,
    )
