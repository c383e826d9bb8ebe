"""Loop composition over the region graph, tau resolution and identity checks.

A loop is a base region plus an ordered list of wall crossings. Each crossing
contributes one glue map and the monodromy is the ordered product, later
crossings multiplying on the left.
"""

from __future__ import annotations

import itertools
import math
import time
from collections import deque
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import sympy as sp

from src.config import Settings
from src.errors import (
    ArrangementFailure,
    GlueError,
    InvalidLoop,
    MissingGlue,
    UmbilicError,
    UnknownCase,
)
from src.homology import (
    ALL_SADDLES,
    apply_chain,
    caustic_glue,
    complex_from_region,
    cusp_matrix,
    cusp_twist,
    determinant,
    homology_fibre,
    identity,
    inside_fibre,
    invert,
    multiply,
    normal_form,
    outside_fibre,
    outside_wall_matrix,
    sheet_transport,
    split_twist_chain_glue,
    wall_matrix,
    wall_tau,
)
from src.logger import get_logger
from src.mirror import closing_permutation, continue_sheets, sheets
from src.models import (
    BasePoint,
    BasisRecord,
    Crossing,
    Direction,
    GeneratingFunction,
    GlueMap,
    HomologyFibre,
    IntMatrix,
    Loop,
    MonodromyResult,
    Point,
    Region,
    RegionGraph,
    SheetMonodromy,
    VerificationItem,
    VerificationMode,
    VerificationReport,
    VerificationSummary,
    Wall,
)

if TYPE_CHECKING:
    from src.fixtures import FixtureCase
    from src.strata import Stratification

logger = get_logger("monodromy")


@dataclass(frozen=True, slots=True)
class GluePolicy:
    """Which wall kinds contribute their glue map to a composition."""

    bifurcation: bool = True
    fold: bool = True
    twist: bool = True


FULL_POLICY = GluePolicy()
NO_TWIST = GluePolicy(twist=False)

# radians; near the window edge the walls still bend toward the leading-form rays
_ASYMPTOTE_TOLERANCE = 0.35


def region_fibre(region: Region) -> HomologyFibre:
    return homology_fibre(complex_from_region(region))


def _target(wall: Wall, region_id: int, crossing: Crossing) -> int:
    source = wall.left if crossing.direction == 1 else wall.right
    if source != region_id:
        raise InvalidLoop(
            f"crossing {wall.id} with direction {crossing.direction} does not start in region {region_id}"
        )
    return wall.right if crossing.direction == 1 else wall.left


def crossing_glue(
    graph: RegionGraph, region_id: int, crossing: Crossing, policy: GluePolicy = FULL_POLICY
) -> tuple[GlueMap, int]:
    """Glue map for one crossing out of ``region_id`` and the region it lands in."""

    try:
        wall = graph.wall(crossing.wall)
    except KeyError:
        raise InvalidLoop(f"unknown wall {crossing.wall!r}") from None
    target_id = _target(wall, region_id, crossing)
    source, target = graph.region(region_id), graph.region(target_id)
    direction: Direction = crossing.direction

    if wall.kind == "fold":
        if not policy.fold:
            raise MissingGlue(f"fold glue is disabled but the loop crosses {wall.id}")
        if wall.dying is None:
            raise MissingGlue(f"fold {wall.id} has no dying saddle")
        if direction == 1:
            return caustic_glue(region_fibre(source), region_fibre(target), wall.dying, "in", wall.id), target_id
        return caustic_glue(region_fibre(target), region_fibre(source), wall.dying, "out", wall.id), target_id

    if wall.kind == "bifurcation":
        if not policy.bifurcation:
            # no relation check: the incidences on the two sides differ
            glue = GlueMap(
                kind="identity",
                chain_map=identity(region_fibre(source).ambient_rank),
                induced=identity(2),
                source_labels=source.labels,
                target_labels=target.labels,
                wall=wall.id,
                direction=direction,
            )
            return glue, target_id
        if wall.pair is None:
            raise MissingGlue(f"wall {wall.id} has no separatrix pair")
        if wall.inside:
            left, right = graph.region(wall.left), graph.region(wall.right)
            assert left.incidence is not None and right.incidence is not None
            tau = wall.tau
            if tau is None:
                tau = wall_tau(left.incidence.entries, right.incidence.entries, wall.pair)
                if tau is None:
                    raise MissingGlue(f"tau of wall {wall.id} is unresolved")
            if direction == 1:
                glue = wall_matrix(left.incidence.entries, right.incidence.entries, wall.pair, tau, wall.id, 1)
            else:
                glue = wall_matrix(right.incidence.entries, left.incidence.entries, wall.pair, -tau, wall.id, -1)
            return glue, target_id
        if wall.tau is None or wall.dying is None:
            raise MissingGlue(f"outside wall {wall.id} lacks tau or its dying saddle")
        tau = wall.tau if direction == 1 else -wall.tau
        return outside_wall_matrix(wall.pair, tau, wall.dying, wall.id, direction), target_id

    if wall.kind == "twist_line":
        if wall.cusp is None:
            raise MissingGlue(f"twist line {wall.id} is not attached to a cusp")
        cusp = graph.cusp(wall.cusp)
        if policy.twist:
            if cusp.case is None:
                raise UnknownCase(f"cusp {cusp.id} has no case")
            glue = cusp_twist(cusp.id, cusp.case, cusp.pair, direction, wall.id)
        else:
            glue = sheet_transport(cusp.pair, direction, wall.id)
        if glue.source_labels != source.labels or glue.target_labels != target.labels:
            raise InvalidLoop(
                f"twist line {wall.id} joins labels {source.labels} -> {target.labels}, "
                f"expected {glue.source_labels} -> {glue.target_labels}"
            )
        return glue, target_id

    raise MissingGlue(f"wall {wall.id} of kind {wall.kind} carries no glue map")


def validate_loop(graph: RegionGraph, loop: Loop) -> tuple[int, ...]:
    """Regions visited by ``loop``, base first; raises InvalidLoop unless it closes."""

    try:
        region = graph.region(loop.base).id
    except KeyError:
        raise InvalidLoop(f"unknown base region {loop.base}") from None
    visited = [region]
    for crossing in loop.crossings:
        try:
            wall = graph.wall(crossing.wall)
        except KeyError:
            raise InvalidLoop(f"unknown wall {crossing.wall!r}") from None
        region = _target(wall, region, crossing)
        visited.append(region)
    if region != loop.base:
        raise InvalidLoop(f"loop ends in region {region}, not at its base {loop.base}")
    return tuple(visited)


def _basis_record(region: Region) -> BasisRecord:
    fibre = region_fibre(region)
    return BasisRecord(region=region.id, labels=fibre.labels, relation=fibre.relation)


def compose_loop(graph: RegionGraph, loop: Loop, policy: GluePolicy = FULL_POLICY) -> MonodromyResult:
    """Ordered product of the induced glue matrices along ``loop``."""

    validate_loop(graph, loop)
    region_id = loop.base
    base = graph.region(region_id)
    matrix = identity(2)
    steps: list[GlueMap] = []
    bases = [_basis_record(base)]
    for crossing in loop.crossings:
        glue, region_id = crossing_glue(graph, region_id, crossing, policy)
        matrix = multiply(glue.induced, matrix)
        steps.append(glue)
        bases.append(_basis_record(graph.region(region_id)))

    chain_matrix: IntMatrix | None = None
    if steps and all(len(step.chain_map) == 3 and len(step.chain_map[0]) == 3 for step in steps):
        chain_matrix = identity(3)
        for step in steps:
            chain_matrix = multiply(step.chain_map, chain_matrix)
    return MonodromyResult(
        loop=loop,
        steps=tuple(steps),
        bases=tuple(bases),
        matrix=matrix,
        chain_matrix=chain_matrix,
        is_identity=matrix == identity(len(matrix)),
    )


def concatenate(first: Loop, second: Loop) -> Loop:
    if first.base != second.base:
        raise InvalidLoop(f"loops based at {first.base} and {second.base} cannot be concatenated")
    return Loop(base=first.base, crossings=first.crossings + second.crossings)


def invert_loop(loop: Loop) -> Loop:
    return Loop(
        base=loop.base,
        crossings=tuple(
            Crossing(wall=c.wall, direction=-c.direction)  # type: ignore[arg-type]
            for c in reversed(loop.crossings)
        ),
    )


def _adjacent(graph: RegionGraph, region_id: int) -> list[Crossing]:
    moves = []
    for wall in graph.all_walls:
        if wall.left == region_id:
            moves.append(Crossing(wall=wall.id, direction=1))
        elif wall.right == region_id:
            moves.append(Crossing(wall=wall.id, direction=-1))
    return moves


def _shortest_path(graph: RegionGraph, start: int, goal: int) -> tuple[Crossing, ...]:
    previous: dict[int, tuple[int, Crossing] | None] = {start: None}
    queue = deque([start])
    while queue:
        region = queue.popleft()
        if region == goal:
            break
        for crossing in _adjacent(graph, region):
            wall = graph.wall(crossing.wall)
            following = wall.right if crossing.direction == 1 else wall.left
            if following not in previous:
                previous[following] = (region, crossing)
                queue.append(following)
    if goal not in previous:
        raise InvalidLoop(f"region {goal} is unreachable from region {start}")
    path: list[Crossing] = []
    node = goal
    while previous[node] is not None:
        parent, crossing = previous[node]  # type: ignore[misc]
        path.append(crossing)
        node = parent
    return tuple(reversed(path))


def random_loop(
    graph: RegionGraph, rng: np.random.Generator, length: int = 6, base: int | None = None
) -> Loop:
    """Random walk of ``length`` crossings closed by the shortest way home."""

    if base is None:
        base = graph.regions[int(rng.integers(len(graph.regions)))].id
    region = base
    crossings: list[Crossing] = []
    for _ in range(length):
        moves = _adjacent(graph, region)
        if not moves:
            break
        crossing = moves[int(rng.integers(len(moves)))]
        wall = graph.wall(crossing.wall)
        region = wall.right if crossing.direction == 1 else wall.left
        crossings.append(crossing)
    return Loop(base=base, crossings=tuple(crossings) + _shortest_path(graph, region, base))


def chain_symbols(region: Region) -> tuple[sp.Symbol, ...]:
    labels = ALL_SADDLES if region.inside else region.labels
    return tuple(sp.Symbol(f"h{label}") for label in labels)


def transport_chain(
    graph: RegionGraph,
    loop: Loop,
    chain: Sequence[sp.Expr] | None = None,
    policy: GluePolicy = FULL_POLICY,
) -> tuple[tuple[sp.Expr, ...], ...]:
    """Normal form of a symbolic chain after every crossing of ``loop``."""

    validate_loop(graph, loop)
    region_id = loop.base
    current = tuple(chain) if chain is not None else chain_symbols(graph.region(region_id))
    displays: list[tuple[sp.Expr, ...]] = []
    for crossing in loop.crossings:
        glue, region_id = crossing_glue(graph, region_id, crossing, policy)
        current = normal_form(region_fibre(graph.region(region_id)), apply_chain(glue.chain_map, current))
        displays.append(current)
    return tuple(displays)


# Cusps -----------------------------------------------------------------------


def cusp_loop(graph: RegionGraph, cusp_id: int) -> Loop:
    """Enter through the fold of the lower label, leave through the higher one, close over the twist line."""

    cusp = graph.cusp(cusp_id)
    if cusp.entry_region is None or cusp.inside_region is None or cusp.exit_region is None:
        raise ArrangementFailure(f"cusp {cusp_id} has no neighbouring regions recorded")
    j, k = cusp.pair

    def fold(outside: int, dying: int) -> Wall:
        for wall in graph.walls_between(outside, cusp.inside_region):  # type: ignore[arg-type]
            if wall.kind == "fold" and wall.dying == dying:
                return wall
        raise ArrangementFailure(f"cusp {cusp_id}: no fold of s{dying} next to region {outside}")

    entry, exit_ = fold(cusp.entry_region, j), fold(cusp.exit_region, k)
    twist = next(
        (wall for wall in graph.twist_lines if wall.cusp == cusp_id),
        None,
    )
    if twist is None:
        raise MissingGlue(f"cusp {cusp_id} has no twist line")
    return Loop(
        base=cusp.entry_region,
        crossings=(
            Crossing(wall=entry.id, direction=1 if entry.left == cusp.entry_region else -1),
            Crossing(wall=exit_.id, direction=1 if exit_.left == cusp.inside_region else -1),
            Crossing(wall=twist.id, direction=1 if twist.left == cusp.exit_region else -1),
        ),
    )


def cusp_monodromy(
    graph: RegionGraph,
    cusp_id: int,
    case: str | None = None,
    loop: Loop | None = None,
    policy: GluePolicy = FULL_POLICY,
) -> IntMatrix:
    """Product of the glue maps met around a cusp, excluding its own twist line.

    The loop is rotated so the twist crossing comes last; the result is the
    matrix the twist line has to cancel.
    """

    if case is not None:
        cusps = tuple(
            c.model_copy(update={"case": case}) if c.id == cusp_id else c for c in graph.cusps
        )
        graph = graph.model_copy(update={"cusps": cusps})
    loop = loop or cusp_loop(graph, cusp_id)
    visited = validate_loop(graph, loop)
    positions = [
        n for n, crossing in enumerate(loop.crossings) if graph.wall(crossing.wall).cusp == cusp_id
    ]
    if len(positions) != 1:
        raise InvalidLoop(f"a cusp loop must cross the twist line of cusp {cusp_id} exactly once")
    last = positions[0]
    rotated = loop.crossings[last + 1 :] + loop.crossings[: last + 1]
    result = compose_loop(graph, Loop(base=visited[last + 1], crossings=rotated), policy)
    matrix = identity(2)
    for step in result.steps[:-1]:
        matrix = multiply(step.induced, matrix)
    return matrix


# Tau resolution --------------------------------------------------------------


def unknown_taus(graph: RegionGraph) -> tuple[str, ...]:
    """Bifurcation walls whose tau is neither stored nor forced by the incidences."""

    unknown = []
    for wall in graph.walls:
        if wall.kind != "bifurcation" or wall.pair is None or wall.tau is not None:
            continue
        if wall.inside:
            left, right = graph.region(wall.left), graph.region(wall.right)
            assert left.incidence is not None and right.incidence is not None
            if wall_tau(left.incidence.entries, right.incidence.entries, wall.pair) is not None:
                continue
        unknown.append(wall.id)
    return tuple(unknown)


def with_taus(graph: RegionGraph, values: Mapping[str, int]) -> RegionGraph:
    walls = tuple(
        wall.model_copy(update={"tau": values[wall.id]}) if wall.id in values else wall
        for wall in graph.walls
    )
    return graph.model_copy(update={"walls": walls})


def admissible_taus(
    graph: RegionGraph, loops: Sequence[Loop], unknown: Sequence[str]
) -> tuple[dict[str, int], ...]:
    """Every assignment of {-1, 0, 1} to ``unknown`` under which all ``loops`` compose to Id."""

    if len(unknown) > 8:
        raise ArrangementFailure(f"{len(unknown)} unknown taus are too many to enumerate jointly")
    found = []
    for values in itertools.product((-1, 0, 1), repeat=len(unknown)):
        assignment = dict(zip(unknown, values, strict=True))
        candidate = with_taus(graph, assignment)
        try:
            if all(compose_loop(candidate, loop).is_identity for loop in loops):
                found.append(assignment)
        except GlueError:
            continue
    return tuple(found)


def _loop_walls(loop: Loop) -> set[str]:
    return {crossing.wall for crossing in loop.crossings}


def resolve_taus(graph: RegionGraph, loops: Sequence[Loop] | None = None) -> RegionGraph:
    """Fill unknown taus from loops that must compose to the identity.

    Loops are solved one at a time while that pins down a unique value; the
    rest are solved jointly, and anything still free defaults to 0.
    """

    started = time.monotonic()
    loops = tuple(loops if loops is not None else graph.junctions)
    pending = set(unknown_taus(graph))
    solved: dict[str, int] = {}
    progress = True
    while pending and progress:
        progress = False
        for loop in loops:
            involved = sorted(_loop_walls(loop) & pending)
            if not involved or len(involved) > 8:
                continue
            options = admissible_taus(with_taus(graph, solved), [loop], involved)
            for wall_id in involved:
                values = {option[wall_id] for option in options}
                if len(values) == 1:
                    solved[wall_id] = values.pop()
                    pending.discard(wall_id)
                    progress = True

    if pending:
        involved = sorted(pending)
        relevant = [loop for loop in loops if _loop_walls(loop) & pending]
        options: tuple[dict[str, int], ...] = ()
        if relevant and len(involved) <= 8:
            options = admissible_taus(with_taus(graph, solved), relevant, involved)
        for wall_id in involved:
            values = {option[wall_id] for option in options}
            if len(values) == 1:
                solved[wall_id] = values.pop()
            else:
                solved[wall_id] = 0
                logger.warning("tau_defaulted", extra={"wall": wall_id, "admissible": sorted(values)})

    logger.info(
        "monodromy_taus_completed",
        extra={"solved": len(solved), "duration_ms": round((time.monotonic() - started) * 1000, 3)},
    )
    return with_taus(graph, solved)


# Sheets ----------------------------------------------------------------------


def circle_loop(center: Point, radius: float, steps: int = 256) -> tuple[Point, ...]:
    return tuple(
        (
            center[0] + radius * math.cos(2.0 * math.pi * k / steps),
            center[1] + radius * math.sin(2.0 * math.pi * k / steps),
        )
        for k in range(steps)
    )


def sheet_monodromy(
    f: GeneratingFunction, points: Sequence[Point], settings: Settings | None = None
) -> SheetMonodromy:
    """Permutation of the sheets of L after continuation once around a closed base path."""

    settings = settings or Settings()
    start = sheets(f, BasePoint(x1=points[0][0], x2=points[0][1]), settings)
    path = [*points[1:], points[0]]
    transported = continue_sheets(f, start, path, settings)
    permutation = closing_permutation(start, transported[-1])
    size = len(permutation)
    matrix = tuple(
        tuple(1 if permutation[column] == row else 0 for column in range(size)) for row in range(size)
    )
    return SheetMonodromy(permutation=tuple(permutation), matrix=matrix, steps=len(transported))


# Verification ----------------------------------------------------------------


def _summary(mode: VerificationMode, items: Sequence[VerificationItem]) -> VerificationReport:
    passed = sum(1 for item in items if item.passed)
    return VerificationReport(
        mode=mode,
        summary=VerificationSummary(total=len(items), passed=passed, failed=len(items) - passed),
        items=tuple(items),
    )


def _check(name: str, passed: bool, detail: str = "") -> VerificationItem:
    return VerificationItem(name=name, passed=bool(passed), detail=detail)


def _guarded(name: str, checks: Iterator[VerificationItem]) -> list[VerificationItem]:
    """Collect items until the first pipeline error, which becomes a failed item."""

    items: list[VerificationItem] = []
    while True:
        try:
            items.append(next(checks))
        except StopIteration:
            return items
        except UmbilicError as exc:
            items.append(_check(name, False, f"{exc.code}: {exc.message}"))
            return items


def _fixture_items(fixture: FixtureCase, rng: np.random.Generator) -> Iterator[VerificationItem]:
    graph = fixture.graph
    if fixture.forced_tau is not None:
        unknown = unknown_taus(graph)
        options = admissible_taus(graph, [fixture.loop], unknown)
        expected = ({wall_id: fixture.forced_tau for wall_id in unknown},)
        yield _check(
            f"{fixture.name}: forced tau",
            options == expected,
            f"admissible assignments {list(options)}",
        )
        graph = with_taus(graph, expected[0])

    if fixture.family == "cusp":
        assert fixture.cusp is not None and fixture.case is not None
        cusp = graph.cusp(fixture.cusp)
        matrix = cusp_monodromy(graph, fixture.cusp)
        yield _check(
            f"{fixture.name}: cusp matrix",
            matrix == cusp_matrix(cusp.pair, fixture.case),
            f"got {matrix}",
        )
        reverse = cusp_monodromy(graph, fixture.cusp, loop=invert_loop(fixture.loop))
        yield _check(f"{fixture.name}: reversed loop inverts", reverse == invert(matrix), f"got {reverse}")
        if matrix == invert(matrix):
            yield _check(f"{fixture.name}: both orientations agree", reverse == matrix)

    result = compose_loop(graph, fixture.loop)
    if fixture.displayed:
        shown = tuple(
            step.chain_map if fixture.displayed_kind == "chain" else step.induced for step in result.steps
        )
        yield _check(
            f"{fixture.name}: displayed matrices",
            shown == fixture.displayed,
            f"got {shown}",
        )
    yield _check(f"{fixture.name}: loop composes to Id", result.is_identity, f"got {result.matrix}")

    if fixture.family == "intersection" and fixture.case == "a":
        m = [step.chain_map for step in result.steps]
        relation = m[0] == m[2] == invert(m[1]) == invert(m[3])
        yield _check(f"{fixture.name}: M(w1)=M(w3)=M(w2)^-1=M(w4)^-1", relation)

    if fixture.chain_display:
        displays = transport_chain(graph, fixture.loop)
        expected_chain = tuple(tuple(sp.sympify(entry) for entry in row) for row in fixture.chain_display)
        match = all(
            len(got) == len(want) and all(sp.simplify(a - b) == 0 for a, b in zip(got, want, strict=True))
            for got, want in zip(displays, expected_chain, strict=True)
        ) and len(displays) == len(expected_chain)
        yield _check(f"{fixture.name}: transported classes", match, f"got {displays}")

    if fixture.family == "global":
        bare = compose_loop(graph, fixture.loop, NO_TWIST)
        trace = sum(bare.matrix[k][k] for k in range(len(bare.matrix)))
        yield _check(
            f"{fixture.name}: without twist lines",
            trace == 0 and determinant(bare.matrix) == -1,
            f"got {bare.matrix}",
        )

    functorial = True
    for _ in range(5):
        first = random_loop(graph, rng, base=fixture.loop.base)
        second = random_loop(graph, rng, base=fixture.loop.base)
        a, b = compose_loop(graph, first), compose_loop(graph, second)
        joined = compose_loop(graph, concatenate(first, second))
        backwards = compose_loop(graph, invert_loop(first))
        functorial &= joined.matrix == multiply(b.matrix, a.matrix)
        functorial &= multiply(backwards.matrix, a.matrix) == identity(len(a.matrix))
    yield _check(f"{fixture.name}: random loops are functorial", functorial)


def split_twist_items() -> Iterator[VerificationItem]:
    """The chain-level twist at a case (a) cusp with saddles s2, s3."""

    inside = inside_fibre((1, 1, 1))
    entry, exit_ = outside_fibre((1, 3)), outside_fibre((1, 2))
    fold_in = caustic_glue(entry, inside, 2, "in")
    fold_out = caustic_glue(exit_, inside, 3, "out")
    split = split_twist_chain_glue((1, 1, 1))
    with_split = multiply(fold_out.chain_map, multiply(split.chain_map, fold_in.chain_map))
    without = multiply(fold_out.chain_map, fold_in.chain_map)

    h = sp.symbols("h1:4")
    g = sp.Symbol("g")
    shifted = apply_chain(split.chain_map, tuple(h[k] + g for k in range(3)))
    expected = tuple(entry - g for entry in apply_chain(split.chain_map, h))
    commutes = all(sp.simplify(a - b) == 0 for a, b in zip(shifted, expected, strict=True))
    yield _check("split-twist: cusp loop composes to Id", with_split == identity(2), f"got {with_split}")
    yield _check(
        "split-twist: without the split the cusp matrix remains",
        without == cusp_matrix((2, 3), "a"),
        f"got {without}",
    )
    yield _check("split-twist: commutes with the relation up to sign", commutes)


def verify_fixture_suite(fixtures: Sequence[FixtureCase] | None = None, seed: int = 0) -> VerificationReport:
    """Run every identity the synthetic fixtures encode; failures become report items."""

    from src.fixtures import FIXTURES

    started = time.monotonic()
    rng = np.random.default_rng(seed)
    items: list[VerificationItem] = []
    for fixture in fixtures if fixtures is not None else FIXTURES:
        items += _guarded(fixture.name, _fixture_items(fixture, rng))
    items += _guarded("split-twist", split_twist_items())
    report = _summary("fixtures", items)
    logger.info(
        "verification_completed",
        extra={
            "mode": "fixtures",
            "passed": report.summary.passed,
            "failed": report.summary.failed,
            "duration_ms": round((time.monotonic() - started) * 1000, 3),
        },
    )
    return report


def _angle_gap(a: float, b: float) -> float:
    gap = (a - b) % (2.0 * math.pi)
    return min(gap, 2.0 * math.pi - gap)


def _numeric_items(strat: Stratification, samples: int, seed: int) -> Iterator[VerificationItem]:
    from src.flow import incidence_matrix
    from src.strata import asymptotic_wall_angles, ring_loop, sample_region_interior

    graph = strat.graph
    yield _check(
        "caustic: one closed curve with three cusps",
        not strat.caustic.degenerate and len(strat.caustic.cusps) == 3,
        f"{len(strat.caustic.cusps)} cusps",
    )

    incoherent = []
    for wall in graph.walls:
        if wall.kind != "bifurcation" or not wall.inside or wall.pair is None:
            continue
        left, right = graph.region(wall.left), graph.region(wall.right)
        assert left.incidence is not None and right.incidence is not None
        try:
            wall_matrix(left.incidence.entries, right.incidence.entries, wall.pair, wall.tau)
        except GlueError as exc:
            incoherent.append(f"{wall.id}: {exc.message}")
    yield _check("walls: E(tau) I(U) = I(V)", not incoherent, "; ".join(incoherent))

    rng = np.random.default_rng(seed)
    mismatched = []
    for region in graph.regions:
        if not region.inside:
            continue
        for point, fiber in sample_region_interior(strat, region.id, samples, rng):
            found = incidence_matrix(
                strat.function, BasePoint(x1=point[0], x2=point[1]), strat.settings, strat.labeler, fiber
            )
            if region.incidence is None or found.entries != region.incidence.entries:
                mismatched.append(f"region {region.id} at {point}: {found.entries}")
    yield _check("regions: incidence reproduced by interior samples", not mismatched, "; ".join(mismatched[:5]))

    asymptotes = asymptotic_wall_angles(strat.function, strat.settings)
    center = strat.caustic.center
    deviations = []
    reached: set[int] = set()
    for wall in graph.walls:
        if wall.kind != "bifurcation" or wall.inside:
            continue
        outermost = max(wall.polyline, key=lambda point: math.dist(point, center))
        if math.dist(outermost, center) <= 0.5 * strat.window:
            continue
        angle = math.atan2(outermost[1] - center[1], outermost[0] - center[0])
        gaps = [_angle_gap(angle, a) for a in asymptotes]
        if gaps:
            nearest = int(np.argmin(gaps))
            reached.add(nearest)
            deviations.append(gaps[nearest])
    worst = max(deviations, default=math.inf)
    yield _check(
        "walls: outside walls head for the asymptotic directions",
        len(reached) == len(asymptotes) > 0 and worst <= _ASYMPTOTE_TOLERANCE,
        f"{len(reached)} of {len(asymptotes)} directions reached, max deviation {worst:.3g} rad",
    )

    outer = ring_loop(strat)
    bare = compose_loop(graph, outer, NO_TWIST)
    trace = sum(bare.matrix[k][k] for k in range(len(bare.matrix)))
    yield _check(
        "global loop without twist lines: trace 0, det -1",
        trace == 0 and determinant(bare.matrix) == -1,
        f"got {bare.matrix}",
    )
    full = compose_loop(graph, outer)
    yield _check("global loop with twist lines: Id", full.is_identity, f"got {full.matrix}")

    for cusp in graph.cusps:
        loop = strat.cusp_loops.get(cusp.id)
        if loop is None or cusp.case is None:
            yield _check(f"cusp {cusp.id}: analysed", False, "no loop or case")
            continue
        matrix = cusp_monodromy(graph, cusp.id, loop=loop)
        yield _check(
            f"cusp {cusp.id} {cusp.pair} case {cusp.case}: matches the catalogue",
            matrix == cusp_matrix(cusp.pair, cusp.case),
            f"got {matrix}",
        )
        yield _check(f"cusp {cusp.id}: loop composes to Id", compose_loop(graph, loop).is_identity)

    failing = [
        ",".join(c.wall for c in loop.crossings)
        for loop in graph.junctions
        if not compose_loop(graph, loop).is_identity
    ]
    yield _check("junctions compose to Id", not failing, "; ".join(failing[:5]))


def verify_numeric(strat: Stratification, samples: int = 20, seed: int = 0) -> VerificationReport:
    """Check the realized stratification against the identities the fixtures encode."""

    started = time.monotonic()
    items = _guarded("numeric pipeline", _numeric_items(strat, samples, seed))
    report = _summary("numeric", items)
    logger.info(
        "verification_completed",
        extra={
            "mode": "numeric",
            "passed": report.summary.passed,
            "failed": report.summary.failed,
            "duration_ms": round((time.monotonic() - started) * 1000, 3),
        },
    )
    return report
