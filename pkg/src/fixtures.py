"""Hand-encoded region graphs for every local configuration with a known answer.

Each fixture is a small RegionGraph with one loop and, where available, the
matrices or intermediate classes that loop is expected to produce, so the
glue algebra can be checked without running the numerical pipeline.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

from src.homology import ALL_SADDLES, elementary
from src.models import (
    Crossing,
    Cusp,
    CuspCase,
    Direction,
    IncidenceMatrix,
    IntMatrix,
    Loop,
    Point,
    Region,
    RegionGraph,
    Wall,
)

FixtureFamily = Literal["intersection", "caustic_limit", "cusp", "global"]


@dataclass(frozen=True, slots=True)
class FixtureCase:
    name: str
    family: FixtureFamily
    description: str
    graph: RegionGraph
    loop: Loop
    displayed: tuple[IntMatrix, ...] = ()
    displayed_kind: Literal["chain", "induced"] = "chain"
    cusp: int | None = None
    case: str | None = None
    forced_tau: int | None = None
    chain_display: tuple[tuple[str, ...], ...] = ()


def _spot(index: int, count: int) -> Point:
    angle = 2.0 * math.pi * (index + 0.5) / count
    return (round(math.cos(angle), 6), round(math.sin(angle), 6))


def _ray(index: int, count: int) -> tuple[Point, ...]:
    angle = 2.0 * math.pi * index / count
    return ((0.0, 0.0), (round(math.cos(angle), 6), round(math.sin(angle), 6)))


def _inside(index: int, count: int, entries: tuple[int, int, int]) -> Region:
    return Region(
        id=index,
        rep=_spot(index, count),
        inside=True,
        incidence=IncidenceMatrix(entries=entries),
        labels=ALL_SADDLES,
    )


def _outside(index: int, count: int, labels: tuple[int, int]) -> Region:
    return Region(id=index, rep=_spot(index, count), inside=False, labels=labels)


def _bifurcation(
    name: str,
    left: int,
    right: int,
    count: int,
    pair: tuple[int, int],
    tau: int | None,
    *,
    inside: bool = True,
    dying: int | None = None,
) -> Wall:
    return Wall(
        id=name,
        kind="bifurcation",
        polyline=_ray(right, count),
        left=left,
        right=right,
        inside=inside,
        pair=pair,
        tau=tau,
        dying=dying,
    )


def _fold(name: str, outside: int, inside: int, count: int, dying: int) -> Wall:
    return Wall(id=name, kind="fold", polyline=_ray(inside, count), left=outside, right=inside, dying=dying)


def _twist(cusp: int, left: int, right: int, count: int, pair: tuple[int, int]) -> Wall:
    return Wall(
        id=f"twist-{cusp}",
        kind="twist_line",
        polyline=_ray(right, count),
        left=left,
        right=right,
        cusp=cusp,
        pair=pair,
    )


def _loop(base: int, steps: Sequence[tuple[str, Direction]]) -> Loop:
    return Loop(base=base, crossings=tuple(Crossing(wall=wall, direction=d) for wall, d in steps))


def _cycle(
    name: str,
    description: str,
    incidences: Sequence[tuple[int, int, int]],
    walls: Sequence[tuple[tuple[int, int], int | None]],
    case: str,
    forced_tau: int | None = None,
) -> FixtureCase:
    """Inside regions joined in a ring by bifurcation walls, region k to k+1."""

    count = len(incidences)
    regions = tuple(_inside(k, count, entries) for k, entries in enumerate(incidences))
    wall_models = tuple(
        _bifurcation(f"w{k + 1}", k, (k + 1) % count, count, pair, tau)
        for k, (pair, tau) in enumerate(walls)
    )
    displayed = tuple(
        elementary(pair[1], pair[0], forced_tau if tau is None else tau)  # type: ignore[arg-type]
        for pair, tau in walls
    )
    return FixtureCase(
        name=name,
        family="intersection",
        description=description,
        graph=RegionGraph(regions=regions, walls=wall_models),
        loop=_loop(0, [(f"w{k + 1}", 1) for k in range(count)]),
        displayed=displayed,
        case=case,
        forced_tau=forced_tau,
    )


def intersection_fixtures() -> tuple[FixtureCase, ...]:
    case_a = _cycle(
        "intersection-a",
        "two crossing walls with the same separatrix s1 -> s3",
        [(1, 1, 1), (1, 1, 0), (1, 1, 1), (1, 1, 0)],
        [((1, 3), -1), ((1, 3), 1), ((1, 3), -1), ((1, 3), 1)],
        "a",
    )
    case_b = _cycle(
        "intersection-b",
        "walls s2 -> s1 and s2 -> s3 crossing",
        [(1, 1, 1), (0, 1, 1), (0, 1, 0), (1, 1, 0)],
        [((2, 1), -1), ((2, 3), -1), ((2, 1), 1), ((2, 3), 1)],
        "b",
    )
    case_c = _cycle(
        "intersection-c",
        "walls s2 -> s1 and s2 -> s3 crossing, with the emanating wall s1 -> s3",
        [(1, 1, 1), (0, 1, 1), (0, 1, 0), (0, 1, 0), (1, 1, 0)],
        [((2, 1), -1), ((2, 3), -1), ((1, 3), None), ((2, 1), 1), ((1, 3), 1)],
        "c",
        forced_tau=-1,
    )
    return case_a, case_b, case_c


def caustic_limit_fixtures() -> tuple[FixtureCase, ...]:
    through = FixtureCase(
        name="caustic-limit-a",
        family="caustic_limit",
        description="wall s2 -> s3 continuing outside the fold of s1",
        graph=RegionGraph(
            regions=(
                _inside(0, 4, (1, 1, 1)),
                _inside(1, 4, (1, 1, 0)),
                _outside(2, 4, (2, 3)),
                _outside(3, 4, (2, 3)),
            ),
            walls=(
                _bifurcation("w1", 0, 1, 4, (2, 3), -1),
                _fold("w2", 2, 1, 4, 1),
                _bifurcation("w3", 2, 3, 4, (2, 3), 1, inside=False, dying=1),
                _fold("w4", 3, 0, 4, 1),
            ),
        ),
        loop=_loop(0, [("w1", 1), ("w2", -1), ("w3", 1), ("w4", 1)]),
        chain_display=(
            ("0", "h2 - h1", "h3 - h2"),
            ("h2 - h1", "h3 - h2"),
            ("h2 - h1", "h3 - h1"),
            ("0", "h2 - h1", "h3 - h1"),
        ),
    )
    ending = FixtureCase(
        name="caustic-limit-b",
        family="caustic_limit",
        description="wall s1 -> s3 ending on the fold of s1",
        graph=RegionGraph(
            regions=(
                _inside(0, 3, (1, 1, 1)),
                _inside(1, 3, (1, 1, 0)),
                _outside(2, 3, (2, 3)),
            ),
            walls=(
                _bifurcation("w1", 0, 1, 3, (1, 3), -1),
                _fold("w2", 2, 1, 3, 1),
                _fold("w3", 2, 0, 3, 1),
            ),
        ),
        loop=_loop(0, [("w1", 1), ("w2", -1), ("w3", 1)]),
        chain_display=(
            ("0", "h2 - h1", "h3 - h1"),
            ("h2 - h1", "h3 - h1"),
            ("0", "h2 - h1", "h3 - h1"),
        ),
    )
    return through, ending


def cusp_fixture(pair: tuple[int, int], case: CuspCase) -> FixtureCase:
    """Entry region, inside region, exit region and the cusp's twist line."""

    j, k = pair
    third = next(label for label in ALL_SADDLES if label not in pair)
    entries = [1, 1, 1]
    entries[third - 1] = 1 if case == "a" else 0
    entry_labels = tuple(label for label in ALL_SADDLES if label != j)
    exit_labels = tuple(label for label in ALL_SADDLES if label != k)
    cusp = Cusp(
        id=0,
        point=(0.0, 0.0),
        preimage=(0.0, 0.0),
        pair=pair,
        axis=(1.0, 0.0),
        case=case,
        entry_region=0,
        inside_region=1,
        exit_region=2,
    )
    graph = RegionGraph(
        regions=(
            _outside(0, 3, entry_labels),  # type: ignore[arg-type]
            _inside(1, 3, (entries[0], entries[1], entries[2])),
            _outside(2, 3, exit_labels),  # type: ignore[arg-type]
        ),
        walls=(_fold(f"fold-{j}", 0, 1, 3, j), _fold(f"fold-{k}", 2, 1, 3, k)),
        cusps=(cusp,),
        twist_lines=(_twist(0, 2, 0, 3, pair),),
    )
    return FixtureCase(
        name=f"cusp-{j}{k}-{case}",
        family="cusp",
        description=f"cusp where n merges with s{j} and s{k}, case ({case})",
        graph=graph,
        loop=_loop(0, [(f"fold-{j}", 1), (f"fold-{k}", -1), ("twist-0", 1)]),
        cusp=0,
        case=case,
    )


def global_fixture() -> FixtureCase:
    """Six outside regions around a whole tricuspoid, three walls and three twist lines."""

    labels: tuple[tuple[int, int], ...] = ((1, 2), (1, 2), (1, 3), (1, 3), (2, 3), (1, 2))
    cusps = (
        Cusp(id=0, point=(0.0, 0.0), preimage=(0.0, 0.0), pair=(2, 3), axis=(1.0, 0.0), case="b"),
        Cusp(id=1, point=(0.0, 0.0), preimage=(0.0, 0.0), pair=(1, 2), axis=(-0.5, 0.866025), case="b"),
        Cusp(id=2, point=(0.0, 0.0), preimage=(0.0, 0.0), pair=(1, 3), axis=(-0.5, -0.866025), case="b"),
    )
    graph = RegionGraph(
        regions=tuple(_outside(k, 6, label) for k, label in enumerate(labels)),
        walls=(
            _bifurcation("b1", 0, 1, 6, (2, 1), -1, inside=False, dying=3),
            _bifurcation("b2", 2, 3, 6, (1, 3), -1, inside=False, dying=2),
            _bifurcation("b3", 5, 0, 6, (1, 2), 1, inside=False, dying=3),
        ),
        cusps=cusps,
        twist_lines=(
            _twist(0, 1, 2, 6, (2, 3)),
            _twist(1, 3, 4, 6, (1, 2)),
            _twist(2, 5, 4, 6, (1, 3)),
        ),
    )
    return FixtureCase(
        name="global-tricuspoid",
        family="global",
        description="loop enclosing the whole caustic, crossing b1 a1 b2 a2 a3 b3",
        graph=graph,
        loop=_loop(
            0,
            [("b1", 1), ("twist-0", 1), ("b2", 1), ("twist-1", 1), ("twist-2", -1), ("b3", 1)],
        ),
        displayed=(
            ((1, -1), (0, 1)),
            ((1, 0), (0, -1)),
            ((1, 0), (-1, 1)),
            ((-1, 0), (0, 1)),
            ((0, -1), (1, 0)),
            ((1, 0), (1, 1)),
        ),
        displayed_kind="induced",
    )


def build_fixtures() -> tuple[FixtureCase, ...]:
    cusps = tuple(
        cusp_fixture(pair, case) for pair in ((2, 3), (1, 2), (1, 3)) for case in ("a", "b")
    )
    return (*intersection_fixtures(), *caustic_limit_fixtures(), *cusps, global_fixture())


FIXTURES: tuple[FixtureCase, ...] = build_fixtures()


def fixture_inventory(fixtures: Sequence[FixtureCase] = FIXTURES) -> tuple[tuple[str, str, str], ...]:
    return tuple((fixture.name, fixture.family, fixture.description) for fixture in fixtures)


def fixture(name: str) -> FixtureCase:
    for item in FIXTURES:
        if item.name == name:
            return item
    raise KeyError(name)
