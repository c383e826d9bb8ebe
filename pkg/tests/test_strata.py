"""Caustic tracing, signatures, loops from region sequences and the full pipeline."""

import itertools
import logging
import math
from collections.abc import Callable

import numpy as np
import pytest

from src.config import ConfigError, Settings
from src.errors import ArrangementFailure, PlacementConflict, UnresolvedWall
from src.family import elliptic_umbilic, solve_fiber, symmetric_umbilic
from src.fixtures import FixtureCase
from src.models import (
    BasePoint,
    Caustic,
    CriticalPoint,
    Cusp,
    FiberData,
    GeneratingFunction,
    Point,
    Region,
    RegionGraph,
)
from src.monodromy import compose_loop, validate_loop
from src.strata import (
    LabelCut,
    PolarScan,
    ScanNode,
    Stratification,
    apply_cuts,
    asymptotic_wall_angles,
    build_region_graph,
    check_window,
    cut_region_pairs,
    incidence_from_signature,
    install_twist_lines,
    locate_bifurcation_walls,
    locate_crossings,
    loop_from_regions,
    node_regions,
    place_label_cuts,
    reliable,
    ring_loop,
    sample_region_interior,
    stratify,
    swap_signature,
    trace_caustic,
)


def _circular_gap(a: float, b: float) -> float:
    gap = abs(a - b) % (2.0 * math.pi)
    return min(gap, 2.0 * math.pi - gap)


def _segments_meet(first: tuple[Point, ...], second: tuple[Point, ...]) -> bool:
    def orient(a: Point, b: Point, c: Point) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    (p, q), (r, s) = first, second
    return orient(r, s, p) * orient(r, s, q) <= 0.0 and orient(p, q, r) * orient(p, q, s) <= 0.0


def _outside_fiber(x: Point, labels: tuple[int, int]) -> FiberData:
    points = tuple(
        CriticalPoint(y=(float(k), 0.0), morse_index=1, value=0.0, hess_eigs=(-1.0, 1.0), label=f"s{label}")
        for k, label in enumerate(labels)
    )
    return FiberData(base=BasePoint(x1=x[0], x2=x[1]), points=points, inside_caustic=False)


def _outside_signature(labels: tuple[int, int], far: bool) -> tuple[str, ...]:
    ascent = "+2" if far else "+1"
    return ("out", *sorted(f"s{label}:+0,{ascent}|-0,-1" for label in labels))


def _wedge_scan() -> PolarScan:
    """Eight spokes about the origin, a cusp at (0.5, 0) and a wall just below its axis.

    Spokes 0-2 carry labels (1, 2) and spokes 5-7 labels (1, 3); spokes 3 and 4
    are unusable. The outer two rings of spoke 7 lie beyond a wall.
    """

    radii = (1.0, 2.0, 3.0)
    angles = tuple((m + 0.5) * math.pi / 4.0 for m in range(8))
    nodes = []
    for ring, radius in enumerate(radii):
        for spoke, angle in enumerate(angles):
            point = (radius * math.cos(angle), radius * math.sin(angle))
            if spoke in (3, 4):
                nodes.append(ScanNode(ring=ring, spoke=spoke, point=point, fiber=None, signature=None))
                continue
            labels = (1, 2) if spoke < 3 else (1, 3)
            far = spoke == 7 and ring > 0
            nodes.append(
                ScanNode(
                    ring=ring,
                    spoke=spoke,
                    point=point,
                    fiber=_outside_fiber(point, labels),
                    signature=_outside_signature(labels, far),
                )
            )
    return PolarScan(center=(0.0, 0.0), radii=radii, angles=angles, nodes=tuple(nodes))


_WEDGE_CUSP = Cusp(id=0, point=(0.5, 0.0), preimage=(0.0, 0.0), pair=(2, 3), axis=(1.0, 0.0))


@pytest.mark.parametrize(
    ("signature", "expected"),
    [
        (("in", "s1:+0,n|-1,-2", "s2:+1,+2|-0,-2", "s3:+0,+2|-0,-1"), True),
        (("out", "s1:+0,+1|-0,-2", "s2:+1,+2|-1,-2"), True),
        (("in", "s1:?,n|-1,-2", "s2:+1,+2|-0,-2", "s3:+0,+2|-0,-1"), False),
        (("in", "s1:+0,s3|-1,-2", "s2:+1,+2|-0,-2", "s3:+0,+2|-0,-1"), False),
        (("in", "s1:+0,+1|-1,n", "s2:+1,+2|-0,-2", "s3:+0,+2|-0,-1"), False),
        (("out", "s1:unlabeled,+1|-0,-2", "s2:+1,+2|-1,-2"), False),
    ],
)
def test_reliable_signatures(signature: tuple[str, ...], expected: bool) -> None:
    assert reliable(signature) is expected


def test_incidence_counts_stable_branches_reaching_the_node() -> None:
    signature = ("in", "s1:+0,n|-1,-2", "s2:n,n|-0,-2", "s3:+0,+2|-0,-1")
    assert incidence_from_signature(signature).entries == (1, 1, 0)


def test_swapping_labels_renames_and_resorts_signature_entries() -> None:
    signature = ("out", "s1:+0,s2|-1,-2", "s2:+1,+2|-0,s1")

    swapped = swap_signature(signature, (1, 2))

    assert swapped == ("out", "s1:+1,+2|-0,s2", "s2:+0,s1|-1,-2")
    assert swap_signature(swapped, (1, 2)) == signature
    assert swap_signature(signature, (1, 3)) == ("out", "s2:+1,+2|-0,s3", "s3:+0,s2|-1,-2")


@pytest.mark.parametrize(
    ("rotation", "x", "expected"),
    [
        (0.5, (2.0, 0.3), True),
        (0.5, (2.0, -0.3), False),
        (0.5, (2.0, 2.0), False),
        (-0.5, (2.0, -0.3), True),
        (0.0, (2.0, 0.3), False),
    ],
)
def test_label_cut_swaps_only_inside_its_wedge(rotation: float, x: Point, expected: bool) -> None:
    cut = LabelCut(cusp=0, point=(1.0, 0.0), pair=(2, 3), axis=(1.0, 0.0), rotation=rotation)
    assert cut.swaps(x) is expected


def test_cuts_relabel_outside_fibers_that_keep_the_third_saddle() -> None:
    cut = LabelCut(cusp=0, point=(0.0, 0.0), pair=(2, 3), axis=(1.0, 0.0), rotation=0.5)
    x = (1.0, 0.2)

    fiber, signature = apply_cuts(x, _outside_fiber(x, (1, 3)), _outside_signature((1, 3), False), (cut,))
    assert fiber is not None and fiber.saddle_indices == (1, 2)
    assert signature == _outside_signature((1, 2), False)

    untouched = _outside_fiber(x, (2, 3))
    assert apply_cuts(x, untouched, None, (cut,)) == (untouched, None)


def test_cut_rotates_until_it_borders_one_pair_of_regions() -> None:
    scan = _wedge_scan()
    assert len(cut_region_pairs(scan, node_regions(scan), (2, 3))) == 2

    relabeled, cuts = place_label_cuts(scan, [_WEDGE_CUSP], 3.0)

    assert len(cuts) == 1
    assert cuts[0].rotation == pytest.approx(math.radians(43.0))
    assert relabeled.node(0, 0).fiber.saddle_indices == (1, 3)  # type: ignore[union-attr]
    assert relabeled.node(2, 1).fiber.saddle_indices == (1, 2)  # type: ignore[union-attr]
    assert len(cut_region_pairs(relabeled, node_regions(relabeled), (2, 3))) == 1


def test_twist_line_starts_at_its_cusp_and_ends_on_the_window() -> None:
    graph = RegionGraph(
        regions=(
            Region(id=0, rep=(1.0, 1.0), inside=False, labels=(1, 2)),
            Region(id=1, rep=(1.0, -1.0), inside=False, labels=(1, 3)),
        ),
        walls=(),
        cusps=(_WEDGE_CUSP,),
    )
    cut = LabelCut(cusp=0, point=_WEDGE_CUSP.point, pair=(2, 3), axis=(1.0, 0.0), rotation=0.3)

    installed = install_twist_lines(graph, [cut], 2.0, {(2, 3): (0, 1)})

    (line,) = installed.twist_lines
    assert math.dist(line.polyline[0], _WEDGE_CUSP.point) < 1e-9
    assert max(abs(line.polyline[-1][0]), abs(line.polyline[-1][1])) == pytest.approx(2.0)
    assert (line.left, line.right, line.cusp, line.rotation) == (0, 1, 0, 0.3)
    with pytest.raises(PlacementConflict, match="either side of the cut through cusp 0"):
        install_twist_lines(graph, [cut], 2.0, {})


def test_short_region_sampling_is_logged(
    monkeypatch: pytest.MonkeyPatch, umbilic: GeneratingFunction, settings: Settings
) -> None:
    scan = _wedge_scan()
    strat = Stratification(
        function=umbilic,
        settings=settings,
        window=3.0,
        caustic=Caustic(degenerate=True, center=(0.0, 0.0), points=((0.0, 0.0),), preimages=((0.0, 0.0),)),
        scan=scan,
        assignment=node_regions(scan),
        graph=RegionGraph(regions=(), walls=()),
        labeler=None,
    )
    monkeypatch.setattr("src.strata._regions_on", lambda strat, points, executor: ([], [], []))
    records: list[logging.LogRecord] = []
    handler = logging.Handler()
    handler.emit = records.append  # type: ignore[method-assign]
    strata_logger = logging.getLogger("umbilic-mirror.strata")
    strata_logger.addHandler(handler)
    try:
        found = sample_region_interior(strat, 0, 20, np.random.default_rng(0))
    finally:
        strata_logger.removeHandler(handler)

    assert found == ()
    assert [record.getMessage() for record in records] == ["region_samples_short"]
    assert (records[0].wanted, records[0].found) == (20, 0)  # type: ignore[attr-defined]


def _band_signature(band: int) -> tuple[str, ...]:
    return ("out", "s1:+0,+1|-0,-2", f"s2:+1,+2|-{band},-1")


def _spoke_scan(radii: tuple[float, ...], band: Callable[[float], int]) -> PolarScan:
    nodes = tuple(
        ScanNode(
            ring=ring,
            spoke=0,
            point=(radius, 0.0),
            fiber=_outside_fiber((radius, 0.0), (1, 2)),
            signature=_band_signature(band(radius)),
        )
        for ring, radius in enumerate(radii)
    )
    return PolarScan(center=(0.0, 0.0), radii=radii, angles=(0.0,), nodes=nodes)


def _banded_flow(monkeypatch: pytest.MonkeyPatch, band: Callable[[float], int]) -> None:
    monkeypatch.setattr(
        "src.strata._fiber_at",
        lambda f, labeler, settings, base, start=None: _outside_fiber(base.pair, (1, 2)),
    )
    monkeypatch.setattr(
        "src.strata.flow_signature", lambda f, fiber, settings: _band_signature(band(fiber.base.x1))
    )
    monkeypatch.setattr("src.strata.separatrix_pair", lambda f, fiber, before, after, settings: (1, 2))


def test_edge_through_a_sliver_region_yields_a_crossing_per_wall(
    monkeypatch: pytest.MonkeyPatch, umbilic: GeneratingFunction, settings: Settings
) -> None:
    def band(x1: float) -> int:
        return 0 if x1 < 1.5 else 1 if x1 < 2.5 else 2 if x1 < 4.5 else 1

    _banded_flow(monkeypatch, band)
    scan = _spoke_scan((1.0, 3.0, 5.0), band)
    assignment = node_regions(scan)

    crossings = locate_crossings(umbilic, scan, assignment, settings, None)

    found = sorted((crossing.point[0], crossing.regions) for crossing in crossings)
    assert [point for point, _ in found] == pytest.approx([1.5, 2.5, 4.5], abs=1e-5)
    a, b, c = (assignment[0], assignment[2], assignment[1])
    assert [regions for _, regions in found] == [(a, b), (b, c), (c, b)]
    assert all(crossing.kind == "bifurcation" and crossing.pair == (1, 2) for crossing in crossings)


def test_edge_crossing_too_many_walls_is_unresolved(
    monkeypatch: pytest.MonkeyPatch, umbilic: GeneratingFunction, settings: Settings
) -> None:
    def band(x1: float) -> int:
        return math.floor(x1 * 64.0)

    _banded_flow(monkeypatch, band)
    scan = _spoke_scan((1.0, 2.0), band)

    with pytest.raises(UnresolvedWall, match="crosses more walls than it can separate"):
        locate_crossings(umbilic, scan, node_regions(scan), settings, None)


def test_window_must_contain_the_caustic() -> None:
    caustic = Caustic(
        degenerate=False,
        center=(0.0, 0.0),
        points=((0.4, 0.0), (-0.2, 0.3), (-0.2, -0.3)),
        preimages=((0.0, 0.0),) * 3,
    )
    check_window(caustic, 1.0)
    with pytest.raises(ConfigError, match="does not contain the caustic"):
        check_window(caustic, 0.35)


def test_degenerate_caustic_never_fails_the_window_check() -> None:
    point = Caustic(degenerate=True, center=(0.0, 0.0), points=((0.0, 0.0),), preimages=((0.0, 0.0),))
    check_window(point, 1e-9)


def test_region_sequence_reproduces_the_global_loop(
    global_graph: RegionGraph, global_case: FixtureCase
) -> None:
    loop = loop_from_regions(global_graph, [0, 1, 2, 3, 4, 5])
    assert loop == global_case.loop
    assert validate_loop(global_graph, loop)[-1] == 0
    assert compose_loop(global_graph, loop).is_identity


def test_region_sequence_collapses_repeats(global_graph: RegionGraph) -> None:
    assert loop_from_regions(global_graph, [0, 0, 1, 1, 0, 0]).crossings == loop_from_regions(
        global_graph, [0, 1]
    ).crossings


def test_region_sequence_needs_a_wall_between_neighbours(global_graph: RegionGraph) -> None:
    with pytest.raises(ArrangementFailure, match="no wall separates regions 0 and 3"):
        loop_from_regions(global_graph, [0, 3])
    with pytest.raises(ArrangementFailure, match="at least one region"):
        loop_from_regions(global_graph, [])


def test_region_sequence_bridges_a_skipped_region(global_graph: RegionGraph) -> None:
    loop = loop_from_regions(global_graph, [0, 2])

    assert [(c.wall, c.direction) for c in loop.crossings] == [
        ("b1", 1),
        ("twist-0", 1),
        ("twist-0", -1),
        ("b1", -1),
    ]


def test_unperturbed_caustic_is_a_point(umbilic: GeneratingFunction, settings: Settings) -> None:
    caustic = trace_caustic(umbilic, settings)

    assert caustic.degenerate
    assert caustic.center == pytest.approx((0.0, 0.0), abs=1e-9)
    assert caustic.cusps == ()


@pytest.mark.integration
@pytest.mark.timeout(120)
def test_perturbed_caustic_is_a_tricuspoid(perturbed: GeneratingFunction, settings: Settings) -> None:
    caustic = trace_caustic(perturbed, settings)

    assert not caustic.degenerate
    assert len(caustic.cusps) == 3
    assert max(max(abs(a), abs(b)) for a, b in caustic.points) < 0.2
    check_window(caustic, 0.3)


@pytest.mark.integration
@pytest.mark.timeout(300)
def test_symmetric_leading_form_walls_are_threefold() -> None:
    angles = asymptotic_wall_angles(symmetric_umbilic())

    assert angles
    assert len(angles) % 3 == 0
    shifted = sorted((angle + 2.0 * math.pi / 3.0) % (2.0 * math.pi) for angle in angles)
    for angle in shifted:
        assert min(_circular_gap(angle, other) for other in angles) < 1e-3


@pytest.mark.integration
@pytest.mark.timeout(300)
def test_umbilic_leading_form_wall_angles() -> None:
    angles = asymptotic_wall_angles(elliptic_umbilic())

    assert len(angles) == 3
    for expected in (0.0, 2.1347, 4.1485):
        assert min(_circular_gap(expected, angle) for angle in angles) < 1e-3


@pytest.mark.integration
@pytest.mark.timeout(120)
def test_root_count_changes_by_two_across_each_fold(perturbed: GeneratingFunction, settings: Settings) -> None:
    caustic = trace_caustic(perturbed, settings)
    extent = max(math.dist(point, caustic.center) for point in caustic.points)

    for arc in caustic.arcs:
        middle = len(arc.polyline) // 2
        before, here, after = (np.array(arc.polyline[k]) for k in (middle - 1, middle, middle + 1))
        tangent = after - before
        normal = np.array([-tangent[1], tangent[0]]) / float(np.linalg.norm(tangent))
        counts = sorted(
            len(solve_fiber(perturbed, BasePoint(x1=float(p[0]), x2=float(p[1])), settings))
            for p in (here + 1e-2 * extent * normal, here - 1e-2 * extent * normal)
        )
        assert counts == [2, 4]


@pytest.mark.integration
@pytest.mark.timeout(600)
def test_stratified_window_has_a_closing_outer_loop(perturbed: GeneratingFunction) -> None:
    settings = Settings(grid_inner=12, grid_outer=6, grid_angles=48)

    strat = stratify(perturbed, 0.3, settings)

    assert any(region.inside for region in strat.graph.regions)
    assert any(not region.inside for region in strat.graph.regions)
    assert len(strat.graph.cusps) == 3
    assert len(strat.graph.twist_lines) == 3
    for line in strat.graph.twist_lines:
        assert line.cusp is not None
        assert math.dist(line.polyline[0], strat.graph.cusp(line.cusp).point) < 1e-9
    for first, second in itertools.combinations(strat.graph.twist_lines, 2):
        assert not _segments_meet(first.polyline, second.polyline)
    loop = ring_loop(strat)
    assert validate_loop(strat.graph, loop)[0] == loop.base
    twists = sorted(c.wall for c in loop.crossings if c.wall.startswith("twist-"))
    assert twists == ["twist-0", "twist-1", "twist-2"]


@pytest.mark.integration
@pytest.mark.timeout(600)
def test_graph_and_wall_entry_points_agree(perturbed: GeneratingFunction) -> None:
    settings = Settings(grid_inner=10, grid_outer=4, grid_angles=40)

    graph = build_region_graph(perturbed, 0.3, settings)
    walls = locate_bifurcation_walls(perturbed, 0.3, settings)

    assert walls
    assert all(wall.kind == "bifurcation" for wall in walls)
    assert walls == tuple(wall for wall in graph.walls if wall.kind == "bifurcation")


@pytest.mark.integration
@pytest.mark.timeout(3600)
def test_refined_grid_keeps_incidences_and_cusp_cases(perturbed: GeneratingFunction) -> None:
    coarse = stratify(perturbed, 0.3, Settings(grid_inner=8, grid_outer=4, grid_angles=32))
    fine = stratify(perturbed, 0.3, Settings(grid_inner=16, grid_outer=4, grid_angles=64))

    fine_points = np.array([node.point for node in fine.scan.nodes])
    for region in coarse.graph.regions:
        if not region.inside:
            continue
        distances = np.linalg.norm(fine_points - np.array(region.rep), axis=1)
        distances[[k for k, value in enumerate(fine.assignment) if value == -1]] = np.inf
        match = fine.graph.region(fine.assignment[int(np.argmin(distances))])
        assert match.incidence == region.incidence
    for before, after in zip(coarse.graph.cusps, fine.graph.cusps, strict=True):
        assert math.dist(before.point, after.point) < 1e-4
        assert (before.pair, before.case) == (after.pair, after.case)
