"""Loop composition, cusp monodromy, tau resolution and the identity suite."""

import numpy as np
import pytest
import sympy as sp

from src.errors import InvalidLoop, MissingGlue, UnknownCase, WrongIncidence
from src.fixtures import FIXTURES, FixtureCase, cusp_fixture, fixture, fixture_inventory
from src.homology import cusp_matrix, determinant, identity, invert, multiply
from src.models import Crossing, Loop, RegionGraph
from src.monodromy import (
    FULL_POLICY,
    NO_TWIST,
    GluePolicy,
    admissible_taus,
    circle_loop,
    compose_loop,
    concatenate,
    cusp_loop,
    cusp_monodromy,
    invert_loop,
    random_loop,
    resolve_taus,
    sheet_monodromy,
    transport_chain,
    unknown_taus,
    validate_loop,
    verify_fixture_suite,
    with_taus,
)


def _resolved(case: FixtureCase) -> RegionGraph:
    if case.forced_tau is None:
        return case.graph
    return with_taus(case.graph, {wall: case.forced_tau for wall in unknown_taus(case.graph)})


def test_fixture_suite_passes_exactly() -> None:
    report = verify_fixture_suite()

    failed = [item for item in report.items if not item.passed]
    assert failed == []
    assert report.ok
    assert report.mode == "fixtures"
    assert report.summary.total == len(report.items) > 30


def test_split_twist_failure_becomes_a_report_item(monkeypatch: pytest.MonkeyPatch) -> None:
    def broken(incidence: tuple[int, int, int]) -> None:
        raise WrongIncidence(f"no split twist for {incidence}")

    monkeypatch.setattr("src.monodromy.split_twist_chain_glue", broken)
    report = verify_fixture_suite(fixtures=[])

    assert not report.ok
    assert [item.name for item in report.items] == ["split-twist"]
    assert "wrong_incidence" in report.items[0].detail


def test_inventory_lists_every_local_configuration() -> None:
    names = [name for name, _, _ in fixture_inventory()]
    assert names[:5] == [
        "intersection-a",
        "intersection-b",
        "intersection-c",
        "caustic-limit-a",
        "caustic-limit-b",
    ]
    assert {f"cusp-{j}{k}-{case}" for j, k in ((1, 2), (2, 3), (1, 3)) for case in "ab"} <= set(names)
    assert names[-1] == "global-tricuspoid"


@pytest.mark.parametrize("case", FIXTURES, ids=lambda case: case.name)
def test_every_fixture_loop_composes_to_identity(case: FixtureCase) -> None:
    result = compose_loop(_resolved(case), case.loop)
    assert result.is_identity
    assert result.matrix == identity(2)
    assert all(determinant(step.induced) in (1, -1) for step in result.steps)


@pytest.mark.parametrize("name", ["intersection-a", "intersection-b", "intersection-c"])
def test_intersection_chain_products_are_identity(name: str) -> None:
    case = fixture(name)
    result = compose_loop(_resolved(case), case.loop)
    assert result.chain_matrix == identity(3)
    assert tuple(step.chain_map for step in result.steps) == case.displayed


def test_emanating_wall_tau_is_forced() -> None:
    case = fixture("intersection-c")
    assert unknown_taus(case.graph) == ("w3",)
    assert admissible_taus(case.graph, [case.loop], ["w3"]) == ({"w3": -1},)
    resolved = resolve_taus(case.graph, [case.loop])
    assert resolved.wall("w3").tau == -1


def test_unconstrained_tau_defaults_to_zero() -> None:
    case = fixture("intersection-c")
    assert resolve_taus(case.graph, []).wall("w3").tau == 0


def test_unresolved_tau_is_missing_glue() -> None:
    case = fixture("intersection-c")
    with pytest.raises(MissingGlue, match="w3"):
        compose_loop(case.graph, case.loop)


def test_caustic_limit_transport_returns_the_starting_class() -> None:
    case = fixture("caustic-limit-a")
    displays = transport_chain(case.graph, case.loop)
    h1, h2, h3 = sp.symbols("h1:4")
    assert all(sp.simplify(got - want) == 0 for got, want in zip(displays[-1], (0, h2 - h1, h3 - h1), strict=True))
    assert len(displays) == len(case.loop.crossings)


@pytest.mark.parametrize(("pair", "case"), [(p, c) for p in ((2, 3), (1, 2), (1, 3)) for c in "ab"])
def test_cusp_monodromy_matches_the_catalogue(pair: tuple[int, int], case: str) -> None:
    local = cusp_fixture(pair, case)  # type: ignore[arg-type]

    matrix = cusp_monodromy(local.graph, 0)

    assert matrix == cusp_matrix(pair, case)
    assert cusp_monodromy(local.graph, 0, loop=invert_loop(local.loop)) == invert(matrix)
    assert compose_loop(local.graph, local.loop).is_identity


def test_cusp_loop_is_rebuilt_from_the_recorded_regions() -> None:
    local = cusp_fixture((1, 3), "b")
    assert cusp_loop(local.graph, 0) == local.loop


def test_cusp_without_case_has_no_twist_glue() -> None:
    local = cusp_fixture((1, 2), "a")
    bare = local.graph.model_copy(
        update={"cusps": tuple(c.model_copy(update={"case": None}) for c in local.graph.cusps)}
    )
    with pytest.raises(UnknownCase, match="cusp 0"):
        compose_loop(bare, local.loop)


def test_global_loop_needs_the_twist_lines(global_graph: RegionGraph) -> None:
    loop = fixture("global-tricuspoid").loop

    bare = compose_loop(global_graph, loop, NO_TWIST)
    full = compose_loop(global_graph, loop, FULL_POLICY)

    assert sum(bare.matrix[k][k] for k in range(2)) == 0
    assert determinant(bare.matrix) == -1
    assert full.is_identity


def test_disabled_fold_glue_is_missing() -> None:
    local = cusp_fixture((2, 3), "b")
    with pytest.raises(MissingGlue, match="fold glue is disabled"):
        compose_loop(local.graph, local.loop, GluePolicy(fold=False))


def test_disabled_bifurcation_glue_is_identity() -> None:
    case = fixture("intersection-b")
    result = compose_loop(case.graph, case.loop, GluePolicy(bifurcation=False))
    assert all(step.kind == "identity" for step in result.steps)
    assert result.is_identity
    assert result.chain_matrix == identity(3)
    assert all(step.induced == identity(2) for step in result.steps)


def test_validate_loop_rejects_open_and_unknown_loops(global_graph: RegionGraph) -> None:
    with pytest.raises(InvalidLoop, match="not at its base"):
        validate_loop(global_graph, Loop(base=0, crossings=(Crossing(wall="b1", direction=1),)))
    with pytest.raises(InvalidLoop, match="unknown wall"):
        validate_loop(global_graph, Loop(base=0, crossings=(Crossing(wall="b9"),)))
    with pytest.raises(InvalidLoop, match="does not start in region 0"):
        validate_loop(global_graph, Loop(base=0, crossings=(Crossing(wall="b2"),)))
    with pytest.raises(InvalidLoop, match="unknown base region"):
        validate_loop(global_graph, Loop(base=42, crossings=()))


def test_concatenation_requires_a_common_base() -> None:
    with pytest.raises(InvalidLoop, match="cannot be concatenated"):
        concatenate(Loop(base=0, crossings=()), Loop(base=1, crossings=()))


@pytest.mark.parametrize("case", FIXTURES, ids=lambda case: case.name)
def test_random_loops_are_functorial(case: FixtureCase) -> None:
    graph = _resolved(case)
    rng = np.random.default_rng(11)
    for _ in range(50):
        first = random_loop(graph, rng, base=case.loop.base)
        second = random_loop(graph, rng, base=case.loop.base)
        a, b = compose_loop(graph, first), compose_loop(graph, second)

        assert compose_loop(graph, concatenate(first, second)).matrix == multiply(b.matrix, a.matrix)
        assert multiply(compose_loop(graph, invert_loop(first)).matrix, a.matrix) == identity(2)


def test_circle_loop_samples_the_circle() -> None:
    points = circle_loop((0.5, -0.5), 2.0, steps=8)
    assert len(points) == 8
    assert points[0] == pytest.approx((2.5, -0.5))
    assert points[2] == pytest.approx((0.5, 1.5))


@pytest.mark.timeout(60)
def test_unperturbed_sheets_swap_around_the_origin(umbilic, settings) -> None:  # type: ignore[no-untyped-def]
    result = sheet_monodromy(umbilic, circle_loop((0.0, 0.0), 1.0), settings)
    assert result.permutation == (1, 0)
    assert result.matrix == ((0, 1), (1, 0))


@pytest.mark.timeout(60)
def test_perturbed_sheets_swap_around_the_caustic(perturbed, settings) -> None:  # type: ignore[no-untyped-def]
    result = sheet_monodromy(perturbed, circle_loop((0.0, 0.0), 0.8), settings)
    assert result.matrix == ((0, 1), (1, 0))
