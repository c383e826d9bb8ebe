"""Gradient flow integration, separatrices and incidence matrices."""

import math

import numpy as np
import pytest

from src.config import Settings
from src.errors import DegenerateLeadingForm, NearWall, NotInsideCaustic
from src.family import critical_points, family_value
from src.flow import (
    asymptotic_sectors,
    classify_angle,
    closest_approach,
    incidence_matrix,
    integrate_descending,
    reintegrate_forward,
    saddle_separatrices,
    terminal_key,
)
from src.models import (
    BasePoint,
    Converged,
    CriticalPoint,
    Escaped,
    FiberData,
    GeneratingFunction,
    Label,
    Monomial,
    Trajectory,
    Undecided,
)


def test_cubic_leading_form_has_three_ascent_and_three_descent_sectors(
    umbilic: GeneratingFunction,
) -> None:
    sectors = asymptotic_sectors(umbilic)

    assert sectors.degree == 3
    assert len(sectors.zeros) == 6
    assert len(sectors.ascent) == 3
    assert len(sectors.descent) == 3
    assert any(abs(zero - math.pi / 2) < 1e-9 for zero in sectors.zeros)


def test_positive_axis_lies_in_an_ascent_sector(umbilic: GeneratingFunction) -> None:
    sectors = asymptotic_sectors(umbilic)
    ascent = sectors.ascent[classify_angle(sectors, "ascent", 0.0)]
    offset = (0.0 - ascent.start) % (2 * math.pi)
    assert offset <= ascent.end - ascent.start


def test_quadratic_function_has_no_leading_form() -> None:
    quadratic = GeneratingFunction(monomials=(Monomial(i=2, j=0, c=1.0),))
    with pytest.raises(DegenerateLeadingForm):
        asymptotic_sectors(quadratic)


@pytest.mark.parametrize(
    ("terminal", "key"),
    [
        (Converged(target="n", target_y=(0.0, 0.0)), "n"),
        (Escaped(sector=2, sector_kind="descent"), "-2"),
        (Escaped(sector=0, sector_kind="ascent"), "+0"),
        (Undecided(), "?"),
    ],
)
def test_terminal_keys(terminal: Converged | Escaped | Undecided, key: str) -> None:
    assert terminal_key(terminal) == key


def test_forward_flow_increases_the_family_value(umbilic: GeneratingFunction, settings: Settings) -> None:
    x = BasePoint(x1=1.0, x2=0.0)
    trajectory = integrate_descending(umbilic, x, (0.5, 0.3), settings)

    values = [family_value(umbilic, x, y) for y in trajectory.samples]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))
    assert all(b >= a for a, b in zip(trajectory.times, trajectory.times[1:]))
    assert trajectory.direction == "forward"


def test_backward_flow_decreases_the_family_value(umbilic: GeneratingFunction, settings: Settings) -> None:
    x = BasePoint(x1=1.0, x2=0.0)
    trajectory = integrate_descending(umbilic, x, (0.5, 0.3), settings, direction="backward")

    values = [family_value(umbilic, x, y) for y in trajectory.samples]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def test_start_on_a_target_converges_immediately(umbilic: GeneratingFunction, settings: Settings) -> None:
    x = BasePoint(x1=1.0, x2=0.0)
    fiber = critical_points(umbilic, x, settings)
    target = fiber.points[0]

    trajectory = integrate_descending(umbilic, x, target.y, settings, targets=(target,))

    assert isinstance(trajectory.terminal, Converged)
    assert trajectory.samples == (target.y,)


def test_saddle_separatrices_have_four_named_branches(umbilic: GeneratingFunction, settings: Settings) -> None:
    x = BasePoint(x1=1.0, x2=0.0)
    fiber = critical_points(umbilic, x, settings)

    separatrices = saddle_separatrices(umbilic, x, fiber.points[0], settings, fiber)

    assert [branch.branch for branch in separatrices.branches] == [
        "stable+",
        "stable-",
        "unstable+",
        "unstable-",
    ]
    assert separatrices.branch("stable+").direction == "backward"
    assert separatrices.branch("unstable-").direction == "forward"


def test_incidence_outside_the_caustic_is_rejected(umbilic: GeneratingFunction, settings: Settings) -> None:
    with pytest.raises(NotInsideCaustic, match="outside the caustic"):
        incidence_matrix(umbilic, BasePoint(x1=1.0, x2=0.0), settings)


@pytest.mark.integration
@pytest.mark.timeout(120)
def test_incidence_inside_the_caustic_has_a_connected_saddle(
    perturbed: GeneratingFunction, settings: Settings
) -> None:
    found = None
    for x1, x2 in ((0.0, 0.0), (0.002, 0.001), (-0.001, 0.002), (0.001, -0.002)):
        try:
            found = incidence_matrix(perturbed, BasePoint(x1=x1, x2=x2), settings)
        except NearWall:
            continue
        break
    assert found is not None
    assert 1 in found.entries
    assert all(entry in (0, 1) for entry in found.entries)
    assert np.all(np.array(found.multiplicity) <= 2)


def test_closest_approach_skips_the_excluded_saddle() -> None:
    def point(label: Label, y: tuple[float, float]) -> CriticalPoint:
        return CriticalPoint(y=y, morse_index=1, value=0.0, hess_eigs=(-1.0, 1.0), label=label)

    fiber = FiberData(
        base=BasePoint(x1=1.0, x2=0.0),
        points=(point("s1", (1.0, 0.0)), point("s2", (-1.0, 0.0))),
        inside_caustic=False,
    )
    trajectory = Trajectory(
        samples=((1.0, 0.0), (0.5, 0.2), (-0.8, 0.3)),
        times=(0.0, 1.0, 2.0),
        terminal=Undecided(),
        direction="forward",
    )

    label, distance = closest_approach(trajectory, fiber, exclude="s1")

    assert label == "s2"
    assert distance == pytest.approx(math.hypot(0.2, 0.3))


@pytest.mark.parametrize("x", [BasePoint(x1=1.0, x2=0.0), BasePoint(x1=0.3, x2=0.8)], ids=str)
def test_escaped_stable_branches_run_back_to_their_saddle(
    umbilic: GeneratingFunction, settings: Settings, x: BasePoint
) -> None:
    fiber = critical_points(umbilic, x, settings)
    checked = 0
    for saddle in fiber.saddles:
        branches = saddle_separatrices(umbilic, x, saddle, settings, fiber).branches
        for branch in branches:
            if branch.direction != "backward" or not isinstance(branch.terminal, Escaped):
                continue
            forward = reintegrate_forward(umbilic, fiber, saddle, branch, settings, radius=5e-5)

            assert forward.direction == "forward"
            assert isinstance(forward.terminal, Converged)
            distances = np.linalg.norm(np.array(forward.samples) - np.array(saddle.y), axis=1)
            assert float(distances.min()) < 1e-4
            checked += 1
    assert checked >= 2
