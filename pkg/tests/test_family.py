"""Generating functions, perturbations and critical point solving."""

import math

import numpy as np
import pytest

from src.config import Settings
from src.errors import InvalidPerturbation
from src.family import (
    PRESETS,
    critical_points,
    default_labeler,
    det_hessian,
    elliptic_umbilic,
    family_value,
    gradient,
    hessian,
    lagrangian_map,
    perturb,
    perturbation,
    preset,
    reference_point,
    solve_fiber,
    symmetric_umbilic,
    value,
)
from src.models import BasePoint, GeneratingFunction


@pytest.mark.parametrize(
    ("y", "expected"),
    [((1.0, 0.0), 1.0 / 3.0), ((0.0, 0.0), 0.0), ((1.0, 1.0), 1.0 / 3.0 - 2.0)],
)
def test_elliptic_umbilic_values(y: tuple[float, float], expected: float) -> None:
    assert value(elliptic_umbilic(), y) == pytest.approx(expected)


def test_elliptic_umbilic_gradient() -> None:
    assert tuple(gradient(elliptic_umbilic(), (1.0, 1.0))) == pytest.approx((-1.0, -4.0))


def test_symmetric_preset_gradient_has_threefold_form() -> None:
    y1, y2 = 0.7, -0.4
    assert tuple(gradient(symmetric_umbilic(), (y1, y2))) == pytest.approx((y1**2 - y2**2, -2 * y1 * y2))


def test_presets_are_registered() -> None:
    assert set(PRESETS) == {"umbilic", "symmetric_umbilic"}
    assert preset("umbilic") == elliptic_umbilic()
    with pytest.raises(InvalidPerturbation, match="unknown preset 'cusp'"):
        preset("cusp")


def test_zero_perturbation_is_identity(umbilic: GeneratingFunction) -> None:
    assert perturb(umbilic, perturbation(0.0)) == umbilic


def test_perturbation_changes_only_given_monomials(umbilic: GeneratingFunction) -> None:
    result = perturb(umbilic, perturbation(0.1, {(1, 1): 0.02}))
    assert result.coefficient(2, 0) == 0.1
    assert result.coefficient(0, 2) == 0.1
    assert result.coefficient(1, 1) == 0.02
    assert result.coefficient(3, 0) == umbilic.coefficient(3, 0)
    assert result.coefficient(1, 2) == umbilic.coefficient(1, 2)
    assert result.degree == 3


@pytest.mark.parametrize(
    ("eps", "terms", "message"),
    [
        (0.1, {(3, 2): 0.1}, "degree above 4"),
        (0.1, {(1, 1): 2.0}, "at most 1"),
        (-0.1, {}, "0 <= eps <= 1"),
        (float("inf"), {}, "0 <= eps <= 1"),
    ],
)
def test_perturbation_rejects_invalid_terms(
    eps: float, terms: dict[tuple[int, int], float], message: str
) -> None:
    with pytest.raises(InvalidPerturbation, match=message):
        perturbation(eps, terms)


def test_derivatives_agree_with_central_differences(perturbed: GeneratingFunction) -> None:
    rng = np.random.default_rng(0)
    step = 1e-5
    for y in rng.uniform(-2.0, 2.0, size=(20, 2)):
        numeric_gradient = np.array(
            [
                (value(perturbed, y + step * e) - value(perturbed, y - step * e)) / (2 * step)
                for e in np.eye(2)
            ]
        )
        numeric_hessian = np.array(
            [
                (gradient(perturbed, y + step * e) - gradient(perturbed, y - step * e)) / (2 * step)
                for e in np.eye(2)
            ]
        )
        exact_gradient = gradient(perturbed, y)
        exact_hessian = hessian(perturbed, y)
        assert np.allclose(numeric_gradient, exact_gradient, rtol=1e-6, atol=1e-6)
        assert np.allclose(numeric_hessian, exact_hessian, rtol=1e-6, atol=1e-6)


def test_lagrangian_map_is_the_gradient(umbilic: GeneratingFunction) -> None:
    assert lagrangian_map(umbilic, (1.0, 0.0)) == BasePoint(x1=1.0, x2=0.0)
    assert family_value(umbilic, BasePoint(x1=1.0, x2=0.0), (1.0, 0.0)) == pytest.approx(-2.0 / 3.0)


def test_unperturbed_fiber_outside_has_two_saddles(umbilic: GeneratingFunction, settings: Settings) -> None:
    fiber = critical_points(umbilic, BasePoint(x1=1.0, x2=0.0), settings)

    assert fiber.inside_caustic is False
    assert [point.morse_index for point in fiber.points] == [1, 1]
    positions = sorted(point.y for point in fiber.points)
    assert positions[0] == pytest.approx((-1.0, 0.0), abs=1e-9)
    assert positions[1] == pytest.approx((1.0, 0.0), abs=1e-9)
    eigenvalues = sorted(tuple(round(e, 9) for e in point.hess_eigs) for point in fiber.points)
    assert eigenvalues == [(-4.0, 2.0), (-2.0, 4.0)]


def test_unperturbed_family_has_no_reference_point(umbilic: GeneratingFunction, settings: Settings) -> None:
    assert reference_point(umbilic, settings) is None
    assert default_labeler(umbilic, settings) is None


def test_perturbed_fiber_at_origin_has_four_labeled_points(
    perturbed: GeneratingFunction, settings: Settings
) -> None:
    fiber = critical_points(perturbed, BasePoint(x1=0.0, x2=0.0), settings)

    assert fiber.inside_caustic is True
    assert fiber.labeled
    assert sorted(point.morse_index for point in fiber.points) == [1, 1, 1, 2]
    assert {point.label for point in fiber.points} == {"s1", "s2", "s3", "n"}
    node = fiber.node
    assert node is not None
    assert node.y == pytest.approx((0.0, 0.0), abs=1e-9)
    assert det_hessian(perturbed, node.y) > 0


def test_critical_points_satisfy_the_residual_bound(perturbed: GeneratingFunction, settings: Settings) -> None:
    x = BasePoint(x1=0.3, x2=-0.2)
    for point in solve_fiber(perturbed, x, settings):
        residual = np.linalg.norm(gradient(perturbed, point.y) - np.array(x.pair))
        assert residual <= settings.residual_tolerance * (1 + point.y[0] ** 2 + point.y[1] ** 2)
        assert point.morse_index == sum(1 for e in point.hess_eigs if e > 0)


def test_labels_are_stable_under_small_moves(perturbed: GeneratingFunction, settings: Settings) -> None:
    labeler = default_labeler(perturbed, settings)
    assert labeler is not None
    here = labeler.label(BasePoint(x1=0.0, x2=0.0))
    there = labeler.label_from(here, BasePoint(x1=1e-4, x2=0.0))
    for label in ("s1", "s2", "s3", "n"):
        assert math.dist(here.point(label).y, there.point(label).y) < 1e-2
