"""Sheets, connection, Legendre potentials and frame weights."""

import math

import numpy as np
import pytest

from src.config import Settings
from src.errors import WeightOverflow
from src.family import value
from src.mirror import (
    closing_permutation,
    connection_form,
    continue_sheets,
    frame_potential,
    frame_weight,
    legendre_gradient,
    legendre_potential,
    sample_grid,
    sheets,
    transport_sheets,
)
from src.models import BasePoint, GeneratingFunction
from src.monodromy import circle_loop


def test_frame_weight_at_the_origin_is_one() -> None:
    assert frame_weight(0.0, 0.0, (0.0, 0.0), (0.0, 0.0)) == pytest.approx(1.0)


def test_frame_weight_combines_modulus_and_phase() -> None:
    weight = frame_weight(1.0, 0.0, (1.0, 0.0), (0.25, 0.0))
    assert weight == pytest.approx(1j * math.exp(math.pi))
    assert abs(frame_weight(1.0, 4.0 * math.pi, (0.0, 0.0), (0.0, 0.0))) == pytest.approx(
        math.exp(-math.pi)
    )


def test_frame_weight_overflow_is_reported() -> None:
    with pytest.raises(WeightOverflow, match="out of floating range"):
        frame_weight(300.0, 0.0, (0.0, 0.0), (0.0, 0.0))


def test_unperturbed_sheets_outside_are_two_unlabeled_points(
    umbilic: GeneratingFunction, settings: Settings
) -> None:
    data = sheets(umbilic, BasePoint(x1=1.0, x2=0.0), settings)

    assert [sheet.label for sheet in data.sheets] == ["p1", "p2"]
    assert sorted(sheet.y for sheet in data.sheets)[0] == pytest.approx((-1.0, 0.0), abs=1e-9)


def test_connection_form_is_diagonal_in_the_sheet_positions(
    umbilic: GeneratingFunction, settings: Settings
) -> None:
    data = sheets(umbilic, BasePoint(x1=1.0, x2=0.0), settings)
    form = connection_form(data)
    assert form.labels == ("p1", "p2")
    assert form.imaginary == tuple(sheet.y for sheet in data.sheets)


def test_legendre_potentials_on_the_two_sheets(umbilic: GeneratingFunction, settings: Settings) -> None:
    x = BasePoint(x1=1.0, x2=0.0)
    values = sorted(legendre_potential(umbilic, label, x, settings) for label in ("p1", "p2"))
    assert values == pytest.approx([-2.0 / 3.0, 2.0 / 3.0], abs=1e-9)


def test_legendre_potential_follows_the_sheet_on_a_simple_patch(
    umbilic: GeneratingFunction, settings: Settings
) -> None:
    start = sheets(umbilic, BasePoint(x1=1.0, x2=0.5), settings)
    target = BasePoint(x1=1.2, x2=0.3)
    moved = continue_sheets(umbilic, start, [target.pair], settings)[-1]

    for sheet in moved.sheets:
        expected = target.x1 * sheet.y[0] + target.x2 * sheet.y[1] - value(umbilic, sheet.y)
        assert legendre_potential(umbilic, sheet.label, target, settings, start=start) == pytest.approx(
            expected, abs=1e-8
        )


@pytest.mark.parametrize("x", [(1.0, 0.0), (0.5, -0.8), (-1.2, 0.4)])
def test_legendre_gradient_is_the_sheet_position(
    umbilic: GeneratingFunction, settings: Settings, x: tuple[float, float]
) -> None:
    base = BasePoint(x1=x[0], x2=x[1])
    for sheet in sheets(umbilic, base, settings).sheets:
        gradient = legendre_gradient(umbilic, sheet.label, base, settings)
        assert gradient == pytest.approx(sheet.y, abs=1e-5)


def test_frame_potential_uses_the_supplied_connection(umbilic: GeneratingFunction, settings: Settings) -> None:
    data = sheets(umbilic, BasePoint(x1=1.0, x2=0.0), settings)
    flat = frame_potential(umbilic, data, "p1")
    twisted = frame_potential(umbilic, data, "p1", connection=lambda label, x: 2.0)

    assert twisted.connection == 2.0
    assert twisted.h == flat.h
    assert abs(complex(twisted.weight_real, twisted.weight_imag)) == pytest.approx(
        abs(complex(flat.weight_real, flat.weight_imag)) * math.exp(-1.0)
    )


def test_transport_around_the_origin_swaps_the_sheets(umbilic: GeneratingFunction, settings: Settings) -> None:
    result = transport_sheets(umbilic, circle_loop((0.0, 0.0), 1.0, steps=64), settings)

    assert result.permutation == (1, 0)
    assert len(result.samples) == 65
    assert all(len(row) == 2 for row in result.potentials)
    assert closing_permutation(result.samples[0], result.samples[0]) == (0, 1)


def test_sample_grid_rows(umbilic: GeneratingFunction, settings: Settings) -> None:
    rows = sample_grid(umbilic, (0.5, 1.5, -0.5, 0.5), 3, settings)

    assert len(rows) == 18
    assert {row.sheet for row in rows} == {"p1", "p2"}
    for row in rows:
        assert row.h == pytest.approx(row.x1 * row.y1 + row.x2 * row.y2 - value(umbilic, (row.y1, row.y2)))


@pytest.mark.timeout(300)
def test_legendre_gradient_matches_the_sheets_on_a_caustic_free_grid(
    umbilic: GeneratingFunction, settings: Settings
) -> None:
    for x1 in np.linspace(0.5, 1.5, 10):
        for x2 in np.linspace(-0.5, 0.5, 10):
            base = BasePoint(x1=float(x1), x2=float(x2))
            for sheet in sheets(umbilic, base, settings).sheets:
                assert legendre_gradient(umbilic, sheet.label, base, settings) == pytest.approx(sheet.y, abs=1e-5)
