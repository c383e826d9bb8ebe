"""Coded exceptions raised by the numerical pipeline and the glue algebra."""

from __future__ import annotations

from typing import ClassVar, Literal

ErrorCode = Literal[
    "invalid_perturbation",
    "degenerate_fiber",
    "solver_divergence",
    "integration_failure",
    "not_inside_caustic",
    "near_wall",
    "degenerate_leading_form",
    "open_curve",
    "unresolved_wall",
    "arrangement_failure",
    "placement_conflict",
    "sheet_collision",
    "patch_not_simply_connected",
    "weight_overflow",
    "incompatible_incidence",
    "label_mismatch",
    "unknown_case",
    "wrong_incidence",
    "missing_glue",
    "invalid_loop",
]


class UmbilicError(Exception):
    """Base error with a stable code and a process exit status."""

    code: ClassVar[ErrorCode]
    exit_code: ClassVar[int] = 1

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


class InvalidPerturbation(UmbilicError, ValueError):
    code = "invalid_perturbation"
    exit_code = 2


class NumericalError(UmbilicError):
    """A numerical stage could not produce a trustworthy answer."""

    exit_code = 3


class DegenerateFiber(NumericalError):
    code = "degenerate_fiber"


class SolverDivergence(NumericalError):
    code = "solver_divergence"


class IntegrationFailure(NumericalError):
    code = "integration_failure"


class NotInsideCaustic(NumericalError):
    code = "not_inside_caustic"


class NearWall(NumericalError):
    code = "near_wall"


class DegenerateLeadingForm(NumericalError):
    code = "degenerate_leading_form"


class OpenCurve(NumericalError):
    code = "open_curve"


class UnresolvedWall(NumericalError):
    code = "unresolved_wall"


class ArrangementFailure(NumericalError):
    code = "arrangement_failure"


class PlacementConflict(ArrangementFailure):
    code = "placement_conflict"


class SheetCollision(NumericalError):
    code = "sheet_collision"


class PatchNotSimplyConnected(NumericalError):
    code = "patch_not_simply_connected"


class WeightOverflow(NumericalError):
    code = "weight_overflow"


class GlueError(UmbilicError):
    """The integer glue data is inconsistent with the requested operation."""


class IncompatibleIncidence(GlueError):
    code = "incompatible_incidence"


class LabelMismatch(GlueError):
    code = "label_mismatch"


class UnknownCase(GlueError):
    code = "unknown_case"


class WrongIncidence(GlueError):
    code = "wrong_incidence"


class MissingGlue(GlueError):
    code = "missing_glue"


class InvalidLoop(GlueError):
    code = "invalid_loop"
