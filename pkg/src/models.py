"""Typed immutable domain models shared by every pipeline stage."""

from __future__ import annotations

import math
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Label = Literal["s1", "s2", "s3", "n", "unlabeled"]
SADDLE_LABELS: tuple[Label, ...] = ("s1", "s2", "s3")
Point = tuple[float, float]
IntVector = tuple[int, ...]
IntMatrix = tuple[tuple[int, ...], ...]
Direction = Literal[1, -1]
FlowDirection = Literal["forward", "backward"]
Branch = Literal["stable+", "stable-", "unstable+", "unstable-"]
SectorKind = Literal["ascent", "descent"]
WallKind = Literal["fold", "cusp", "bifurcation", "twist_line"]
CuspCase = Literal["a", "b"]
GlueKind = Literal["fold", "bifurcation", "twist_line", "identity", "chain"]
VerificationMode = Literal["fixtures", "numeric"]


def saddle_index(label: Label) -> int:
    """Map ``s1``..``s3`` to 1..3."""

    if label not in SADDLE_LABELS:
        raise ValueError(f"{label} is not a saddle label")
    return int(label[1])


class ImmutableModel(BaseModel):
    """Base model that prevents mutation after validation."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class Monomial(ImmutableModel):
    i: int = Field(ge=0, le=4)
    j: int = Field(ge=0, le=4)
    c: float = Field(allow_inf_nan=False)

    @model_validator(mode="after")
    def _degree_at_most_four(self) -> Monomial:
        if self.i + self.j > 4:
            raise ValueError(f"monomial y1^{self.i} y2^{self.j} has degree above 4")
        return self


class GeneratingFunction(ImmutableModel):
    """Bivariate polynomial of degree at most 4, stored as sorted nonzero monomials."""

    monomials: tuple[Monomial, ...]

    @field_validator("monomials")
    @classmethod
    def _canonical(cls, monomials: tuple[Monomial, ...]) -> tuple[Monomial, ...]:
        exponents = [(item.i, item.j) for item in monomials]
        if len(set(exponents)) != len(exponents):
            raise ValueError("duplicate monomial exponents")
        return tuple(sorted((item for item in monomials if item.c != 0.0), key=_exponent_key))

    @property
    def degree(self) -> int:
        return max((item.i + item.j for item in self.monomials), default=0)

    def coefficient(self, i: int, j: int) -> float:
        for item in self.monomials:
            if (item.i, item.j) == (i, j):
                return item.c
        return 0.0

    def homogeneous_part(self, degree: int) -> tuple[Monomial, ...]:
        return tuple(item for item in self.monomials if item.i + item.j == degree)


def _exponent_key(item: Monomial) -> tuple[int, int]:
    return (-(item.i + item.j), -item.i)


class PerturbationParams(ImmutableModel):
    eps: float = Field(default=0.0, ge=0.0, le=1.0)
    extra: tuple[Monomial, ...] = ()


class BasePoint(ImmutableModel):
    x1: float = Field(allow_inf_nan=False)
    x2: float = Field(allow_inf_nan=False)

    @property
    def pair(self) -> Point:
        return (self.x1, self.x2)

    @property
    def norm(self) -> float:
        return math.hypot(self.x1, self.x2)


class CriticalPoint(ImmutableModel):
    y: Point
    morse_index: int = Field(ge=0, le=2)
    value: float
    hess_eigs: Point
    label: Label = "unlabeled"

    @model_validator(mode="after")
    def _label_matches_index(self) -> CriticalPoint:
        if self.label == "n" and self.morse_index != 2:
            raise ValueError("label n requires Morse index 2")
        if self.label in SADDLE_LABELS and self.morse_index != 1:
            raise ValueError(f"label {self.label} requires Morse index 1")
        return self


class FiberData(ImmutableModel):
    base: BasePoint
    points: tuple[CriticalPoint, ...]
    inside_caustic: bool

    @model_validator(mode="after")
    def _structure(self) -> FiberData:
        indices = sorted(point.morse_index for point in self.points)
        if self.inside_caustic and indices != [1, 1, 1, 2]:
            raise ValueError("a fiber inside the caustic has three saddles and one node")
        if not self.inside_caustic and indices != [1, 1]:
            raise ValueError("a fiber outside the caustic has exactly two saddles")
        labels = [point.label for point in self.points if point.label != "unlabeled"]
        if len(labels) != len(set(labels)):
            raise ValueError("critical point labels must be distinct")
        return self

    @property
    def labeled(self) -> bool:
        return all(point.label != "unlabeled" for point in self.points)

    @property
    def saddles(self) -> tuple[CriticalPoint, ...]:
        return tuple(point for point in self.points if point.morse_index == 1)

    @property
    def node(self) -> CriticalPoint | None:
        return next((point for point in self.points if point.morse_index == 2), None)

    @property
    def saddle_indices(self) -> tuple[int, ...]:
        return tuple(sorted(saddle_index(point.label) for point in self.saddles))

    def point(self, label: Label) -> CriticalPoint:
        for point in self.points:
            if point.label == label:
                return point
        raise KeyError(label)


class Converged(ImmutableModel):
    kind: Literal["converged"] = "converged"
    target: Label
    target_y: Point


class Escaped(ImmutableModel):
    kind: Literal["escaped"] = "escaped"
    sector: int
    sector_kind: SectorKind


class Undecided(ImmutableModel):
    kind: Literal["undecided"] = "undecided"
    reason: str = "time-out"


Terminal = Annotated[Converged | Escaped | Undecided, Field(discriminator="kind")]


class Trajectory(ImmutableModel):
    samples: tuple[Point, ...]
    times: tuple[float, ...]
    terminal: Terminal
    direction: FlowDirection
    branch: Branch | None = None


class Separatrices(ImmutableModel):
    saddle: Label
    y: Point
    branches: tuple[Trajectory, ...]

    def branch(self, name: Branch) -> Trajectory:
        for trajectory in self.branches:
            if trajectory.branch == name:
                return trajectory
        raise KeyError(name)


class Sector(ImmutableModel):
    id: int
    start: float
    end: float
    kind: SectorKind

    @property
    def centre(self) -> float:
        return (0.5 * (self.start + self.end)) % (2 * math.pi)


class SectorDecomposition(ImmutableModel):
    degree: int
    zeros: tuple[float, ...]
    ascent: tuple[Sector, ...]
    descent: tuple[Sector, ...]


class IncidenceMatrix(ImmutableModel):
    entries: tuple[int, int, int]
    multiplicity: tuple[int, int, int] = (0, 0, 0)

    @field_validator("entries")
    @classmethod
    def _binary(cls, entries: tuple[int, int, int]) -> tuple[int, int, int]:
        if any(entry not in (0, 1) for entry in entries):
            raise ValueError("incidence entries must be 0 or 1")
        return entries

    def entry(self, label: Label) -> int:
        return self.entries[saddle_index(label) - 1]


class Cusp(ImmutableModel):
    id: int
    point: Point
    preimage: Point
    pair: tuple[int, int]
    axis: Point
    case: CuspCase | None = None
    entry_region: int | None = None
    inside_region: int | None = None
    exit_region: int | None = None


class FoldArc(ImmutableModel):
    id: int
    dying: int
    polyline: tuple[Point, ...]
    preimages: tuple[Point, ...]
    cusps: tuple[int, int]


class Caustic(ImmutableModel):
    degenerate: bool
    center: Point
    points: tuple[Point, ...]
    preimages: tuple[Point, ...]
    arcs: tuple[FoldArc, ...] = ()
    cusps: tuple[Cusp, ...] = ()


class Wall(ImmutableModel):
    """A stratum of the base window with the data feeding its glue map.

    ``pair`` is the (source, target) saddle index pair of the separatrix of a
    bifurcation wall; ``dying`` is the saddle cancelling with n on the fold
    bounding the wall's outside region (fold walls and outside bifurcation
    walls); ``left`` and ``right`` are region ids and a crossing with
    direction 1 goes from left to right.
    """

    id: str
    kind: WallKind
    polyline: tuple[Point, ...]
    left: int
    right: int
    inside: bool = False
    pair: tuple[int, int] | None = None
    dying: int | None = None
    cusp: int | None = None
    tau: int | None = Field(default=None, ge=-1, le=1)
    rotation: float = 0.0


class Region(ImmutableModel):
    id: int
    rep: Point
    inside: bool
    incidence: IncidenceMatrix | None = None
    labels: tuple[int, ...]

    @model_validator(mode="after")
    def _labels_match_side(self) -> Region:
        expected = 3 if self.inside else 2
        if len(self.labels) != expected:
            raise ValueError(f"region {self.id} needs {expected} saddle labels")
        if self.inside and self.incidence is None:
            raise ValueError(f"inside region {self.id} needs an incidence matrix")
        return self


class Crossing(ImmutableModel):
    wall: str
    direction: Direction = 1


class Loop(ImmutableModel):
    base: int
    crossings: tuple[Crossing, ...]


class RegionGraph(ImmutableModel):
    regions: tuple[Region, ...]
    walls: tuple[Wall, ...]
    cusps: tuple[Cusp, ...] = ()
    twist_lines: tuple[Wall, ...] = ()
    junctions: tuple[Loop, ...] = ()
    center: Point | None = None

    @property
    def all_walls(self) -> tuple[Wall, ...]:
        return self.walls + self.twist_lines

    def region(self, region_id: int) -> Region:
        for region in self.regions:
            if region.id == region_id:
                return region
        raise KeyError(region_id)

    def wall(self, wall_id: str) -> Wall:
        for wall in self.all_walls:
            if wall.id == wall_id:
                return wall
        raise KeyError(wall_id)

    def cusp(self, cusp_id: int) -> Cusp:
        for cusp in self.cusps:
            if cusp.id == cusp_id:
                return cusp
        raise KeyError(cusp_id)

    def walls_between(self, first: int, second: int) -> tuple[Wall, ...]:
        return tuple(
            wall for wall in self.all_walls if {wall.left, wall.right} == {first, second}
        )


class WallCatalogue(ImmutableModel):
    walls: tuple[Wall, ...]
    twist_lines: tuple[Wall, ...] = ()


class MorseComplex(ImmutableModel):
    saddles: tuple[int, ...]
    node: bool
    differential: IntVector | None = None


class HomologyFibre(ImmutableModel):
    ambient_rank: int
    labels: tuple[int, ...]
    relation: IntVector | None = None
    pivot: int | None = None
    basis: IntMatrix


class GlueMap(ImmutableModel):
    kind: GlueKind
    chain_map: IntMatrix
    induced: IntMatrix
    source_labels: tuple[int, ...]
    target_labels: tuple[int, ...]
    wall: str | None = None
    direction: Direction = 1


class BasisRecord(ImmutableModel):
    region: int
    labels: tuple[int, ...]
    relation: IntVector | None = None


class MonodromyResult(ImmutableModel):
    loop: Loop
    steps: tuple[GlueMap, ...]
    bases: tuple[BasisRecord, ...]
    matrix: IntMatrix
    chain_matrix: IntMatrix | None = None
    is_identity: bool


class SheetMonodromy(ImmutableModel):
    permutation: tuple[int, ...]
    matrix: IntMatrix
    steps: int


class Sheet(ImmutableModel):
    label: str
    y: Point


class SheetData(ImmutableModel):
    base: BasePoint
    sheets: tuple[Sheet, ...]
    w: Point = (0.0, 0.0)

    def sheet(self, label: str) -> Sheet:
        for sheet in self.sheets:
            if sheet.label == label:
                return sheet
        raise KeyError(label)


class ConnectionSample(ImmutableModel):
    """Per-sheet coefficients of A_i = i (a1 dz1 + a2 dz2); only imaginary parts are stored."""

    base: BasePoint
    labels: tuple[str, ...]
    imaginary: tuple[Point, ...]

    @property
    def coefficients(self) -> tuple[tuple[complex, complex], ...]:
        return tuple((complex(0.0, a1), complex(0.0, a2)) for a1, a2 in self.imaginary)


class FramePotential(ImmutableModel):
    label: str
    h: float
    connection: float = 0.0
    weight_real: float
    weight_imag: float

    @property
    def weight(self) -> complex:
        return complex(self.weight_real, self.weight_imag)


class MirrorSample(ImmutableModel):
    """One row of a mirror-data grid dump."""

    x1: float
    x2: float
    sheet: str
    y1: float
    y2: float
    h: float
    weight_real: float
    weight_imag: float


class VerificationItem(ImmutableModel):
    name: str
    passed: bool
    detail: str = ""


class VerificationSummary(ImmutableModel):
    total: int
    passed: int
    failed: int


class VerificationReport(ImmutableModel):
    mode: VerificationMode
    summary: VerificationSummary
    items: tuple[VerificationItem, ...]

    @property
    def ok(self) -> bool:
        return self.summary.failed == 0
