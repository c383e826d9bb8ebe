"""Morse complexes, homology fibres and the integer glue maps between them.

Inside the caustic the complex is Z[n] -> Z[s1] + Z[s2] + Z[s3] with
dn = sum I_i s_i, so the homology fibre is Z^3 / <I>. Outside it is Z[s_j] +
Z[s_k] with zero differential. Coordinates on Z^3 / <I> eliminate the first
slot p with I_p = 1: a class [h] has coordinates (h - h_p I) restricted to the
slots other than p. Outside coordinates are positional in label order.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from typing import Any, Literal

import sympy as sp

from src.config import Settings
from src.errors import IncompatibleIncidence, LabelMismatch, UnknownCase, WrongIncidence
from src.family import SaddleLabeler, critical_points
from src.flow import incidence_matrix
from src.models import (
    BasePoint,
    CuspCase,
    Direction,
    GeneratingFunction,
    GlueKind,
    GlueMap,
    HomologyFibre,
    IncidenceMatrix,
    IntMatrix,
    MorseComplex,
    Region,
)

ALL_SADDLES = (1, 2, 3)

# Monodromy around a cusp whose fold arcs kill (n, s_j) and (n, s_k), j < k,
# for the loop that enters the caustic through the s_j fold and leaves
# through the s_k fold. Rows and columns are positional outside coordinates.
CUSP_MATRICES: Mapping[tuple[tuple[int, int], CuspCase], IntMatrix] = {
    ((2, 3), "a"): ((1, -1), (0, -1)),
    ((2, 3), "b"): ((1, 0), (0, -1)),
    ((1, 2), "a"): ((-1, 0), (-1, 1)),
    ((1, 2), "b"): ((-1, 0), (0, 1)),
    ((1, 3), "a"): ((0, -1), (1, -1)),
    ((1, 3), "b"): ((0, -1), (1, 0)),
}

SPLIT_TWIST_CHAIN: IntMatrix = ((1, -1, -1), (0, -1, 0), (0, 0, -1))


def as_matrix(matrix: IntMatrix | Sequence[Sequence[Any]]) -> sp.ImmutableMatrix:
    return sp.ImmutableMatrix([list(row) for row in matrix])


def to_int_matrix(matrix: sp.MatrixBase) -> IntMatrix:
    rows: list[tuple[int, ...]] = []
    for r in range(matrix.rows):
        row = []
        for c in range(matrix.cols):
            entry = sp.nsimplify(matrix[r, c])
            if not entry.is_integer:
                raise IncompatibleIncidence(f"non-integer entry {entry} in glue matrix")
            row.append(int(entry))
        rows.append(tuple(row))
    return tuple(rows)


def identity(size: int) -> IntMatrix:
    return tuple(tuple(1 if r == c else 0 for c in range(size)) for r in range(size))


def multiply(left: IntMatrix, right: IntMatrix) -> IntMatrix:
    return to_int_matrix(as_matrix(left) * as_matrix(right))


def invert(matrix: IntMatrix) -> IntMatrix:
    return to_int_matrix(as_matrix(matrix).inv())


def determinant(matrix: IntMatrix) -> int:
    return int(as_matrix(matrix).det())


def is_unimodular(matrix: IntMatrix) -> bool:
    return len(matrix) == len(matrix[0]) and determinant(matrix) in (1, -1)


def elementary(target: int, source: int, tau: int, size: int = 3) -> IntMatrix:
    """E_ij(tau) = Id + tau e_ij with i = ``target`` row, j = ``source`` column (1-based)."""

    if target == source:
        raise ValueError("elementary matrices need distinct indices")
    return tuple(
        tuple(
            (1 if r == c else 0) + (tau if (r + 1, c + 1) == (target, source) else 0)
            for c in range(size)
        )
        for r in range(size)
    )


def format_matrix(matrix: IntMatrix) -> str:
    """Row-major text with sign-aligned columns."""

    width = max(len(str(entry)) for row in matrix for entry in row)
    return "\n".join(
        "[" + " ".join(str(entry).rjust(width) for entry in row) + "]" for row in matrix
    )


def complex_from_incidence(incidence: IncidenceMatrix) -> MorseComplex:
    return MorseComplex(saddles=ALL_SADDLES, node=True, differential=incidence.entries)


def complex_from_region(region: Region) -> MorseComplex:
    if region.inside and region.incidence is not None:
        return complex_from_incidence(region.incidence)
    return MorseComplex(saddles=region.labels, node=False)


def morse_complex(
    f: GeneratingFunction,
    x: BasePoint,
    settings: Settings | None = None,
    labeler: SaddleLabeler | None = None,
) -> MorseComplex:
    settings = settings or Settings()
    fiber = critical_points(f, x, settings, labeler)
    if fiber.inside_caustic:
        return complex_from_incidence(incidence_matrix(f, x, settings, labeler, fiber))
    if any(point.label == "unlabeled" for point in fiber.saddles):
        raise LabelMismatch(f"saddles at x={x.pair} carry no labels")
    return MorseComplex(saddles=fiber.saddle_indices, node=False)


def differentials(complex_: MorseComplex) -> tuple[IntMatrix, IntMatrix]:
    """(d2, d1): d2 maps the node group to the saddle group, d1 maps saddles to zero."""

    rank = len(complex_.saddles)
    column = complex_.differential or (0,) * rank
    d2 = tuple((entry,) for entry in column) if complex_.node else tuple(() for _ in range(rank))
    d1: IntMatrix = ((0,) * rank,)
    return d2, d1


def homology_fibre(complex_: MorseComplex) -> HomologyFibre:
    if not complex_.node:
        if len(complex_.saddles) != 2:
            raise LabelMismatch("an outside complex has exactly two saddle generators")
        return HomologyFibre(
            ambient_rank=2, labels=tuple(sorted(complex_.saddles)), basis=identity(2)
        )
    relation = complex_.differential or (0, 0, 0)
    if 1 not in relation:
        raise WrongIncidence("a zero differential would give homology of rank 3")
    pivot = relation.index(1) + 1
    basis = tuple(
        tuple(1 if slot == label else 0 for slot in ALL_SADDLES)
        for label in ALL_SADDLES
        if label != pivot
    )
    return HomologyFibre(
        ambient_rank=3, labels=ALL_SADDLES, relation=relation, pivot=pivot, basis=basis
    )


def inside_fibre(entries: Sequence[int]) -> HomologyFibre:
    return homology_fibre(
        MorseComplex(saddles=ALL_SADDLES, node=True, differential=tuple(entries))
    )


def outside_fibre(labels: Sequence[int]) -> HomologyFibre:
    return homology_fibre(MorseComplex(saddles=tuple(sorted(labels)), node=False))


def coordinate_matrix(fibre: HomologyFibre) -> sp.ImmutableMatrix:
    """2 x ambient matrix sending a chain to the coordinates of its class."""

    if fibre.relation is None or fibre.pivot is None:
        return sp.ImmutableMatrix.eye(2)
    relation = sp.Matrix(fibre.relation)
    eliminate = sp.eye(3) - relation * sp.Matrix.eye(3).row(fibre.pivot - 1)
    keep = [slot - 1 for slot in ALL_SADDLES if slot != fibre.pivot]
    return sp.ImmutableMatrix(eliminate.extract(keep, [0, 1, 2]))


def representative_matrix(fibre: HomologyFibre) -> sp.ImmutableMatrix:
    """ambient x 2 matrix whose columns are the basis chains."""

    return as_matrix(fibre.basis).T


def coordinates(fibre: HomologyFibre, chain: Sequence[Any]) -> tuple[Any, ...]:
    vector = coordinate_matrix(fibre) * sp.Matrix(list(chain))
    return tuple(sp.expand(entry) for entry in vector)


def normal_form(fibre: HomologyFibre, chain: Sequence[Any]) -> tuple[Any, ...]:
    """Representative of [chain] with the pivot slot cleared."""

    vector = representative_matrix(fibre) * sp.Matrix(list(coordinates(fibre, chain)))
    return tuple(sp.expand(entry) for entry in vector)


def same_class(fibre: HomologyFibre, first: Sequence[Any], second: Sequence[Any]) -> bool:
    return all(
        sp.simplify(a - b) == 0
        for a, b in zip(coordinates(fibre, first), coordinates(fibre, second), strict=True)
    )


def _relation_preserved(
    chain_map: IntMatrix, source: HomologyFibre, target: HomologyFibre
) -> bool:
    if source.relation is None:
        return True
    image = as_matrix(chain_map) * sp.Matrix(source.relation)
    if target.relation is None:
        return bool(image.is_zero_matrix)
    return sp.Matrix.hstack(image, sp.Matrix(target.relation)).rank() <= 1


def glue_map(
    kind: GlueKind,
    chain_map: IntMatrix,
    source: HomologyFibre,
    target: HomologyFibre,
    *,
    wall: str | None = None,
    direction: Direction = 1,
) -> GlueMap:
    """Wrap a chain-level map after checking it descends to an isomorphism on homology."""

    if not _relation_preserved(chain_map, source, target):
        raise IncompatibleIncidence(
            f"chain map {chain_map} does not send relation {source.relation} into "
            f"<{target.relation}>"
        )
    induced = to_int_matrix(
        coordinate_matrix(target) * as_matrix(chain_map) * representative_matrix(source)
    )
    if not is_unimodular(induced):
        raise IncompatibleIncidence(f"induced map {induced} is not invertible over Z")
    return GlueMap(
        kind=kind,
        chain_map=chain_map,
        induced=induced,
        source_labels=source.labels,
        target_labels=target.labels,
        wall=wall,
        direction=direction,
    )


def caustic_glue(
    outside: HomologyFibre,
    inside: HomologyFibre,
    dying: int,
    direction: Literal["in", "out"],
    wall: str | None = None,
) -> GlueMap:
    """Fold glue: inclusion of the surviving saddles, or its inverse on homology."""

    survivors = tuple(label for label in ALL_SADDLES if label != dying)
    if outside.labels != survivors:
        raise LabelMismatch(
            f"outside labels {outside.labels} do not survive the death of s{dying}"
        )
    if inside.relation is None or inside.relation[dying - 1] != 1:
        raise WrongIncidence(f"n and s{dying} must be connected next to their fold")
    if direction == "in":
        inclusion = tuple(
            tuple(1 if slot == label else 0 for label in survivors) for slot in ALL_SADDLES
        )
        return glue_map("fold", inclusion, outside, inside, wall=wall, direction=1)
    relation = inside.relation
    projection = tuple(
        tuple(
            (1 if slot == row else 0) - relation[row - 1] * (1 if slot == dying else 0)
            for slot in ALL_SADDLES
        )
        for row in survivors
    )
    return glue_map("fold", projection, inside, outside, wall=wall, direction=-1)


def wall_tau(incidence_u: Sequence[int], incidence_v: Sequence[int], pair: tuple[int, int]) -> int | None:
    """Solve E_ts(tau) I(U) = I(V) for a separatrix from s to t; None when any tau works."""

    source, target = pair
    u, v = tuple(incidence_u), tuple(incidence_v)
    differing = [k + 1 for k in range(3) if u[k] != v[k]]
    if any(k != target for k in differing):
        raise IncompatibleIncidence(
            f"I(U)={u} and I(V)={v} differ outside row s{target} of the separatrix s{source}->s{target}"
        )
    if u[source - 1] == 0:
        if differing:
            raise IncompatibleIncidence(f"no tau solves E_{target}{source}(tau) {u} = {v}")
        return None
    tau = v[target - 1] - u[target - 1]
    if tau not in (-1, 0, 1):
        raise IncompatibleIncidence(f"tau={tau} is out of range")
    return tau


def wall_matrix(
    incidence_u: Sequence[int],
    incidence_v: Sequence[int],
    pair: tuple[int, int],
    tau: int | None = None,
    wall: str | None = None,
    direction: Direction = 1,
) -> GlueMap:
    """E_ts(tau) for a bifurcation wall inside the caustic."""

    solved = wall_tau(incidence_u, incidence_v, pair)
    if tau is None:
        if solved is None:
            raise IncompatibleIncidence(
                "I(U) = I(V) leaves tau undetermined; resolve it from the surrounding loops"
            )
        tau = solved
    elif solved is not None and solved != tau:
        raise IncompatibleIncidence(f"tau={tau} violates E I(U) = I(V); expected {solved}")
    source, target = pair
    return glue_map(
        "bifurcation",
        elementary(target, source, tau),
        inside_fibre(incidence_u),
        inside_fibre(incidence_v),
        wall=wall,
        direction=direction,
    )


def wall_matrix_outside(elementary_map: GlueMap, dying: int) -> GlueMap:
    """Delete the row and column of the saddle dying where the wall meets the caustic."""

    chain = elementary_map.chain_map
    if len(chain) != 3:
        raise LabelMismatch("outside wall matrices are derived from 3 x 3 maps")
    involved = {
        label
        for r in range(3)
        for c in range(3)
        if r != c and chain[r][c] != 0
        for label in (r + 1, c + 1)
    }
    if dying in involved:
        raise LabelMismatch(f"s{dying} carries the separatrix and cannot die at the wall end")
    survivors = tuple(label for label in ALL_SADDLES if label != dying)
    reduced = tuple(tuple(chain[r - 1][c - 1] for c in survivors) for r in survivors)
    fibre = outside_fibre(survivors)
    return glue_map(
        "bifurcation",
        reduced,
        fibre,
        fibre,
        wall=elementary_map.wall,
        direction=elementary_map.direction,
    )


def outside_wall_matrix(
    pair: tuple[int, int], tau: int, dying: int, wall: str | None = None, direction: Direction = 1
) -> GlueMap:
    survivors = tuple(label for label in ALL_SADDLES if label != dying)
    source, target = pair
    if source not in survivors or target not in survivors:
        raise LabelMismatch(f"separatrix s{source}->s{target} must join surviving saddles")
    fibre = outside_fibre(survivors)
    reduced = tuple(
        tuple(
            (1 if r == c else 0) + (tau if (r, c) == (target, source) else 0) for c in survivors
        )
        for r in survivors
    )
    return glue_map("bifurcation", reduced, fibre, fibre, wall=wall, direction=direction)


def cusp_matrix(pair: tuple[int, int], case: str) -> IntMatrix:
    try:
        return CUSP_MATRICES[(tuple(sorted(pair)), case)]  # type: ignore[index]
    except KeyError:
        raise UnknownCase(f"no cusp matrix for pair {pair} and case {case!r}") from None


def cusp_sides(pair: tuple[int, int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Outside labels next to the s_j fold and next to the s_k fold of a cusp."""

    j, k = sorted(pair)
    return (
        tuple(label for label in ALL_SADDLES if label != j),
        tuple(label for label in ALL_SADDLES if label != k),
    )


def cusp_twist(
    cusp_id: int,
    case: str,
    pair: tuple[int, int],
    direction: Direction = 1,
    wall: str | None = None,
) -> GlueMap:
    """Twist glue across the half-line from a cusp.

    Direction 1 crosses from the s_k side to the s_j side and applies the
    inverse of the cusp matrix; direction -1 applies the matrix itself.
    """

    matrix = cusp_matrix(pair, case)
    j_side, k_side = cusp_sides(pair)
    chain = invert(matrix) if direction == 1 else matrix
    source, target = (k_side, j_side) if direction == 1 else (j_side, k_side)
    return glue_map(
        "twist_line",
        chain,
        outside_fibre(source),
        outside_fibre(target),
        wall=wall or f"twist-{cusp_id}",
        direction=direction,
    )


def sheet_transport(pair: tuple[int, int], direction: Direction = 1, wall: str | None = None) -> GlueMap:
    """Twist-free identification across a cusp half-line: s_j and s_k are the same sheet."""

    j, k = sorted(pair)
    j_side, k_side = cusp_sides(pair)
    source, target = (k_side, j_side) if direction == 1 else (j_side, k_side)

    def follow(label: int) -> int:
        if direction == 1:
            return k if label == j else label
        return j if label == k else label

    chain = tuple(
        tuple(1 if follow(column) == row else 0 for column in source) for row in target
    )
    return glue_map(
        "twist_line",
        chain,
        outside_fibre(source),
        outside_fibre(target),
        wall=wall,
        direction=direction,
    )


def split_twist_chain_glue(incidence: Sequence[int]) -> GlueMap:
    """Chain-level twist h -> (h1 - h2 - h3, -h2, -h3) at a case (a) cusp."""

    if tuple(incidence) != (1, 1, 1):
        raise WrongIncidence(f"the split twist needs I = (1, 1, 1), got {tuple(incidence)}")
    fibre = inside_fibre(incidence)
    return glue_map("chain", SPLIT_TWIST_CHAIN, fibre, fibre)


def apply_chain(chain_map: IntMatrix, chain: Sequence[Any]) -> tuple[Any, ...]:
    vector = as_matrix(chain_map) * sp.Matrix(list(chain))
    return tuple(sp.expand(entry) for entry in vector)
