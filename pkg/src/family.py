"""Generating functions, the family f_x(y) = f(y) - x.y and its critical points.

Critical points are found from the resultant of the gradient system in y2,
polished by Newton iteration, and labeled s1, s2, s3, n by continuation from a
reference point inside the caustic.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np
import sympy as sp
from numpy.typing import NDArray
from pydantic import ValidationError
from scipy.optimize import linear_sum_assignment, minimize, root
from scipy.spatial.distance import cdist

from src.config import Settings
from src.errors import DegenerateFiber, InvalidPerturbation, SolverDivergence
from src.logger import get_logger
from src.models import (
    SADDLE_LABELS,
    BasePoint,
    CriticalPoint,
    FiberData,
    GeneratingFunction,
    Label,
    Monomial,
    PerturbationParams,
)

FloatArray = NDArray[np.float64]

_Y1, _Y2 = sp.symbols("y1 y2", real=True)
_X1, _X2 = sp.symbols("x1 x2", real=True)
_LABEL_ORDER: dict[Label, int] = {"s1": 0, "s2": 1, "s3": 2, "n": 3, "unlabeled": 4}

logger = get_logger("family")


def elliptic_umbilic() -> GeneratingFunction:
    """f(y) = y1^3/3 - 2 y1 y2^2."""

    return GeneratingFunction(
        monomials=(Monomial(i=3, j=0, c=1.0 / 3.0), Monomial(i=1, j=2, c=-2.0))
    )


def symmetric_umbilic() -> GeneratingFunction:
    """f(y) = y1^3/3 - y1 y2^2, the three-fold symmetric normal form."""

    return GeneratingFunction(
        monomials=(Monomial(i=3, j=0, c=1.0 / 3.0), Monomial(i=1, j=2, c=-1.0))
    )


PRESETS: Mapping[str, Callable[[], GeneratingFunction]] = {
    "umbilic": elliptic_umbilic,
    "symmetric_umbilic": symmetric_umbilic,
}


def preset(name: str) -> GeneratingFunction:
    try:
        return PRESETS[name]()
    except KeyError:
        raise InvalidPerturbation(
            f"unknown preset {name!r}; choose one of {', '.join(sorted(PRESETS))}"
        ) from None


def perturbation(eps: float, terms: Mapping[tuple[int, int], float] | None = None) -> PerturbationParams:
    """Validate raw perturbation terms and wrap them."""

    terms = terms or {}
    if not math.isfinite(eps) or not 0.0 <= eps <= 1.0:
        raise InvalidPerturbation("eps must satisfy 0 <= eps <= 1")
    monomials: list[Monomial] = []
    for (i, j), coefficient in sorted(terms.items()):
        if i < 0 or j < 0 or i + j > 4:
            raise InvalidPerturbation(f"perturbation term y1^{i} y2^{j} raises the degree above 4")
        if not math.isfinite(coefficient) or abs(coefficient) > 1.0:
            raise InvalidPerturbation(f"perturbation coefficient for ({i},{j}) must be at most 1")
        monomials.append(Monomial(i=i, j=j, c=coefficient))
    return PerturbationParams(eps=eps, extra=tuple(monomials))


def perturb(f: GeneratingFunction, params: PerturbationParams) -> GeneratingFunction:
    """Add eps (y1^2 + y2^2) and the extra monomials coefficient-wise."""

    terms = {(item.i, item.j): item.c for item in f.monomials}
    additions = [(2, 0, params.eps), (0, 2, params.eps)]
    additions.extend((item.i, item.j, item.c) for item in params.extra)
    for i, j, coefficient in additions:
        if coefficient:
            terms[(i, j)] = terms.get((i, j), 0.0) + coefficient
    return GeneratingFunction(
        monomials=tuple(Monomial(i=i, j=j, c=c) for (i, j), c in sorted(terms.items()))
    )


def symbolic_expression(f: GeneratingFunction) -> sp.Expr:
    """Exact sympy form of f; coefficients become nearby small-denominator rationals."""

    return sp.Add(
        *(
            sp.Rational(item.c).limit_denominator(10**12) * _Y1**item.i * _Y2**item.j
            for item in f.monomials
        )
    )


@dataclass(frozen=True, slots=True)
class CompiledFunction:
    value: Callable[..., Any]
    gradient: Callable[..., Any]
    hessian: Callable[..., Any]
    third: Callable[..., Any]


@lru_cache(maxsize=64)
def compile_function(f: GeneratingFunction) -> CompiledFunction:
    expr = symbolic_expression(f)
    grad = [sp.diff(expr, _Y1), sp.diff(expr, _Y2)]
    hess = [[sp.diff(g, _Y1), sp.diff(g, _Y2)] for g in grad]
    third = [
        sp.diff(expr, _Y1, 3),
        sp.diff(expr, _Y1, 2, _Y2),
        sp.diff(expr, _Y1, _Y2, 2),
        sp.diff(expr, _Y2, 3),
    ]
    arguments = (_Y1, _Y2)
    return CompiledFunction(
        value=sp.lambdify(arguments, expr, "math"),
        gradient=sp.lambdify(arguments, grad, "math"),
        hessian=sp.lambdify(arguments, hess, "math"),
        third=sp.lambdify(arguments, third, "math"),
    )


def value(f: GeneratingFunction, y: Sequence[float]) -> float:
    return float(compile_function(f).value(float(y[0]), float(y[1])))


def gradient(f: GeneratingFunction, y: Sequence[float]) -> FloatArray:
    return np.asarray(compile_function(f).gradient(float(y[0]), float(y[1])), dtype=float)


def hessian(f: GeneratingFunction, y: Sequence[float]) -> FloatArray:
    return np.asarray(compile_function(f).hessian(float(y[0]), float(y[1])), dtype=float)


def third_derivatives(f: GeneratingFunction, y: Sequence[float]) -> FloatArray:
    """(f_111, f_112, f_122, f_222) at y."""

    return np.asarray(compile_function(f).third(float(y[0]), float(y[1])), dtype=float)


def det_hessian(f: GeneratingFunction, y: Sequence[float]) -> float:
    return float(np.linalg.det(hessian(f, y)))


def det_hessian_gradient(f: GeneratingFunction, y: Sequence[float]) -> FloatArray:
    (h11, h12), (_, h22) = hessian(f, y)
    f111, f112, f122, f222 = third_derivatives(f, y)
    return np.array(
        [
            f111 * h22 + h11 * f122 - 2.0 * h12 * f112,
            f112 * h22 + h11 * f222 - 2.0 * h12 * f122,
        ]
    )


def lagrangian_map(f: GeneratingFunction, y: Sequence[float]) -> BasePoint:
    """x = grad f(y)."""

    x1, x2 = gradient(f, y)
    return BasePoint(x1=float(x1), x2=float(x2))


def family_value(f: GeneratingFunction, x: BasePoint, y: Sequence[float]) -> float:
    """f_x(y) = f(y) - x.y."""

    return value(f, y) - x.x1 * float(y[0]) - x.x2 * float(y[1])


@dataclass(frozen=True, slots=True)
class _GradientSystem:
    resultant: Callable[..., Any]
    first: Callable[..., Any]
    second: Callable[..., Any]


@lru_cache(maxsize=64)
def _gradient_system(f: GeneratingFunction) -> _GradientSystem | None:
    expr = symbolic_expression(f)
    g1 = sp.expand(sp.diff(expr, _Y1) - _X1)
    g2 = sp.expand(sp.diff(expr, _Y2) - _X2)
    eliminated = sp.Poly(sp.resultant(g1, g2, _Y2), _Y1)
    if eliminated.is_zero:
        return None
    return _GradientSystem(
        resultant=sp.lambdify((_X1, _X2), eliminated.all_coeffs(), "math"),
        first=sp.lambdify((_Y1, _X1, _X2), sp.Poly(g1, _Y2).all_coeffs(), "math"),
        second=sp.lambdify((_Y1, _X1, _X2), sp.Poly(g2, _Y2).all_coeffs(), "math"),
    )


def _real_roots(coefficients: Sequence[float], imaginary_tolerance: float) -> list[float]:
    array = np.asarray(coefficients, dtype=float)
    if not np.any(np.abs(array) > 1e-300):
        return []
    return [
        float(candidate.real)
        for candidate in np.roots(array)
        if abs(candidate.imag) <= imaginary_tolerance * (1.0 + abs(candidate))
    ]


def _residual(f: GeneratingFunction, x: FloatArray, y: FloatArray) -> float:
    return float(np.linalg.norm(gradient(f, y) - x))


def _residual_bound(settings: Settings, y: FloatArray) -> float:
    return settings.residual_tolerance * (1.0 + float(y @ y))


def _polish(
    f: GeneratingFunction, x: FloatArray, guess: FloatArray, settings: Settings
) -> FloatArray | None:
    solution = root(
        lambda y: gradient(f, y) - x,
        guess,
        jac=lambda y: hessian(f, y),
        method="hybr",
        tol=settings.newton_tolerance,
    )
    best = min(
        (np.asarray(solution.x, dtype=float), guess),
        key=lambda candidate: _residual(f, x, candidate)
        if np.all(np.isfinite(candidate))
        else math.inf,
    )
    if not np.all(np.isfinite(best)) or _residual(f, x, best) > _residual_bound(settings, best):
        return None
    return best


def _dedupe(points: Sequence[FloatArray]) -> list[FloatArray]:
    unique: list[FloatArray] = []
    for point in points:
        scale = 1e-8 * (1.0 + float(np.linalg.norm(point)))
        if all(np.linalg.norm(point - other) > scale for other in unique):
            unique.append(point)
    return unique


def _resultant_candidates(
    f: GeneratingFunction, x: FloatArray, settings: Settings
) -> list[FloatArray]:
    system = _gradient_system(f)
    if system is None:
        return []
    coefficients = np.asarray(system.resultant(x[0], x[1]), dtype=float)
    if not np.any(np.abs(coefficients) > 1e-300):
        raise DegenerateFiber(f"gradient system has a continuum of solutions at x={tuple(x)}")
    y1_values: list[float] = []
    for candidate in _real_roots(coefficients, settings.imaginary_tolerance):
        if all(abs(candidate - known) > 1e-9 * (1.0 + abs(known)) for known in y1_values):
            y1_values.append(candidate)

    candidates: list[FloatArray] = []
    for y1 in y1_values:
        y2_values = _real_roots(system.first(y1, x[0], x[1]), settings.imaginary_tolerance)
        y2_values += _real_roots(system.second(y1, x[0], x[1]), settings.imaginary_tolerance)
        for y2 in y2_values:
            point = np.array([y1, y2])
            if _residual(f, x, point) <= 1e-3 * (1.0 + float(point @ point)):
                candidates.append(point)
    return candidates


def _deflated_search(
    f: GeneratingFunction, x: FloatArray, known: list[FloatArray], settings: Settings
) -> list[FloatArray]:
    """Multi-start Newton on the deflated residual to recover roots the resultant missed."""

    found = list(known)
    radius = 2.0 * (1.0 + max((float(np.linalg.norm(point)) for point in known), default=1.0))
    for s1 in np.linspace(-radius, radius, 7):
        for s2 in np.linspace(-radius, radius, 7):
            anchors = tuple(found)

            def deflated(y: FloatArray, anchors: tuple[FloatArray, ...] = anchors) -> FloatArray:
                factor = 1.0
                for anchor in anchors:
                    factor *= 1.0 / float(np.sum((y - anchor) ** 2)) + 1.0
                return factor * (gradient(f, y) - x)

            solution = root(deflated, np.array([s1, s2]), method="hybr")
            candidate = _polish(f, x, np.asarray(solution.x, dtype=float), settings)
            if candidate is not None:
                found = _dedupe([*found, candidate])
    return found


def _classify(f: GeneratingFunction, x: BasePoint, y: FloatArray) -> CriticalPoint:
    eigenvalues = np.linalg.eigvalsh(hessian(f, y))
    return CriticalPoint(
        y=(float(y[0]), float(y[1])),
        morse_index=int(np.sum(eigenvalues > 0.0)),
        value=family_value(f, x, y),
        hess_eigs=(float(eigenvalues[0]), float(eigenvalues[1])),
    )


def _angle_key(point: CriticalPoint) -> tuple[float, float]:
    return (math.atan2(point.y[1], point.y[0]) % (2.0 * math.pi), math.hypot(*point.y))


def solve_fiber(
    f: GeneratingFunction, x: BasePoint, settings: Settings | None = None
) -> tuple[CriticalPoint, ...]:
    """All real critical points of f_x, unlabeled, ordered by angle about the origin."""

    settings = settings or Settings()
    target = np.array(x.pair)
    polished = [
        point
        for point in (_polish(f, target, candidate, settings) for candidate in _resultant_candidates(f, target, settings))
        if point is not None
    ]
    roots = _dedupe(polished)
    degenerate = [
        root_y for root_y in roots if abs(det_hessian(f, root_y)) < settings.degenerate_hessian_tolerance
    ]
    if degenerate:
        raise DegenerateFiber(
            f"x={x.pair} lies on the caustic within tolerance (degenerate critical point near "
            f"y={tuple(round(float(v), 12) for v in degenerate[0])})"
        )

    expected_parity = (max(f.degree - 1, 0) ** 2) % 2
    if len(roots) % 2 != expected_parity:
        roots = _deflated_search(f, target, roots, settings)
        if len(roots) % 2 != expected_parity:
            raise SolverDivergence(
                f"found {len(roots)} critical points at x={x.pair}; parity check failed"
            )
    return tuple(sorted((_classify(f, x, point) for point in roots), key=_angle_key))


def _fiber(x: BasePoint, points: Sequence[CriticalPoint]) -> FiberData:
    ordered = sorted(points, key=lambda point: (_LABEL_ORDER[point.label], *_angle_key(point)))
    try:
        return FiberData(base=x, points=tuple(ordered), inside_caustic=len(points) == 4)
    except ValidationError as exc:
        indices = sorted(point.morse_index for point in points)
        raise SolverDivergence(
            f"unsupported fiber structure at x={x.pair}: Morse indices {indices}"
        ) from exc


def max_det_hessian_point(f: GeneratingFunction) -> tuple[FloatArray, float]:
    """Local maximiser of det Hess f reached from the origin, and the maximum."""

    result = minimize(
        lambda y: -det_hessian(f, y),
        np.zeros(2),
        jac=lambda y: -det_hessian_gradient(f, y),
        method="BFGS",
    )
    y0 = np.asarray(result.x, dtype=float)
    return y0, det_hessian(f, y0)


def reference_point(f: GeneratingFunction, settings: Settings | None = None) -> BasePoint | None:
    """x* = grad f(y0) with y0 maximising det Hess f, or None when no node exists."""

    settings = settings or Settings()
    y0, determinant = max_det_hessian_point(f)
    if determinant <= settings.degenerate_hessian_tolerance or hessian(f, y0)[0, 0] <= 0.0:
        return None
    return lagrangian_map(f, y0)


def label_reference(fiber_points: Sequence[CriticalPoint], x: BasePoint) -> FiberData:
    """Label saddles by increasing angle of y about the index-2 point."""

    nodes = [point for point in fiber_points if point.morse_index == 2]
    saddles = [point for point in fiber_points if point.morse_index == 1]
    if len(nodes) != 1 or len(saddles) != 3:
        raise SolverDivergence(f"reference point x={x.pair} is not inside the caustic")
    node = nodes[0]

    def angle(point: CriticalPoint) -> float:
        return math.atan2(point.y[1] - node.y[1], point.y[0] - node.y[0]) % (2.0 * math.pi)

    labeled = [
        saddle.model_copy(update={"label": label})
        for label, saddle in zip(SADDLE_LABELS, sorted(saddles, key=angle), strict=True)
    ]
    return _fiber(x, [*labeled, node.model_copy(update={"label": "n"})])


def _separation(points: FloatArray, index: int) -> float:
    distances = np.linalg.norm(points - points[index], axis=1)
    distances[index] = math.inf
    return float(np.min(distances)) if len(points) > 1 else math.inf


def match_labels(
    previous: FiberData, points: Sequence[CriticalPoint], ratio: float
) -> tuple[CriticalPoint, ...] | None:
    """Carry labels from ``previous`` onto nearby ``points``, or None if ambiguous."""

    if not previous.labeled:
        return tuple(points)
    all_previous = np.array([point.y for point in previous.points])
    previous_index = {point.label: k for k, point in enumerate(previous.points)}
    old_saddles = previous.saddles
    new_saddles = [point for point in points if point.morse_index == 1]
    new_nodes = [point for point in points if point.morse_index == 2]
    if not old_saddles or not new_saddles:
        return None

    cost = cdist(np.array([p.y for p in old_saddles]), np.array([p.y for p in new_saddles]))
    rows, cols = linear_sum_assignment(cost)
    assigned: dict[int, Label] = {}
    for row, col in zip(rows, cols, strict=True):
        scale = _separation(all_previous, previous_index[old_saddles[row].label])
        if cost[row, col] > ratio * scale:
            return None
        assigned[int(col)] = old_saddles[row].label

    missing = [label for label in SADDLE_LABELS if label not in assigned.values()]
    leftovers = [k for k in range(len(new_saddles)) if k not in assigned]
    if len(leftovers) > len(missing):
        return None
    for k, label in zip(leftovers, missing, strict=False):
        assigned[k] = label

    previous_node = previous.node
    if previous_node is not None and new_nodes:
        scale = _separation(all_previous, previous_index["n"])
        if math.dist(previous_node.y, new_nodes[0].y) > ratio * scale:
            return None
    relabeled = [
        saddle.model_copy(update={"label": assigned[k]}) for k, saddle in enumerate(new_saddles)
    ]
    relabeled += [node.model_copy(update={"label": "n"}) for node in new_nodes]
    return tuple(relabeled)


def continue_fiber(
    f: GeneratingFunction, start: FiberData, target: BasePoint, settings: Settings | None = None
) -> FiberData:
    """Continue a labeled fiber along the straight segment from its base to ``target``."""

    settings = settings or Settings()
    origin = np.array(start.base.pair)
    delta = np.array(target.pair) - origin
    if not np.any(delta):
        return start
    min_step = 0.5**settings.max_halvings
    t, step, hops, current = 0.0, 1.0, 0, start
    while t < 1.0:
        step = min(step, 1.0 - t)
        upcoming = 1.0 if t + step >= 1.0 - 1e-15 else t + step
        base = target if upcoming == 1.0 else BasePoint(
            x1=float(origin[0] + upcoming * delta[0]), x2=float(origin[1] + upcoming * delta[1])
        )
        try:
            points = solve_fiber(f, base, settings)
        except (DegenerateFiber, SolverDivergence):
            if step > min_step:
                step /= 2.0
                continue
            hops += 1
            if upcoming == 1.0 or hops > 8:
                raise
            step = min_step * (2 + hops)
            continue

        matched = match_labels(current, points, settings.label_ratio)
        if matched is None:
            if step > min_step:
                step /= 2.0
                continue
            matched = match_labels(current, points, math.inf)
            logger.warning(
                "label_continuation_forced",
                extra={"x": base.pair, "step": step},
            )
            if matched is None:
                raise SolverDivergence(f"cannot continue saddle labels to x={base.pair}")
        current = _fiber(base, matched)
        t = upcoming
        step *= 2.0
    return current


class SaddleLabeler:
    """Assign s1, s2, s3, n consistently across the base plane.

    Labels are fixed at the reference point and carried to any x along the
    straight segment from the reference point, so the labeling is discontinuous
    only across rays from the reference point through the cusps.
    """

    def __init__(
        self, f: GeneratingFunction, settings: Settings, reference: BasePoint
    ) -> None:
        self.function = f
        self.settings = settings
        self.reference = reference
        self.reference_fiber = label_reference(solve_fiber(f, reference, settings), reference)

    def label(self, x: BasePoint) -> FiberData:
        return continue_fiber(self.function, self.reference_fiber, x, self.settings)

    def label_from(self, start: FiberData, x: BasePoint) -> FiberData:
        return continue_fiber(self.function, start, x, self.settings)


@lru_cache(maxsize=16)
def default_labeler(f: GeneratingFunction, settings: Settings) -> SaddleLabeler | None:
    reference = reference_point(f, settings)
    if reference is None:
        return None
    return SaddleLabeler(f, settings, reference)


def critical_points(
    f: GeneratingFunction,
    x: BasePoint,
    settings: Settings | None = None,
    labeler: SaddleLabeler | None = None,
) -> FiberData:
    """All critical points of f_x with Morse indices and continuation labels."""

    settings = settings or Settings()
    labeler = labeler or default_labeler(f, settings)
    if labeler is None:
        return _fiber(x, solve_fiber(f, x, settings))
    return labeler.label(x)
