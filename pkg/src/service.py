"""Pipeline use cases over an injected executor factory."""

from __future__ import annotations

import time
from collections.abc import Callable, Iterator
from concurrent.futures import Executor, Future, ProcessPoolExecutor
from contextlib import AbstractContextManager, contextmanager
from typing import Any, Protocol

from src.codec import load_generating_function
from src.config import RunConfig
from src.family import critical_points, default_labeler, perturb, perturbation, preset
from src.flow import saddle_separatrices
from src.logger import get_logger
from src.mirror import sample_grid
from src.models import (
    BasePoint,
    Caustic,
    GeneratingFunction,
    MirrorSample,
    Separatrices,
    SheetMonodromy,
    VerificationReport,
)
from src.monodromy import circle_loop, sheet_monodromy, verify_numeric, verify_fixture_suite
from src.strata import Stratification, check_window, stratify, trace_caustic

logger = get_logger("service")


class SerialExecutor(Executor):
    """Runs every submitted call in the calling thread."""

    def submit(self, fn: Callable[..., Any], /, *args: Any, **kwargs: Any) -> Future[Any]:
        future: Future[Any] = Future()
        try:
            future.set_result(fn(*args, **kwargs))
        except BaseException as exc:
            future.set_exception(exc)
        return future


class ExecutorFactory(Protocol):
    def __call__(self, workers: int) -> AbstractContextManager[Executor]: ...


@contextmanager
def default_executor(workers: int) -> Iterator[Executor]:
    """A process pool for parallel scans, or the serial executor for one worker."""

    if workers <= 1:
        yield SerialExecutor()
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield pool


def resolve_function(config: RunConfig) -> GeneratingFunction:
    """Preset or JSON generating function with the configured perturbation added."""

    base = (
        load_generating_function(config.function_path)
        if config.function_path is not None
        else preset(config.preset)
    )
    terms = {(i, j): c for i, j, c in config.extra}
    return perturb(base, perturbation(config.eps, terms))


class StratificationService:
    """Run pipeline stages with a fresh executor per call."""

    def __init__(self, executor_factory: ExecutorFactory = default_executor, workers: int = 1) -> None:
        self._executor_factory = executor_factory
        self._workers = workers

    def caustic(self, config: RunConfig) -> Caustic:
        f = resolve_function(config)
        caustic = trace_caustic(f, config.settings, default_labeler(f, config.settings))
        check_window(caustic, config.window)
        return caustic

    def stratify(self, config: RunConfig) -> Stratification:
        f = resolve_function(config)
        with self._executor_factory(self._workers) as executor:
            return stratify(f, config.window, config.settings, executor)

    def verify_fixtures(self, config: RunConfig) -> VerificationReport:
        return verify_fixture_suite(seed=config.settings.seed)

    def verify_numeric(self, config: RunConfig, samples: int = 20) -> VerificationReport:
        """Stratify and check the realized graph, with the fixture identities in front."""

        started = time.monotonic()
        strat = self.stratify(config)
        fixtures = self.verify_fixtures(config)
        numeric = verify_numeric(strat, samples=samples, seed=config.settings.seed)
        items = (*fixtures.items, *numeric.items)
        passed = sum(1 for item in items if item.passed)
        report = numeric.model_copy(
            update={
                "items": items,
                "summary": numeric.summary.model_copy(
                    update={"total": len(items), "passed": passed, "failed": len(items) - passed}
                ),
            }
        )
        logger.info(
            "service_verification_completed",
            extra={
                "items": len(items),
                "failed": len(items) - passed,
                "duration_ms": round((time.monotonic() - started) * 1000, 3),
            },
        )
        return report

    def sheet_monodromy(self, config: RunConfig, radius: float | None = None) -> SheetMonodromy:
        """Sheet permutation around a circle about the caustic centre."""

        caustic = self.caustic(config)
        f = resolve_function(config)
        chosen = radius if radius is not None else 0.5 * config.window
        return sheet_monodromy(f, circle_loop(caustic.center, chosen), config.settings)

    def mirror_sample(self, config: RunConfig, n: int) -> tuple[MirrorSample, ...]:
        f = resolve_function(config)
        box = (-config.window, config.window, -config.window, config.window)
        return sample_grid(f, box, n, config.settings)

    def separatrices(self, config: RunConfig, x: BasePoint | None = None) -> tuple[Separatrices, ...]:
        """Separatrices of every saddle over ``x``, the reference point by default."""

        f = resolve_function(config)
        labeler = default_labeler(f, config.settings)
        if x is None:
            x = labeler.reference if labeler is not None else BasePoint(x1=config.window, x2=0.0)
        fiber = labeler.label(x) if labeler is not None else critical_points(f, x, config.settings)
        return tuple(
            saddle_separatrices(f, x, saddle, config.settings, fiber) for saddle in fiber.saddles
        )
