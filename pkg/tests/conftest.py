"""Shared immutable fixtures and executor fakes."""

from __future__ import annotations

from collections.abc import Callable, Iterator
from concurrent.futures import Executor, Future
from contextlib import AbstractContextManager, contextmanager
from typing import Any

import pytest

from src.config import Settings
from src.family import elliptic_umbilic, perturb, perturbation
from src.fixtures import FixtureCase, fixture
from src.models import GeneratingFunction, RegionGraph


@pytest.fixture
def settings() -> Settings:
    return Settings()


@pytest.fixture
def umbilic() -> GeneratingFunction:
    return elliptic_umbilic()


@pytest.fixture
def perturbed() -> GeneratingFunction:
    return perturb(elliptic_umbilic(), perturbation(0.1, {(1, 1): 0.02}))


@pytest.fixture
def global_case() -> FixtureCase:
    return fixture("global-tricuspoid")


@pytest.fixture
def global_graph(global_case: FixtureCase) -> RegionGraph:
    return global_case.graph


class RecordingExecutor(Executor):
    """Runs calls inline and remembers them."""

    def __init__(self) -> None:
        self.calls: list[Callable[..., Any]] = []
        self.exception: Exception | None = None

    def submit(self, fn: Callable[..., Any], /, *args: Any, **kwargs: Any) -> Future[Any]:
        self.calls.append(fn)
        future: Future[Any] = Future()
        if self.exception is not None:
            future.set_exception(self.exception)
        else:
            future.set_result(fn(*args, **kwargs))
        return future


class StubExecutorFactory:
    def __init__(self, executor: Executor) -> None:
        self.executor = executor
        self.open_count = 0
        self.workers: list[int] = []

    def __call__(self, workers: int) -> AbstractContextManager[Executor]:
        return self._open(workers)

    @contextmanager
    def _open(self, workers: int) -> Iterator[Executor]:
        self.open_count += 1
        self.workers.append(workers)
        yield self.executor
