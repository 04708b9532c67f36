"""The query interface an attacker sees: a label and a distance vector per image."""

from __future__ import annotations

import abc
import threading

import numpy as np


class QueryBudgetExceeded(RuntimeError):
    pass


class ClassifierOracle(abc.ABC):
    """Counts every query; subclasses supply :meth:`_answer`."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._count

    def query(self, img: np.ndarray) -> tuple[int, np.ndarray]:
        with self._lock:
            self._count += 1
        label, distances = self._answer(img)
        return int(label), np.asarray(distances, dtype=float)

    @abc.abstractmethod
    def _answer(self, img: np.ndarray) -> tuple[int, np.ndarray]:
        ...


class FunctionOracle(ClassifierOracle):
    """Wraps any ``img -> (label, distances)`` callable."""

    def __init__(self, fn):
        super().__init__()
        self._fn = fn

    def _answer(self, img):
        return self._fn(img)


class BudgetedOracle(ClassifierOracle):
    """Forwards at most ``budget`` queries to ``inner``, then raises."""

    def __init__(self, inner: ClassifierOracle, budget: int):
        super().__init__()
        self.inner = inner
        self.budget = budget

    @property
    def remaining(self) -> int:
        return self.budget - self._count

    def query(self, img):
        if self._count >= self.budget:
            raise QueryBudgetExceeded(f"query budget of {self.budget} exhausted")
        return super().query(img)

    def _answer(self, img):
        return self.inner.query(img)
