import logging

import numpy as np

from .expr import ExprException, to_source

logger = logging.getLogger(__name__)

_UNARY = {
    "neg": np.negative,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
}

_BINARY = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
}


class Evaluator:
    """Evaluates expressions at a batch of points, sharing work across roots.

    Every node is computed once per Evaluator; results are arrays with one
    entry per point. Non-finite values are never returned: the offending node
    is reported through DomainEvaluationException.
    """

    def __init__(self, coords, points):
        self.coords = list(coords)
        self.points = validate_points(points, len(self.coords))
        self._cache = {}

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def value(self, root) -> np.ndarray:
        cache = self._cache
        if root in cache:
            return cache[root]
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if node in cache:
                continue
            if expanded or not node.children:
                cache[node] = self._apply(node)
                continue
            stack.append((node, True))
            for child in node.children:
                if child not in cache:
                    stack.append((child, False))
        return cache[root]

    def values(self, roots) -> list:
        return [self.value(root) for root in roots]

    def _apply(self, node) -> np.ndarray:
        kind = node.kind
        if kind == "const":
            return np.full(self.count, float(node.value))
        if kind == "sym":
            if node.value not in self.coords:
                raise ExprException(f"Symbol {node.value!r} is not a chart coordinate {self.coords}")
            return self.points[:, self.coords.index(node.value)]
        arguments = [self._cache[child] for child in node.children]
        with np.errstate(all="ignore"):
            if kind == "log":
                self._check(node, arguments[0] > 0, "log of a non-positive value")
            elif kind == "sqrt":
                self._check(node, arguments[0] >= 0, "sqrt of a negative value")
            elif kind == "div":
                self._check(node, arguments[1] != 0, "division by zero")
            if kind == "pow":
                result = np.power(arguments[0], node.value)
            elif kind in _BINARY:
                result = _BINARY[kind](arguments[0], arguments[1])
            else:
                result = _UNARY[kind](arguments[0])
        self._check(node, np.isfinite(result), "non-finite result")
        return result

    def _check(self, node, valid, reason):
        if np.all(valid):
            return
        index = int(np.argmin(valid))
        raise DomainEvaluationException(node, self.points[index], reason)


def validate_points(points, dimension: int) -> np.ndarray:
    array = np.atleast_2d(np.asarray(points, dtype=float))
    if array.ndim != 2 or array.shape[1] != dimension:
        raise InvalidPointException(f"Points must have {dimension} coordinates, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidPointException("Points must have finite coordinates")
    return array


def evaluate(e, point, coords) -> float:
    """Evaluate e at a single point of the chart with coordinates coords."""
    point = np.asarray(point, dtype=float)
    if point.ndim != 1:
        raise InvalidPointException(f"A point is a flat list of coordinates, got shape {point.shape}")
    return float(Evaluator(coords, point[None, :]).value(e)[0])


def evaluate_many(exprs, points, coords) -> list:
    evaluator = Evaluator(coords, points)
    return evaluator.values(exprs)


class InvalidPointException(ExprException):
    pass


class DomainEvaluationException(ExprException):
    def __init__(self, node, point, reason):
        source = to_source(node)
        if len(source) > 200:
            source = source[:197] + "..."
        super().__init__(f"{reason} at node {node.kind} [{source}] for point {list(map(float, point))}")
        self.node = node
        self.point = point
        self.reason = reason
