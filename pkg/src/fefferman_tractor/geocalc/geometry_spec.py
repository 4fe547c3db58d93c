import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..exprkit import Evaluator, diff_multi
from .jets import Jet

logger = logging.getLogger(__name__)

SCALE_NOTES = ("preferred", "unknown")
DEFAULT_SAMPLES = 20
BOUNDARY_SHRINK = 0.05


@dataclass(frozen=True)
class GeometrySpec:
    """Parsed geometry: a chart, a symbolic metric and a candidate vector field."""

    dimension: int
    signature: tuple
    coords: tuple
    g_lower: tuple  # n rows of n Expr, symmetric
    kappa_upper: tuple
    domain: tuple  # (lo, hi) per coordinate
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    scale_note: str = "unknown"
    omega: Optional[object] = None
    name: str = "geometry"
    pool: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        n = self.dimension
        if n < 3:
            raise DimensionException(f"Dimension must be at least 3, got {n}")
        if len(self.signature) != n or any(sign not in (1, -1) for sign in self.signature):
            raise GeometryException(f"Signature must be {n} entries of +1/-1, got {list(self.signature)}")
        if len(self.coords) != n or len(set(self.coords)) != n:
            raise GeometryException(f"Expected {n} distinct coordinates, got {list(self.coords)}")
        if len(self.g_lower) != n or any(len(row) != n for row in self.g_lower):
            raise GeometryException(f"Metric must be {n}x{n}")
        for i in range(n):
            for j in range(i):
                if self.g_lower[i][j] is not self.g_lower[j][i]:
                    raise GeometryException(f"Metric is not symmetric at ({i}, {j})")
        if len(self.kappa_upper) != n:
            raise GeometryException(f"Vector field needs {n} components, got {len(self.kappa_upper)}")
        if len(self.domain) != n or any(not lo < hi for lo, hi in self.domain):
            raise GeometryException(f"Domain needs {n} intervals with lo < hi, got {list(self.domain)}")
        if self.samples < 1:
            raise GeometryException(f"Sample count must be positive, got {self.samples}")
        if self.scale_note not in SCALE_NOTES:
            raise GeometryException(f"Scale note must be one of {SCALE_NOTES}, got {self.scale_note!r}")

    @property
    def n(self) -> int:
        return self.dimension

    @property
    def signature_counts(self) -> tuple:
        positive = sum(1 for sign in self.signature if sign > 0)
        return positive, self.dimension - positive

    def sample_points(self) -> np.ndarray:
        """Seeded uniform draws strictly inside the domain box, kept 5% away from each face."""
        rng = np.random.default_rng(self.seed)
        lows = np.array([lo for lo, _ in self.domain], dtype=float)
        highs = np.array([hi for _, hi in self.domain], dtype=float)
        margin = BOUNDARY_SHRINK * (highs - lows)
        return rng.uniform(lows + margin, highs - margin, size=(self.samples, self.dimension))

    def domain_center(self) -> np.ndarray:
        return np.array([0.5 * (lo + hi) for lo, hi in self.domain], dtype=float)

    def contains(self, points) -> bool:
        points = np.atleast_2d(points)
        lows = np.array([lo for lo, _ in self.domain])
        highs = np.array([hi for _, hi in self.domain])
        return bool(np.all(points >= lows) and np.all(points <= highs))

    def rescaled(self, omega=None):
        """Same chart and field with metric e^{2ω} g; ω defaults to the spec's own omega."""
        omega = self.omega if omega is None else omega
        if omega is None:
            raise GeometryException(f"Geometry {self.name} declares no omega to rescale with")
        pool = omega.pool
        factor = pool.exp(pool.mul(pool.constant(2), omega))
        n = self.dimension
        rows = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                rows[i][j] = rows[j][i] = pool.mul(factor, self.g_lower[i][j])
        return replace(self, g_lower=tuple(tuple(row) for row in rows))

    def metric_jet(self, points, order: int) -> Jet:
        return expression_jet(self.g_lower, self.coords, points, order)

    def kappa_jet(self, points, order: int) -> Jet:
        return expression_jet(self.kappa_upper, self.coords, points, order)

    def validate_metric(self, points, metric_values=None):
        """Raise if g is degenerate or has the wrong sign pattern at any point."""
        if metric_values is None:
            metric_values = self.metric_jet(points, 0).value
        positive, negative = self.signature_counts
        for point, matrix in zip(np.atleast_2d(points), metric_values):
            eigenvalues = np.linalg.eigvalsh(matrix)
            largest = np.max(np.abs(eigenvalues))
            if largest == 0 or np.min(np.abs(eigenvalues)) <= 1e-12 * largest:
                raise DegenerateMetricException(f"Metric of {self.name} is degenerate at point {point.tolist()}", point)
            found = (int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0)))
            if found != (positive, negative):
                raise SignatureMismatchException(
                    f"Metric of {self.name} has signature {found} at point {point.tolist()}, "
                    f"declared {(positive, negative)}",
                    point,
                )


def expression_jet(exprs, coords, points, order: int) -> Jet:
    """Jet of an array of expressions from their exact symbolic derivatives."""
    components = _as_object_array(exprs)
    shape = components.shape
    coords = list(coords)
    n = len(coords)
    evaluator = Evaluator(coords, points)
    m = evaluator.count
    parts = []
    for k in range(order + 1):
        part = np.zeros((m,) + (n,) * k + shape)
        for combo in itertools.combinations_with_replacement(range(n), k):
            names = [coords[i] for i in combo]
            block = np.zeros((m,) + shape)
            for index in np.ndindex(*shape):
                derivative = diff_multi(components[index], names)
                block[(slice(None),) + index] = evaluator.value(derivative)
            for permutation in set(itertools.permutations(combo)):
                part[(slice(None),) + permutation] = block
        parts.append(part)
    return Jet(parts, n)


def _as_object_array(exprs):
    shape = []
    head = exprs
    while isinstance(head, (list, tuple)):
        shape.append(len(head))
        head = head[0]
    array = np.empty(tuple(shape), dtype=object)
    for index in np.ndindex(*array.shape):
        item = exprs
        for i in index:
            item = item[i]
        array[index] = item
    return array


class GeometryException(Exception):
    pass


class DimensionException(GeometryException):
    pass


class DegenerateMetricException(GeometryException):
    def __init__(self, message, point):
        super().__init__(message)
        self.point = point


class SignatureMismatchException(DegenerateMetricException):
    pass
