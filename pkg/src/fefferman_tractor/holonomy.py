"""Numerical conformal holonomy: tractor transport around closed coordinate loops."""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .exprkit import DEFAULT_POOL, Evaluator, diff
from .geocalc import GeometrySpec, curvature_bundle
from .tractor import TractorFrame

logger = logging.getLogger(__name__)

PARAMETER = "t"
DEFAULT_STEPS = 2000
DEFAULT_EPSILON = 0.05
CLOSURE_TOLERANCE = 1e-12
LOG_EIGENVALUE_GUARD = 1e-6
# |H - id| below this is round-off from the RK4 products, not holonomy
DEVIATION_FLOOR = 1e-11
# order 3 keeps the Cotton tensor defined; transport only reads Γ and P
_TRANSPORT_ORDER = 3


@dataclass(frozen=True)
class Segment:
    """Curve piece γ(t), t in [0, 1], given by one expression in t per coordinate."""

    exprs: tuple
    reverse: bool = False

    def reversed(self):
        return Segment(self.exprs, not self.reverse)

    def sample(self, parameters: np.ndarray):
        """Positions and velocities at the given parameter values."""
        source = 1.0 - parameters if self.reverse else parameters
        evaluator = Evaluator([PARAMETER], source[:, None])
        positions = np.stack([evaluator.value(e) for e in self.exprs], axis=1)
        velocities = np.stack([evaluator.value(diff(e, PARAMETER)) for e in self.exprs], axis=1)
        if self.reverse:
            velocities = -velocities
        return positions, velocities


@dataclass(frozen=True)
class Loop:
    name: str
    segments: tuple

    def reversed(self):
        return Loop(f"{self.name}^-1", tuple(segment.reversed() for segment in reversed(self.segments)))

    def compose(self, other):
        return Loop(f"{self.name}*{other.name}", self.segments + other.segments)

    def endpoints(self):
        start, _ = self.segments[0].sample(np.array([0.0]))
        end, _ = self.segments[-1].sample(np.array([1.0]))
        return start[0], end[0]


@dataclass(frozen=True)
class LoopSpec:
    base_point: np.ndarray
    loops: tuple
    steps: int = DEFAULT_STEPS

    def __post_init__(self):
        if self.steps < 1:
            raise StepUnderflowException(f"Integrator needs at least one step, got {self.steps}")
        for loop in self.loops:
            start, end = loop.endpoints()
            if np.max(np.abs(start - end)) > CLOSURE_TOLERANCE:
                raise HolonomyException(f"Loop {loop.name} is not closed: starts at {start.tolist()}, ends at {end.tolist()}")
            if np.max(np.abs(start - self.base_point)) > CLOSURE_TOLERANCE:
                raise HolonomyException(f"Loop {loop.name} does not start at the base point")


@dataclass(frozen=True)
class HolonomyElement:
    loop: str
    H: np.ndarray


@dataclass
class ElementReport:
    loop: str
    orthogonality: float
    commutator: Optional[float] = None
    det_deviation: Optional[float] = None
    log_skipped: bool = False


@dataclass
class HolonomyReport:
    elements: list = field(default_factory=list)
    algebra_dimension: int = 0
    unitary_checked: bool = False

    @property
    def max_orthogonality(self) -> float:
        return max((element.orthogonality for element in self.elements), default=0.0)

    @property
    def max_commutator(self) -> Optional[float]:
        values = [element.commutator for element in self.elements if element.commutator is not None]
        return max(values) if values else None

    @property
    def max_det_deviation(self) -> Optional[float]:
        values = [element.det_deviation for element in self.elements if element.det_deviation is not None]
        return max(values) if values else None


def rectangle(base_point, axes, sides, pool=None, name=None) -> Loop:
    """Coordinate rectangle from base_point: +sides[0] along axes[0], +sides[1] along axes[1], then back."""
    pool = pool if pool is not None else DEFAULT_POOL
    t = pool.symbol(PARAMETER)
    first, second = axes
    corners = [np.array(base_point, dtype=float)]
    for axis, side in ((first, sides[0]), (second, sides[1]), (first, -sides[0]), (second, -sides[1])):
        corner = corners[-1].copy()
        corner[axis] += side
        corners.append(corner)
    corners[-1] = corners[0]
    segments = []
    for start, end in zip(corners[:-1], corners[1:]):
        exprs = []
        for coordinate, (a, b) in enumerate(zip(start, end)):
            if a == b:
                exprs.append(pool.constant(float(a)))
            else:
                exprs.append(pool.add(pool.constant(float(a)), pool.mul(pool.constant(float(b - a)), t)))
        segments.append(Segment(tuple(exprs)))
    return Loop(name or f"rect[{first},{second}]", tuple(segments))


def default_loops(
    spec: GeometrySpec,
    epsilon: float = DEFAULT_EPSILON,
    loops_per_plane: int = 1,
    steps: int = DEFAULT_STEPS,
    base_point=None,
) -> LoopSpec:
    """Rectangles in every coordinate plane with sides epsilon·width, scaled by (j+1)/k, and their composition."""
    base = spec.domain_center() if base_point is None else np.asarray(base_point, dtype=float)
    widths = np.array([hi - lo for lo, hi in spec.domain], dtype=float)
    pool = spec.pool if spec.pool is not None else DEFAULT_POOL
    n = spec.dimension
    loops = []
    for i in range(n):
        for j in range(i + 1, n):
            for step in range(loops_per_plane):
                factor = epsilon * (step + 1) / loops_per_plane
                sides = (factor * widths[i], factor * widths[j])
                loops.append(rectangle(base, (i, j), sides, pool, f"rect[{i},{j}]x{step + 1}"))
    if len(loops) > 1:
        composed = loops[0]
        for loop in loops[1:]:
            composed = composed.compose(loop)
        loops.append(Loop("composed", composed.segments))
    return LoopSpec(base_point=base, loops=tuple(loops), steps=steps)


def _connection_along(spec: GeometrySpec, positions: np.ndarray) -> np.ndarray:
    if not spec.contains(positions):
        lows = np.array([lo for lo, _ in spec.domain])
        highs = np.array([hi for _, hi in spec.domain])
        outside = positions[np.argmax(np.any((positions < lows) | (positions > highs), axis=1))]
        raise LoopOutsideDomainException(f"Loop leaves the domain of {spec.name} at {outside.tolist()}")
    bundle = curvature_bundle(spec, positions, order=_TRANSPORT_ORDER)
    return TractorFrame.build(bundle).connection.value  # [z, a, A, B]


def transport(loop: Loop, spec: GeometrySpec, steps: int = DEFAULT_STEPS) -> HolonomyElement:
    """RK4 solution of dH/dt = -Γ^T(γ'(t)) H around the loop, starting from the identity."""
    rank = spec.dimension + 2
    per_segment = max(1, steps // len(loop.segments))
    h = 1.0 / per_segment
    if h == 0.0 or 1.0 + h == 1.0:
        raise StepUnderflowException(f"Step size underflows with {per_segment} steps per segment")
    grid = np.linspace(0.0, 1.0, 2 * per_segment + 1)
    H = np.eye(rank)
    for segment in loop.segments:
        positions, velocities = segment.sample(grid)
        connection = _connection_along(spec, positions)
        generator = np.einsum("za,zaAB->zAB", velocities, connection)
        for i in range(per_segment):
            start, middle, end = generator[2 * i], generator[2 * i + 1], generator[2 * i + 2]
            k1 = -start @ H
            k2 = -middle @ (H + 0.5 * h * k1)
            k3 = -middle @ (H + 0.5 * h * k2)
            k4 = -end @ (H + h * k3)
            H = H + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return HolonomyElement(loop.name, H)


def transport_all(loop_spec: LoopSpec, spec: GeometrySpec) -> list:
    return [transport(loop, spec, loop_spec.steps) for loop in loop_spec.loops]


def complex_determinant(H: np.ndarray, J: np.ndarray) -> complex:
    """det of H as a complex-linear map on the +i eigenspace of J."""
    eigenvalues, eigenvectors = np.linalg.eig(J)
    basis = eigenvectors[:, eigenvalues.imag > 0]
    if basis.shape[1] * 2 != J.shape[0]:
        raise HolonomyException(f"J has {basis.shape[1]} eigenvalues +i, expected {J.shape[0] // 2}")
    restricted, *_ = np.linalg.lstsq(basis, H @ basis, rcond=None)
    return complex(np.linalg.det(restricted))


def holonomy_report(elements, h: np.ndarray, J: Optional[np.ndarray] = None, tolerance: float = 1e-6) -> HolonomyReport:
    report = HolonomyReport(unitary_checked=J is not None)
    logs = []
    for element in elements:
        H = element.H
        entry = ElementReport(element.loop, float(np.max(np.abs(H.T @ h @ H - h))))
        if J is not None:
            entry.commutator = float(np.max(np.abs(H @ J - J @ H)))
            entry.det_deviation = float(abs(complex_determinant(H, J) - 1.0))
        eigenvalues = np.linalg.eigvals(H)
        if np.any(np.abs(eigenvalues + 1.0) < LOG_EIGENVALUE_GUARD):
            logger.warning(f"Holonomy of loop {element.loop} has an eigenvalue near -1; matrix log skipped")
            entry.log_skipped = True
        else:
            logs.append(np.real(scipy.linalg.logm(H)).ravel())
        report.elements.append(entry)
    if logs:
        singular = np.linalg.svd(np.array(logs), compute_uv=False)
        report.algebra_dimension = int(np.sum(singular > tolerance))
    return report


def epsilon_scaling(spec: GeometrySpec, axes, epsilon: float = DEFAULT_EPSILON, steps: int = DEFAULT_STEPS, base_point=None) -> float:
    """|H(ε) - id| / |H(ε/2) - id| for the rectangle in one coordinate plane."""
    base = spec.domain_center() if base_point is None else np.asarray(base_point, dtype=float)
    widths = np.array([hi - lo for lo, hi in spec.domain], dtype=float)
    pool = spec.pool if spec.pool is not None else DEFAULT_POOL
    deviations = []
    for factor in (epsilon, epsilon / 2):
        loop = rectangle(base, axes, (factor * widths[axes[0]], factor * widths[axes[1]]), pool)
        H = transport(loop, spec, steps).H
        deviations.append(float(np.max(np.abs(H - np.eye(H.shape[0])))))
    if deviations[1] <= DEVIATION_FLOOR:
        return float("nan")
    return deviations[0] / deviations[1]


class HolonomyException(Exception):
    pass


class LoopOutsideDomainException(HolonomyException):
    pass


class StepUnderflowException(HolonomyException):
    pass
