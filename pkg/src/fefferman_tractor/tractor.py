"""Standard tractor bundle in the splitting of a fixed metric.

Tractor slot layout: 0 is the Y direction, 1..n the Z^a directions and n+1 the
X direction, so upper components (σ, μ^a, ρ) stand for σY + μ^a Z_a + ρX and
h(V, V) = 2σρ + g(μ, μ). The connection acts on upper components by

    ∇_a σ = ∂_a σ - μ_a
    ∇_a μ^b = ∇_a μ^b + δ_a^b ρ + P_a^b σ
    ∇_a ρ = ∂_a ρ - P_ab μ^b
"""
import logging
from dataclasses import dataclass

import numpy as np

from .geocalc import CurvatureBundle, Jet, Residual, TensorField, covariant_derivative, move_index

logger = logging.getLogger(__name__)

# tractor fields are TensorFields whose slots use the codes 'U' and 'D'
TractorTensorField = TensorField


def _max_abs(array) -> float:
    array = np.asarray(array)
    return float(np.max(np.abs(array))) if array.size else 0.0


def _tractor_metric(metric: Jet, dim: int) -> Jet:
    n = dim
    N = n + 2
    parts = []
    for k, part in enumerate(metric.parts):
        block = np.zeros(part.shape[:-2] + (N, N))
        block[..., 1 : n + 1, 1 : n + 1] = part
        if k == 0:
            block[..., 0, n + 1] = 1.0
            block[..., n + 1, 0] = 1.0
        parts.append(block)
    return Jet(parts, n)


def _connection_matrix(bundle: CurvatureBundle) -> Jet:
    """(Γ^T_a)^A_B with axes [a, A, B]."""
    n = bundle.n
    N = n + 2
    g = bundle.metric.jet
    schouten = bundle.schouten.jet
    schouten_mixed = Jet.product("bc,ac->ab", bundle.inverse_metric.jet, schouten)  # P_a^b
    gamma = bundle.gamma.jet
    order = min(gamma.order, schouten.order)
    parts = []
    for k in range(order + 1):
        block = np.zeros(g.parts[k].shape[:-2] + (n, N, N))
        block[..., :, 0, 1 : n + 1] = -g.parts[k]
        block[..., :, 1 : n + 1, 1 : n + 1] = np.swapaxes(gamma.parts[k], -3, -2)
        block[..., :, 1 : n + 1, 0] = schouten_mixed.parts[k]
        block[..., :, n + 1, 1 : n + 1] = -schouten.parts[k]
        if k == 0:
            block[..., :, 1 : n + 1, n + 1] = np.eye(n)
        parts.append(block)
    return Jet(parts, n)


@dataclass(frozen=True)
class TractorFrame:
    bundle: CurvatureBundle
    h: Jet  # h_AB
    h_inverse: Jet  # h^AB
    connection: Jet

    @classmethod
    def build(cls, bundle: CurvatureBundle):
        n = bundle.n
        frame = cls(
            bundle=bundle,
            h=_tractor_metric(bundle.metric.jet, n),
            h_inverse=_tractor_metric(bundle.inverse_metric.jet, n),
            connection=_connection_matrix(bundle),
        )
        logger.debug(f"Tractor frame of rank {n + 2} built over {bundle.batch} points")
        return frame

    @property
    def n(self) -> int:
        return self.bundle.n

    @property
    def rank(self) -> int:
        return self.bundle.n + 2

    @property
    def batch(self) -> int:
        return self.bundle.batch

    def x_upper(self) -> np.ndarray:
        return np.eye(self.rank)[self.rank - 1]

    def y_upper(self) -> np.ndarray:
        return np.eye(self.rank)[0]

    def z_upper(self) -> np.ndarray:
        """Z^A_a with axes [a, A]."""
        return np.eye(self.rank)[1 : self.n + 1]

    def x_lower(self) -> np.ndarray:
        return np.eye(self.rank)[0]

    def y_lower(self) -> np.ndarray:
        return np.eye(self.rank)[self.rank - 1]

    def z_lower(self) -> np.ndarray:
        """Z_A^a with axes [a, A]."""
        return np.eye(self.rank)[1 : self.n + 1]

    def lower(self, t: TensorField, position: int) -> TensorField:
        if t.slots[position] != "U":
            raise ValueError(f"Slot {position} of {t.slots!r} is not an upper tractor slot")
        return move_index(t, position, self.h, "D")

    def raise_(self, t: TensorField, position: int) -> TensorField:
        if t.slots[position] != "D":
            raise ValueError(f"Slot {position} of {t.slots!r} is not a lower tractor slot")
        return move_index(t, position, self.h_inverse, "U")

    def injector_residuals(self) -> dict:
        """X, Y and Z contracted through h against their expected values."""
        h = self.h.value
        x, y, z = self.x_upper(), self.y_upper(), self.z_upper()
        g_inv = self.bundle.inverse_metric.components
        z_raised = np.einsum("zab,bA->zaA", g_inv, z)  # Z^{A a}
        pairs = {
            "x_x": (np.einsum("A,zAB,B->z", x, h, x), 0.0),
            "y_y": (np.einsum("A,zAB,B->z", y, h, y), 0.0),
            "x_y": (np.einsum("A,zAB,B->z", x, h, y), 1.0),
            "x_z": (np.einsum("A,zAB,zaB->za", x, h, z_raised), 0.0),
            "y_z": (np.einsum("A,zAB,zaB->za", y, h, z_raised), 0.0),
            "z_z": (np.einsum("zaA,zAB,zbB->zab", z_raised, h, z_raised), g_inv),
        }
        residuals = {}
        for name, (value, expected) in pairs.items():
            residuals[f"injector_{name}"] = Residual(f"injector_{name}", _max_abs(value - expected), _max_abs(expected))
        inverse_check = np.einsum("zAB,zBC->zAC", h, self.h_inverse.value) - np.eye(self.rank)
        residuals["h_inverse"] = Residual("h_inverse", _max_abs(inverse_check), _max_abs(h))
        return residuals

    def signature_matches(self) -> bool:
        positive, negative = self.bundle.spec.signature_counts
        for matrix in self.h.value:
            eigenvalues = np.linalg.eigvalsh(matrix)
            if (int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0))) != (positive + 1, negative + 1):
                return False
        return True


def tractor_connection(v: TractorTensorField, frame: TractorFrame) -> TractorTensorField:
    """Coupled Levi-Civita tractor derivative; a new lower tensor slot comes first."""
    return covariant_derivative(v, frame.bundle, frame.connection)


def tractor_curvature_formula(frame: TractorFrame) -> TractorTensorField:
    """Ω_abAB = Z_A^c Z_B^d C_abcd - X_A Z_B^c A_cab + Z_A^c X_B A_cab, axes [a, b, A, B]."""
    n = frame.n
    weyl = frame.bundle.weyl.jet
    cotton = frame.bundle.cotton.jet.map_tensor("cab->abc")  # [a, b, c] = A_cab
    order = min(weyl.order, cotton.order)
    parts = []
    for k in range(order + 1):
        block = np.zeros(weyl.parts[k].shape[:-2] + (frame.rank, frame.rank))
        block[..., 1 : n + 1, 1 : n + 1] = weyl.parts[k]
        block[..., 0, 1 : n + 1] = -cotton.parts[k]
        block[..., 1 : n + 1, 0] = cotton.parts[k]
        parts.append(block)
    return TensorField(Jet(parts, n), "ddDD")


def tractor_curvature_commutator(frame: TractorFrame) -> TractorTensorField:
    """Ω_abAB from [∇_a, ∇_b] acting on each constant basis tractor, lowered with h."""
    rank = frame.rank
    columns = []
    for index in range(rank):
        basis = Jet.constant(np.eye(rank)[index], frame.batch, frame.n, 2)
        twice = tractor_connection(tractor_connection(TensorField(basis, "U"), frame), frame)
        value = twice.components
        columns.append(value - np.swapaxes(value, 1, 2))  # [a, b, A]
    mixed = np.stack(columns, axis=-1)  # Ω_ab^A_B
    lowered = np.einsum("zAC,zabCB->zabAB", frame.h.value, mixed)
    return TensorField(Jet([lowered], frame.n), "ddDD")


def tractor_identity_residuals(frame: TractorFrame, omega: TractorTensorField = None, commutator=None) -> dict:
    omega = omega if omega is not None else tractor_curvature_formula(frame)
    commutator = commutator if commutator is not None else tractor_curvature_commutator(frame)
    rank = frame.rank
    residuals = dict(frame.injector_residuals())

    h_field = TensorField(frame.h, "DD")
    nabla_h = tractor_connection(h_field, frame).components
    residuals["h_compatibility"] = Residual("h_compatibility", _max_abs(nabla_h), _max_abs(frame.h.value))

    values = omega.components
    size = _max_abs(values)
    residuals["omega_skew"] = Residual("omega_skew", _max_abs(values + np.swapaxes(values, 3, 4)), size)
    residuals["omega_two_form"] = Residual("omega_two_form", _max_abs(values + np.swapaxes(values, 1, 2)), size)
    x = frame.x_upper()
    residuals["omega_x"] = Residual("omega_x", _max_abs(np.einsum("A,zabAB->zabB", x, values)), size)
    residuals["omega_x_commutator"] = Residual(
        "omega_x_commutator", _max_abs(np.einsum("A,zabAB->zabB", x, commutator.components)), size
    )
    difference = commutator.components - values
    residuals["formula_commutator"] = Residual(
        "formula_commutator", _max_abs(difference), max(size, _max_abs(commutator.components))
    )
    logger.debug(f"Tractor identities on rank {rank}: max |Ω| = {size:.3e}")
    return residuals
