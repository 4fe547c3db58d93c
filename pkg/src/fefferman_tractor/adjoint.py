"""Adjoint tractor built from a vector field κ, and the quantities it carries.

In the splitting of the chosen metric

    K_B = Z_B^a κ_a - (1/n) X_B ∇_a κ^a
    s_AB = Y_A K_B + Z_A^a ∇_a K_B - (1/n) X_A (∇^a ∇_a + J) K_B

with lower tractor components ordered (ρ, μ_a, σ) along slots (X, Z, Y).
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geocalc import (
    CurvatureBundle,
    GeometrySpec,
    Jet,
    KappaFields,
    Residual,
    TensorField,
    covariant_derivative,
    kappa_fields,
)
from .tractor import TractorFrame, tractor_connection, tractor_curvature_formula

logger = logging.getLogger(__name__)

KERNEL_CUTOFF = 1e-8


def _max_abs(array) -> float:
    array = np.asarray(array)
    return float(np.max(np.abs(array))) if array.size else 0.0


@dataclass(frozen=True)
class AdjointSection:
    kappa: KappaFields
    K: TensorField  # K_B
    nabla_K: TensorField  # ∇_a K_B
    s: TensorField  # s_AB
    s_mixed: np.ndarray  # s^A_B at each sample
    div_kappa: TensorField
    parallel_residual: Residual
    lambda_samples: np.ndarray

    @property
    def rank(self) -> int:
        return self.s.components.shape[-1]


@dataclass(frozen=True)
class EllField:
    ell: TensorField  # ℓ_b
    second_derivative: TensorField  # ∇_d ∇_a κ_b


@dataclass(frozen=True)
class SquareReport:
    lambda_samples: np.ndarray  # tr(s∘s) / (n+2)
    tracefree_residual: Residual
    kernel_dims: tuple
    x_s_s_x: Residual  # X^A s_A^C s_C^B X_B + κ^a κ_a
    k_contraction: Residual  # K^B s_BC + (1/n) K_C ∇_b κ^b - κ^a ∇_a K_C
    k_lambda_samples: np.ndarray  # K^B s_BC Y^C

    @property
    def lambda_est(self) -> float:
        return float(np.mean(self.lambda_samples))


@dataclass(frozen=True)
class OmegaContraction:
    value: Residual  # Ω_abAB s^AB
    reconstruction: np.ndarray  # -2κ^c A_cab + C_abcd ∇^c κ^d
    difference: Residual


@dataclass(frozen=True)
class PreferredScaleReport:
    omega_gradient: Residual  # Ω_ab^A_B ∇^a κ^b
    second_derivative: Residual  # ∇_d∇_aκ_b + 2P_d[a κ_b] + 2g_d[a ℓ_b]
    diagnostic_only: bool
    ell: EllField


def tractor_k(kappa: KappaFields, n: int) -> Jet:
    divergence = kappa.divergence.jet.expand(0).scale(-1.0 / n)
    lower = kappa.lower.jet
    zero = Jet.zeros((1,), lower.batch, n, lower.order)
    return Jet.concatenate([divergence, lower, zero], axis=0)


def splitting(spec: GeometrySpec, bundle: CurvatureBundle, frame: TractorFrame, kappa: KappaFields = None) -> AdjointSection:
    n = spec.dimension
    kappa = kappa if kappa is not None else kappa_fields(spec, bundle)
    K = TensorField(tractor_k(kappa, n), "D")
    nabla_K = tractor_connection(K, frame)  # [a, B]
    nabla_nabla_K = tractor_connection(nabla_K, frame)  # [a, b, B]
    laplacian_K = Jet.product("ab,abc->c", bundle.inverse_metric.jet, nabla_nabla_K.jet)
    trace_K = Jet.product(",c->c", bundle.schouten_trace.jet, K.jet)
    first_row = (laplacian_K + trace_K).scale(-1.0 / n)
    s_jet = Jet.concatenate([first_row.expand(0), nabla_K.jet, K.jet.expand(0)], axis=0)
    s = TensorField(s_jet, "DD")

    nabla_s = tractor_connection(s, frame).components
    parallel = Residual("parallel", _max_abs(nabla_s), _max_abs(s.components))
    s_mixed = np.einsum("zAC,zCB->zAB", frame.h_inverse.value, s.components)
    lambda_samples = sparling_scalar(spec, bundle, kappa)
    logger.debug(f"Adjoint tractor of {spec.name}: parallel residual {parallel.value:.3e}")
    return AdjointSection(
        kappa=kappa,
        K=K,
        nabla_K=nabla_K,
        s=s,
        s_mixed=s_mixed,
        div_kappa=kappa.divergence,
        parallel_residual=parallel,
        lambda_samples=lambda_samples,
    )


def parallel_residual(sec: AdjointSection, frame: TractorFrame) -> float:
    return sec.parallel_residual.value


def section_residuals(sec: AdjointSection, frame: TractorFrame) -> dict:
    """X^A s_AB = K_B and Π(s) = κ for any κ; s_AB is skew only for conformal Killing κ."""
    n = frame.n
    s = sec.s.components
    K = sec.K.components
    size = _max_abs(s)
    x_s = np.einsum("A,zAB->zB", frame.x_upper(), s)
    reconstruction = x_s[:, 1 : n + 1] - sec.kappa.lower.components
    return {
        "s_skew": Residual("s_skew", _max_abs(s + np.swapaxes(s, 1, 2)), size),
        "x_s_is_k": Residual("x_s_is_k", _max_abs(x_s - K), _max_abs(K)),
        "reconstruction": Residual("reconstruction", _max_abs(reconstruction), _max_abs(sec.kappa.lower.components)),
    }


def omega_contract_s(sec: AdjointSection, frame: TractorFrame, omega: TensorField = None) -> OmegaContraction:
    bundle = frame.bundle
    omega = omega if omega is not None else tractor_curvature_formula(frame)
    h_inv = frame.h_inverse.value
    s_upper = np.einsum("zAC,zBD,zCD->zAB", h_inv, h_inv, sec.s.components)
    contraction = np.einsum("zabAB,zAB->zab", omega.components, s_upper)

    kappa_up = sec.kappa.upper.components
    cotton_part = -2.0 * np.einsum("zc,zcab->zab", kappa_up, bundle.cotton.components)
    weyl_part = np.einsum("zabcd,zcd->zab", bundle.weyl.components, sec.kappa.nabla_upper.components)
    reconstruction = cotton_part + weyl_part
    scale = _max_abs(omega.components) * _max_abs(s_upper)
    return OmegaContraction(
        value=Residual("omega_s", _max_abs(contraction), scale),
        reconstruction=reconstruction,
        difference=Residual(
            "omega_s_identity",
            _max_abs(contraction - reconstruction),
            max(scale, _max_abs(cotton_part), _max_abs(weyl_part)),
        ),
    )


def sparling_scalar(spec: GeometrySpec, bundle: CurvatureBundle, kappa: KappaFields = None) -> np.ndarray:
    """(1/n²)(∇_aκ^a)² - κ^a P_ab κ^b - (1/n) κ^a ∇_a ∇_b κ^b at each sample."""
    n = spec.dimension
    kappa = kappa if kappa is not None else kappa_fields(spec, bundle)
    divergence = kappa.divergence.jet
    k = kappa.upper.components
    gradient = divergence.partial().value
    schouten = np.einsum("za,zab,zb->z", k, bundle.schouten.components, k)
    return divergence.value ** 2 / n ** 2 - schouten - np.einsum("za,za->z", k, gradient) / n


def s_squared(sec: AdjointSection, frame: TractorFrame) -> SquareReport:
    n = frame.n
    rank = frame.rank
    s_mixed = sec.s_mixed
    square = np.einsum("zAC,zCB->zAB", s_mixed, s_mixed)
    lambda_samples = np.trace(square, axis1=1, axis2=2) / rank
    tracefree = square - lambda_samples[:, None, None] * np.eye(rank)
    kernel_dims = tuple(_kernel_dimension(matrix) for matrix in s_mixed)

    s = sec.s.components
    h_inv = frame.h_inverse.value
    k_lower = sec.K.components
    kappa_up = sec.kappa.upper.components
    kappa_sq = np.einsum("za,za->z", kappa_up, sec.kappa.lower.components)
    x_s_s_x = np.einsum("zC,zCD,zD->z", s[:, rank - 1, :], h_inv, s[:, :, rank - 1])

    k_upper = np.einsum("zAB,zB->zA", h_inv, k_lower)
    k_s = np.einsum("zB,zBC->zC", k_upper, s)
    expected = -k_lower * sec.div_kappa.components[:, None] / n + np.einsum(
        "za,zaC->zC", kappa_up, sec.nabla_K.components
    )
    k_lambda = np.einsum("zC,C->z", k_s, frame.y_upper())
    return SquareReport(
        lambda_samples=lambda_samples,
        tracefree_residual=Residual("s_square_tracefree", _max_abs(tracefree), _max_abs(square)),
        kernel_dims=kernel_dims,
        x_s_s_x=Residual("x_s_s_x", _max_abs(x_s_s_x + kappa_sq), _max_abs(kappa_sq)),
        k_contraction=Residual("k_contraction", _max_abs(k_s - expected), _max_abs(expected)),
        k_lambda_samples=k_lambda,
    )


def _kernel_dimension(matrix: np.ndarray) -> int:
    singular = np.linalg.svd(matrix, compute_uv=False)
    largest = singular[0] if singular.size else 0.0
    if largest == 0:
        return matrix.shape[0]
    return int(np.sum(singular < KERNEL_CUTOFF * largest))


def complex_structure(sec: AdjointSection, lambda_est: float) -> Optional[np.ndarray]:
    """J = s / sqrt(-λ) as endomorphisms, or None when λ is not negative."""
    if not lambda_est < 0:
        return None
    return sec.s_mixed / np.sqrt(-lambda_est)


def complex_trace_check(J: Optional[np.ndarray], frame: TractorFrame, omega: TensorField = None):
    """Max of |Ω_ab^A_A| and |Ω_ab^A_B J^B_A|, or None if J does not exist."""
    if J is None:
        return None
    omega = omega if omega is not None else tractor_curvature_formula(frame)
    mixed = np.einsum("zAC,zabCB->zabAB", frame.h_inverse.value, omega.components)
    trace = np.einsum("zabAA->zab", mixed)
    j_trace = np.einsum("zabAB,zBA->zab", mixed, J)
    size = _max_abs(mixed)
    return (
        Residual("omega_trace", _max_abs(trace), size),
        Residual("omega_j_trace", _max_abs(j_trace), size * _max_abs(J)),
    )


def ell_field(spec: GeometrySpec, bundle: CurvatureBundle, kappa: KappaFields = None) -> EllField:
    """ℓ_b = -(1/(n-1)) (∇^a∇_a κ_b + J κ_b - P_ab κ^a)."""
    n = spec.dimension
    kappa = kappa if kappa is not None else kappa_fields(spec, bundle)
    second = covariant_derivative(kappa.nabla_lower, bundle)  # [d, a, b]
    laplacian = np.einsum("zda,zdab->zb", bundle.inverse_metric.components, second.components)
    trace_term = bundle.schouten_trace.components[:, None] * kappa.lower.components
    schouten_term = np.einsum("zab,za->zb", bundle.schouten.components, kappa.upper.components)
    ell = -(laplacian + trace_term - schouten_term) / (n - 1)
    return EllField(ell=TensorField(Jet([ell], n), "d"), second_derivative=second)


def preferred_scale_identities(
    spec: GeometrySpec, bundle: CurvatureBundle, frame: TractorFrame = None, kappa: KappaFields = None, omega=None
) -> PreferredScaleReport:
    kappa = kappa if kappa is not None else kappa_fields(spec, bundle)
    frame = frame if frame is not None else TractorFrame.build(bundle)
    omega = omega if omega is not None else tractor_curvature_formula(frame)
    mixed = np.einsum("zAC,zabCB->zabAB", frame.h_inverse.value, omega.components)
    gradient = np.einsum("zabAB,zab->zAB", mixed, kappa.nabla_upper.components)

    ell = ell_field(spec, bundle, kappa)
    g = bundle.metric.components
    p = bundle.schouten.components
    k = kappa.lower.components
    l = ell.ell.components
    second = ell.second_derivative.components
    identity = (
        second
        + np.einsum("zda,zb->zdab", p, k)
        - np.einsum("zdb,za->zdab", p, k)
        + np.einsum("zda,zb->zdab", g, l)
        - np.einsum("zdb,za->zdab", g, l)
    )
    return PreferredScaleReport(
        omega_gradient=Residual(
            "omega_gradient", _max_abs(gradient), _max_abs(mixed) * _max_abs(kappa.nabla_upper.components)
        ),
        second_derivative=Residual("ell_identity", _max_abs(identity), max(_max_abs(second), _max_abs(p) * _max_abs(k))),
        diagnostic_only=spec.scale_note != "preferred",
        ell=ell,
    )


def isotropy_residual(kappa: KappaFields) -> Residual:
    norm = np.einsum("za,za->z", kappa.upper.components, kappa.lower.components)
    return Residual("isotropy", _max_abs(norm), _max_abs(kappa.upper.components) * _max_abs(kappa.lower.components))


def killing_lambda(spec: GeometrySpec, bundle: CurvatureBundle, kappa: KappaFields = None) -> tuple:
    """-κ^a P_ab κ^b and -Ric(κ, κ)/(n-2) per sample."""
    kappa = kappa if kappa is not None else kappa_fields(spec, bundle)
    k = kappa.upper.components
    from_schouten = -np.einsum("za,zab,zb->z", k, bundle.schouten.components, k)
    from_ricci = -np.einsum("za,zab,zb->z", k, bundle.ricci.components, k) / (spec.dimension - 2)
    return from_schouten, from_ricci
