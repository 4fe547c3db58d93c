"""Levi-Civita curvature of a symbolic metric, carried as jets at sample points.

Conventions:
    [∇_a, ∇_b] v^c = R_ab^c_d v^d,  Ric_bd = R_ab^a_d,
    P_ab = (Ric_ab - Scal g_ab / (2(n-1))) / (n-2),  J = g^ab P_ab,
    C_abcd = R_abcd - (g∧P)_abcd,  A_abc = ∇_b P_ca - ∇_c P_ba,
so that ∇^c C_abcd = (n-3) A_dab.

Slot codes: 'u'/'d' tensor upper/lower, 'U'/'D' tractor upper/lower.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry_spec import DimensionException, GeometryException, GeometrySpec
from .jets import Jet

logger = logging.getLogger(__name__)

METRIC_ORDER = 4
# metric, Γ, R and P, ∇P: the Cotton tensor consumes three metric derivatives
MIN_BUNDLE_ORDER = 3
_SLOT_LETTERS = "bcdefghijklm"


@dataclass(frozen=True)
class TensorField:
    jet: Jet
    slots: str

    def __post_init__(self):
        if len(self.slots) != len(self.jet.shape):
            raise ValueError(f"Slots {self.slots!r} do not match tensor shape {self.jet.shape}")

    @property
    def components(self) -> np.ndarray:
        return self.jet.value

    @property
    def rank(self) -> int:
        return len(self.slots)

    def max_norm(self) -> float:
        return _max_abs(self.jet.value)

    def __add__(self, other):
        return TensorField(self.jet + other.jet, self.slots)

    def __sub__(self, other):
        return TensorField(self.jet - other.jet, self.slots)

    def scale(self, factor: float):
        return TensorField(self.jet.scale(factor), self.slots)


@dataclass(frozen=True)
class Residual:
    """Max-norm of an identity that should vanish, with the size of the terms it compares."""

    name: str
    value: float
    scale: float = 0.0

    def passes(self, tolerance: float) -> bool:
        return bool(self.value <= tolerance * (1.0 + self.scale))


@dataclass(frozen=True)
class CurvatureBundle:
    spec: GeometrySpec
    points: np.ndarray
    metric: TensorField
    inverse_metric: TensorField
    gamma: TensorField
    riemann: TensorField
    riemann_lower: TensorField
    ricci: TensorField
    scalar: TensorField
    schouten: TensorField
    schouten_trace: TensorField
    weyl: TensorField
    cotton: TensorField

    @property
    def n(self) -> int:
        return self.spec.dimension

    @property
    def batch(self) -> int:
        return self.points.shape[0]

    def at_point(self, index: int = 0) -> dict:
        """Plain nested lists of every curvature object at one sample."""
        fields = {
            "metric": self.metric,
            "christoffel": self.gamma,
            "riemann": self.riemann,
            "ricci": self.ricci,
            "scalar": self.scalar,
            "schouten": self.schouten,
            "schouten_trace": self.schouten_trace,
            "weyl": self.weyl,
            "cotton": self.cotton,
        }
        dump = {"point": self.points[index].tolist()}
        for name, tensor in fields.items():
            dump[name] = tensor.components[index].tolist()
        return dump


@dataclass(frozen=True)
class KappaFields:
    upper: TensorField
    lower: TensorField
    nabla_lower: TensorField  # ∇_a κ_b
    nabla_upper: TensorField  # ∇^a κ^b
    divergence: TensorField


@dataclass(frozen=True)
class InsertionResiduals:
    weyl: Residual  # κ^a C_abcd
    cotton: Residual  # κ^a A_cab
    cotton_first_slot: Residual  # κ^d A_dab
    weyl_gradient: Residual  # C_abcd ∇^c κ^d
    bianchi_chain: Optional[Residual]  # C_abcd ∇^c κ^d + (n-3) κ^d A_dab


def _max_abs(array) -> float:
    array = np.asarray(array)
    return float(np.max(np.abs(array))) if array.size else 0.0


def metric_fields(spec: GeometrySpec, points=None, order: int = METRIC_ORDER):
    if points is None:
        points = spec.sample_points()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    metric = spec.metric_jet(points, order)
    spec.validate_metric(points, metric.value)
    return points, TensorField(metric, "dd"), TensorField(metric.inverse(), "uu")


def christoffel_from(metric: TensorField, inverse_metric: TensorField) -> TensorField:
    dg = metric.jet.partial()  # [c, x, y] = ∂_c g_xy
    lowered = (dg.map_tensor("adb->dab") + dg.map_tensor("bda->dab") - dg).scale(0.5)
    return TensorField(Jet.product("cd,dab->cab", inverse_metric.jet, lowered), "udd")


def christoffel(spec: GeometrySpec, points=None, order: int = METRIC_ORDER) -> TensorField:
    """Γ^c_ab stored with axes [c, a, b]."""
    _, metric, inverse_metric = metric_fields(spec, points, order)
    return christoffel_from(metric, inverse_metric)


def curvature_bundle(spec: GeometrySpec, points=None, order: int = METRIC_ORDER) -> CurvatureBundle:
    n = spec.dimension
    if n < 3:
        raise DimensionException(f"Curvature needs dimension at least 3, got {n}")
    if order < MIN_BUNDLE_ORDER:
        raise GeometryException(
            f"Curvature bundle needs a metric jet of order at least {MIN_BUNDLE_ORDER} for the Cotton tensor, got {order}"
        )
    points, metric, inverse_metric = metric_fields(spec, points, order)
    gamma = christoffel_from(metric, inverse_metric)
    g, g_inv, gam = metric.jet, inverse_metric.jet, gamma.jet

    d_gamma = gam.partial()  # [e, c, a, b] = ∂_e Γ^c_ab
    riemann = (
        d_gamma.map_tensor("acbd->abcd")
        - d_gamma.map_tensor("bcad->abcd")
        + Jet.product("cae,ebd->abcd", gam, gam)
        - Jet.product("cbe,ead->abcd", gam, gam)
    )
    ricci = riemann.map_tensor("abad->bd")
    scalar = Jet.product("bd,bd->", g_inv, ricci)
    schouten = (ricci - Jet.product(",ab->ab", scalar, g).scale(1.0 / (2 * (n - 1)))).scale(1.0 / (n - 2))
    schouten_trace = Jet.product("ab,ab->", g_inv, schouten)
    riemann_lower = Jet.product("ce,abed->abcd", g, riemann)
    g_wedge_p = (
        Jet.product("ac,bd->abcd", g, schouten)
        - Jet.product("bc,ad->abcd", g, schouten)
        + Jet.product("bd,ac->abcd", g, schouten)
        - Jet.product("ad,bc->abcd", g, schouten)
    )
    weyl = riemann_lower - g_wedge_p

    partial_bundle = _Connection(gamma)
    nabla_p = covariant_derivative(TensorField(schouten, "dd"), partial_bundle).jet  # [x, y, z] = ∇_x P_yz
    cotton = nabla_p.map_tensor("bca->abc") - nabla_p.map_tensor("cba->abc")

    logger.debug(f"Curvature of {spec.name} built at {points.shape[0]} points, metric jet order {order}")
    return CurvatureBundle(
        spec=spec,
        points=points,
        metric=metric,
        inverse_metric=inverse_metric,
        gamma=gamma,
        riemann=TensorField(riemann, "ddud"),
        riemann_lower=TensorField(riemann_lower, "dddd"),
        ricci=TensorField(ricci, "dd"),
        scalar=TensorField(scalar, ""),
        schouten=TensorField(schouten, "dd"),
        schouten_trace=TensorField(schouten_trace, ""),
        weyl=TensorField(weyl, "dddd"),
        cotton=TensorField(cotton, "ddd"),
    )


class _Connection:
    """Bare holder so covariant_derivative can run before the bundle exists."""

    def __init__(self, gamma: TensorField):
        self.gamma = gamma


def covariant_derivative(t: TensorField, bundle, tractor_connection: Optional[Jet] = None) -> TensorField:
    """∇_a t with the new lower slot first.

    Tensor slots use Γ; tractor slots use tractor_connection, stored as
    [a, A, B] acting on upper tractor components.
    """
    letters = _SLOT_LETTERS[: t.rank]
    gamma = bundle.gamma.jet
    result = t.jet.partial()
    for i, code in enumerate(t.slots):
        source = letters[:i] + "y" + letters[i + 1 :]
        target = "a" + letters
        slot = letters[i]
        if code == "u":
            result = result + Jet.product(f"{slot}ay,{source}->{target}", gamma, t.jet)
        elif code == "d":
            result = result - Jet.product(f"ya{slot},{source}->{target}", gamma, t.jet)
        elif code in "UD":
            if tractor_connection is None:
                raise ValueError(f"Slot {i} of {t.slots!r} is a tractor slot but no tractor connection was given")
            if code == "U":
                result = result + Jet.product(f"a{slot}y,{source}->{target}", tractor_connection, t.jet)
            else:
                result = result - Jet.product(f"ay{slot},{source}->{target}", tractor_connection, t.jet)
        else:
            raise ValueError(f"Unknown slot code {code!r} in {t.slots!r}")
    return TensorField(result, "d" + t.slots)


def move_index(t: TensorField, position: int, matrix: Jet, new_code: str) -> TensorField:
    """Contract slot `position` with a two-index matrix jet (g, g^-1, h or h^-1)."""
    letters = _SLOT_LETTERS[: t.rank]
    source = letters[:position] + "y" + letters[position + 1 :]
    jet = Jet.product(f"{letters[position]}y,{source}->{letters}", matrix, t.jet)
    return TensorField(jet, t.slots[:position] + new_code + t.slots[position + 1 :])


def raise_index(t: TensorField, position: int, bundle: CurvatureBundle) -> TensorField:
    if t.slots[position] != "d":
        raise ValueError(f"Slot {position} of {t.slots!r} is not a lower tensor slot")
    return move_index(t, position, bundle.inverse_metric.jet, "u")


def lower_index(t: TensorField, position: int, bundle: CurvatureBundle) -> TensorField:
    if t.slots[position] != "u":
        raise ValueError(f"Slot {position} of {t.slots!r} is not an upper tensor slot")
    return move_index(t, position, bundle.metric.jet, "d")


def kappa_fields(spec: GeometrySpec, bundle: CurvatureBundle) -> KappaFields:
    order = bundle.metric.jet.order
    upper = spec.kappa_jet(bundle.points, order)
    lower = Jet.product("ab,b->a", bundle.metric.jet, upper)
    nabla_lower = covariant_derivative(TensorField(lower, "d"), bundle)
    g_inv = bundle.inverse_metric.jet
    mixed = Jet.product("ce,ef->cf", g_inv, nabla_lower.jet)
    nabla_upper = Jet.product("df,cf->cd", g_inv, mixed)
    divergence = Jet.product("ab,ab->", g_inv, nabla_lower.jet)
    return KappaFields(
        upper=TensorField(upper, "u"),
        lower=TensorField(lower, "d"),
        nabla_lower=nabla_lower,
        nabla_upper=TensorField(nabla_upper, "uu"),
        divergence=TensorField(divergence, ""),
    )


def conformal_killing_residual(spec: GeometrySpec, bundle: CurvatureBundle, kappa: KappaFields = None) -> Residual:
    """Trace-free symmetric part of ∇_a κ_b."""
    kappa = kappa if kappa is not None else kappa_fields(spec, bundle)
    nabla = kappa.nabla_lower.jet.value
    symmetric = 0.5 * (nabla + np.swapaxes(nabla, 1, 2))
    trace_part = kappa.divergence.components[:, None, None] * bundle.metric.components / spec.dimension
    return Residual("conformal_killing", _max_abs(symmetric - trace_part), _max_abs(nabla))


def killing_residual(spec: GeometrySpec, bundle: CurvatureBundle, kappa: KappaFields = None) -> Residual:
    kappa = kappa if kappa is not None else kappa_fields(spec, bundle)
    nabla = kappa.nabla_lower.jet.value
    return Residual("killing", _max_abs(nabla + np.swapaxes(nabla, 1, 2)), _max_abs(nabla))


def insertion_residuals(spec: GeometrySpec, bundle: CurvatureBundle, kappa: KappaFields = None) -> InsertionResiduals:
    kappa = kappa if kappa is not None else kappa_fields(spec, bundle)
    k = kappa.upper.components
    weyl = bundle.weyl.components
    cotton = bundle.cotton.components
    k_size = _max_abs(k)

    weyl_insert = np.einsum("za,zabcd->zbcd", k, weyl)
    cotton_insert = np.einsum("za,zcab->zcb", k, cotton)
    cotton_first = np.einsum("zd,zdab->zab", k, cotton)
    weyl_gradient = np.einsum("zabcd,zcd->zab", weyl, kappa.nabla_upper.components)

    n = spec.dimension
    chain = None
    if n >= 4:
        chain_value = weyl_gradient + (n - 3) * cotton_first
        chain = Residual(
            "bianchi_chain", _max_abs(chain_value), max(_max_abs(weyl_gradient), (n - 3) * _max_abs(cotton_first))
        )
    return InsertionResiduals(
        weyl=Residual("weyl_insertion", _max_abs(weyl_insert), _max_abs(weyl) * k_size),
        cotton=Residual("cotton_insertion", _max_abs(cotton_insert), _max_abs(cotton) * k_size),
        cotton_first_slot=Residual("cotton_first_slot", _max_abs(cotton_first), _max_abs(cotton) * k_size),
        weyl_gradient=Residual(
            "weyl_gradient", _max_abs(weyl_gradient), _max_abs(weyl) * _max_abs(kappa.nabla_upper.components)
        ),
        bianchi_chain=chain,
    )


def identity_residuals(bundle: CurvatureBundle) -> dict:
    """Pointwise identities every Levi-Civita curvature satisfies."""
    n = bundle.n
    residuals = {}

    nabla_g = covariant_derivative(bundle.metric, bundle).components
    residuals["metricity"] = Residual("metricity", _max_abs(nabla_g), _max_abs(bundle.metric.components))

    riemann = bundle.riemann.components
    residuals["riemann_antisymmetry"] = Residual(
        "riemann_antisymmetry", _max_abs(riemann + np.swapaxes(riemann, 1, 2)), _max_abs(riemann)
    )

    lower = bundle.riemann_lower.jet
    cyclic = lower + lower.map_tensor("bcad->abcd") + lower.map_tensor("cabd->abcd")
    residuals["first_bianchi"] = Residual("first_bianchi", _max_abs(cyclic.value), _max_abs(lower.value))

    pair = lower - lower.map_tensor("cdab->abcd")
    residuals["pair_symmetry"] = Residual("pair_symmetry", _max_abs(pair.value), _max_abs(lower.value))

    weyl = bundle.weyl.components
    g_inv = bundle.inverse_metric.components
    traces = [
        np.einsum("zac,zabcd->zbd", g_inv, weyl),
        np.einsum("zad,zabcd->zbc", g_inv, weyl),
        np.einsum("zbc,zabcd->zad", g_inv, weyl),
        np.einsum("zbd,zabcd->zac", g_inv, weyl),
    ]
    residuals["weyl_trace_free"] = Residual(
        "weyl_trace_free", max(_max_abs(trace) for trace in traces), _max_abs(weyl) * _max_abs(g_inv)
    )

    cotton = bundle.cotton.jet
    alternation = cotton + cotton.map_tensor("bca->abc") + cotton.map_tensor("cab->abc")
    residuals["cotton_alternation"] = Residual(
        "cotton_alternation", _max_abs(alternation.value), _max_abs(cotton.value)
    )

    if n >= 4:
        nabla_weyl = covariant_derivative(bundle.weyl, bundle).jet  # [e, a, b, c, d]
        divergence = Jet.product("ec,eabcd->abd", bundle.inverse_metric.jet, nabla_weyl)
        expected = cotton.map_tensor("dab->abd").scale(n - 3)
        residuals["weyl_divergence"] = Residual(
            "weyl_divergence",
            _max_abs((divergence - expected).value),
            max(_max_abs(divergence.value), _max_abs(expected.value)),
        )
    return residuals
