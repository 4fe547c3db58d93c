from .jets import Jet, JetException
from .geometry_spec import (
    DegenerateMetricException,
    DimensionException,
    GeometryException,
    GeometrySpec,
    SignatureMismatchException,
    expression_jet,
)
from .curvature import (
    CurvatureBundle,
    InsertionResiduals,
    KappaFields,
    Residual,
    TensorField,
    christoffel,
    conformal_killing_residual,
    covariant_derivative,
    curvature_bundle,
    identity_residuals,
    insertion_residuals,
    kappa_fields,
    killing_residual,
    lower_index,
    move_index,
    raise_index,
)
