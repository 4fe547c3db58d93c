from .geometry_file import GeometryFile, InvalidGeometryFileException, RescaledGeometryFile
from .report import CheckRecord, CheckReport, LambdaRecord, encode_json
from .checker import (
    CheckOptions,
    InternalConsistencyException,
    Tolerances,
    corpus_selftest,
    decide_verdict,
    run_check,
    run_conformal_invariance,
)
