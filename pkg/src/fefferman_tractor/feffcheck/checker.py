import functools
import logging
import os
import time
from dataclasses import dataclass, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Optional

import numpy as np
import polars as pl

from .. import __version__
from ..adjoint import (
    complex_structure,
    complex_trace_check,
    isotropy_residual,
    killing_lambda,
    omega_contract_s,
    preferred_scale_identities,
    s_squared,
    section_residuals,
    splitting,
    sparling_scalar,
)
from ..geocalc import (
    Residual,
    conformal_killing_residual,
    curvature_bundle,
    identity_residuals,
    insertion_residuals,
    kappa_fields,
    killing_residual,
)
from ..holonomy import default_loops, holonomy_report, transport_all
from ..tractor import TractorFrame, tractor_curvature_commutator, tractor_curvature_formula, tractor_identity_residuals
from .geometry_file import GeometryFile, RescaledGeometryFile
from .report import (
    CONSEQUENCE,
    DIAGNOSTIC,
    FEFFERMAN_LOCAL,
    HYPOTHESES_FAIL,
    HYPOTHESIS,
    IDENTITY,
    INCONCLUSIVE_SIGN,
    ODD_DIM_NILPOTENT,
    CheckRecord,
    CheckReport,
    LambdaRecord,
)

logger = logging.getLogger(__name__)

DEFAULT_CORPUS = Path(__file__).resolve().parent.parent / "asset_files" / "corpus"

ANCHORS = {
    "isotropy": "isotropic field: g_ab κ^a κ^b = 0",
    "conformal_killing": "conformal Killing equation: ∇_(a κ_b) - (1/n) ∇_c κ^c g_ab = 0",
    "weyl_insertion": "Weyl insertion: κ^a C_abcd = 0",
    "cotton_insertion": "Cotton insertion: κ^a A_cab = 0",
    "parallel": "adjoint tractor parallel: ∇_a s_BC = 0",
    "metricity": "metricity: ∇_a g_bc = 0",
    "riemann_antisymmetry": "Riemann skew in the form indices: R_ab^c_d = -R_ba^c_d",
    "first_bianchi": "first Bianchi identity: R_[abc]d = 0",
    "pair_symmetry": "pair symmetry: R_abcd = R_cdab",
    "weyl_trace_free": "Weyl tensor trace-free: g^ac C_abcd = 0",
    "cotton_alternation": "total alternation of the Cotton tensor vanishes: A_[abc] = 0",
    "weyl_divergence": "Bianchi consequence: ∇^c C_abcd = (n-3) A_dab",
    "injector_x_x": "injectors: X^A X_A = 0",
    "injector_y_y": "injectors: Y^A Y_A = 0",
    "injector_x_y": "injectors: X^A Y_A = 1",
    "injector_x_z": "injectors: X^A Z_A^a = 0",
    "injector_y_z": "injectors: Y^A Z_A^a = 0",
    "injector_z_z": "injectors: Z^Aa Z_A^b = g^ab",
    "h_inverse": "tractor metric inverse: h_AB h^BC = δ_A^C",
    "h_compatibility": "tractor connection preserves h: ∇_a h_BC = 0",
    "omega_skew": "tractor curvature skew in tractor indices: Ω_abAB = -Ω_abBA",
    "omega_two_form": "tractor curvature is a two-form: Ω_abAB = -Ω_baAB",
    "omega_x": "Ω_abAB X^A = 0",
    "omega_x_commutator": "Ω_abAB X^A = 0 for the commutator curvature",
    "formula_commutator": "Ω_abAB = Z_A^c Z_B^d C_abcd - 2 X_[A Z_B]^c A_cab equals [∇_a, ∇_b]",
    "s_skew": "adjoint tractor is skew: s_AB = -s_BA",
    "x_s_is_k": "X^A s_AB = K_B",
    "reconstruction": "projecting s recovers κ: Z-slot of X^A s_AB is κ_b",
    "omega_s_identity": "Ω_abAB s^AB = -2 κ^c A_cab + C_abcd ∇^c κ^d",
    "omega_s": "Ω_ab^A_B s^B_A = 0",
    "x_s_s_x": "X^A s_A^C s_C^B X_B = -κ^a κ_a",
    "k_contraction": "K^B s_BC = -(1/n) K_C ∇_b κ^b + κ^a ∇_a K_C",
    "lambda_k_contraction": "K^B s_BC Y^C equals the Sparling scalar",
    "lambda_trace": "s∘s = λ id: tr(s∘s)/(n+2) equals the Sparling scalar",
    "s_square_tracefree": "s∘s = λ id",
    "bianchi_chain": "C_abcd ∇^c κ^d = -(n-3) κ^d A_dab",
    "killing_lambda": "Killing field: λ = -κ^a P_ab κ^b",
    "killing_ricci": "isotropic Killing field: λ = -Ric(κ, κ)/(n-2)",
    "complex_structure_square": "normalized adjoint tractor squares to -id: J∘J = -id",
    "omega_trace": "complex trace of tractor curvature, real part: Ω_ab^A_A = 0",
    "omega_j_trace": "complex trace of tractor curvature, imaginary part: Ω_ab^A_B J^B_A = 0",
    "omega_gradient": "preferred scale: Ω_ab^A_B ∇^a κ^b = 0",
    "ell_identity": "preferred scale: ∇_d∇_aκ_b + 2P_d[a κ_b] + 2g_d[a ℓ_b] = 0",
    "odd_lambda": "odd dimension: λ = 0",
    "odd_nilpotent": "odd dimension: s∘s = 0",
    "odd_kernel": "odd dimension: the kernel of s is nontrivial at every point",
    "holonomy_orthogonality": "holonomy preserves h: H^T h H = h",
    "holonomy_commutator": "holonomy commutes with J: HJ = JH",
    "holonomy_det": "holonomy is special unitary: det_C H = 1",
    "lambda_rescaled": "λ is independent of the metric in the conformal class",
}


@dataclass(frozen=True)
class Tolerances:
    alg: float = 1e-10
    identity: float = 1e-8
    ode: float = 1e-6

    def base(self, kind: str) -> float:
        return getattr(self, kind)

    def threshold(self, kind: str, scale: float = 0.0) -> float:
        return self.base(kind) * (1.0 + scale)


@dataclass(frozen=True)
class CheckOptions:
    tolerances: Tolerances = Tolerances()
    samples: Optional[int] = None
    seed: Optional[int] = None
    holonomy: bool = False
    rescale: bool = False

    def apply(self, spec):
        changes = {}
        if self.samples is not None:
            changes["samples"] = self.samples
        if self.seed is not None:
            changes["seed"] = self.seed
        return replace(spec, **changes) if changes else spec


class _Recorder:
    def __init__(self, tolerances: Tolerances):
        self.tolerances = tolerances
        self.records = []

    def add(self, residual: Residual, kind: str, role: str, name: str = None):
        name = name or residual.name
        threshold = self.tolerances.threshold(kind, residual.scale)
        record = CheckRecord(
            name=name,
            residual=float(residual.value),
            threshold=threshold,
            passed=bool(residual.value <= threshold),
            anchor=ANCHORS[name],
            role=role,
        )
        self.records.append(record)
        logger.debug(record.line())
        return record

    def compare(self, name: str, left, right, kind: str, role: str):
        left = np.asarray(left, dtype=float)
        right = np.asarray(right, dtype=float)
        value = float(np.max(np.abs(left - right))) if left.size else 0.0
        scale = float(max(np.max(np.abs(left)), np.max(np.abs(right)))) if left.size else 0.0
        return self.add(Residual(name, value, scale), kind, role)


def run_check(geometry_file: GeometryFile, options: CheckOptions = None) -> CheckReport:
    """Full pipeline for one geometry: curvature, tractor, adjoint tractor, optionally holonomy, verdict."""
    options = options or CheckOptions()
    tolerances = options.tolerances
    spec = options.apply(geometry_file.spec)
    n = spec.dimension
    started = time.perf_counter()

    bundle = curvature_bundle(spec)
    kappa = kappa_fields(spec, bundle)
    frame = TractorFrame.build(bundle)
    omega = tractor_curvature_formula(frame)
    commutator = tractor_curvature_commutator(frame)
    section = splitting(spec, bundle, frame, kappa)
    logger.info(f"{spec.name}: curvature, tractor and adjoint data built at {bundle.batch} points")

    recorder = _Recorder(tolerances)
    recorder.add(isotropy_residual(kappa), "identity", HYPOTHESIS)
    recorder.add(conformal_killing_residual(spec, bundle, kappa), "identity", HYPOTHESIS)
    insertions = insertion_residuals(spec, bundle, kappa)
    recorder.add(insertions.weyl, "identity", HYPOTHESIS)
    recorder.add(insertions.cotton, "identity", HYPOTHESIS)
    recorder.add(section.parallel_residual, "identity", HYPOTHESIS)

    for name, residual in identity_residuals(bundle).items():
        recorder.add(residual, "identity" if name == "weyl_divergence" else "alg", IDENTITY, name)
    for name, residual in tractor_identity_residuals(frame, omega, commutator).items():
        exact = name not in ("formula_commutator", "omega_x_commutator")
        recorder.add(residual, "alg" if exact else "identity", IDENTITY, name)
    for name, residual in section_residuals(section, frame).items():
        if name == "s_skew":
            # skew exactly when κ is conformal Killing
            recorder.add(residual, "identity", CONSEQUENCE, name)
        else:
            recorder.add(residual, "alg", IDENTITY, name)

    contraction = omega_contract_s(section, frame, omega)
    recorder.add(contraction.difference, "identity", IDENTITY)
    square = s_squared(section, frame)
    recorder.add(square.x_s_s_x, "identity", IDENTITY)
    recorder.add(square.k_contraction, "identity", IDENTITY)
    lambda_samples = section.lambda_samples
    recorder.compare("lambda_k_contraction", square.k_lambda_samples, lambda_samples, "identity", IDENTITY)

    recorder.add(contraction.value, "identity", CONSEQUENCE)
    recorder.compare("lambda_trace", square.lambda_samples, lambda_samples, "identity", CONSEQUENCE)
    recorder.add(square.tracefree_residual, "identity", CONSEQUENCE, "s_square_tracefree")
    if insertions.bianchi_chain is not None:
        recorder.add(insertions.bianchi_chain, "identity", CONSEQUENCE)

    isotropic = recorder.records[0].passed
    killing = killing_residual(spec, bundle, kappa)
    if killing.passes(tolerances.identity):
        from_schouten, from_ricci = killing_lambda(spec, bundle, kappa)
        recorder.compare("killing_lambda", lambda_samples, from_schouten, "identity", CONSEQUENCE)
        if isotropic:
            recorder.compare("killing_ricci", lambda_samples, from_ricci, "identity", CONSEQUENCE)

    preferred = preferred_scale_identities(spec, bundle, frame, kappa, omega)
    preferred_role = DIAGNOSTIC if preferred.diagnostic_only else CONSEQUENCE
    recorder.add(preferred.omega_gradient, "identity", preferred_role)
    recorder.add(preferred.second_derivative, "identity", preferred_role)

    hypotheses = all(record.passed for record in recorder.records if record.role == HYPOTHESIS)
    lambda_record = LambdaRecord.from_samples(lambda_samples, 10 * tolerances.identity)
    details = {
        "kernel_dims": list(square.kernel_dims),
        "lambda_trace_mean": square.lambda_est,
        "max_abs_omega": float(np.max(np.abs(omega.components))),
        "max_abs_omega_s_reconstruction": float(np.max(np.abs(contraction.reconstruction))),
        "scale_note": spec.scale_note,
    }

    if n % 2 == 1 and hypotheses:
        lambda_scale = float(np.max(np.abs(lambda_samples)))
        recorder.add(Residual("odd_lambda", lambda_scale, 0.0), "identity", CONSEQUENCE)
        square_size = float(np.max(np.abs(np.einsum("zAC,zCB->zAB", section.s_mixed, section.s_mixed))))
        recorder.add(Residual("odd_nilpotent", square_size, 0.0), "identity", CONSEQUENCE)
        trivial = sum(1 for dim in square.kernel_dims if dim == 0)
        recorder.records.append(
            CheckRecord("odd_kernel", float(trivial), 0.0, trivial == 0, ANCHORS["odd_kernel"], CONSEQUENCE)
        )

    J = None
    if n % 2 == 0 and hypotheses and lambda_record.sign == "negative":
        J = complex_structure(section, lambda_record.mean)
        square_j = np.einsum("zAC,zCB->zAB", J, J) + np.eye(frame.rank)
        recorder.add(Residual("complex_structure_square", float(np.max(np.abs(square_j))), 1.0), "identity", CONSEQUENCE)
        real_part, imaginary_part = complex_trace_check(J, frame, omega)
        recorder.add(real_part, "identity", CONSEQUENCE)
        recorder.add(imaginary_part, "identity", CONSEQUENCE)
    else:
        details["complex_trace"] = "not applicable"

    verdict = decide_verdict(n, hypotheses, lambda_record, tolerances)
    if not hypotheses:
        for record in recorder.records:
            if record.role == CONSEQUENCE:
                record.role = DIAGNOSTIC

    if options.holonomy:
        details["holonomy"] = _holonomy_details(geometry_file, spec, recorder, J is not None, lambda_record, tolerances)

    report = CheckReport(
        name=spec.name,
        dimension=n,
        verdict=verdict,
        checks=recorder.records,
        lambda_record=lambda_record,
        tool_version=__version__,
        input_hash=geometry_file.input_hash,
        seed=spec.seed,
        samples=spec.samples,
        points=bundle.points.tolist(),
        details=details,
    )
    _enforce_consistency(report)
    logger.info(f"{spec.name}: verdict {verdict} in {time.perf_counter() - started:.2f}s")
    return report


def decide_verdict(n: int, hypotheses: bool, lambda_record: LambdaRecord, tolerances: Tolerances) -> str:
    if not hypotheses:
        return HYPOTHESES_FAIL
    if n % 2 == 1:
        return ODD_DIM_NILPOTENT
    scale = max(abs(value) for value in lambda_record.values)
    if lambda_record.spread > tolerances.threshold("identity", scale):
        return HYPOTHESES_FAIL
    if lambda_record.mean < -10 * tolerances.identity:
        return FEFFERMAN_LOCAL
    return INCONCLUSIVE_SIGN


def _enforce_consistency(report: CheckReport):
    broken = report.failed(IDENTITY)
    if report.verdict == ODD_DIM_NILPOTENT:
        broken += [record for record in report.failed(CONSEQUENCE) if record.name.startswith(("odd_", "s_square"))]
    for record in report.failed(CONSEQUENCE):
        if record not in broken:
            logger.warning(f"{report.name}: consequence {record.name} fails with residual {record.residual:.3e}")
    if broken:
        names = ", ".join(record.name for record in broken)
        raise InternalConsistencyException(f"{report.name}: identities fail numerically: {names}", report)


def _holonomy_details(geometry_file, spec, recorder, unitary, lambda_record, tolerances) -> dict:
    parameters = geometry_file.holonomy_parameters
    loop_spec = default_loops(
        spec,
        epsilon=parameters.get("epsilon", 0.05),
        loops_per_plane=parameters.get("loops_per_plane", 1),
        steps=parameters.get("steps", 2000),
    )
    elements = transport_all(loop_spec, spec)
    base_bundle = curvature_bundle(spec, loop_spec.base_point[None, :])
    base_frame = TractorFrame.build(base_bundle)
    J = None
    if unitary:
        base_section = splitting(spec, base_bundle, base_frame)
        base_lambda = float(sparling_scalar(spec, base_bundle, base_section.kappa)[0])
        if base_lambda < 0:
            J = complex_structure(base_section, base_lambda)[0]
    report = holonomy_report(elements, base_frame.h.value[0], J, tolerances.ode)

    recorder.add(Residual("holonomy_orthogonality", report.max_orthogonality, 0.0), "ode", IDENTITY)
    if J is not None:
        recorder.add(Residual("holonomy_commutator", report.max_commutator, 0.0), "ode", CONSEQUENCE)
        recorder.add(Residual("holonomy_det", report.max_det_deviation, 0.0), "ode", CONSEQUENCE)
    logger.info(f"{spec.name}: transported {len(elements)} loops, algebra dimension at least {report.algebra_dimension}")
    return {
        "base_point": loop_spec.base_point.tolist(),
        "steps": loop_spec.steps,
        "algebra_dimension_lower_bound": report.algebra_dimension,
        "elements": [
            {
                "loop": element.loop,
                "orthogonality": element.orthogonality,
                "commutator": element.commutator,
                "det_deviation": element.det_deviation,
                "log_skipped": element.log_skipped,
            }
            for element in report.elements
        ],
    }


def run_conformal_invariance(geometry_file: GeometryFile, options: CheckOptions = None) -> dict:
    """Rerun with e^{2ω} g and compare verdicts and per-point λ."""
    options = options or CheckOptions()
    base = run_check(geometry_file, replace(options, rescale=False))
    rescaled_file = RescaledGeometryFile.from_geometry_file(geometry_file)
    rescaled = run_check(rescaled_file, replace(options, rescale=False))
    difference = np.abs(np.array(base.lambda_record.values) - np.array(rescaled.lambda_record.values))
    scale = max(max(abs(value) for value in base.lambda_record.values), 0.0)
    threshold = options.tolerances.threshold("identity", scale)
    both_pass = base.verdict != HYPOTHESES_FAIL and rescaled.verdict != HYPOTHESES_FAIL
    fragment = {
        "verdict": base.verdict,
        "rescaled_verdict": rescaled.verdict,
        "verdict_match": base.verdict == rescaled.verdict,
        "lambda_difference": float(np.max(difference)),
        "threshold": threshold,
        "checked": both_pass,
        "passed": base.verdict == rescaled.verdict and (not both_pass or float(np.max(difference)) <= threshold),
        "anchor": ANCHORS["lambda_rescaled"],
    }
    logger.info(f"{geometry_file.name}: rescaled verdict {rescaled.verdict}, max λ change {fragment['lambda_difference']:.3e}")
    return {"fragment": fragment, "base": base, "rescaled": rescaled}


def _selftest_one(path: str, options: CheckOptions, reports_dir: Optional[str] = None) -> dict:
    row = {
        "file": os.path.basename(path),
        "name": None,
        "expected_verdict": None,
        "verdict": None,
        "expected_lambda_sign": None,
        "lambda_sign": None,
        "lambda_mean": None,
        "matched": False,
        "error": None,
        "report": None,
    }
    try:
        geometry_file = GeometryFile.from_file(path)
        row["name"] = geometry_file.name
        row["expected_verdict"] = geometry_file.expected_verdict
        row["expected_lambda_sign"] = geometry_file.expected_lambda_sign
        report = run_check(geometry_file, options)
        if reports_dir is not None:
            row["report"] = write_report(report, reports_dir, path)
    except Exception as error:
        logger.error(f"{path}: {type(error).__name__}: {error}")
        row["error"] = f"{type(error).__name__}: {error}"
        return row
    row["verdict"] = report.verdict
    row["lambda_sign"] = report.lambda_record.sign
    row["lambda_mean"] = report.lambda_record.mean
    row["matched"] = report.verdict == row["expected_verdict"] and (
        row["expected_lambda_sign"] is None or row["expected_lambda_sign"] == report.lambda_record.sign
    )
    return row


def write_report(report, reports_dir: str, path: str) -> str:
    target = os.path.join(reports_dir, Path(path).stem + ".json")
    with open(target, "w", encoding="utf-8", newline="\n") as json_file:
        json_file.write(report.to_json() + "\n")
    return target


def corpus_files(corpus_dir=None) -> list:
    directory = Path(corpus_dir) if corpus_dir is not None else DEFAULT_CORPUS
    if not directory.is_dir():
        return []
    return sorted(str(path) for path in directory.glob("*.json"))


def corpus_selftest(
    corpus_dir=None, workers: int = 1, summary_path: str = None, options: CheckOptions = None, reports_dir: str = None
):
    """Run every corpus file against its annotation. Returns (exit status, summary table).

    With reports_dir, the JSON report of every file is written there as <file stem>.json.
    """
    options = options or CheckOptions()
    paths = corpus_files(corpus_dir)
    if not paths:
        logger.error("no corpus")
        return 2, None
    started = time.perf_counter()
    if reports_dir is not None:
        os.makedirs(reports_dir, exist_ok=True)
    run_one = functools.partial(_selftest_one, options=options, reports_dir=reports_dir)
    if workers > 1:
        with Pool(processes=workers) as pool:
            rows = pool.map(run_one, paths)
    else:
        rows = [run_one(path) for path in paths]
    summary = pl.DataFrame(rows, schema={
        "file": pl.Utf8,
        "name": pl.Utf8,
        "expected_verdict": pl.Utf8,
        "verdict": pl.Utf8,
        "expected_lambda_sign": pl.Utf8,
        "lambda_sign": pl.Utf8,
        "lambda_mean": pl.Float64,
        "matched": pl.Boolean,
        "error": pl.Utf8,
        "report": pl.Utf8,
    })
    if summary_path:
        summary.write_parquet(summary_path)
        logger.info(f"Selftest summary written to {summary_path}")
    logger.info(f"Selftest over {len(paths)} files took {time.perf_counter() - started:.2f}s")

    errors = summary.filter(pl.col("error").is_not_null())
    if errors.height:
        for row in errors.iter_rows(named=True):
            logger.error(f"{row['file']}: {row['error']}")
        return 3, summary
    mismatches = summary.filter(~pl.col("matched"))
    if mismatches.height:
        for row in mismatches.iter_rows(named=True):
            logger.error(
                f"{row['file']}: expected {row['expected_verdict']} / {row['expected_lambda_sign']}, "
                f"got {row['verdict']} / {row['lambda_sign']}"
            )
        return 1, summary
    return 0, summary


class InternalConsistencyException(Exception):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
