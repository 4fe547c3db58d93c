import unittest
from dataclasses import replace

import numpy as np

# If you see a linter error here, ensure the package is installed with `pip install -e .` from the project root.
from fefferman_tractor.adjoint import (
    complex_structure,
    complex_trace_check,
    ell_field,
    killing_lambda,
    omega_contract_s,
    preferred_scale_identities,
    s_squared,
    section_residuals,
    sparling_scalar,
    splitting,
)
from fefferman_tractor.feffcheck.checker import DEFAULT_CORPUS
from fefferman_tractor.feffcheck.geometry_file import GeometryFile
from fefferman_tractor.geocalc import curvature_bundle
from fefferman_tractor.tractor import TractorFrame

##  python -m unittest tests/adjoint_tests.py -v

flat_translation = {
    "name": "flat_translation",
    "geometry": {
        "dimension": 4,
        "signature": [1, 1, 1, -1],
        "coords": ["x", "y", "z", "t"],
        "metric": ["1", "0", "1", "0", "0", "1", "0", "0", "0", "-1"],
        "kappa": ["1", "0", "0", "0"],
    },
    "domain": {"x": [-1, 1], "y": [-1, 1], "z": [-1, 1], "t": [-1, 1]},
    "test": {"samples": 6, "seed": 1},
}


def corpus_spec(name: str, samples: int = 6):
    spec = GeometryFile.from_file(str(DEFAULT_CORPUS / f"{name}.json")).spec
    return replace(spec, samples=samples)


def flat_spec(kappa):
    entry = {**flat_translation, "geometry": {**flat_translation["geometry"], "kappa": kappa}}
    return GeometryFile(entry).spec


def build(spec):
    bundle = curvature_bundle(spec)
    frame = TractorFrame.build(bundle)
    return bundle, frame, splitting(spec, bundle, frame)


class AdjointTests(unittest.TestCase):
    def setUp(self) -> None:
        self.heisenberg = corpus_spec("heisenberg_fefferman")
        self.control = corpus_spec("negative_control_perturbed_flat")
        return super().setUp()

    def assertVanishes(self, array, tolerance=1e-10):
        self.assertLessEqual(float(np.max(np.abs(array))), tolerance)

    def test_flat_translation_is_parallel(self):
        spec = flat_spec(["1", "0", "0", "0"])
        _, frame, section = build(spec)
        self.assertTrue(section.parallel_residual.passes(1e-10))
        K = section.K.components
        self.assertVanishes(K[:, 0])
        self.assertVanishes(K[:, 1] - 1.0)
        self.assertVanishes(K[:, 2:])
        self.assertVanishes(section.lambda_samples)

    def test_flat_translation_has_harmonic_tractor(self):
        spec = flat_spec(["1", "0", "0", "0"])
        bundle, frame, section = build(spec)
        first_row = section.s.components[:, 0, :]
        self.assertVanishes(first_row)

    def test_dilation_is_parallel(self):
        spec = flat_spec(["x", "y", "z", "t"])
        _, frame, section = build(spec)
        self.assertVanishes(section.div_kappa.components - 4.0)
        self.assertVanishes(section.K.components[:, 0] + 1.0)
        self.assertTrue(section.parallel_residual.passes(1e-8))
        self.assertVanishes(section.lambda_samples - 1.0, 1e-10)

    def test_non_conformal_field_is_not_parallel(self):
        spec = flat_spec(["0", "x^2", "0", "0"])
        _, frame, section = build(spec)
        self.assertGreater(section.parallel_residual.value, 1e-6)
        residuals = section_residuals(section, frame)
        self.assertGreater(residuals["s_skew"].value, 1e-6)
        self.assertTrue(residuals["x_s_is_k"].passes(1e-10))
        self.assertTrue(residuals["reconstruction"].passes(1e-10))

    def test_heisenberg_sparling_scalar(self):
        bundle, frame, section = build(self.heisenberg)
        self.assertTrue(section.parallel_residual.passes(1e-8), f"{section.parallel_residual.value:.3e}")
        np.testing.assert_allclose(section.lambda_samples, -1.0, atol=1e-8)
        square = s_squared(section, frame)
        np.testing.assert_allclose(square.lambda_samples, -1.0, atol=1e-8)
        self.assertAlmostEqual(square.lambda_est, -1.0, places=8)
        self.assertTrue(square.tracefree_residual.passes(1e-8))
        self.assertEqual(square.kernel_dims, (0,) * self.heisenberg.samples)

    def test_heisenberg_complex_structure(self):
        bundle, frame, section = build(self.heisenberg)
        J = complex_structure(section, -1.0)
        square = np.einsum("zAC,zCB->zAB", J, J)
        self.assertVanishes(square + np.eye(frame.rank), 1e-8)
        real_part, imaginary_part = complex_trace_check(J, frame)
        self.assertTrue(real_part.passes(1e-8))
        self.assertTrue(imaginary_part.passes(1e-8))
        self.assertIsNone(complex_structure(section, 0.0))
        self.assertIsNone(complex_trace_check(None, frame))

    def test_heisenberg_killing_lambda(self):
        bundle, frame, section = build(self.heisenberg)
        from_schouten, from_ricci = killing_lambda(self.heisenberg, bundle)
        np.testing.assert_allclose(from_schouten, section.lambda_samples, atol=1e-10)
        np.testing.assert_allclose(from_ricci, -1.0, atol=1e-10)

    def test_heisenberg_preferred_scale(self):
        bundle, frame, section = build(self.heisenberg)
        report = preferred_scale_identities(self.heisenberg, bundle, frame)
        self.assertFalse(report.diagnostic_only)
        self.assertTrue(report.omega_gradient.passes(1e-8))
        self.assertTrue(report.second_derivative.passes(1e-8), f"{report.second_derivative.value:.3e}")

    def test_sparling_scalar_is_conformally_invariant(self):
        base = self.heisenberg
        rescaled = base.rescaled()
        points = base.sample_points()
        lambda_base = sparling_scalar(base, curvature_bundle(base, points))
        lambda_rescaled = sparling_scalar(rescaled, curvature_bundle(rescaled, points))
        np.testing.assert_allclose(lambda_rescaled, lambda_base, atol=2e-8)

    def test_omega_contraction_identity_on_negative_control(self):
        bundle, frame, section = build(self.control)
        contraction = omega_contract_s(section, frame)
        self.assertTrue(contraction.difference.passes(1e-8), f"{contraction.difference.value:.3e}")
        self.assertGreater(contraction.value.value, 1e-6)
        self.assertGreater(section.parallel_residual.value, 1e-6)

    def test_square_identities_hold_for_any_field(self):
        for spec in (self.control, flat_spec(["0", "x^2", "0", "0"]), self.heisenberg):
            bundle, frame, section = build(spec)
            square = s_squared(section, frame)
            with self.subTest(geometry=spec.name):
                self.assertTrue(square.x_s_s_x.passes(1e-8), f"{square.x_s_s_x.value:.3e}")
                self.assertTrue(square.k_contraction.passes(1e-8), f"{square.k_contraction.value:.3e}")
                scale = 1 + float(np.max(np.abs(section.lambda_samples)))
                np.testing.assert_allclose(square.k_lambda_samples, section.lambda_samples, atol=1e-8 * scale)

    def test_odd_dimension_is_nilpotent(self):
        spec = corpus_spec("flat_null_translation_3d")
        bundle, frame, section = build(spec)
        self.assertTrue(section.parallel_residual.passes(1e-10))
        self.assertVanishes(section.lambda_samples)
        square = s_squared(section, frame)
        self.assertVanishes(np.einsum("zAC,zCB->zAB", section.s_mixed, section.s_mixed))
        for dim in square.kernel_dims:
            self.assertGreaterEqual(dim, 1)

    def test_ell_vanishes_for_flat_translation(self):
        spec = flat_spec(["1", "0", "0", "1"])
        bundle = curvature_bundle(spec)
        ell = ell_field(spec, bundle)
        self.assertVanishes(ell.ell.components)
        self.assertVanishes(ell.second_derivative.components)


if __name__ == "__main__":
    unittest.main()
