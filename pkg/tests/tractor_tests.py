import unittest
from dataclasses import replace

import numpy as np

# If you see a linter error here, ensure the package is installed with `pip install -e .` from the project root.
from fefferman_tractor.feffcheck.checker import DEFAULT_CORPUS
from fefferman_tractor.feffcheck.geometry_file import GeometryFile
from fefferman_tractor.geocalc import Jet, TensorField, curvature_bundle
from fefferman_tractor.tractor import (
    TractorFrame,
    tractor_connection,
    tractor_curvature_commutator,
    tractor_curvature_formula,
    tractor_identity_residuals,
)

##  python -m unittest tests/tractor_tests.py -v

flat_minkowski = {
    "name": "flat_minkowski",
    "geometry": {
        "dimension": 4,
        "signature": [1, 1, 1, -1],
        "coords": ["x", "y", "z", "t"],
        "metric": ["1", "0", "1", "0", "0", "1", "0", "0", "0", "-1"],
        "kappa": ["1", "0", "0", "1"],
    },
    "domain": {"x": [-1, 1], "y": [-1, 1], "z": [-1, 1], "t": [-1, 1]},
    "test": {"samples": 4, "seed": 2},
}


def corpus_spec(name: str, samples: int = 6):
    spec = GeometryFile.from_file(str(DEFAULT_CORPUS / f"{name}.json")).spec
    return replace(spec, samples=samples)


class TractorTests(unittest.TestCase):
    def setUp(self) -> None:
        self.flat = TractorFrame.build(curvature_bundle(GeometryFile(flat_minkowski).spec))
        self.heisenberg = TractorFrame.build(curvature_bundle(corpus_spec("heisenberg_fefferman")))
        self.sphere = TractorFrame.build(curvature_bundle(corpus_spec("sphere_product_4d")))
        return super().setUp()

    def constant_tractor(self, frame, upper):
        return TensorField(Jet.constant(np.asarray(upper, dtype=float), frame.batch, frame.n, 2), "U")

    def test_flat_derivative_of_constant_z_tractor(self):
        mu = np.array([1.0, 2.0, 3.0, 4.0])
        mu_lower = np.array([1.0, 2.0, 3.0, -4.0])
        v = self.constant_tractor(self.flat, np.concatenate([[0.0], mu, [0.0]]))
        result = tractor_connection(v, self.flat).components  # [z, a, A]
        self.assertEqual(result.shape, (self.flat.batch, 4, 6))
        for z in range(self.flat.batch):
            np.testing.assert_allclose(result[z, :, 0], -mu_lower, atol=1e-14)
            np.testing.assert_allclose(result[z, :, 1:], 0.0, atol=1e-14)

    def test_flat_derivative_of_constant_x_tractor(self):
        v = self.constant_tractor(self.flat, self.flat.x_upper())
        result = tractor_connection(v, self.flat).components
        for z in range(self.flat.batch):
            np.testing.assert_allclose(result[z, :, 1:5], np.eye(4), atol=1e-14)
            np.testing.assert_allclose(result[z, :, 0], 0.0, atol=1e-14)
            np.testing.assert_allclose(result[z, :, 5], 0.0, atol=1e-14)

    def test_injectors(self):
        for frame in (self.flat, self.heisenberg, self.sphere):
            for name, residual in frame.injector_residuals().items():
                with self.subTest(geometry=frame.bundle.spec.name, injector=name):
                    self.assertTrue(residual.passes(1e-10), f"{name}: {residual.value:.3e}")

    def test_tractor_metric_signature(self):
        for frame in (self.flat, self.heisenberg, self.sphere):
            self.assertTrue(frame.signature_matches())
            eigenvalues = np.linalg.eigvalsh(frame.h.value[0])
            self.assertEqual(int(np.sum(eigenvalues < 0)), 2)

    def test_tractor_identities(self):
        for frame in (self.flat, self.heisenberg, self.sphere):
            for name, residual in tractor_identity_residuals(frame).items():
                with self.subTest(geometry=frame.bundle.spec.name, identity=name):
                    self.assertTrue(residual.passes(1e-8), f"{name}: {residual.value:.3e}")

    def test_curvature_formula_matches_commutator(self):
        omega = tractor_curvature_formula(self.sphere)
        commutator = tractor_curvature_commutator(self.sphere)
        self.assertEqual(omega.slots, "ddDD")
        self.assertGreater(omega.max_norm(), 0.05)
        difference = float(np.max(np.abs(omega.components - commutator.components)))
        self.assertLessEqual(difference, 1e-8 * (1 + omega.max_norm()))

    def test_conformally_flat_has_flat_tractor_connection(self):
        omega = tractor_curvature_formula(self.heisenberg)
        commutator = tractor_curvature_commutator(self.heisenberg)
        scale = self.heisenberg.bundle.riemann.max_norm()
        self.assertGreater(scale, 0.1)
        self.assertLessEqual(omega.max_norm(), 1e-8 * (1 + scale))
        self.assertLessEqual(commutator.max_norm(), 1e-8 * (1 + scale))

    def test_curvature_annihilates_x(self):
        values = tractor_curvature_formula(self.sphere).components
        contracted = np.einsum("A,zabAB->zabB", self.sphere.x_upper(), values)
        self.assertLessEqual(float(np.max(np.abs(contracted))), 1e-12)

    def test_lower_then_raise_is_identity(self):
        v = self.constant_tractor(self.sphere, [0.5, 1.0, -2.0, 0.0, 3.0, 1.5])
        lowered = self.sphere.lower(v, 0)
        self.assertEqual(lowered.slots, "D")
        back = self.sphere.raise_(lowered, 0)
        np.testing.assert_allclose(back.components, v.components, atol=1e-12)
        with self.assertRaises(ValueError):
            self.sphere.raise_(v, 0)

    def test_norm_in_splitting(self):
        # h(V, V) = 2σρ + g(μ, μ)
        upper = np.array([0.5, 1.0, -2.0, 0.0, 3.0, 1.5])
        v = self.constant_tractor(self.flat, upper)
        lowered = self.flat.lower(v, 0).components[0]
        mu = upper[1:5]
        expected = 2 * upper[0] * upper[5] + mu @ np.diag([1.0, 1.0, 1.0, -1.0]) @ mu
        self.assertAlmostEqual(float(lowered @ upper), expected, places=12)


if __name__ == "__main__":
    unittest.main()
