"""
Test cases for the hyperbolic module.
"""

import math
import os
import shutil
import tempfile
import unittest
import warnings

import numpy as np

from geoclt.coding_graph import (
    GraphPath, GroupWord, build_free_group_graph, evaluate_path, iter_cycle_edges
)
from geoclt.errors import (
    InvalidParameterError, NumericRangeError, ParseError, RepresentationError, RepresentationParseError
)
from geoclt.hyperbolic import (
    FuchsianRep, HPoint, MoebiusMatrix, apply, df_increment, displacement, dump_representation,
    evaluate_batch, evaluate_word, gromov_product, hyp_distance, load_representation,
    pair_of_pants_rep, representation_hash, schottky_from_matrices, self_gromov,
    stable_length_estimate, translation_length
)
from geoclt.parry_markov import (
    SeededRng, UniformCycleSampler, build_parry_chain, sample_path, sample_paths, shift
)


def random_point(gen: np.random.Generator) -> HPoint:
    return HPoint(float(gen.uniform(-3, 3)), float(gen.uniform(0.2, 3)))


def random_matrix(gen: np.random.Generator) -> MoebiusMatrix:
    """Random unit-determinant matrix of moderate size."""
    a, b, c = gen.uniform(-2, 2, size=3)
    a = a if abs(a) > 0.3 else 0.3
    return MoebiusMatrix(a, b, c, (1 + b * c) / a)


def rotation(theta: float) -> MoebiusMatrix:
    """Rotation about i by angle 2 theta."""
    return MoebiusMatrix(math.cos(theta), math.sin(theta), -math.sin(theta), math.cos(theta))


def ping_pong_pair():
    """diag(k, 1/k) and its conjugate by a quarter turn about i, with k = 10."""
    k = 10.0
    cosh, sinh = (k + 1 / k) / 2, (k - 1 / k) / 2
    return MoebiusMatrix(k, 0.0, 0.0, 1 / k), MoebiusMatrix(cosh, -sinh, -sinh, cosh)


class TestDistances(unittest.TestCase):
    """Test cases for distances and the Moebius action."""

    def setUp(self):
        """Set up test fixtures."""
        self.gen = SeededRng(41).generator()

    def test_vertical_distance(self):
        self.assertAlmostEqual(hyp_distance(HPoint(0, 1), HPoint(0, 2)), math.log(2), places=14)
        self.assertEqual(hyp_distance(HPoint(1, 1), HPoint(1, 1)), 0.0)

    def test_matches_arccosh_form(self):
        for _ in range(200):
            p, q = random_point(self.gen), random_point(self.gen)
            expected = math.acosh(1 + ((p.x - q.x) ** 2 + (p.y - q.y) ** 2) / (2 * p.y * q.y))
            self.assertAlmostEqual(hyp_distance(p, q), expected, delta=1e-7 * max(1.0, expected))

    def test_isometry(self):
        for _ in range(10000):
            g = random_matrix(self.gen)
            p, q = random_point(self.gen), random_point(self.gen)
            before = hyp_distance(p, q)
            after = hyp_distance(apply(g, p), apply(g, q))
            self.assertAlmostEqual(before, after, delta=1e-8 * max(1.0, before))

    def test_isometry_with_large_entries(self):
        for _ in range(10000):
            k = float(self.gen.uniform(1.0, 1e3))
            first, second = (rotation(float(self.gen.uniform(0, math.pi))) for _ in range(2))
            g = first @ MoebiusMatrix(k, 0.0, 0.0, 1 / k) @ second
            self.assertLessEqual(g.max_abs(), 1e3)
            p = HPoint(float(self.gen.uniform(-1, 1)), float(self.gen.uniform(0.5, 2)))
            q = HPoint(float(self.gen.uniform(-1, 1)), float(self.gen.uniform(0.5, 2)))
            before = hyp_distance(p, q)
            after = hyp_distance(apply(g, p), apply(g, q))
            self.assertAlmostEqual(before, after, delta=1e-6 * max(1.0, before))

    def test_triangle_inequality(self):
        for _ in range(10000):
            p, q, r = (random_point(self.gen) for _ in range(3))
            self.assertLessEqual(hyp_distance(p, r), hyp_distance(p, q) + hyp_distance(q, r) + 1e-12)

    def test_gromov_product(self):
        base = HPoint(0, 1)
        x = HPoint(0, 5)
        self.assertAlmostEqual(gromov_product(x, x, base), hyp_distance(x, base), places=12)
        self.assertAlmostEqual(gromov_product(HPoint(0, 5), HPoint(0, 0.2), base), 0.0, places=12)

    def test_upper_half_plane_only(self):
        with self.assertRaises(InvalidParameterError):
            HPoint(0, 0)
        with self.assertRaises(InvalidParameterError):
            HPoint(float("nan"), 1)


class TestMatrices(unittest.TestCase):
    """Test cases for MoebiusMatrix and translation lengths."""

    def test_translation_length_of_diagonal(self):
        for t in (0.1, 1.0, 7.5, 300.0):
            self.assertAlmostEqual(translation_length(MoebiusMatrix.translation(t)), t,
                                   delta=1e-9 * max(1.0, t))

    def test_elliptic_and_parabolic_are_zero(self):
        self.assertEqual(translation_length(MoebiusMatrix(0, -1, 1, 0)), 0.0)
        self.assertEqual(translation_length(MoebiusMatrix(1, 1, 0, 1)), 0.0)

    def test_inverse_and_normalization(self):
        g = MoebiusMatrix(2, 1, 1, 1)
        self.assertTrue((g @ g.inverse()).is_close(MoebiusMatrix.identity()))
        scaled = MoebiusMatrix(4, 2, 2, 2).normalized()
        self.assertAlmostEqual(scaled.determinant, 1.0, places=14)
        with self.assertRaises(InvalidParameterError):
            MoebiusMatrix(0, 1, 1, 0).normalized()


class TestRepresentations(unittest.TestCase):
    """Test cases for pants and Schottky representations."""

    def setUp(self):
        """Set up test fixtures."""
        self.rep = pair_of_pants_rep(2.0, 2.0, 2.0)
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_pants_boundary_lengths(self):
        rep = pair_of_pants_rep(2.0, 3.0, 4.0)
        A, B = rep.generators()
        self.assertAlmostEqual(translation_length(A), 2.0, places=10)
        self.assertAlmostEqual(translation_length(B), 3.0, places=10)
        self.assertAlmostEqual(translation_length(A @ B), 4.0, places=10)
        self.assertLess((A @ B).trace, -2.0)

    def test_swapped_boundary_lengths_share_spectrum(self):
        first = pair_of_pants_rep(2.0, 3.0, 4.0)
        second = pair_of_pants_rep(3.0, 2.0, 4.0)
        f2 = build_free_group_graph(2)
        for n in range(1, 7):
            spectra = []
            for rep in (first, second):
                words = (GroupWord(tuple(f2.edges[e].label for e in edges))
                         for _, edges in iter_cycle_edges(f2, n))
                spectra.append(sorted(translation_length(evaluate_word(rep, w)) for w in words))
            self.assertEqual(len(spectra[0]), len(spectra[1]))
            np.testing.assert_allclose(spectra[0], spectra[1], rtol=1e-9)

    def test_pants_pass_the_sanity_check(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            schottky_from_matrices(self.rep.generators())
        self.assertEqual([str(w.message) for w in caught], [])

    def test_pants_rejects_bad_lengths(self):
        with self.assertRaises(InvalidParameterError):
            pair_of_pants_rep(2.0, 0.0, 2.0)

    def test_shared_fixed_point_warns(self):
        D = MoebiusMatrix(2.0, 0.0, 0.0, 0.5)
        E = MoebiusMatrix(2.0, -4.5, 0.0, 0.5)  # D conjugated by z -> z + 3
        with self.assertWarns(RuntimeWarning):
            schottky_from_matrices([D, E])

    def test_ping_pong_pair_is_quiet(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rep = schottky_from_matrices(list(ping_pong_pair()))
        self.assertEqual(caught, [])
        self.assertEqual(rep.rank, 2)

    def test_schottky_argument_checks(self):
        D, E = ping_pong_pair()
        with self.assertRaises(InvalidParameterError):
            schottky_from_matrices([D])
        with self.assertRaises(InvalidParameterError):
            schottky_from_matrices([D, MoebiusMatrix(0, -1, 1, 0)])

    def test_inverse_images(self):
        for g, image in self.rep.generator_images.items():
            product = image @ self.rep.image(g.inverse())
            self.assertTrue(product.is_close(MoebiusMatrix.identity()))

    def test_dump_and_load(self):
        path = os.path.join(self.temp_dir, "pants.rep")
        with open(path, "w", encoding="utf-8") as f:
            f.write(dump_representation(self.rep))
        with open(path, "rb") as f:
            loaded = load_representation(f.read())
        for original, copy in zip(self.rep.generators(), loaded.generators()):
            self.assertTrue(original.is_close(copy, tol=1e-12))
        self.assertEqual(loaded.basepoint, self.rep.basepoint)
        self.assertEqual(len(representation_hash(loaded)), 64)
        self.assertNotEqual(representation_hash(self.rep), representation_hash(pair_of_pants_rep(2.0, 2.0, 3.0)))

    def test_load_errors(self):
        with self.assertRaises(RepresentationParseError):
            load_representation("matrix 1 1 0 0 1\n")
        with self.assertRaises(RepresentationParseError):
            load_representation("generators 2\nmatrix 1 2 0 0 0.5\n")
        with self.assertRaises(RepresentationParseError) as cm:
            load_representation("generators 1\nmatrix 1 2 0 0 0.5\nmatrix 1 2 0 0 0.5\n")
        self.assertEqual(cm.exception.line, 3)
        with self.assertRaises(RepresentationParseError):
            load_representation("generators 2\nbasepoint 0 -1\n")

    def test_invalid_utf8_is_rejected(self):
        text = "generators 2\nmatrix 1 10 0 0 0.1\nmatrix 2 5.05 -4.95 -4.95 5.05\n"
        self.assertEqual(load_representation(text.encode("utf-8")).rank, 2)
        with self.assertRaises(RepresentationParseError) as cm:
            load_representation(text.encode("utf-8") + b"# \xff\n")
        self.assertIn("UTF-8", str(cm.exception))
        self.assertIsInstance(cm.exception, ParseError)

    def test_rank_mismatch(self):
        f3 = build_free_group_graph(3)
        with self.assertRaises(RepresentationError):
            self.rep.edge_stack(f3)


class TestWordEvaluation(unittest.TestCase):
    """Test cases for evaluating words and the derived quantities."""

    def setUp(self):
        """Set up test fixtures."""
        self.rep = pair_of_pants_rep(2.0, 2.0, 2.0)
        self.f2 = build_free_group_graph(2)
        self.chain = build_parry_chain(self.f2)
        self.gen = SeededRng(43).generator()

    def random_word(self, length: int) -> GroupWord:
        return evaluate_path(sample_path(self.chain, length, self.gen))

    def test_homomorphism(self):
        for _ in range(10000):
            u = self.random_word(int(self.gen.integers(1, 6)))
            v = self.random_word(int(self.gen.integers(1, 6)))
            product = evaluate_word(self.rep, u) @ evaluate_word(self.rep, v)
            joined = evaluate_word(self.rep, u * v)
            scale = max(1.0, product.max_abs())
            self.assertTrue(np.allclose(product.as_array(), joined.as_array(), rtol=1e-9, atol=1e-9 * scale))

    def test_translation_length_is_homogeneous(self):
        for _ in range(1000):
            word = self.random_word(int(self.gen.integers(1, 4))).cyclic_reduce()
            if word.is_identity():
                continue
            tau = translation_length(evaluate_word(self.rep, word))
            for power in range(2, 11):
                tau_n = translation_length(evaluate_word(self.rep, GroupWord(word.letters * power)))
                self.assertAlmostEqual(tau_n, power * tau, delta=1e-8 * max(1.0, tau_n))

    def test_stable_length_approaches_from_above(self):
        for _ in range(500):
            word = self.random_word(int(self.gen.integers(1, 6))).cyclic_reduce()
            if word.is_identity():
                continue
            tau = translation_length(evaluate_word(self.rep, word))
            once = displacement(self.rep, word) - tau
            four = abs(stable_length_estimate(self.rep, word, 4) - tau)
            eight = abs(stable_length_estimate(self.rep, word, 8) - tau)
            self.assertLessEqual(eight, four + 1e-9)
            self.assertLessEqual(four, once + 1e-6)

    def test_conjugation_invariance(self):
        for _ in range(2000):
            g = self.random_word(int(self.gen.integers(1, 5))).cyclic_reduce()
            h = self.random_word(int(self.gen.integers(1, 3)))
            if g.is_identity():
                continue
            tau = translation_length(evaluate_word(self.rep, g))
            conjugate = translation_length(evaluate_word(self.rep, h * g * h.inverse()))
            self.assertAlmostEqual(conjugate, tau, delta=1e-8 * max(1.0, tau))

    def test_inverse_has_equal_displacement(self):
        for length in (1, 5, 20, 50):
            for _ in range(50):
                word = self.random_word(length)
                forward = displacement(self.rep, word)
                self.assertAlmostEqual(displacement(self.rep, word.inverse()), forward,
                                       delta=1e-9 * max(1.0, forward))

    def test_long_uniform_cycles(self):
        for n in (50, 200):
            sampler = UniformCycleSampler(self.f2, n)
            cycles = [sampler.sample(self.gen) for _ in range(30)]
            edges = np.array([c.edges for c in cycles])
            batch = evaluate_batch(self.rep, self.f2, edges)
            displacements = batch.displacements()
            products = batch.self_gromov_products()
            taus = batch.translation_lengths()
            for i, cycle in enumerate(cycles):
                word = evaluate_path(cycle)
                d = displacement(self.rep, word)
                self.assertTrue(math.isfinite(d))
                self.assertAlmostEqual(d, displacements[i], delta=1e-9 * d)
                self.assertAlmostEqual(self_gromov(self.rep, word), products[i], delta=1e-7 * d)
                tau = translation_length(evaluate_word(self.rep, word))
                self.assertAlmostEqual(tau, taus[i], delta=1e-9 * tau)
                self.assertLessEqual(tau, d + 1e-9 * d)
            path = GraphPath(self.f2, cycles[0].start, cycles[0].edges)
            self.assertTrue(math.isfinite(df_increment(self.rep, path)))

    def test_generator_displacements(self):
        a, b = GroupWord.parse("a"), GroupWord.parse("b")
        self.assertAlmostEqual(displacement(self.rep, a), 2.0, places=12)
        self.assertAlmostEqual(displacement(self.rep, b), 3.8411, delta=1e-3)

    def test_axis_through_basepoint(self):
        # the axis of a passes through i, so its orbit points sit on opposite sides
        self.assertAlmostEqual(self_gromov(self.rep, GroupWord.parse("a")), 0.0, places=9)
        self.assertAlmostEqual(stable_length_estimate(self.rep, GroupWord.parse("a"), 10), 2.0, places=9)

    def test_stable_length_estimate(self):
        word = GroupWord.parse("ab")
        tau = translation_length(evaluate_word(self.rep, word))
        self.assertAlmostEqual(stable_length_estimate(self.rep, word, 60), tau, delta=0.2)
        with self.assertRaises(InvalidParameterError):
            stable_length_estimate(self.rep, word, 0)

    def test_entry_guard(self):
        rep = pair_of_pants_rep(10.0, 10.0, 10.0)
        with self.assertRaises(NumericRangeError):
            evaluate_word(rep, GroupWord.parse("a" * 200))

    def test_batch_matches_single_words(self):
        starts, edges = sample_paths(self.chain, 12, 50, SeededRng(3))
        batch = evaluate_batch(self.rep, self.f2, edges)
        displacements = batch.displacements()
        taus = batch.translation_lengths()
        products = batch.self_gromov_products()
        for i in range(50):
            word = evaluate_path(GraphPath(self.f2, int(starts[i]), tuple(int(e) for e in edges[i])))
            self.assertAlmostEqual(displacements[i], displacement(self.rep, word), delta=1e-8)
            self.assertAlmostEqual(taus[i], translation_length(evaluate_word(self.rep, word)), delta=1e-8)
            self.assertAlmostEqual(products[i], self_gromov(self.rep, word), delta=1e-7)

    def test_long_words_stay_finite(self):
        _, edges = sample_paths(self.chain, 400, 200, SeededRng(4))
        batch = evaluate_batch(self.rep, self.f2, edges)
        displacements = batch.displacements()
        self.assertTrue(np.isfinite(displacements).all())
        self.assertTrue((displacements <= 400 * 3.87).all())
        self.assertTrue((displacements > 100).all())
        self.assertTrue((batch.self_gromov_products() >= 0).all())

    def test_basepoint_moves_displacement(self):
        moved = FuchsianRep(self.rep.generator_images, HPoint(0.3, 2.0))
        word = GroupWord.parse("ab")
        g = evaluate_word(self.rep, word)
        z = moved.basepoint
        self.assertAlmostEqual(displacement(moved, word), hyp_distance(z, apply(g, z)), places=9)

    def test_df_increment_is_bounded_by_generators(self):
        bound = max(displacement(self.rep, GroupWord((g,))) for g in self.rep.generator_images)
        for _ in range(500):
            path = sample_path(self.chain, int(self.gen.integers(1, 60)), self.gen)
            self.assertLessEqual(abs(df_increment(self.rep, path)), bound + 1e-9)

    def test_df_increments_telescope(self):
        path = sample_path(self.chain, 15, self.gen)
        total = 0.0
        current = path
        while current.length:
            total += df_increment(self.rep, current)
            current = shift(current)
        self.assertAlmostEqual(total, displacement(self.rep, evaluate_path(path)), places=9)
        with self.assertRaises(InvalidParameterError):
            df_increment(self.rep, GraphPath.empty(self.f2, 0))


if __name__ == "__main__":
    unittest.main()
