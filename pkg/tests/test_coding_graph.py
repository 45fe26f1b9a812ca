"""
Test cases for the coding_graph module.
"""

import os
import shutil
import tempfile
import unittest
from collections import Counter
from fractions import Fraction

from geoclt.coding_graph import (
    CodingGraph, ConjugacyClass, Edge, Generator, GraphPath, GroupWord, MatrixPowers,
    build_free_group_graph, check_aperiodic, count_primitive_cycles, cycle_to_conjugacy_class, dump_graph,
    enumerate_cycles, evaluate_path, graph_hash, is_primitive, load_graph, matrix_power,
    path_count, path_cycle_ratio, primitive_cycle_counts, trace_power
)
from geoclt.errors import (
    AperiodicityError, BudgetExceededError, GraphParseError, InvalidParameterError, InvariantError
)


def fibonacci_graph() -> CodingGraph:
    """Adjacency [[1, 1], [1, 0]]."""
    return load_graph("vertices 2\nedge 0 0 1 +\nedge 0 1 2 +\nedge 1 0 1 +\n")


def f2_closed_count(n: int) -> int:
    return 3**n + (3 if n % 2 == 0 else 1)


class TestGroupWord(unittest.TestCase):
    """Test cases for words and generators."""

    def test_parse_and_str(self):
        word = GroupWord.parse("aBba")
        self.assertEqual(str(word), "aBba")
        self.assertEqual(word.letters[1], Generator(2, -1))
        self.assertEqual(str(GroupWord()), "1")

    def test_numbered_generators(self):
        g = Generator.parse("X30")
        self.assertEqual(g, Generator(30, -1))
        self.assertEqual(str(g), "X30")
        self.assertEqual(str(Generator(27)), "x27")

    def test_bad_tokens(self):
        with self.assertRaises(InvalidParameterError):
            Generator.parse("1")
        with self.assertRaises(InvalidParameterError):
            Generator(0)
        with self.assertRaises(InvalidParameterError):
            GroupWord.parse("a?")

    def test_reduction(self):
        self.assertEqual(str(GroupWord.parse("aAb").free_reduce()), "b")
        self.assertEqual(str(GroupWord.parse("baB").cyclic_reduce()), "a")
        self.assertTrue(GroupWord.parse("abAB").is_cyclically_reduced())
        self.assertFalse(GroupWord.parse("abA").is_cyclically_reduced())
        self.assertTrue(GroupWord.parse("aA").free_reduce().is_identity())

    def test_inverse_and_concatenation(self):
        word = GroupWord.parse("ab")
        self.assertEqual(str(word.inverse()), "BA")
        self.assertTrue((word * word.inverse()).free_reduce().is_identity())

    def test_conjugacy_class_is_rotation_invariant(self):
        first = ConjugacyClass.from_word(GroupWord.parse("bab"))
        second = ConjugacyClass.from_word(GroupWord.parse("abb"))
        self.assertEqual(first, second)
        self.assertEqual(str(first), "[abb]")


class TestFreeGroupGraph(unittest.TestCase):
    """Test cases for the built-in free group coding graphs."""

    def setUp(self):
        """Set up test fixtures."""
        self.f2 = build_free_group_graph(2)

    def test_shape(self):
        self.assertEqual(self.f2.vertex_count, 4)
        self.assertEqual(self.f2.edge_count, 12)
        self.assertEqual(self.f2.rank, 2)
        f3 = build_free_group_graph(3)
        self.assertEqual(f3.vertex_count, 6)
        self.assertEqual(f3.edge_count, 30)

    def test_rank_must_be_at_least_two(self):
        with self.assertRaises(InvalidParameterError):
            build_free_group_graph(1)

    def test_every_path_reads_a_reduced_word(self):
        for cycle in enumerate_cycles(self.f2, 4):
            word = evaluate_path(cycle)
            self.assertTrue(word.is_reduced())
            self.assertTrue(word.is_cyclically_reduced())
            self.assertEqual(word.length, 4)

    def test_trace_closed_forms(self):
        self.assertEqual(trace_power(self.f2, 1), 4)
        self.assertEqual(trace_power(self.f2, 2), 12)
        for n in range(1, 21):
            self.assertEqual(trace_power(self.f2, n), f2_closed_count(n))

    def test_exact_at_large_n(self):
        self.assertEqual(trace_power(self.f2, 400), 3**400 + 3)

    def test_primitive_counts(self):
        self.assertEqual(count_primitive_cycles(self.f2, 1), 4)
        self.assertEqual(count_primitive_cycles(self.f2, 2), 4)

    def test_divisor_identity(self):
        for n in range(1, 15):
            counts = primitive_cycle_counts(self.f2, n)
            self.assertEqual(sum(d * c for d, c in counts.items()), trace_power(self.f2, n))

    def test_enumeration_matches_trace(self):
        for n in range(1, 11):
            cycles = enumerate_cycles(self.f2, n)
            self.assertEqual(len(cycles), trace_power(self.f2, n))
            self.assertEqual(len({(c.start, c.edges) for c in cycles}), len(cycles))

    def test_fibers_count_distinct_rotations(self):
        for n in range(1, 11):
            fibers = Counter(cycle_to_conjugacy_class(c) for c in enumerate_cycles(self.f2, n))
            primitive = 0
            for klass, size in fibers.items():
                letters = klass.canonical.letters
                rotations = len({letters[r:] + letters[:r] for r in range(n)})
                # a d-th power of a primitive class of length n / d has n / d rotations
                self.assertEqual(size, rotations)
                self.assertEqual(n % size, 0)
                primitive += rotations == n
            self.assertEqual(sum(fibers.values()), trace_power(self.f2, n))
            self.assertEqual(primitive, count_primitive_cycles(self.f2, n))

    def test_classes_of_length_five(self):
        classes = {cycle_to_conjugacy_class(c) for c in enumerate_cycles(self.f2, 5)}
        self.assertEqual(len(classes), count_primitive_cycles(self.f2, 5) + count_primitive_cycles(self.f2, 1))

    def test_enumeration_budget(self):
        with self.assertRaises(BudgetExceededError):
            enumerate_cycles(self.f2, 3, budget=10)

    def test_is_primitive(self):
        a = self.f2.out_edges(0)[0]
        self.assertEqual(self.f2.edges[a].target, 0)
        self.assertFalse(is_primitive(GraphPath(self.f2, 0, (a, a))))
        self.assertTrue(is_primitive(GraphPath(self.f2, 0, (a,))))
        with self.assertRaises(InvalidParameterError):
            is_primitive(GraphPath.empty(self.f2, 0))

    def test_path_counts(self):
        self.assertEqual(path_count(self.f2, 0), 4)
        self.assertEqual(path_count(self.f2, 3), 4 * 27)
        self.assertEqual(path_cycle_ratio(self.f2, 2), Fraction(3))
        self.assertEqual(path_cycle_ratio(self.f2, 3), Fraction(108, 28))

    def test_path_cycle_ratio_is_bounded(self):
        bound = 4
        for n in range(2, 15):
            ratio = path_cycle_ratio(self.f2, n)
            self.assertEqual(ratio, Fraction(4 * 3**n, 3**n + 2 + (-1)**n))
            self.assertGreaterEqual(ratio, 1)
            self.assertLess(ratio, bound)
        # the value at n = 2 is not an upper bound
        self.assertGreater(path_cycle_ratio(self.f2, 3), path_cycle_ratio(self.f2, 2))

    def test_power_cap(self):
        with self.assertRaises(BudgetExceededError):
            matrix_power(self.f2, 600)
        identity = matrix_power(self.f2, 0)
        self.assertEqual([[int(x) for x in row] for row in identity],
                         [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])

    def test_matrix_powers_cache(self):
        powers = MatrixPowers(self.f2, max_power=10)
        self.assertEqual(powers.trace(6), f2_closed_count(6))
        self.assertEqual(powers.total(2), 36)
        with self.assertRaises(BudgetExceededError):
            powers.power(11)


class TestGraphPath(unittest.TestCase):
    """Test cases for GraphPath validation."""

    def setUp(self):
        """Set up test fixtures."""
        self.f2 = build_free_group_graph(2)

    def test_rejects_broken_composition(self):
        # out of vertex 0 the second edge must also start at the first edge's target
        first = self.f2.out_edges(0)[1]
        target = self.f2.edges[first].target
        wrong = next(i for i, e in enumerate(self.f2.edges) if e.source != target)
        with self.assertRaises(InvalidParameterError):
            GraphPath(self.f2, 0, (first, wrong))

    def test_closed_and_end(self):
        path = GraphPath.from_edges(self.f2, [self.f2.out_edges(0)[0]])
        self.assertTrue(path.is_closed)
        self.assertEqual(path.end, 0)
        self.assertEqual(GraphPath.empty(self.f2, 2).end, 2)

    def test_non_reduced_labels_are_an_invariant_failure(self):
        graph = load_graph("vertices 1\nedge 0 0 1 +\nedge 0 0 1 -\n")
        with self.assertRaises(InvariantError):
            evaluate_path(GraphPath(graph, 0, (0, 1)))


class TestGraphFiles(unittest.TestCase):
    """Test cases for graph loading and aperiodicity checks."""

    def setUp(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_dump_then_load(self):
        f2 = build_free_group_graph(2)
        path = os.path.join(self.temp_dir, "f2.graph")
        with open(path, "w", encoding="utf-8") as f:
            f.write(dump_graph(f2))
        with open(path, "rb") as f:
            loaded = load_graph(f.read())
        self.assertEqual(loaded, f2)
        self.assertEqual(graph_hash(loaded), graph_hash(f2))

    def test_comments_and_blank_lines(self):
        graph = load_graph("# fibonacci\nvertices 2\n\nedge 0 0 1 +  # loop\nedge 0 1 2 +\nedge 1 0 1 +\n")
        self.assertEqual(graph.adjacency, ((1, 1), (1, 0)))
        self.assertEqual(fibonacci_graph(), graph)

    def test_parse_errors_carry_line_numbers(self):
        with self.assertRaises(GraphParseError) as cm:
            load_graph("vertices 2\nedge 0 5 1 +\n")
        self.assertEqual(cm.exception.line, 2)
        with self.assertRaises(GraphParseError):
            load_graph("edge 0 0 1 +\n")
        with self.assertRaises(GraphParseError):
            load_graph("vertices 1\nedge 0 0 1 *\n")
        with self.assertRaises(GraphParseError):
            load_graph("vertices 1\nloop 0\n")
        with self.assertRaises(GraphParseError):
            load_graph("")

    def test_periodic_graph_is_rejected(self):
        with self.assertRaises(AperiodicityError) as cm:
            load_graph("vertices 2\nedge 0 1 1 +\nedge 1 0 2 +\n")
        self.assertIn("period 2", cm.exception.obstruction)

    def test_sink_is_rejected(self):
        with self.assertRaises(AperiodicityError) as cm:
            CodingGraph(2, (Edge(0, 0, Generator(1)), Edge(0, 1, Generator(2))))
        self.assertIn("no outgoing edge", str(cm.exception))

    def test_unreachable_vertex_is_rejected(self):
        with self.assertRaises(AperiodicityError) as cm:
            load_graph("vertices 2\nedge 0 0 1 +\nedge 1 1 2 +\nedge 1 0 1 +\n")
        self.assertIn("reachable", str(cm.exception))

    def test_aperiodicity_exponent(self):
        self.assertEqual(fibonacci_graph().aperiodicity_exponent, 2)
        self.assertEqual(build_free_group_graph(2).aperiodicity_exponent, 2)

    def test_aperiodicity_exponent_is_least(self):
        # a 5-cycle with a chord closing a 4-cycle, the extremal case n^2 - 2n + 2
        wielandt = load_graph(
            "vertices 5\nedge 0 1 1 +\nedge 1 2 1 +\nedge 2 3 1 +\nedge 3 4 1 +\nedge 4 0 1 +\nedge 4 1 2 +\n"
        )
        self.assertEqual(wielandt.aperiodicity_exponent, 17)
        self.assertLessEqual(wielandt.aperiodicity_exponent, wielandt.vertex_count ** 2)
        self.assertTrue((matrix_power(wielandt, 17) > 0).all())
        self.assertFalse((matrix_power(wielandt, 16) > 0).all())
        self.assertEqual(check_aperiodic(((1,),)), 1)


if __name__ == "__main__":
    unittest.main()
