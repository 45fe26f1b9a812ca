"""
Coding graphs for free groups.

A coding graph is a directed graph whose edges carry generator labels. Its
closed paths of length n encode the conjugacy classes of word length n, and
its integer adjacency matrix M counts them exactly: Tr M^n is the number of
based closed paths of length n.
"""

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    AperiodicityError, BudgetExceededError, GraphParseError,
    InvalidParameterError, InvariantError
)
from .utils import Defaults, require_positive_int, sha256_text


_TOKEN = re.compile(r"([a-zA-Z])(\d*)")


@dataclass(frozen=True)
class Generator:
    """A free generator a_index or its inverse (sign -1)."""
    index: int
    sign: int = 1

    def __post_init__(self):
        if isinstance(self.index, bool) or not isinstance(self.index, int) or self.index < 1:
            raise InvalidParameterError(f"generator index must be >= 1, got {self.index!r}")
        if self.sign not in (1, -1):
            raise InvalidParameterError(f"generator sign must be +1 or -1, got {self.sign!r}")

    def inverse(self) -> "Generator":
        return Generator(self.index, -self.sign)

    @property
    def sort_key(self) -> Tuple[int, int]:
        """Total order a1 < a1^-1 < a2 < a2^-1 < ..."""
        return (self.index, 0 if self.sign > 0 else 1)

    def __str__(self) -> str:
        if self.index <= 26:
            letter = chr(ord("a") + self.index - 1)
            return letter if self.sign > 0 else letter.upper()
        return f"x{self.index}" if self.sign > 0 else f"X{self.index}"

    @classmethod
    def parse(cls, token: str) -> "Generator":
        """
        Parse a single letter.

        Args:
            token: "a".."z" (inverse in upper case), or "x<k>" / "X<k>"

        Returns:
            Generator
        """
        match = _TOKEN.fullmatch(token)
        if not match:
            raise InvalidParameterError(f"not a generator: {token!r}")
        letter, digits = match.groups()
        sign = 1 if letter.islower() else -1
        if digits:
            if letter not in "xX":
                raise InvalidParameterError(f"numbered generators are written x<k>: {token!r}")
            return cls(int(digits), sign)
        return cls(ord(letter.lower()) - ord("a") + 1, sign)


@dataclass(frozen=True)
class GroupWord:
    """A finite sequence of generators, not necessarily reduced."""
    letters: Tuple[Generator, ...] = ()

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Generator]:
        return iter(self.letters)

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return GroupWord(self.letters + other.letters)

    @property
    def length(self) -> int:
        return len(self.letters)

    def is_identity(self) -> bool:
        return not self.letters

    def is_reduced(self) -> bool:
        return all(
            self.letters[i + 1] != self.letters[i].inverse()
            for i in range(len(self.letters) - 1)
        )

    def is_cyclically_reduced(self) -> bool:
        if not self.is_reduced():
            return False
        return len(self.letters) < 2 or self.letters[0] != self.letters[-1].inverse()

    def inverse(self) -> "GroupWord":
        return GroupWord(tuple(g.inverse() for g in reversed(self.letters)))

    def free_reduce(self) -> "GroupWord":
        stack: List[Generator] = []
        for g in self.letters:
            if stack and stack[-1] == g.inverse():
                stack.pop()
            else:
                stack.append(g)
        return GroupWord(tuple(stack))

    def cyclic_reduce(self) -> "GroupWord":
        letters = self.free_reduce().letters
        start, end = 0, len(letters)
        while end - start >= 2 and letters[start] == letters[end - 1].inverse():
            start += 1
            end -= 1
        return GroupWord(letters[start:end])

    def rotate(self, k: int) -> "GroupWord":
        if not self.letters:
            return self
        k %= len(self.letters)
        return GroupWord(self.letters[k:] + self.letters[:k])

    def __str__(self) -> str:
        if not self.letters:
            return "1"
        return "".join(str(g) for g in self.letters)

    @classmethod
    def parse(cls, text: str) -> "GroupWord":
        """
        Parse a word such as "aBab" or "x27 X3"; "1" or "" is the identity.

        Args:
            text: Word text

        Returns:
            GroupWord (not reduced)
        """
        text = text.replace(" ", "")
        if text in ("", "1"):
            return cls()
        letters = []
        position = 0
        for match in _TOKEN.finditer(text):
            if match.start() != position:
                raise InvalidParameterError(f"cannot parse word {text!r}")
            letters.append(Generator.parse(match.group(0)))
            position = match.end()
        if position != len(text):
            raise InvalidParameterError(f"cannot parse word {text!r}")
        return cls(tuple(letters))


@dataclass(frozen=True)
class Edge:
    """A labeled directed edge."""
    source: int
    target: int
    label: Generator


@dataclass(frozen=True)
class CodingGraph:
    """
    Directed graph with generator-labeled edges.

    The adjacency matrix and the aperiodicity certificate are computed at
    construction; a graph that is not aperiodic cannot be constructed.
    """
    vertex_count: int
    edges: Tuple[Edge, ...]
    vertex_labels: Optional[Tuple[str, ...]] = field(default=None, compare=False)
    adjacency: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    aperiodicity_exponent: int = field(init=False, repr=False, compare=False)
    _out_edges: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        require_positive_int("vertex_count", self.vertex_count)
        if self.vertex_count > Defaults.MAX_VERTICES:
            raise InvalidParameterError(
                f"graphs are limited to {Defaults.MAX_VERTICES} vertices, got {self.vertex_count}"
            )
        rows = [[0] * self.vertex_count for _ in range(self.vertex_count)]
        out_edges: List[List[int]] = [[] for _ in range(self.vertex_count)]
        for position, edge in enumerate(self.edges):
            for vertex in (edge.source, edge.target):
                if not 0 <= vertex < self.vertex_count:
                    raise InvalidParameterError(f"edge {position} uses unknown vertex {vertex}")
            rows[edge.source][edge.target] += 1
            out_edges[edge.source].append(position)
        adjacency = tuple(tuple(row) for row in rows)
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "_out_edges", tuple(tuple(e) for e in out_edges))
        object.__setattr__(self, "aperiodicity_exponent", check_aperiodic(adjacency))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def rank(self) -> int:
        """Largest generator index used by an edge label."""
        return max(edge.label.index for edge in self.edges)

    def out_edges(self, vertex: int) -> Tuple[int, ...]:
        return self._out_edges[vertex]

    def max_out_degree(self) -> int:
        return max(len(e) for e in self._out_edges)

    def adjacency_matrix(self) -> np.ndarray:
        """Exact adjacency matrix as an object-dtype array of Python ints."""
        matrix = np.empty((self.vertex_count, self.vertex_count), dtype=object)
        for i, row in enumerate(self.adjacency):
            for j, value in enumerate(row):
                matrix[i, j] = value
        return matrix

    def labels(self) -> List[Generator]:
        """Distinct edge labels in the fixed generator order."""
        return sorted({edge.label for edge in self.edges}, key=lambda g: g.sort_key)


@dataclass(frozen=True)
class GraphPath:
    """
    A path in a coding graph, given by a start vertex and edge indices.

    The empty path at a vertex is allowed.
    """
    graph: CodingGraph = field(repr=False, compare=False)
    start: int
    edges: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.start < self.graph.vertex_count:
            raise InvalidParameterError(f"unknown start vertex {self.start}")
        current = self.start
        for position, index in enumerate(self.edges):
            if not 0 <= index < self.graph.edge_count:
                raise InvalidParameterError(f"unknown edge index {index}")
            edge = self.graph.edges[index]
            if edge.source != current:
                raise InvalidParameterError(
                    f"edge {position} starts at {edge.source}, path is at vertex {current}"
                )
            current = edge.target

    @classmethod
    def from_edges(cls, graph: CodingGraph, edges: Sequence[int]) -> "GraphPath":
        if not edges:
            raise InvalidParameterError("an empty path needs an explicit start vertex")
        edges = tuple(int(e) for e in edges)
        return cls(graph, graph.edges[edges[0]].source, edges)

    @classmethod
    def empty(cls, graph: CodingGraph, vertex: int) -> "GraphPath":
        return cls(graph, vertex, ())

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def end(self) -> int:
        if not self.edges:
            return self.start
        return self.graph.edges[self.edges[-1]].target

    @property
    def is_closed(self) -> bool:
        return self.end == self.start

    @property
    def labels(self) -> Tuple[Generator, ...]:
        return tuple(self.graph.edges[e].label for e in self.edges)


@dataclass(frozen=True)
class ConjugacyClass:
    """Conjugacy class in a free group, stored as its minimal cyclic rotation."""
    canonical: GroupWord

    @classmethod
    def from_word(cls, word: GroupWord) -> "ConjugacyClass":
        reduced = word.cyclic_reduce()
        return cls(GroupWord(_min_rotation(reduced.letters)))

    @property
    def length(self) -> int:
        return self.canonical.length

    def __str__(self) -> str:
        return f"[{self.canonical}]"


def _min_rotation(letters: Tuple[Generator, ...]) -> Tuple[Generator, ...]:
    if not letters:
        return letters
    keys = [g.sort_key for g in letters]
    best = min(range(len(keys)), key=lambda r: keys[r:] + keys[:r])
    return letters[best:] + letters[:best]


def _diagnose_period(adjacency: Tuple[Tuple[int, ...], ...]) -> str:
    size = len(adjacency)
    for v in range(size):
        if not any(adjacency[v]):
            return f"vertex {v} has no outgoing edge"
        if not any(adjacency[u][v] for u in range(size)):
            return f"vertex {v} has no incoming edge"

    def reachable(forward: bool) -> List[int]:
        level = [-1] * size
        level[0] = 0
        frontier = [0]
        while frontier:
            nxt = []
            for u in frontier:
                for w in range(size):
                    weight = adjacency[u][w] if forward else adjacency[w][u]
                    if weight and level[w] < 0:
                        level[w] = level[u] + 1
                        nxt.append(w)
            frontier = nxt
        return level

    forward = reachable(True)
    for v, depth in enumerate(forward):
        if depth < 0:
            return f"vertex {v} is not reachable from vertex 0"
    for v, depth in enumerate(reachable(False)):
        if depth < 0:
            return f"vertex 0 is not reachable from vertex {v}"

    period = 0
    for u in range(size):
        for w in range(size):
            if adjacency[u][w]:
                period = math.gcd(period, abs(forward[u] + 1 - forward[w]))
    if period > 1:
        return f"period {period}: every cycle length is a multiple of {period}"
    return "no power of the adjacency matrix up to the Wielandt bound is positive"


def check_aperiodic(adjacency: Tuple[Tuple[int, ...], ...]) -> int:
    """
    Certify that a nonnegative integer matrix is aperiodic.

    Squares the Boolean pattern repeatedly until it is positive or the
    exponent reaches vertex_count squared, which is beyond the Wielandt
    bound. The last square that was not yet positive is then stepped up one
    power at a time to the first positive one.

    Args:
        adjacency: Square matrix of nonnegative integers

    Returns:
        The least exponent k with M^k entrywise positive

    Raises:
        AperiodicityError: naming the obstruction when no such k exists
    """
    size = len(adjacency)
    base = (np.array(adjacency, dtype=np.int64) > 0).astype(np.int64)
    pattern = base > 0
    previous = None
    exponent = 1
    while not pattern.all():
        if exponent >= size * size:
            raise AperiodicityError(_diagnose_period(adjacency))
        previous = pattern
        as_int = pattern.astype(np.int64)
        pattern = (as_int @ as_int) > 0
        exponent *= 2
    if previous is None:
        return 1
    # powers of an irreducible matrix stay positive once positive
    exponent //= 2
    while not previous.all():
        previous = (previous.astype(np.int64) @ base) > 0
        exponent += 1
    return exponent


def free_group_vertex(generator: Generator) -> int:
    """Vertex of the free-group coding graph that records the last letter read."""
    return 2 * (generator.index - 1) + (0 if generator.sign > 0 else 1)


def build_free_group_graph(rank: int) -> CodingGraph:
    """
    Build the coding graph of the free group of the given rank.

    Vertices are the 2N letters a_i^(+/-1). The edge from the vertex of g to
    the vertex of h is labeled h and exists unless h is the inverse of g, so
    paths read exactly the reduced words and closed paths the cyclically
    reduced ones.

    Args:
        rank: Number of free generators N (at least 2)

    Returns:
        CodingGraph with 2N vertices and 2N(2N-1) edges
    """
    if isinstance(rank, bool) or not isinstance(rank, int) or rank < 2:
        raise InvalidParameterError(f"free group rank must be an integer >= 2, got {rank!r}")
    letters = [Generator(i, s) for i in range(1, rank + 1) for s in (1, -1)]
    edges = []
    for g in letters:
        for h in letters:
            if h != g.inverse():
                edges.append(Edge(free_group_vertex(g), free_group_vertex(h), h))
    return CodingGraph(
        vertex_count=2 * rank,
        edges=tuple(edges),
        vertex_labels=tuple(str(g) for g in letters),
    )


def load_graph(content: Union[bytes, str]) -> CodingGraph:
    """
    Parse a graph file.

    Format: a header line ``vertices <count>`` followed by one line per edge
    ``edge <src> <dst> <gen_index> <sign>`` with 0-based vertices and sign
    ``+`` or ``-``. ``#`` starts a comment. Graphs other than the built-in
    free-group graphs may code some conjugacy classes more than once or not at
    all; such exceptions are not modelled.

    Args:
        content: File content

    Returns:
        Validated CodingGraph
    """
    if isinstance(content, bytes):
        try:
            content = content.decode("utf-8")
        except UnicodeDecodeError as e:
            raise GraphParseError(f"graph file is not UTF-8: {e}")

    vertex_count = None
    edges = []
    for number, raw in enumerate(content.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "vertices":
            if vertex_count is not None:
                raise GraphParseError("duplicate vertices header", number)
            if len(parts) != 2:
                raise GraphParseError("expected 'vertices <count>'", number)
            try:
                vertex_count = int(parts[1])
            except ValueError:
                raise GraphParseError(f"vertex count is not an integer: {parts[1]!r}", number)
            if not 1 <= vertex_count <= Defaults.MAX_VERTICES:
                raise GraphParseError(
                    f"vertex count must be in [1, {Defaults.MAX_VERTICES}], got {vertex_count}",
                    number,
                )
        elif parts[0] == "edge":
            if vertex_count is None:
                raise GraphParseError("edge before the vertices header", number)
            if len(parts) != 5:
                raise GraphParseError("expected 'edge <src> <dst> <gen_index> <sign>'", number)
            try:
                source, target, index = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError:
                raise GraphParseError("edge fields must be integers", number)
            if parts[4] not in ("+", "-"):
                raise GraphParseError(f"sign must be '+' or '-', got {parts[4]!r}", number)
            for vertex in (source, target):
                if not 0 <= vertex < vertex_count:
                    raise GraphParseError(f"vertex {vertex} out of range", number)
            if index < 1:
                raise GraphParseError(f"generator index must be >= 1, got {index}", number)
            edges.append(Edge(source, target, Generator(index, 1 if parts[4] == "+" else -1)))
        else:
            raise GraphParseError(f"unknown directive {parts[0]!r}", number)

    if vertex_count is None:
        raise GraphParseError("missing vertices header")
    return CodingGraph(vertex_count=vertex_count, edges=tuple(edges))


def dump_graph(graph: CodingGraph) -> str:
    """Serialize a graph in the graph file format."""
    lines = [f"vertices {graph.vertex_count}"]
    for edge in graph.edges:
        sign = "+" if edge.label.sign > 0 else "-"
        lines.append(f"edge {edge.source} {edge.target} {edge.label.index} {sign}")
    return "\n".join(lines) + "\n"


def graph_hash(graph: CodingGraph) -> str:
    return sha256_text(dump_graph(graph))


def _check_power(n: int, max_power: int) -> None:
    require_positive_int("n", n)
    if n > max_power:
        raise BudgetExceededError(f"matrix power {n} exceeds the configured cap", max_power)


def matrix_power(graph: CodingGraph, n: int, max_power: int = Defaults.MAX_POWER) -> np.ndarray:
    """
    Exact M^n by repeated squaring.

    Args:
        graph: Coding graph
        n: Exponent (0 allowed)
        max_power: Configured cap on n

    Returns:
        Object-dtype array of Python ints
    """
    if n == 0:
        return MatrixPowers(graph).power(0)
    _check_power(n, max_power)
    base = graph.adjacency_matrix()
    result = None
    while n:
        if n & 1:
            result = base.copy() if result is None else result.dot(base)
        n >>= 1
        if n:
            base = base.dot(base)
    return result


class MatrixPowers:
    """Cache of exact powers M^0, M^1, ... of a graph's adjacency matrix."""

    def __init__(self, graph: CodingGraph, max_power: int = Defaults.MAX_POWER):
        """
        Initialize the cache.

        Args:
            graph: Coding graph
            max_power: Largest exponent the cache will hold
        """
        self.graph = graph
        self.max_power = max_power
        self._adjacency = graph.adjacency_matrix()
        identity = np.empty((graph.vertex_count, graph.vertex_count), dtype=object)
        for i in range(graph.vertex_count):
            for j in range(graph.vertex_count):
                identity[i, j] = 1 if i == j else 0
        self._powers: List[np.ndarray] = [identity]

    def power(self, k: int) -> np.ndarray:
        if k < 0:
            raise InvalidParameterError(f"negative matrix power {k}")
        if k > self.max_power:
            raise BudgetExceededError(f"matrix power {k} exceeds the configured cap", self.max_power)
        while len(self._powers) <= k:
            self._powers.append(self._powers[-1].dot(self._adjacency))
        return self._powers[k]

    def entry(self, k: int, i: int, j: int) -> int:
        return int(self.power(k)[i, j])

    def trace(self, k: int) -> int:
        p = self.power(k)
        return int(sum(p[i, i] for i in range(self.graph.vertex_count)))

    def total(self, k: int) -> int:
        return int(sum(self.power(k).flat))


def trace_power(graph: CodingGraph, n: int, max_power: int = Defaults.MAX_POWER) -> int:
    """
    Number of based closed paths of length n, Tr M^n, computed exactly.

    Args:
        graph: Coding graph
        n: Path length (>= 1)
        max_power: Configured cap on n

    Returns:
        Tr M^n as a Python int
    """
    p = matrix_power(graph, n, max_power)
    return int(sum(p[i, i] for i in range(graph.vertex_count)))


def path_count(graph: CodingGraph, n: int, max_power: int = Defaults.MAX_POWER) -> int:
    """Number of paths of length n: the sum of all entries of M^n."""
    if n == 0:
        return graph.vertex_count
    return int(sum(matrix_power(graph, n, max_power).flat))


def path_cycle_ratio(graph: CodingGraph, n: int, max_power: int = Defaults.MAX_POWER) -> Fraction:
    """Exact ratio of all paths of length n to based closed paths of length n."""
    return Fraction(path_count(graph, n, max_power), trace_power(graph, n, max_power))


def _divisors(n: int) -> List[int]:
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def primitive_cycle_counts(graph: CodingGraph, n: int,
                           max_power: int = Defaults.MAX_POWER) -> Dict[int, int]:
    """
    Counts of primitive cycles (basepoint forgotten) for every divisor of n.

    Uses n * #primitive(n) = Tr M^n - sum over proper divisors d of d * #primitive(d).

    Returns:
        Mapping divisor -> count
    """
    _check_power(n, max_power)
    counts: Dict[int, int] = {}
    for d in _divisors(n):
        rest = trace_power(graph, d, max_power) - sum(e * counts[e] for e in counts if d % e == 0)
        if rest % d:
            raise InvariantError(
                f"primitive cycle count at length {d} is not an integer ({rest}/{d}); "
                "the graph's cycles violate the coding assumptions"
            )
        counts[d] = rest // d
    return counts


def count_primitive_cycles(graph: CodingGraph, n: int, max_power: int = Defaults.MAX_POWER) -> int:
    """
    Number of primitive cycles of length n with the basepoint forgotten.

    Args:
        graph: Coding graph
        n: Cycle length (>= 1)
        max_power: Configured cap on n

    Returns:
        Exact count
    """
    return primitive_cycle_counts(graph, n, max_power)[n]


def iter_cycle_edges(graph: CodingGraph, n: int) -> Iterator[Tuple[int, Tuple[int, ...]]]:
    """
    Yield every based closed path of length n as (start, edge tuple).

    Branches that cannot return to the start in the remaining steps are pruned.
    """
    require_positive_int("n", n)
    powers = MatrixPowers(graph, max_power=max(n, 1))
    can_close = [powers.power(k) != 0 for k in range(n)]
    edges = graph.edges
    for start in range(graph.vertex_count):
        stack = [(start, ())]
        while stack:
            vertex, path = stack.pop()
            remaining = n - len(path)
            if remaining == 0:
                yield start, path
                continue
            for index in reversed(graph.out_edges(vertex)):
                target = edges[index].target
                if can_close[remaining - 1][target, start]:
                    stack.append((target, path + (index,)))


def enumerate_cycles(graph: CodingGraph, n: int,
                     budget: int = Defaults.ENUMERATION_BUDGET) -> List[GraphPath]:
    """
    Materialize all based closed paths of length n.

    Args:
        graph: Coding graph
        n: Cycle length (>= 1)
        budget: Largest number of paths that may be materialized

    Returns:
        Exactly Tr M^n distinct closed paths

    Raises:
        BudgetExceededError: if Tr M^n exceeds the budget
    """
    total = trace_power(graph, n)
    if total > budget:
        raise BudgetExceededError(f"{total:,} closed paths of length {n} exceed the enumeration budget", budget)
    return [GraphPath(graph, start, path) for start, path in iter_cycle_edges(graph, n)]


def is_primitive(cycle: GraphPath) -> bool:
    """
    True iff the closed path is not a k-fold repetition of a shorter one.

    Args:
        cycle: Closed path of length >= 1
    """
    if not cycle.is_closed or cycle.length == 0:
        raise InvalidParameterError("is_primitive needs a closed path of length >= 1")
    edges = cycle.edges
    n = len(edges)
    for d in _divisors(n)[:-1]:
        if edges == edges[:d] * (n // d):
            return False
    return True


def evaluate_path(path: GraphPath) -> GroupWord:
    """
    Read the edge labels of a path as a group word.

    Directed paths in a coding graph are geodesics, so the word is reduced
    and its length equals the path length.
    """
    word = GroupWord(path.labels)
    if not word.is_reduced():
        raise InvariantError(f"path reads the non-reduced word {word}")
    return word


def cycle_to_conjugacy_class(cycle: GraphPath) -> ConjugacyClass:
    """
    Map a closed path to the conjugacy class it codes.

    Args:
        cycle: Closed path of length >= 1

    Returns:
        ConjugacyClass whose canonical word is the minimal rotation of the labels
    """
    if not cycle.is_closed or cycle.length == 0:
        raise InvalidParameterError("only closed paths of length >= 1 code conjugacy classes")
    word = evaluate_path(cycle)
    if not word.is_cyclically_reduced():
        raise InvariantError(f"closed path reads the word {word}, which is not cyclically reduced")
    return ConjugacyClass(GroupWord(_min_rotation(word.letters)))
