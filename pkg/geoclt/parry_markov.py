"""
Parry measure Markov chains and exact uniform sampling of closed paths.

Floating point Perron-Frobenius data is used only where the chain's
transition probabilities need it; everything that counts paths uses the
exact integer powers from coding_graph.MatrixPowers.
"""

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .coding_graph import CodingGraph, GraphPath, MatrixPowers, check_aperiodic
from .errors import (
    BudgetExceededError, ConvergenceError, InvalidParameterError, InvariantError
)
from .utils import Defaults, require_positive_int


@dataclass(frozen=True, eq=False)
class PerronData:
    """Perron eigenvalue with left (u) and right (v) eigenvectors, u.v = 1."""
    eigenvalue: float
    u: np.ndarray
    v: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True, eq=False)
class ParryChain:
    """
    The maximal entropy Markov chain on a coding graph.

    pi[i] = u[i] v[i] is the stationary vertex distribution and an edge
    i -> j is taken with probability v[j] / (lambda v[i]); Q collects these
    into the vertex transition matrix q[i, j] = m[i, j] v[j] / (lambda v[i]).
    """
    graph: CodingGraph
    perron: PerronData
    pi: np.ndarray
    Q: np.ndarray
    edge_probabilities: np.ndarray


@dataclass(frozen=True)
class SeededRng:
    """A reproducible random stream identified by (seed, stream)."""
    seed: int
    stream: int = 0

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidParameterError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if not isinstance(self.stream, int) or self.stream < 0:
            raise InvalidParameterError(f"stream must be a nonnegative integer, got {self.stream!r}")

    def generator(self) -> np.random.Generator:
        """PCG64 generator; identical (seed, stream) gives identical draws on every platform."""
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(sequence))

    def substream(self, index: int) -> "SeededRng":
        return SeededRng(self.seed, index)


RngLike = Union[SeededRng, np.random.Generator]


def _generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator()
    return rng


def perron_frobenius(M: Sequence[Sequence[float]],
                     tol: float = Defaults.PERRON_TOL,
                     max_iter: int = Defaults.PERRON_MAX_ITER) -> PerronData:
    """
    Perron eigendata of an aperiodic nonnegative matrix by power iteration.

    Iterates M and M^T from the all-ones vector with renormalization at every
    step. The eigenvalue is the Rayleigh quotient at convergence; v is scaled
    to sum 1 and u so that u.v = 1.

    Args:
        M: Square nonnegative matrix
        tol: Relative residual target
        max_iter: Iteration cap

    Returns:
        PerronData

    Raises:
        ConvergenceError: if the residual target is not met within max_iter
    """
    A = np.array(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidParameterError(f"expected a nonempty square matrix, got shape {A.shape}")
    if (A < 0).any() or not np.isfinite(A).all():
        raise InvalidParameterError("matrix must be finite and nonnegative")
    check_aperiodic(tuple(tuple(int(x > 0) for x in row) for row in A))

    size = A.shape[0]
    # Rounding floor for the residual of a product with `size` terms
    floor = 8.0 * size * np.finfo(np.float64).eps
    v = np.ones(size)
    u = np.ones(size)
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        v = A @ v
        v /= v.max()
        u = A.T @ u
        u /= u.max()
        Av = A @ v
        uA = A.T @ u
        lam = float(v @ Av) / float(v @ v)
        residual = max(np.abs(Av - lam * v).max(), np.abs(uA - lam * u).max()) / lam
        if residual <= max(tol, floor):
            break
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", residual)

    v = v / v.sum()
    u = u / float(u @ v)
    final = max(np.abs(A @ v - lam * v).max(), np.abs(A.T @ u - lam * u).max())
    return PerronData(eigenvalue=lam, u=u, v=v, residual=float(final), iterations=iteration)


def build_parry_chain(graph: CodingGraph,
                      tol: float = Defaults.PERRON_TOL,
                      max_iter: int = Defaults.PERRON_MAX_ITER) -> ParryChain:
    """
    Build the Parry chain of a coding graph.

    Args:
        graph: Coding graph
        tol: Passed to perron_frobenius
        max_iter: Passed to perron_frobenius

    Returns:
        ParryChain
    """
    perron = perron_frobenius(graph.adjacency, tol=tol, max_iter=max_iter)
    lam, v = perron.eigenvalue, perron.v
    size = graph.vertex_count

    probabilities = np.array([v[e.target] / (lam * v[e.source]) for e in graph.edges])
    # Absorb the eigen-residual so every row sums to one up to rounding
    row_sums = np.zeros(size)
    for index, edge in enumerate(graph.edges):
        row_sums[edge.source] += probabilities[index]
    for index, edge in enumerate(graph.edges):
        probabilities[index] /= row_sums[edge.source]

    Q = np.zeros((size, size))
    for index, edge in enumerate(graph.edges):
        Q[edge.source, edge.target] += probabilities[index]
    pi = perron.u * perron.v
    pi = pi / pi.sum()
    return ParryChain(graph=graph, perron=perron, pi=pi, Q=Q, edge_probabilities=probabilities)


def cylinder_probability(chain: ParryChain, path: GraphPath) -> float:
    """Parry measure of the cylinder of paths beginning with `path`."""
    probability = float(chain.pi[path.start])
    for index in path.edges:
        probability *= float(chain.edge_probabilities[index])
    return probability


def _out_edge_table(graph: CodingGraph) -> Tuple[np.ndarray, np.ndarray]:
    width = graph.max_out_degree()
    table = np.full((graph.vertex_count, width), -1, dtype=np.int64)
    degrees = np.zeros(graph.vertex_count, dtype=np.int64)
    for vertex in range(graph.vertex_count):
        out = graph.out_edges(vertex)
        table[vertex, :len(out)] = out
        degrees[vertex] = len(out)
    return table, degrees


def _edge_targets(graph: CodingGraph) -> np.ndarray:
    return np.array([e.target for e in graph.edges], dtype=np.int64)


def _pick(cdf: np.ndarray, draws: np.ndarray, limit: np.ndarray) -> np.ndarray:
    """Inverse-CDF selection per row, clipped to the last valid slot."""
    slots = (draws[:, None] >= cdf).sum(axis=1)
    return np.minimum(slots, limit - 1)


def sample_paths(chain: ParryChain, n: int, count: int, rng: RngLike,
                 starts: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw `count` independent paths of length n from the Parry chain.

    Args:
        chain: Parry chain
        n: Path length (>= 0)
        count: Number of paths
        rng: Random stream
        starts: Fixed start vertices of shape (count,); drawn from pi when omitted

    Returns:
        (starts of shape (count,), edge indices of shape (count, n))
    """
    if n < 0:
        raise InvalidParameterError(f"path length must be >= 0, got {n}")
    require_positive_int("count", count)
    if starts is not None and np.shape(starts) != (count,):
        raise InvalidParameterError(f"starts must have shape ({count},), got {np.shape(starts)}")
    gen = _generator(rng)
    graph = chain.graph
    table, degrees = _out_edge_table(graph)
    targets = _edge_targets(graph)

    cdf = np.full(table.shape, 2.0)
    for vertex in range(graph.vertex_count):
        out = graph.out_edges(vertex)
        cumulative = np.cumsum(chain.edge_probabilities[list(out)])
        cumulative[-1] = 1.0
        cdf[vertex, :len(out)] = cumulative
    if starts is None:
        start_cdf = np.cumsum(chain.pi)
        start_cdf[-1] = 1.0
        starts = np.minimum(np.searchsorted(start_cdf, gen.random(count), side="right"),
                            graph.vertex_count - 1)
    starts = np.asarray(starts, dtype=np.int64)
    edges = np.empty((count, n), dtype=np.int64)
    current = starts.copy()
    for step in range(n):
        slots = _pick(cdf[current], gen.random(count), degrees[current])
        chosen = table[current, slots]
        edges[:, step] = chosen
        current = targets[chosen]
    return starts, edges


def sample_path(chain: ParryChain, n: int, rng: RngLike) -> GraphPath:
    """
    Draw one path of length n from the Parry chain: start from pi, then step by Q.

    Args:
        chain: Parry chain
        n: Path length (>= 0)
        rng: Random stream

    Returns:
        GraphPath distributed as the length-n marginal of the Parry measure
    """
    starts, edges = sample_paths(chain, n, 1, rng)
    return GraphPath(chain.graph, int(starts[0]), tuple(int(e) for e in edges[0]))


def _uniform_below(bound: int, gen: np.random.Generator) -> int:
    """Exactly uniform integer in [0, bound) by rejection on random bytes."""
    bits = bound.bit_length()
    nbytes = (bits + 7) // 8
    excess = nbytes * 8 - bits
    while True:
        value = int.from_bytes(gen.bytes(nbytes), "big") >> excess
        if value < bound:
            return value


class UniformCycleSampler:
    """
    Uniform sampler for based closed paths of a fixed length n.

    The start vertex s is drawn with probability (M^n)_ss / Tr M^n; with k
    steps left at vertex i the edge i -> j is taken with probability
    (M^(k-1))_js / (M^k)_is. All weights come from exact integer powers.
    """

    # Largest number of cached float entries for the batch step tables
    TABLE_CACHE_LIMIT = 2**24

    def __init__(self, graph: CodingGraph, n: int,
                 powers: Optional[MatrixPowers] = None,
                 max_power: int = Defaults.MAX_POWER):
        """
        Initialize the sampler.

        Args:
            graph: Coding graph
            n: Cycle length (>= 1)
            powers: Shared power cache, created when omitted
            max_power: Cap on n

        Raises:
            BudgetExceededError: if n exceeds max_power
        """
        require_positive_int("n", n)
        if n > max_power:
            raise BudgetExceededError(f"cycle length {n} exceeds the precompute cap", max_power)
        self.graph = graph
        self.n = n
        self.powers = powers if powers is not None else MatrixPowers(graph, max_power)
        self.total = self.powers.trace(n)
        if self.total == 0:
            raise InvalidParameterError(f"the graph has no closed paths of length {n}")
        self._diagonal = [self.powers.entry(n, s, s) for s in range(graph.vertex_count)]
        self._table, self._degrees = _out_edge_table(graph)
        self._targets = _edge_targets(graph)
        cells = n * self._table.size * graph.vertex_count
        self._cache: Optional[Dict[int, np.ndarray]] = {} if cells <= self.TABLE_CACHE_LIMIT else None

        start_cdf = np.cumsum([d / self.total for d in self._diagonal])
        start_cdf[-1] = 1.0
        self._start_cdf = start_cdf

    def _step_cdf(self, k: int) -> np.ndarray:
        """Cumulative edge probabilities with k steps left, shape (V, D, V)."""
        if self._cache is not None and k in self._cache:
            return self._cache[k]
        size = self.graph.vertex_count
        before = self.powers.power(k - 1)
        now = self.powers.power(k)
        cdf = np.full((size, self._table.shape[1], size), 2.0)
        for i in range(size):
            out = self.graph.out_edges(i)
            for s in range(size):
                denominator = now[i, s]
                if not denominator:
                    continue
                running = 0
                for slot, index in enumerate(out):
                    running += before[self.graph.edges[index].target, s]
                    cdf[i, slot, s] = running / denominator
                cdf[i, len(out) - 1, s] = 1.0
        if self._cache is not None:
            self._cache[k] = cdf
        return cdf

    def prepare(self) -> "UniformCycleSampler":
        """Fill the power cache and step tables up front so sample_batch only reads shared state."""
        if self._cache is not None:
            for k in range(1, self.n + 1):
                self._step_cdf(k)
        else:
            self.powers.power(self.n)
        return self

    def sample(self, rng: RngLike) -> GraphPath:
        """Draw one closed path by decoding an exactly uniform rank in [0, Tr M^n)."""
        gen = _generator(rng)
        rank = _uniform_below(self.total, gen)
        start = 0
        for start, weight in enumerate(self._diagonal):
            if rank < weight:
                break
            rank -= weight
        current = start
        edges = []
        for k in range(self.n, 0, -1):
            before = self.powers.power(k - 1)
            for index in self.graph.out_edges(current):
                target = self.graph.edges[index].target
                weight = before[target, start]
                if rank < weight:
                    edges.append(index)
                    current = target
                    break
                rank -= weight
            else:
                raise InvariantError("uniform cycle decoding ran out of edges")
        return GraphPath(self.graph, start, tuple(edges))

    def sample_batch(self, count: int, rng: RngLike) -> Tuple[np.ndarray, np.ndarray]:
        """
        Draw `count` closed paths at once.

        Conditional probabilities are the correctly rounded quotients of the
        exact counts, so the law differs from uniform only by float rounding.

        Returns:
            (starts of shape (count,), edge indices of shape (count, n))
        """
        require_positive_int("count", count)
        gen = _generator(rng)
        starts = np.minimum(np.searchsorted(self._start_cdf, gen.random(count), side="right"),
                            self.graph.vertex_count - 1).astype(np.int64)
        edges = np.empty((count, self.n), dtype=np.int64)
        current = starts.copy()
        for step in range(self.n):
            cdf = self._step_cdf(self.n - step)
            slots = _pick(cdf[current, :, starts], gen.random(count), self._degrees[current])
            chosen = self._table[current, slots]
            edges[:, step] = chosen
            current = self._targets[chosen]
        if (current != starts).any():
            raise InvariantError("batch sampler produced an open path")
        return starts, edges


def sample_uniform_cycle(graph: CodingGraph, n: int, rng: RngLike,
                         max_power: int = Defaults.MAX_POWER) -> GraphPath:
    """
    Draw a based closed path of length n uniformly at random.

    Args:
        graph: Coding graph
        n: Cycle length (>= 1)
        rng: Random stream
        max_power: Precompute cap on n

    Returns:
        Closed GraphPath of length n
    """
    return UniformCycleSampler(graph, n, max_power=max_power).sample(rng)


def prefix(path: GraphPath, k: int) -> GraphPath:
    """First k edges of a path; k = 0 gives the empty path at the start."""
    if not 0 <= k <= path.length:
        raise InvalidParameterError(f"prefix length {k} outside [0, {path.length}]")
    return GraphPath(path.graph, path.start, path.edges[:k])


def shift(path: GraphPath) -> GraphPath:
    """Drop the first edge."""
    if path.length == 0:
        raise InvalidParameterError("cannot shift an empty path")
    return GraphPath(path.graph, path.graph.edges[path.edges[0]].target, path.edges[1:])


def prefix_length(n: int) -> int:
    """Length n - ceil(ln n) of the prefix used by the Radon-Nikodym construction."""
    require_positive_int("n", n)
    return n - math.ceil(math.log(n))


def _check_rn_arguments(n: int, m: int) -> None:
    require_positive_int("n", n, minimum=2)
    if isinstance(m, bool) or not isinstance(m, int) or not 1 <= m < n:
        raise InvalidParameterError(f"need 1 <= m < n, got n={n}, m={m}")


def rn_derivative(graph: CodingGraph, chain: ParryChain, n: int, m: int,
                  prefix_path: GraphPath,
                  powers: Optional[MatrixPowers] = None) -> float:
    """
    Density of the uniform-cycle prefix law against the Parry prefix law.

    For a prefix from vertex i to vertex j of length n - m this is
    (M^m)_ji / Tr M^n * lambda^(n-m) / (u_i v_j).

    Args:
        graph: Coding graph
        chain: Parry chain of the graph
        n: Cycle length
        m: Number of closing steps, 1 <= m < n
        prefix_path: Path of length n - m
        powers: Shared power cache

    Returns:
        The density at the prefix (0 when the prefix cannot be closed)
    """
    _check_rn_arguments(n, m)
    if prefix_path.length != n - m:
        raise InvalidParameterError(f"prefix must have length {n - m}, got {prefix_path.length}")
    powers = powers if powers is not None else MatrixPowers(graph, max(n, Defaults.MAX_POWER))
    i, j = prefix_path.start, prefix_path.end
    closing = powers.entry(m, j, i)
    if closing == 0:
        return 0.0
    perron = chain.perron
    log_value = (math.log(closing) - math.log(powers.trace(n))
                 + (n - m) * math.log(perron.eigenvalue)
                 - math.log(perron.u[i]) - math.log(perron.v[j]))
    return math.exp(log_value)


@dataclass(frozen=True)
class RationalPerron:
    """Exact rational Perron approximants from the k-th adjacency power."""
    eigenvalue: Fraction
    u: Tuple[int, ...]
    v: Tuple[int, ...]
    norm: int  # u.v
    power: int


def rational_perron(powers: MatrixPowers, k: int) -> RationalPerron:
    """
    Rational approximants lambda_k = 1'M^(k+1)1 / 1'M^k 1, v = M^k 1, u = 1'M^k.

    The relative error decays like (|lambda_2| / lambda)^k.
    """
    matrix = powers.power(k)
    size = powers.graph.vertex_count
    v = tuple(int(sum(matrix[i, j] for j in range(size))) for i in range(size))
    u = tuple(int(sum(matrix[i, j] for i in range(size))) for j in range(size))
    eigenvalue = Fraction(powers.total(k + 1), powers.total(k))
    return RationalPerron(eigenvalue, u, v, sum(a * b for a, b in zip(u, v)), k)


def rn_sup_deviation(graph: CodingGraph, n: int, m: int,
                     chain: Optional[ParryChain] = None,
                     exact: bool = True,
                     powers: Optional[MatrixPowers] = None) -> float:
    """
    sup over prefixes of |RN - 1|.

    The density depends only on the prefix's end vertices (i, j), so the sup
    runs over the pairs joined by a path of length n - m. With exact=True the
    Perron data is replaced by rational approximants from M^k with
    k = min(4n, cap) and the deviation is evaluated in rational arithmetic.

    Args:
        graph: Coding graph
        n: Cycle length
        m: Closing steps, 1 <= m < n
        chain: Parry chain, required when exact is False
        exact: Use rational arithmetic
        powers: Shared power cache

    Returns:
        The sup deviation as a float
    """
    _check_rn_arguments(n, m)
    powers = powers if powers is not None else MatrixPowers(graph, max(4 * n + 1, Defaults.MAX_POWER))
    size = graph.vertex_count
    reachable = powers.power(n - m)
    pairs = [(i, j) for i in range(size) for j in range(size) if reachable[i, j]]
    trace = powers.trace(n)

    if not exact:
        if chain is None:
            raise InvalidParameterError("the floating point evaluation needs a Parry chain")
        worst = 0.0
        for i, j in pairs:
            path = _any_path(graph, powers, i, j, n - m)
            worst = max(worst, abs(rn_derivative(graph, chain, n, m, path, powers) - 1.0))
        return worst

    approximant = rational_perron(powers, min(4 * n, powers.max_power - 1))
    growth = approximant.eigenvalue ** (n - m)
    worst = Fraction(0)
    for i, j in pairs:
        value = (powers.entry(m, j, i) * growth * approximant.norm
                 / (trace * approximant.u[i] * approximant.v[j]))
        worst = max(worst, abs(value - 1))
    return float(worst)


def _any_path(graph: CodingGraph, powers: MatrixPowers, i: int, j: int, length: int) -> GraphPath:
    """Some path of the given length from i to j (which must exist)."""
    edges = []
    current = i
    for remaining in range(length, 0, -1):
        for index in graph.out_edges(current):
            target = graph.edges[index].target
            if powers.entry(remaining - 1, target, j):
                edges.append(index)
                current = target
                break
    return GraphPath(graph, i, tuple(edges))


def path_frequencies(starts: np.ndarray, edges: np.ndarray,
                     length: int) -> Dict[Tuple[int, ...], int]:
    """
    Count sampled paths by their first `length` edges.

    Keys are (start, e1, ..., e_length); used to compare empirical prefix
    laws with cylinder probabilities.
    """
    counter: Counter = Counter()
    for start, row in zip(starts.tolist(), edges[:, :length].tolist()):
        counter[(start,) + tuple(row)] += 1
    return dict(counter)
