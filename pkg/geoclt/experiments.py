"""
Monte Carlo and exact experiments on coding graphs and their representations.

Sampling runs in fixed chunks of Defaults.CHUNK_SIZE paths. Chunk c of a
run always draws from the stream (seed, base + c) and results are joined in
chunk order, so the worker count changes wall time but never a report.
"""

import math
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr

from . import __version__
from .coding_graph import (
    CodingGraph, MatrixPowers, graph_hash, iter_cycle_edges, path_count, trace_power
)
from .errors import BudgetExceededError, InvalidParameterError, RepresentationError
from .hyperbolic import FuchsianRep, evaluate_batch, representation_hash
from .parry_markov import (
    ParryChain, SeededRng, UniformCycleSampler, build_parry_chain, rn_sup_deviation, sample_paths
)
from .utils import Defaults, require_positive_int


SAMPLERS = ("uniform", "markov")
STATISTICS = ("translation_length", "displacement")

# Stream layout: chunk index in the low 32 bits, path length above it, role on top
_LENGTH_SHIFT = 32
_ROLE_SHIFT = 48
ROLE_MAIN, ROLE_PREFIX, ROLE_TAIL_X, ROLE_TAIL_Y = range(4)

# Relative spread below which a sample is treated as constant
_DEGENERATE_SPREAD = 1e-12


def stream_base(n: int, role: int = ROLE_MAIN) -> int:
    """First stream index used for paths of length n in the given role."""
    return (role << _ROLE_SHIFT) + (n << _LENGTH_SHIFT)


def _config(graph: CodingGraph, rep: Optional[FuchsianRep] = None, **parameters: Any) -> Dict[str, Any]:
    config: Dict[str, Any] = {"graph_hash": graph_hash(graph), "version": __version__}
    if rep is not None:
        config["representation_hash"] = representation_hash(rep)
        config["basepoint"] = [rep.basepoint.x, rep.basepoint.y]
    config.update(parameters)
    return config


@dataclass
class CLTReport:
    """Self-normalized CLT run for one path length."""
    n: int
    sample_count: int
    seed: int
    basepoint: Tuple[float, float]
    statistic_kind: str
    sampler: str
    mean: float
    variance: float
    L_hat: float
    sigma_hat: float
    ks_statistic: float
    normalized_sample: np.ndarray = field(repr=False)
    normalized_sample_path: Optional[str] = None
    config: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


@dataclass
class DecayRow:
    n: int
    sample_count: int
    exceed_fraction: float


@dataclass
class DecayReport:
    """Fractions of paths with (gz, g^-1 z)_z > epsilon sqrt(n), one epsilon."""
    epsilon: float
    rows: List[DecayRow]


@dataclass
class DecaySeries:
    reports: List[DecayReport]
    config: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


@dataclass
class TVRow:
    n: int
    cycles: int
    classes: int
    tv_distance: float


@dataclass
class TVReport:
    rows: List[TVRow]
    config: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


@dataclass
class RNRow:
    n: int
    m: int
    sup_deviation: float


@dataclass
class RNReport:
    rows: List[RNRow]
    config: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


@dataclass
class EstimateRow:
    n: int
    sample_count: int
    L_hat: float
    sigma_hat: float


@dataclass
class EstimateReport:
    """Per-n estimates of the drift L and the spread sigma."""
    rows: List[EstimateRow]
    L_spread: Optional[float] = None
    sigma_spread: Optional[float] = None
    config: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


@dataclass
class RatioRow:
    n: int
    paths: int
    closed_paths: int
    ratio: float


@dataclass
class RatioReport:
    rows: List[RatioRow]
    config: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


@dataclass
class ResidualRow:
    n: int
    sample_count: int
    max_residual: float
    mean_residual: float


@dataclass
class ResidualReport:
    """|tau - d(z, gz) + 2 (gz, g^-1 z)_z| over uniform cycles."""
    rows: List[ResidualRow]
    noise_floor: float = Defaults.RESIDUAL_NOISE_FLOOR
    growth_ratio: Optional[float] = None
    config: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


@dataclass
class HolderRow:
    k: int
    pairs: int
    max_difference: float


@dataclass
class HolderReport:
    """Max |DF(x) - DF(y)| over pairs sharing a prefix of length k."""
    rows: List[HolderRow]
    slope: Optional[float] = None
    config: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


@dataclass
class DefectRow:
    n: int
    sample_count: int
    max_defect: float
    mean_defect: float


@dataclass
class DefectReport:
    """Gromov products (z, g_L z) based at g_n z along Parry-chain paths."""
    length: int
    rows: List[DefectRow]
    config: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


def _primitive_mask(edges: np.ndarray) -> np.ndarray:
    """True for rows that are not a repetition of a shorter block."""
    count, n = edges.shape
    mask = np.ones(count, dtype=bool)
    for d in range(1, n):
        if n % d == 0:
            mask &= ~np.all(edges == np.tile(edges[:, :d], n // d), axis=1)
    return mask


class PathDrawer:
    """
    Draws chunks of equal-length paths: uniform closed paths or Parry-chain paths.
    """

    def __init__(self, graph: CodingGraph, n: int, sampler: str = "uniform",
                 chain: Optional[ParryChain] = None,
                 powers: Optional[MatrixPowers] = None,
                 primitive_only: bool = False):
        """
        Initialize the drawer.

        Args:
            graph: Coding graph
            n: Path length (>= 1)
            sampler: "uniform" for closed paths under the counting measure,
                "markov" for Parry-chain paths
            chain: Parry chain, built when needed and omitted
            powers: Shared exact power cache
            primitive_only: Reject closed paths that are proper powers
        """
        require_positive_int("n", n)
        if sampler not in SAMPLERS:
            raise InvalidParameterError(f"sampler must be one of {', '.join(SAMPLERS)}, got {sampler!r}")
        if primitive_only and sampler != "uniform":
            raise InvalidParameterError("primitive-only filtering applies to the uniform cycle sampler")
        self.graph = graph
        self.n = n
        self.sampler = sampler
        self.primitive_only = primitive_only
        self._uniform = None
        self._chain = None
        if sampler == "uniform":
            self._uniform = UniformCycleSampler(graph, n, powers=powers).prepare()
        else:
            self._chain = chain if chain is not None else build_parry_chain(graph)

    def draw(self, count: int, rng: SeededRng) -> Tuple[np.ndarray, np.ndarray]:
        if self._uniform is not None:
            starts, edges = self._uniform.sample_batch(count, rng)
        else:
            starts, edges = sample_paths(self._chain, self.n, count, rng)
        if self.primitive_only:
            keep = _primitive_mask(edges)
            starts, edges = starts[keep], edges[keep]
        return starts, edges


def collect(drawer: PathDrawer, count: int, seed: int,
            evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray],
            threads: int = Defaults.THREADS,
            chunk_size: int = Defaults.CHUNK_SIZE,
            base: int = 0) -> np.ndarray:
    """
    Draw `count` paths in chunks and evaluate each chunk.

    Chunk c holds min(chunk_size, count - c * chunk_size) paths, or a full
    chunk once the nominal chunks are used up (primitive filtering), and
    draws from SeededRng(seed, base + c).

    Args:
        drawer: Path source
        count: Number of evaluated paths wanted
        seed: Run seed
        evaluate: Maps (starts, edges) of a chunk to an array with one row per path
        threads: Worker threads
        chunk_size: Paths per chunk
        base: First stream index

    Returns:
        The first `count` rows, in chunk order
    """
    require_positive_int("count", count)
    require_positive_int("threads", threads)
    require_positive_int("chunk_size", chunk_size)
    nominal = math.ceil(count / chunk_size)
    limit = 100 * nominal + 100

    def run(chunk: int) -> np.ndarray:
        size = min(chunk_size, count - chunk * chunk_size) if chunk < nominal else chunk_size
        starts, edges = drawer.draw(size, SeededRng(seed, base + chunk))
        return evaluate(starts, edges)

    parts: List[np.ndarray] = []
    collected = 0
    chunk = 0
    with ThreadPoolExecutor(max_workers=threads) as pool:
        while collected < count:
            if chunk >= limit:
                raise BudgetExceededError(
                    f"collected only {collected} of {count} paths after {chunk} chunks", limit
                )
            wave = range(chunk, chunk + threads)
            for part in pool.map(run, wave):
                parts.append(part)
                collected += len(part)
            chunk += threads
    return np.concatenate(parts)[:count]


def ks_statistic(sample: Sequence[float]) -> float:
    """
    One-sample Kolmogorov-Smirnov distance to the standard normal.

    Both one-sided limits are taken at every sorted point:
    max over i of max(i/n - Phi(x_i), Phi(x_i) - (i - 1)/n).

    Args:
        sample: Nonempty sample

    Returns:
        Value in [0, 1]
    """
    values = np.sort(np.asarray(sample, dtype=np.float64))
    if values.size == 0:
        raise InvalidParameterError("the KS statistic needs a nonempty sample")
    if not np.isfinite(values).all():
        raise InvalidParameterError("sample contains non-finite values")
    count = values.size
    cdf = ndtr(values)
    ranks = np.arange(1, count + 1)
    above = ranks / count - cdf
    below = cdf - (ranks - 1) / count
    return float(min(max(above.max(), below.max(), 0.0), 1.0))


def _statistic_values(rep: FuchsianRep, graph: CodingGraph, statistic: str,
                      edges: np.ndarray) -> np.ndarray:
    batch = evaluate_batch(rep, graph, edges)
    if statistic == "displacement":
        return batch.displacements()
    values = batch.translation_lengths()
    if (values <= 0).any():
        raise RepresentationError(
            f"{int((values <= 0).sum())} nontrivial words have |trace| <= 2; "
            "the representation is not discrete and faithful with hyperbolic images"
        )
    return values


def _check_statistic(statistic: str) -> None:
    if statistic not in STATISTICS:
        raise InvalidParameterError(
            f"statistic must be one of {', '.join(STATISTICS)}, got {statistic!r}"
        )


def _check_increasing(name: str, values: Sequence[int]) -> None:
    if not values:
        raise InvalidParameterError(f"{name} must not be empty")
    for value in values:
        require_positive_int(name, value)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidParameterError(f"{name} must be strictly increasing, got {list(values)}")


def _moments(values: np.ndarray, n: int) -> Tuple[float, float, float, float, bool]:
    mean = float(values.mean())
    variance = float(values.var(ddof=1)) if values.size > 1 else 0.0
    degenerate = math.sqrt(variance) <= _DEGENERATE_SPREAD * max(1.0, abs(mean))
    sigma_hat = 0.0 if degenerate else math.sqrt(variance / n)
    return mean, variance, mean / n, sigma_hat, degenerate


def run_clt(rep: FuchsianRep, graph: CodingGraph, chain: Optional[ParryChain],
            n: int, samples: int, seed: int,
            statistic_kind: str = "translation_length",
            sampler: str = "uniform",
            primitive_only: bool = False,
            threads: int = Defaults.THREADS,
            chunk_size: int = Defaults.CHUNK_SIZE) -> CLTReport:
    """
    Sample a statistic at length n and compare its normalization with N(0, 1).

    The uniform sampler draws through UniformCycleSampler.sample_batch, whose
    step probabilities are rounded quotients of exact counts, so the law is
    uniform up to float rounding. UniformCycleSampler.sample is the exactly
    uniform path for single draws.

    Args:
        rep: Representation
        graph: Coding graph
        chain: Parry chain (used by the markov sampler, built if omitted)
        n: Path length (>= 1)
        samples: Sample size (>= Defaults.MIN_CLT_SAMPLES)
        seed: Run seed
        statistic_kind: "translation_length" or "displacement"
        sampler: "uniform" or "markov"
        primitive_only: Keep only primitive cycles
        threads: Worker threads
        chunk_size: Paths per chunk

    Returns:
        CLTReport
    """
    require_positive_int("n", n)
    require_positive_int("samples", samples, minimum=Defaults.MIN_CLT_SAMPLES)
    _check_statistic(statistic_kind)
    drawer = PathDrawer(graph, n, sampler, chain=chain, primitive_only=primitive_only)
    values = collect(drawer, samples, seed,
                     lambda starts, edges: _statistic_values(rep, graph, statistic_kind, edges),
                     threads=threads, chunk_size=chunk_size, base=stream_base(n))

    mean, variance, L_hat, sigma_hat, degenerate = _moments(values, n)
    notes = []
    if degenerate:
        message = f"the {statistic_kind} sample at n={n} is constant; no normalization is possible"
        warnings.warn(message, RuntimeWarning)
        notes.append(message)
        normalized = np.zeros_like(values)
    else:
        normalized = (values - mean) / math.sqrt(variance)

    return CLTReport(
        n=n,
        sample_count=int(values.size),
        seed=seed,
        basepoint=(rep.basepoint.x, rep.basepoint.y),
        statistic_kind=statistic_kind,
        sampler=sampler,
        mean=mean,
        variance=variance,
        L_hat=L_hat,
        sigma_hat=sigma_hat,
        ks_statistic=ks_statistic(normalized),
        normalized_sample=normalized,
        config=_config(graph, rep, seed=seed, n=n, samples=samples, sampler=sampler,
                       statistic=statistic_kind, primitive_only=primitive_only),
        warnings=notes,
    )


def gromov_decay(rep: FuchsianRep, graph: CodingGraph, chain: Optional[ParryChain],
                 epsilons: Sequence[float], ns: Sequence[int], samples: int, seed: int,
                 sampler: str = "uniform",
                 threads: int = Defaults.THREADS,
                 chunk_size: int = Defaults.CHUNK_SIZE) -> DecaySeries:
    """
    Fraction of paths whose self Gromov product exceeds epsilon sqrt(n).

    The same sample is used for every epsilon at a given n, so the fractions
    are antitone in epsilon.

    Returns:
        DecaySeries with one DecayReport per epsilon
    """
    _check_increasing("ns", list(ns))
    if not epsilons or not all(math.isfinite(e) and e > 0 for e in epsilons):
        raise InvalidParameterError(f"epsilons must be positive, got {list(epsilons)}")
    require_positive_int("samples", samples)

    products = {}
    for n in ns:
        drawer = PathDrawer(graph, n, sampler, chain=chain)
        products[n] = collect(
            drawer, samples, seed,
            lambda starts, edges: evaluate_batch(rep, graph, edges).self_gromov_products(),
            threads=threads, chunk_size=chunk_size, base=stream_base(n),
        )

    reports = []
    for epsilon in epsilons:
        rows = [
            DecayRow(n, samples, float((products[n] > epsilon * math.sqrt(n)).mean()))
            for n in ns
        ]
        reports.append(DecayReport(epsilon=float(epsilon), rows=rows))
    config = _config(graph, rep, seed=seed, ns=list(ns), samples=samples, sampler=sampler,
                     epsilons=[float(e) for e in epsilons])
    return DecaySeries(reports=reports, config=config)


def _class_key(codes: Sequence[int]) -> Tuple[int, ...]:
    codes = tuple(codes)
    return min(codes[r:] + codes[:r] for r in range(len(codes)))


def tv_pushforward(graph: CodingGraph, n: int,
                   budget: int = Defaults.ENUMERATION_BUDGET) -> TVRow:
    """
    Exact total variation between pushed-forward uniform cycles and uniform classes.

    Every based closed path of length n is mapped to its conjugacy class; the
    uniform law on paths pushes forward to fiber_size / Tr M^n on the classes
    hit, and is compared with the uniform law on those classes.

    Args:
        graph: Coding graph
        n: Cycle length
        budget: Enumeration budget

    Returns:
        TVRow
    """
    total = trace_power(graph, n)
    if total > budget:
        raise BudgetExceededError(f"{total:,} closed paths of length {n} exceed the enumeration budget", budget)
    codes = [2 * (e.label.index - 1) + (0 if e.label.sign > 0 else 1) for e in graph.edges]
    fibers: Counter = Counter()
    for _, path in iter_cycle_edges(graph, n):
        fibers[_class_key([codes[e] for e in path])] += 1
    classes = len(fibers)
    distance = 0.5 * sum(abs(size / total - 1.0 / classes) for size in fibers.values())
    return TVRow(n=n, cycles=total, classes=classes, tv_distance=min(distance, 1.0))


def tv_convergence(graph: CodingGraph, ns: Sequence[int],
                   budget: int = Defaults.ENUMERATION_BUDGET) -> TVReport:
    """tv_pushforward for each n."""
    _check_increasing("ns", list(ns))
    rows = [tv_pushforward(graph, n, budget) for n in ns]
    return TVReport(rows=rows, config=_config(graph, ns=list(ns), budget=budget))


def rn_convergence(graph: CodingGraph, chain: Optional[ParryChain],
                   pairs: Sequence[Tuple[int, int]], exact: bool = True) -> RNReport:
    """
    Sup deviation of the cycle-prefix density from 1 for each (n, m).

    Args:
        graph: Coding graph
        chain: Parry chain (needed only when exact is False)
        pairs: (n, m) with 1 <= m < n
        exact: Rational evaluation

    Returns:
        RNReport
    """
    if not pairs:
        raise InvalidParameterError("pairs must not be empty")
    largest = max(n for n, _ in pairs)
    powers = MatrixPowers(graph, max(4 * largest + 1, Defaults.MAX_POWER))
    if not exact and chain is None:
        chain = build_parry_chain(graph)
    rows = [RNRow(n, m, rn_sup_deviation(graph, n, m, chain=chain, exact=exact, powers=powers))
            for n, m in pairs]
    return RNReport(rows=rows, config=_config(graph, pairs=[[n, m] for n, m in pairs], exact=exact))


def _relative_spread(a: float, b: float) -> Optional[float]:
    if b == 0:
        return None
    return abs(a - b) / abs(b)


def estimate_L_sigma(rep: FuchsianRep, graph: CodingGraph, chain: Optional[ParryChain],
                     ns: Sequence[int], samples: int, seed: int,
                     statistic_kind: str = "displacement",
                     sampler: str = "markov",
                     threads: int = Defaults.THREADS,
                     chunk_size: int = Defaults.CHUNK_SIZE) -> EstimateReport:
    """
    Estimate L and sigma at several lengths with a common sample budget.

    The spreads compare the two largest n: |x(n_max) - x(n_prev)| / x(n_prev).

    Returns:
        EstimateReport
    """
    _check_increasing("ns", list(ns))
    require_positive_int("samples", samples, minimum=2)
    _check_statistic(statistic_kind)
    if sampler == "markov" and chain is None:
        chain = build_parry_chain(graph)

    rows = []
    notes = []
    for n in ns:
        drawer = PathDrawer(graph, n, sampler, chain=chain)
        values = collect(drawer, samples, seed,
                         lambda starts, edges: _statistic_values(rep, graph, statistic_kind, edges),
                         threads=threads, chunk_size=chunk_size, base=stream_base(n))
        _, _, L_hat, sigma_hat, degenerate = _moments(values, n)
        if degenerate:
            notes.append(f"the {statistic_kind} sample at n={n} is constant")
        rows.append(EstimateRow(n, samples, L_hat, sigma_hat))

    report = EstimateReport(
        rows=rows,
        config=_config(graph, rep, seed=seed, ns=list(ns), samples=samples, sampler=sampler,
                       statistic=statistic_kind),
        warnings=notes,
    )
    if len(rows) >= 2:
        report.L_spread = _relative_spread(rows[-1].L_hat, rows[-2].L_hat)
        report.sigma_spread = _relative_spread(rows[-1].sigma_hat, rows[-2].sigma_hat)
    return report


def path_cycle_ratios(graph: CodingGraph, ns: Sequence[int],
                      max_power: int = Defaults.MAX_POWER) -> RatioReport:
    """Exact #paths / #closed paths of length n for each n."""
    _check_increasing("ns", list(ns))
    rows = []
    for n in ns:
        paths = path_count(graph, n, max_power)
        closed = trace_power(graph, n, max_power)
        rows.append(RatioRow(n, paths, closed, paths / closed))
    return RatioReport(rows=rows, config=_config(graph, ns=list(ns)))


def tau_residual(rep: FuchsianRep, graph: CodingGraph, ns: Sequence[int],
                 samples: int, seed: int,
                 threads: int = Defaults.THREADS,
                 chunk_size: int = Defaults.CHUNK_SIZE,
                 noise_floor: float = Defaults.RESIDUAL_NOISE_FLOOR) -> ResidualReport:
    """
    How far tau(g) is from d(z, gz) - 2 (gz, g^-1 z)_z on uniform cycles.

    The residual should stay bounded in n. Since it is computed from
    distances that grow linearly in n, its rounding noise grows too; the
    growth ratio therefore compares the last max residual with the first one
    raised to `noise_floor`.

    Returns:
        ResidualReport with the max and mean residual per n and the growth
        ratio (None for a single n)
    """
    _check_increasing("ns", list(ns))
    require_positive_int("samples", samples)
    if not noise_floor > 0:
        raise InvalidParameterError(f"noise_floor must be positive, got {noise_floor}")

    def evaluate(starts: np.ndarray, edges: np.ndarray) -> np.ndarray:
        batch = evaluate_batch(rep, graph, edges)
        return np.abs(batch.translation_lengths() - batch.displacements()
                      + 2.0 * batch.self_gromov_products())

    rows = []
    for n in ns:
        residuals = collect(PathDrawer(graph, n), samples, seed, evaluate,
                            threads=threads, chunk_size=chunk_size, base=stream_base(n))
        rows.append(ResidualRow(n, samples, float(residuals.max()), float(residuals.mean())))
    report = ResidualReport(rows=rows, noise_floor=noise_floor,
                            config=_config(graph, rep, seed=seed, ns=list(ns), samples=samples))
    if len(rows) >= 2:
        report.growth_ratio = rows[-1].max_residual / max(rows[0].max_residual, noise_floor)
        if report.growth_ratio > Defaults.RESIDUAL_GROWTH_LIMIT:
            report.warnings.append(
                f"max residual grew by a factor {report.growth_ratio:.3g} from n={rows[0].n} to n={rows[-1].n}"
            )
    return report


def _df_values(rep: FuchsianRep, graph: CodingGraph, edges: np.ndarray) -> np.ndarray:
    return (evaluate_batch(rep, graph, edges).displacements()
            - evaluate_batch(rep, graph, edges[:, 1:]).displacements())


def holder_decay(rep: FuchsianRep, graph: CodingGraph, chain: Optional[ParryChain],
                 ks: Sequence[int], pairs: int, tail: int, seed: int) -> HolderReport:
    """
    Max |DF(x) - DF(y)| over Parry-chain pairs that agree on their first k edges.

    Both paths share a prefix of length k and continue with independent
    tails of the given length from the prefix's end vertex. The slope is the
    least-squares slope of log(max difference) against k.

    Args:
        rep: Representation
        graph: Coding graph
        chain: Parry chain, built if omitted
        ks: Common prefix lengths (increasing)
        pairs: Number of pairs per k
        tail: Length of each continuation
        seed: Run seed

    Returns:
        HolderReport
    """
    _check_increasing("ks", list(ks))
    require_positive_int("pairs", pairs)
    require_positive_int("tail", tail)
    chain = chain if chain is not None else build_parry_chain(graph)
    targets = np.array([e.target for e in graph.edges], dtype=np.int64)

    rows = []
    for k in ks:
        starts, head = sample_paths(chain, k, pairs, SeededRng(seed, stream_base(k, ROLE_PREFIX)))
        ends = targets[head[:, -1]]
        _, tail_x = sample_paths(chain, tail, pairs, SeededRng(seed, stream_base(k, ROLE_TAIL_X)), starts=ends)
        _, tail_y = sample_paths(chain, tail, pairs, SeededRng(seed, stream_base(k, ROLE_TAIL_Y)), starts=ends)
        dx = _df_values(rep, graph, np.hstack([head, tail_x]))
        dy = _df_values(rep, graph, np.hstack([head, tail_y]))
        rows.append(HolderRow(k, pairs, float(np.abs(dx - dy).max())))

    report = HolderReport(rows=rows, config=_config(graph, rep, seed=seed, ks=list(ks),
                                                    pairs=pairs, tail=tail))
    usable = [(row.k, math.log(row.max_difference)) for row in rows if row.max_difference > 0]
    if len(usable) >= 2:
        x, y = zip(*usable)
        report.slope = float(np.polyfit(x, y, 1)[0])
    else:
        report.warnings.append("fewer than two nonzero differences; no slope fitted")
    return report


def displacement_defect(rep: FuchsianRep, graph: CodingGraph, chain: Optional[ParryChain],
                        length: int, ns: Sequence[int], samples: int, seed: int,
                        threads: int = Defaults.THREADS,
                        chunk_size: int = Defaults.CHUNK_SIZE) -> DefectReport:
    """
    Gromov product (z, ev(x) z) based at ev(x_1..x_n) z for Parry-chain paths x.

    Equal to (d(z, g_n z) + d(z, h z) - d(z, g z)) / 2 where g = g_n h is the
    full word; it stays bounded when the orbit of the prefix follows the
    geodesic to the full word.

    Args:
        length: Length of the sampled paths
        ns: Split points, each in [1, length)

    Returns:
        DefectReport
    """
    require_positive_int("length", length, minimum=2)
    _check_increasing("ns", list(ns))
    if ns[-1] >= length:
        raise InvalidParameterError(f"split points must be < {length}, got {list(ns)}")
    require_positive_int("samples", samples)
    drawer = PathDrawer(graph, length, "markov", chain=chain)

    def evaluate(starts: np.ndarray, edges: np.ndarray) -> np.ndarray:
        full = evaluate_batch(rep, graph, edges).displacements()
        columns = []
        for n in ns:
            head = evaluate_batch(rep, graph, edges[:, :n]).displacements()
            rest = evaluate_batch(rep, graph, edges[:, n:]).displacements()
            columns.append(np.maximum(0.5 * (head + rest - full), 0.0))
        return np.stack(columns, axis=1)

    defects = collect(drawer, samples, seed, evaluate, threads=threads, chunk_size=chunk_size,
                      base=stream_base(length))
    rows = [DefectRow(n, samples, float(defects[:, i].max()), float(defects[:, i].mean()))
            for i, n in enumerate(ns)]
    return DefectReport(length=length, rows=rows,
                        config=_config(graph, rep, seed=seed, length=length, ns=list(ns), samples=samples))
