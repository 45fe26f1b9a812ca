"""
Moebius action on the upper half-plane.

Distances, Gromov products and translation lengths of group elements are
computed from 2x2 matrices. Long products are carried as a normalized matrix
together with a log scale (ScaledMatrices), so words of several hundred
letters never square entries that are already near the float range.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .coding_graph import (
    CodingGraph, Generator, GraphPath, GroupWord, build_free_group_graph,
    evaluate_path, iter_cycle_edges
)
from .errors import (
    InvalidParameterError, NumericRangeError, RepresentationError, RepresentationParseError
)
from .utils import Defaults, sha256_text


LN2 = math.log(2.0)
# Above this log-argument the asymptotic forms of asinh/acosh are exact in floats
_ASYMPTOTIC = 30.0


@dataclass(frozen=True)
class HPoint:
    """A point x + iy of the upper half-plane."""
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)) or self.y <= 0:
            raise InvalidParameterError(f"not a point of the upper half-plane: ({self.x}, {self.y})")

    def as_complex(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class MoebiusMatrix:
    """Real 2x2 matrix [[a, b], [c, d]] acting by z -> (az + b) / (cz + d)."""
    a: float
    b: float
    c: float
    d: float

    @classmethod
    def identity(cls) -> "MoebiusMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def translation(cls, t: float) -> "MoebiusMatrix":
        """diag(e^(t/2), e^(-t/2)), translation by t along the imaginary axis."""
        return cls(math.exp(t / 2.0), 0.0, 0.0, math.exp(-t / 2.0))

    @classmethod
    def from_array(cls, array: np.ndarray) -> "MoebiusMatrix":
        return cls(float(array[0, 0]), float(array[0, 1]), float(array[1, 0]), float(array[1, 1]))

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> float:
        return self.a + self.d

    def max_abs(self) -> float:
        return max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))

    def is_hyperbolic(self) -> bool:
        return abs(self.trace) > 2.0

    def __matmul__(self, other: "MoebiusMatrix") -> "MoebiusMatrix":
        return MoebiusMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "MoebiusMatrix":
        """Exact inverse of a unit-determinant matrix (the adjugate)."""
        return MoebiusMatrix(self.d, -self.b, -self.c, self.a)

    def normalized(self) -> "MoebiusMatrix":
        det = self.determinant
        if not det > 0:
            raise InvalidParameterError(f"matrix has non-positive determinant {det}")
        s = math.sqrt(det)
        return MoebiusMatrix(self.a / s, self.b / s, self.c / s, self.d / s)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=np.float64)

    def is_close(self, other: "MoebiusMatrix", tol: float = Defaults.DET_TOLERANCE) -> bool:
        return bool(np.abs(self.as_array() - other.as_array()).max() <= tol)


def _asinh_exp(log_x: np.ndarray) -> np.ndarray:
    """asinh(e^log_x) without overflow."""
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        direct = np.arcsinh(np.exp(np.minimum(log_x, _ASYMPTOTIC)))
    return np.where(log_x > _ASYMPTOTIC, log_x + LN2, direct)


def _acosh_exp(log_x: np.ndarray) -> np.ndarray:
    """acosh(e^log_x), clamped to 0 for arguments below 1."""
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        direct = np.arccosh(np.maximum(np.exp(np.minimum(log_x, _ASYMPTOTIC)), 1.0))
    return np.where(log_x > _ASYMPTOTIC, log_x + LN2, direct)


def _safe_log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


def _adjugate(mats: np.ndarray) -> np.ndarray:
    out = np.empty_like(mats)
    out[..., 0, 0] = mats[..., 1, 1]
    out[..., 0, 1] = -mats[..., 0, 1]
    out[..., 1, 0] = -mats[..., 1, 0]
    out[..., 1, 1] = mats[..., 0, 0]
    return out


def _rescale(mats: np.ndarray, log_scale: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    peak = np.abs(mats).reshape(mats.shape[:-2] + (4,)).max(axis=-1)
    if not np.isfinite(peak).all() or (peak == 0).any():
        raise NumericRangeError("matrix product left the float range; use shorter words")
    return mats / peak[..., None, None], log_scale + np.log(peak)


def _origin_distances(mats: np.ndarray, log_scale: np.ndarray) -> np.ndarray:
    """
    d(i, g i) for g = e^log_scale * mats with det g = 1.

    Uses sinh(d/2) = |(a - d, b + c)| / 2, which holds for unit determinant
    and stays accurate for both tiny and huge distances.
    """
    a, b = mats[..., 0, 0], mats[..., 0, 1]
    c, d = mats[..., 1, 0], mats[..., 1, 1]
    half = 0.5 * np.hypot(a - d, b + c)
    return 2.0 * _asinh_exp(_safe_log(half) + log_scale)


def _translation_lengths(mats: np.ndarray, log_scale: np.ndarray) -> np.ndarray:
    """2 acosh(|tr g| / 2); 0 for elliptic and parabolic g."""
    half_trace = 0.5 * np.abs(mats[..., 0, 0] + mats[..., 1, 1])
    return 2.0 * _acosh_exp(_safe_log(half_trace) + log_scale)


def _pair_distances(p: np.ndarray, p_scale: np.ndarray,
                    q: np.ndarray, q_scale: np.ndarray) -> np.ndarray:
    """d(p i, q i) = d(i, q^-1 p i) with q^-1 the exact adjugate."""
    product, extra = _rescale(np.matmul(_adjugate(q), p), np.zeros(p.shape[:-2]))
    return _origin_distances(product, p_scale + q_scale + extra)


@dataclass(frozen=True, eq=False)
class ScaledMatrices:
    """
    A batch of unit-determinant matrices g = exp(log_scale) * mats.

    `mats` has shape (N, 2, 2) with entries of magnitude at most 1 and
    `log_scale` has shape (N,). Matrices are expressed in coordinates where
    the basepoint is i.
    """
    mats: np.ndarray
    log_scale: np.ndarray

    def __len__(self) -> int:
        return self.mats.shape[0]

    def displacements(self) -> np.ndarray:
        """d(z, g z)."""
        return _origin_distances(self.mats, self.log_scale)

    def translation_lengths(self) -> np.ndarray:
        return _translation_lengths(self.mats, self.log_scale)

    def self_gromov_products(self) -> np.ndarray:
        """(g z, g^-1 z)_z, with g^-1 taken as the exact adjugate."""
        inverse = _adjugate(self.mats)
        forward = _origin_distances(self.mats, self.log_scale)
        backward = _origin_distances(inverse, self.log_scale)
        between = _pair_distances(self.mats, self.log_scale, inverse, self.log_scale)
        return np.maximum(0.5 * (forward + backward - between), 0.0)


def _basepoint_frame(basepoint: HPoint) -> MoebiusMatrix:
    """The matrix taking i to the basepoint."""
    root = math.sqrt(basepoint.y)
    return MoebiusMatrix(root, basepoint.x / root, 0.0, 1.0 / root)


@dataclass(frozen=True, eq=False)
class FuchsianRep:
    """
    Images of the free generators and their inverses, plus a basepoint z.
    """
    generator_images: Mapping[Generator, MoebiusMatrix]
    basepoint: HPoint = field(default_factory=lambda: HPoint(*Defaults.BASEPOINT))

    def __post_init__(self):
        for g, image in self.generator_images.items():
            if g.sign < 0:
                continue
            inverse = self.generator_images.get(g.inverse())
            if inverse is None:
                raise InvalidParameterError(f"missing image of {g.inverse()}")
            if not (inverse @ image).is_close(MoebiusMatrix.identity()):
                raise InvalidParameterError(f"image of {g.inverse()} is not the inverse of image of {g}")

    @classmethod
    def from_generators(cls, mats: Sequence[MoebiusMatrix],
                        basepoint: Optional[HPoint] = None) -> "FuchsianRep":
        images: Dict[Generator, MoebiusMatrix] = {}
        for index, matrix in enumerate(mats, start=1):
            matrix = matrix.normalized()
            images[Generator(index, 1)] = matrix
            images[Generator(index, -1)] = matrix.inverse()
        if basepoint is None:
            return cls(images)
        return cls(images, basepoint)

    @property
    def rank(self) -> int:
        return max(g.index for g in self.generator_images)

    def generators(self) -> List[MoebiusMatrix]:
        return [self.generator_images[Generator(i, 1)] for i in range(1, self.rank + 1)]

    def image(self, g: Generator) -> MoebiusMatrix:
        try:
            return self.generator_images[g]
        except KeyError:
            raise RepresentationError(f"representation of rank {self.rank} has no image for {g}")

    def to_basepoint_frame(self, g: MoebiusMatrix) -> MoebiusMatrix:
        """h^-1 g h, where h takes i to the basepoint."""
        h = _basepoint_frame(self.basepoint)
        return h.inverse() @ g @ h

    def edge_stack(self, graph: CodingGraph) -> np.ndarray:
        """Basepoint-frame images of every edge label, shape (edge_count, 2, 2)."""
        if graph.rank > self.rank:
            raise RepresentationError(
                f"graph uses generator {graph.rank} but the representation has rank {self.rank}"
            )
        frames = self.image_arrays(in_frame=True)
        return np.stack([frames[edge.label] for edge in graph.edges])

    def image_arrays(self, in_frame: bool = False) -> Dict[Generator, np.ndarray]:
        """Generator images as 2x2 arrays, optionally conjugated into the basepoint frame."""
        if in_frame:
            return {g: self.to_basepoint_frame(m).as_array() for g, m in self.generator_images.items()}
        return {g: m.as_array() for g, m in self.generator_images.items()}


def hyp_distance(p: HPoint, q: HPoint) -> float:
    """
    Hyperbolic distance in the upper half-plane.

    Equal to arccosh(1 + |p - q|^2 / (2 p.y q.y)), evaluated through
    2 asinh(|p - q| / (2 sqrt(p.y q.y))) for accuracy at short range.
    """
    gap = math.hypot(p.x - q.x, p.y - q.y)
    return 2.0 * math.asinh(gap / (2.0 * math.sqrt(p.y * q.y)))


def apply(g: MoebiusMatrix, p: HPoint) -> HPoint:
    """Image of p under z -> (az + b) / (cz + d)."""
    z = p.as_complex()
    w = (g.a * z + g.b) / (g.c * z + g.d)
    if not w.imag > 0:
        raise NumericRangeError(f"image of {p} left the upper half-plane numerically: {w}")
    return HPoint(w.real, w.imag)


def _scaled_word(rep: FuchsianRep, word: GroupWord, in_frame: bool,
                 renormalize_every: int = Defaults.RENORMALIZE_EVERY,
                 log_limit: float = math.inf) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product of the images of a word as a one-row (mats, log_scale) pair.

    The running product is divided by its peak entry every
    `renormalize_every` letters, so the determinant is never recomputed
    from entries that have grown large.
    """
    images = rep.image_arrays(in_frame)
    product = np.eye(2)[None]
    log_scale = np.zeros(1)
    count = 0
    for count, g in enumerate(word, start=1):
        image = images.get(g)
        if image is None:
            raise RepresentationError(f"representation of rank {rep.rank} has no image for {g}")
        product = np.matmul(product, image)
        if count % renormalize_every == 0:
            product, log_scale = _rescale(product, log_scale)
            _check_log_scale(log_scale, log_limit, count)
    product, log_scale = _rescale(product, log_scale)
    _check_log_scale(log_scale, log_limit, count)
    return product, log_scale


def _check_log_scale(log_scale: np.ndarray, log_limit: float, count: int) -> None:
    if log_scale[0] > log_limit:
        raise NumericRangeError(
            f"matrix entries exceed e^{log_limit:.1f} after {count} letters; "
            "use a shorter word or the derived quantities (displacement, self_gromov)"
        )


def evaluate_word(rep: FuchsianRep, word: GroupWord,
                  renormalize_every: int = Defaults.RENORMALIZE_EVERY,
                  entry_limit: float = Defaults.ENTRY_LIMIT) -> MoebiusMatrix:
    """
    Product of the generator images, left to right.

    Args:
        rep: Representation
        word: Group word
        renormalize_every: Rescale the running product after this many letters
        entry_limit: Largest allowed entry magnitude

    Returns:
        MoebiusMatrix

    Raises:
        NumericRangeError: if an entry of the product exceeds entry_limit
    """
    mats, log_scale = _scaled_word(rep, word, False, renormalize_every, math.log(entry_limit))
    return MoebiusMatrix.from_array(mats[0] * math.exp(log_scale[0]))


def _single(g: MoebiusMatrix) -> Tuple[np.ndarray, np.ndarray]:
    return _rescale(g.as_array()[None], np.zeros(1))


def gromov_product(x: HPoint, y: HPoint, base: HPoint) -> float:
    """(x, y)_base = (d(x, base) + d(y, base) - d(x, y)) / 2."""
    value = 0.5 * (hyp_distance(x, base) + hyp_distance(y, base) - hyp_distance(x, y))
    return max(value, 0.0)


def translation_length(g: MoebiusMatrix) -> float:
    """2 arccosh(|tr g| / 2) for hyperbolic g, 0 otherwise."""
    mats, scale = _single(g)
    return float(_translation_lengths(mats, scale)[0])


def displacement(rep: FuchsianRep, word: GroupWord) -> float:
    """d(z, ev(w) z) for the representation's basepoint z."""
    mats, scale = _scaled_word(rep, word, True)
    return float(_origin_distances(mats, scale)[0])


def self_gromov(rep: FuchsianRep, word: GroupWord) -> float:
    """(ev(w) z, ev(w)^-1 z)_z."""
    mats, scale = _scaled_word(rep, word, True)
    return float(ScaledMatrices(mats, scale).self_gromov_products()[0])


def df_increment(rep: FuchsianRep, path: GraphPath) -> float:
    """
    DF(x) = d(z, ev(x) z) - d(z, ev(Tx) z), with T dropping the first edge.

    Args:
        rep: Representation
        path: Path of length >= 1

    Returns:
        The increment
    """
    if path.length == 0:
        raise InvalidParameterError("df_increment needs a path of length >= 1")
    word = evaluate_path(path)
    return displacement(rep, word) - displacement(rep, GroupWord(word.letters[1:]))


def stable_length_estimate(rep: FuchsianRep, word: GroupWord, k: int) -> float:
    """d(z, g^k z) / k, which tends to the translation length of g."""
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    return displacement(rep, GroupWord(word.letters * k)) / k


def evaluate_batch(rep: FuchsianRep, graph: CodingGraph, edges: np.ndarray,
                   renormalize_every: int = Defaults.RENORMALIZE_EVERY) -> ScaledMatrices:
    """
    Evaluate many equal-length paths at once, in the basepoint frame.

    Args:
        rep: Representation
        graph: Graph the edge indices refer to
        edges: Integer array of shape (N, n)
        renormalize_every: Rescale the running products after this many steps

    Returns:
        ScaledMatrices of length N
    """
    stack = rep.edge_stack(graph)
    count, length = edges.shape
    product = np.broadcast_to(np.eye(2), (count, 2, 2)).copy()
    log_scale = np.zeros(count)
    for step in range(length):
        product = np.matmul(product, stack[edges[:, step]])
        if (step + 1) % renormalize_every == 0:
            product, log_scale = _rescale(product, log_scale)
    product, log_scale = _rescale(product, log_scale)
    return ScaledMatrices(product, log_scale)


def _cosh_half(length: float) -> float:
    return math.cosh(length / 2.0)


def pair_of_pants_rep(l1: float, l2: float, l3: float,
                      basepoint: Optional[HPoint] = None) -> FuchsianRep:
    """
    Rank-2 representation of a pair of pants with boundary lengths l1, l2, l3.

    A translates by l1 along the imaginary axis direction of the symmetric
    matrix [[cosh, sinh], [sinh, cosh]]; B = [[cosh, t sinh], [sinh / t, cosh]]
    with t < 0 chosen so that |tr AB| = 2 cosh(l3 / 2).

    Args:
        l1, l2, l3: Positive boundary lengths
        basepoint: Basepoint z, i by default

    Returns:
        FuchsianRep with tau(A) = l1, tau(B) = l2, tau((AB)^-1) = l3
    """
    for name, value in (("l1", l1), ("l2", l2), ("l3", l3)):
        if not (math.isfinite(value) and value > 0):
            raise InvalidParameterError(f"{name} must be a positive length, got {value}")
    c1, s1 = math.cosh(l1 / 2.0), math.sinh(l1 / 2.0)
    c2, s2 = math.cosh(l2 / 2.0), math.sinh(l2 / 2.0)
    # t + 1/t = target < -2, so both roots are real and negative
    target = -(2.0 * _cosh_half(l3) + 2.0 * c1 * c2) / (s1 * s2)
    t = (target - math.sqrt(target * target - 4.0)) / 2.0
    A = MoebiusMatrix(c1, s1, s1, c1)
    B = MoebiusMatrix(c2, t * s2, s2 / t, c2)
    return FuchsianRep.from_generators([A, B], basepoint)


def _short_word_traces(rep: FuchsianRep, max_length: int) -> Iterable[Tuple[str, float]]:
    graph = build_free_group_graph(rep.rank)
    for n in range(1, max_length + 1):
        for start, edges in iter_cycle_edges(graph, n):
            word = GroupWord(tuple(graph.edges[e].label for e in edges))
            yield str(word), evaluate_word(rep, word).trace


def schottky_from_matrices(mats: Sequence[MoebiusMatrix],
                           basepoint: Optional[HPoint] = None,
                           check_length: int = 4) -> FuchsianRep:
    """
    Representation of a free group from hyperbolic generator matrices.

    Runs a discreteness sanity check: every cyclically reduced word of length
    at most `check_length` should be hyperbolic. Failures are reported with
    a RuntimeWarning, not rejected.

    Args:
        mats: At least two hyperbolic matrices with positive determinant
        basepoint: Basepoint z, i by default
        check_length: Longest word length in the sanity check

    Returns:
        FuchsianRep
    """
    if len(mats) < 2:
        raise InvalidParameterError(f"need at least two generators, got {len(mats)}")
    normalized = []
    for index, matrix in enumerate(mats, start=1):
        matrix = matrix.normalized()
        if not matrix.is_hyperbolic():
            raise InvalidParameterError(
                f"generator {index} is not hyperbolic (|tr| = {abs(matrix.trace):.6g} <= 2)"
            )
        normalized.append(matrix)
    rep = FuchsianRep.from_generators(normalized, basepoint)
    failures = [word for word, trace in _short_word_traces(rep, check_length) if abs(trace) <= 2.0 + 1e-12]
    if failures:
        shown = ", ".join(failures[:5])
        warnings.warn(
            f"{len(failures)} short cyclically reduced words are not hyperbolic ({shown}); "
            "the representation may not be discrete",
            RuntimeWarning,
        )
    return rep


def dump_representation(rep: FuchsianRep) -> str:
    """Serialize a representation with 17 significant digits."""
    lines = [f"generators {rep.rank}"]
    for index, m in enumerate(rep.generators(), start=1):
        lines.append(f"matrix {index} {m.a:.17g} {m.b:.17g} {m.c:.17g} {m.d:.17g}")
    lines.append(f"basepoint {rep.basepoint.x:.17g} {rep.basepoint.y:.17g}")
    return "\n".join(lines) + "\n"


def representation_hash(rep: FuchsianRep) -> str:
    return sha256_text(dump_representation(rep))


def load_representation(content: Union[bytes, str]) -> FuchsianRep:
    """
    Parse a representation file.

    Format: ``generators <k>``, then ``matrix <i> <a> <b> <c> <d>`` for
    i = 1..k, then ``basepoint <x> <y>``; ``#`` starts a comment.

    Returns:
        FuchsianRep built by schottky_from_matrices
    """
    if isinstance(content, bytes):
        try:
            content = content.decode("utf-8")
        except UnicodeDecodeError as e:
            raise RepresentationParseError(f"representation file is not UTF-8: {e}")
    count = None
    matrices: Dict[int, MoebiusMatrix] = {}
    basepoint = None
    for number, raw in enumerate(content.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "generators" and len(parts) == 2:
                count = int(parts[1])
            elif parts[0] == "matrix" and len(parts) == 6:
                index = int(parts[1])
                if index in matrices:
                    raise RepresentationParseError(f"duplicate matrix {index}", number)
                matrices[index] = MoebiusMatrix(*(float(v) for v in parts[2:]))
            elif parts[0] == "basepoint" and len(parts) == 3:
                basepoint = HPoint(float(parts[1]), float(parts[2]))
            else:
                raise RepresentationParseError(f"cannot parse {line!r}", number)
        except (ValueError, InvalidParameterError) as e:
            if isinstance(e, RepresentationParseError):
                raise
            raise RepresentationParseError(str(e), number)
    if count is None:
        raise RepresentationParseError("missing generators header")
    if sorted(matrices) != list(range(1, count + 1)):
        raise RepresentationParseError(f"expected matrices 1..{count}, got {sorted(matrices)}")
    return schottky_from_matrices([matrices[i] for i in range(1, count + 1)], basepoint)
