"""
Utility functions for geoclt.
"""

import hashlib
import math
import os
from typing import List, Optional, Tuple

from .errors import InvalidParameterError


class Defaults:
    """Configuration defaults shared by the library and the CLI."""

    # Fixed seed so bare invocations are reproducible
    SEED = 20240607

    # Exact combinatorics
    ENUMERATION_BUDGET = 10**7
    MAX_POWER = 512
    MAX_VERTICES = 64

    # Perron-Frobenius power iteration
    PERRON_TOL = 1e-14
    PERRON_MAX_ITER = 10**5

    # Sampling fan-out; chunk c of a run draws from stream (seed, base + c)
    CHUNK_SIZE = 4096
    THREADS = 1

    # Moebius products
    RENORMALIZE_EVERY = 32
    ENTRY_LIMIT = 1e300
    DET_TOLERANCE = 1e-9

    # Experiments
    MIN_CLT_SAMPLES = 100
    PANTS_LENGTHS = (2.0, 2.0, 2.0)
    BASEPOINT = (0.0, 1.0)
    # Residuals below this are float noise in d(z, gz), not growth
    RESIDUAL_NOISE_FLOOR = 1e-9
    RESIDUAL_GROWTH_LIMIT = 1.5

    # Environment
    OUTPUT_DIR_ENV = "GEOCLT_OUTPUT_DIR"


def sha256_text(text: str) -> str:
    """
    Hash a canonical text serialization.

    Args:
        text: Text to hash

    Returns:
        Hex digest of the UTF-8 encoded text
    """
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def require_positive_int(name: str, value: int, minimum: int = 1) -> int:
    """Raise InvalidParameterError unless value is an integer >= minimum."""
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise InvalidParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def parse_int_list(text: str) -> List[int]:
    """
    Parse a comma separated list of integers.

    Args:
        text: String such as "50,100,200"

    Returns:
        List of integers
    """
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InvalidParameterError(f"expected comma separated integers, got {text!r}")


def parse_float_list(text: str) -> List[float]:
    """
    Parse a comma separated list of reals.

    Args:
        text: String such as "2,2,2"

    Returns:
        List of floats
    """
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InvalidParameterError(f"expected comma separated numbers, got {text!r}")
    if not all(math.isfinite(v) for v in values):
        raise InvalidParameterError(f"non-finite value in {text!r}")
    return values


def parse_pairs(text: str) -> List[Tuple[int, int]]:
    """
    Parse "n:m" pairs separated by commas.

    Args:
        text: String such as "10:5,20:10"

    Returns:
        List of (n, m) tuples
    """
    pairs = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            n_text, m_text = part.split(":")
            pairs.append((int(n_text), int(m_text)))
        except ValueError:
            raise InvalidParameterError(f"expected n:m pairs, got {part!r}")
    return pairs


def resolve_output_path(out: Optional[str], default_name: str) -> Optional[str]:
    """
    Resolve where a report file goes.

    A relative path (or the default name when no path is given) is placed in
    the directory named by the GEOCLT_OUTPUT_DIR environment variable when it
    is set. Without a path and without the variable there is no report file.

    Args:
        out: Path given on the command line, if any
        default_name: File name used when only the environment variable is set

    Returns:
        Output file path or None
    """
    output_dir = os.environ.get(Defaults.OUTPUT_DIR_ENV)
    if out is None:
        if not output_dir:
            return None
        out = default_name
    if output_dir and not os.path.isabs(out):
        out = os.path.join(output_dir, out)
    parent = os.path.dirname(out)
    if parent and not os.path.exists(parent):
        raise InvalidParameterError(f"Output directory does not exist: {parent}")
    return out
