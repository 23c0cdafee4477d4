"""Bitstrings, k-parity labels, exhaustive enumeration and the squared hinge loss.

Positions are 1-indexed. A bitstring of length n is identified with the
integer ``sum(x_j << (j - 1))``, so bit ``j - 1`` of the counter is ``x_j``.
Enumeration walks the counter from 0 to 2**n - 1; every exhaustive
reduction in the package uses this order.
"""

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, DomainError

ENUM_CEILING = 24


@dataclass(frozen=True)
class ParitySpec:
    n: int
    parity_set: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.parity_set)
        object.__setattr__(self, "parity_set", bits)
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not bits:
            raise DomainError("parity set must be non-empty (k >= 1)")
        if list(bits) != sorted(set(bits)):
            raise DomainError(f"parity set must be sorted without duplicates: {bits}")
        if bits[0] < 1 or bits[-1] > self.n:
            raise DomainError(f"parity positions must lie in 1..{self.n}: {bits}")

    @property
    def k(self) -> int:
        return len(self.parity_set)

    @classmethod
    def of(cls, n, bits):
        return cls(n, tuple(sorted(int(b) for b in bits)))

    @property
    def mask(self) -> int:
        """Integer mask of the parity set under the counter encoding."""
        m = 0
        for b in self.parity_set:
            m |= 1 << (b - 1)
        return m


def as_bits(x) -> np.ndarray:
    """Coerce a string like ``"0110"`` or a 0/1 sequence to a uint8 array."""
    if isinstance(x, str):
        arr = np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(x)
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
    if arr.ndim != 1 or not np.all((arr == 0) | (arr == 1)):
        raise DomainError(f"not a bitstring: {x!r}")
    return arr.astype(np.uint8)


def to_str(x) -> str:
    return "".join(str(int(b)) for b in as_bits(x))


def encode(x) -> int:
    bits = as_bits(x)
    return int(sum(int(b) << j for j, b in enumerate(bits)))


def decode(counter: int, n: int) -> np.ndarray:
    return ((counter >> np.arange(n)) & 1).astype(np.uint8)


def parity_label(x, spec: ParitySpec) -> int:
    """+1 iff an even number of the bits indexed by the parity set are 1."""
    bits = as_bits(x)
    if len(bits) != spec.n:
        raise DomainError(f"bitstring length {len(bits)} != n={spec.n}")
    ones = sum(int(bits[b - 1]) for b in spec.parity_set)
    return -1 if ones % 2 else 1


def check_capacity(n: int, ceiling: int = ENUM_CEILING):
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if n > ceiling:
        raise CapacityError(f"2^{n} enumeration exceeds the ceiling 2^{ceiling}")


def enumerate_inputs(n: int, ceiling: int = ENUM_CEILING) -> Iterator[np.ndarray]:
    """Yield all 2**n bitstrings in counter order."""
    check_capacity(n, ceiling)
    for counter in range(1 << n):
        yield decode(counter, n)


def input_block(n: int, start: int = 0, stop=None) -> np.ndarray:
    """Rows ``start..stop-1`` of the exhaustive input matrix, shape (stop-start, n)."""
    if stop is None:
        stop = 1 << n
    counters = np.arange(start, stop, dtype=np.int64)
    return ((counters[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.uint8)


def label_block(spec: ParitySpec, start: int = 0, stop=None) -> np.ndarray:
    """Vectorized labels (float64, +-1) for counters ``start..stop-1``."""
    if stop is None:
        stop = 1 << spec.n
    counters = np.arange(start, stop, dtype=np.int64)
    odd = np.zeros(len(counters), dtype=np.int64)
    for b in spec.parity_set:
        odd ^= (counters >> (b - 1)) & 1
    return 1.0 - 2.0 * odd


def flip_bit(x, p: int) -> np.ndarray:
    bits = as_bits(x).copy()
    if not 1 <= p <= len(bits):
        raise DomainError(f"position {p} outside 1..{len(bits)}")
    bits[p - 1] ^= 1
    return bits


def complement(x) -> np.ndarray:
    return (1 - as_bits(x)).astype(np.uint8)


def squared_hinge(y, yhat):
    """(max{0, 1 - y*yhat})**2, elementwise."""
    margin = np.maximum(0.0, 1.0 - np.asarray(y, dtype=np.float64) * yhat)
    out = margin * margin
    return float(out) if np.ndim(out) == 0 else out


def squared_hinge_grad(y, yhat):
    """Derivative of the squared hinge loss with respect to yhat."""
    y = np.asarray(y, dtype=np.float64)
    margin = np.maximum(0.0, 1.0 - y * yhat)
    return -2.0 * margin * y


def random_parity_set(n: int, k: int, rng: np.random.Generator) -> tuple:
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    return tuple(sorted(int(b) + 1 for b in rng.choice(n, size=k, replace=False)))


def parse_bits_list(text: str) -> Sequence[int]:
    return [int(t) for t in text.replace(" ", "").split(",") if t]
