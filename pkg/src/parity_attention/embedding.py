"""Fixed 4-dimensional token + positional embeddings and the CLS vector."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .parity import as_bits

TOKEN_PART = {0: np.array([0.0, 1.0]), 1: np.array([1.0, 0.0])}
CLS = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    n: int
    angles: np.ndarray  # 2*pi*j/n for j = 1..n
    pos_part: np.ndarray  # (n, 2): [sin, cos]

    @property
    def token_part(self):
        return TOKEN_PART

    @property
    def cls(self) -> np.ndarray:
        return CLS.copy()

    @property
    def sin(self) -> np.ndarray:
        return self.pos_part[:, 0]

    @property
    def cos(self) -> np.ndarray:
        return self.pos_part[:, 1]

    def token_vector(self, bit: int, position: int) -> np.ndarray:
        """w_j for token ``bit`` at 1-indexed ``position``."""
        return np.concatenate([TOKEN_PART[int(bit)], self.pos_part[position - 1]])


def build_table(n: int) -> EmbeddingTable:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    angles = 2.0 * np.pi * np.arange(1, n + 1) / n
    pos = np.stack([np.sin(angles), np.cos(angles)], axis=1)
    angles.setflags(write=False)
    pos.setflags(write=False)
    return EmbeddingTable(n, angles, pos)


def embed_input(x, table: EmbeddingTable) -> np.ndarray:
    """Return an (n+1, 4) array: row 0 is CLS, row j is w_j."""
    bits = as_bits(x)
    if len(bits) != table.n:
        raise DomainError(f"bitstring length {len(bits)} != table n={table.n}")
    tokens = np.stack([bits.astype(np.float64), 1.0 - bits], axis=1)
    return np.vstack([CLS, np.hstack([tokens, table.pos_part])])


def embed_block(X: np.ndarray, table: EmbeddingTable) -> np.ndarray:
    """Embeddings of many inputs without CLS, shape (M, n, 4)."""
    Xf = X.astype(np.float64)
    M = X.shape[0]
    out = np.empty((M, table.n, 4))
    out[:, :, 0] = Xf
    out[:, :, 1] = 1.0 - Xf
    out[:, :, 2] = table.sin
    out[:, :, 3] = table.cos
    return out
