"""Soft and hard attention heads over the fixed embeddings.

Two head parameterizations are supported:

* trainable 2-vector heads ``u_i = (a13, a14)``: the CLS query only reads the
  positional coordinates, so scores are ``a13*sin + a14*cos`` and do not depend
  on the input bits;
* general 4x4 matrices ``A`` (frozen-attention experiments), where
  ``s_j = w0^T A w_j`` also picks up the token part of ``w_j``.

The softmax pools over positions 1..n only. Hard attention selects the
argmax, ties going to the smallest position.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .embedding import CLS, EmbeddingTable
from .errors import DomainError
from .parity import as_bits

SOFT, HARD = "soft", "hard"


@dataclass
class AttentionHeads:
    params: np.ndarray  # (m, 2): rows (a13, a14)
    tau: float
    mode: str = SOFT

    def __post_init__(self):
        self.params = np.atleast_2d(np.asarray(self.params, dtype=np.float64))
        if self.params.shape[1] != 2 or self.params.shape[0] < 1:
            raise DomainError(f"head params must have shape (m, 2), got {self.params.shape}")
        if not self.tau > 0:
            raise DomainError(f"tau must be > 0, got {self.tau}")
        if self.mode not in (SOFT, HARD):
            raise DomainError(f"unknown attention mode {self.mode!r}")

    @property
    def m(self) -> int:
        return self.params.shape[0]

    def with_params(self, params) -> "AttentionHeads":
        return replace(self, params=np.array(params, dtype=np.float64))

    def with_mode(self, mode) -> "AttentionHeads":
        return replace(self, params=self.params.copy(), mode=mode)

    def scores(self, table: EmbeddingTable) -> np.ndarray:
        """Raw scores, shape (m, n)."""
        return positional_scores(self.params, table)

    def attention_map(self, table: EmbeddingTable) -> np.ndarray:
        """Input-independent attention weights, shape (m, n)."""
        s = self.scores(table)
        if self.mode == HARD:
            return one_hot_argmax(s)
        return softmax_scores(s, self.tau)

    def angles(self) -> np.ndarray:
        """Direction of each head in the (sin, cos) plane, in [0, 2*pi).

        A head pointing at position j has angle 2*pi*j/n.
        """
        return np.mod(np.arctan2(self.params[:, 0], self.params[:, 1]), 2.0 * np.pi)


@dataclass(frozen=True)
class AttentionMap:
    gamma: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = self.gamma
        if np.any(g < 0) or not np.allclose(g.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise DomainError("attention rows must be probability vectors")


def head_matrix(a13: float, a14: float) -> np.ndarray:
    """Embed a 2-vector head into a 4x4 attention matrix (first row only)."""
    A = np.zeros((4, 4))
    A[0, 2], A[0, 3] = a13, a14
    return A


def target_head(bit: int, n: int) -> np.ndarray:
    """The 2-vector head pointing exactly at ``bit``: (sin, cos) of its angle."""
    theta = 2.0 * np.pi * bit / n
    return np.array([math.sin(theta), math.cos(theta)])


def target_heads(parity_set, n: int, tau: float, mode: str = HARD) -> AttentionHeads:
    return AttentionHeads(np.stack([target_head(b, n) for b in parity_set]), tau, mode)


def positional_scores(params: np.ndarray, table: EmbeddingTable) -> np.ndarray:
    params = np.atleast_2d(params)
    return params[:, 0:1] * table.sin + params[:, 1:2] * table.cos


def raw_scores(head, x, table: EmbeddingTable) -> np.ndarray:
    """s_j = w0^T A w_j for j = 1..n.

    ``head`` is a 2-vector ``(a13, a14)`` or a 4x4 matrix.
    """
    head = np.asarray(head, dtype=np.float64)
    if head.shape == (2,):
        return positional_scores(head, table)[0]
    if head.shape != (4, 4):
        raise DomainError(f"head must be a 2-vector or 4x4 matrix, got {head.shape}")
    bits = as_bits(x)
    if len(bits) != table.n:
        raise DomainError(f"bitstring length {len(bits)} != table n={table.n}")
    row = CLS @ head
    return np.where(bits == 1, row[0], row[1]) + row[2] * table.sin + row[3] * table.cos


def softmax_scores(s, tau: float) -> np.ndarray:
    """Temperature softmax along the last axis, max-subtracted."""
    if not tau > 0:
        raise DomainError(f"tau must be > 0, got {tau}")
    z = np.asarray(s, dtype=np.float64) / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def one_hot_argmax(s: np.ndarray) -> np.ndarray:
    s = np.atleast_2d(s)
    out = np.zeros_like(s, dtype=np.float64)
    out[np.arange(s.shape[0]), np.argmax(s, axis=1)] = 1.0
    return out


def attention_vector(heads: AttentionHeads, x, table: EmbeddingTable) -> np.ndarray:
    """v* = mean over heads of the attention-weighted embeddings."""
    w = embed_rows(x, table)
    gamma = heads.attention_map(table)
    return (gamma @ w).mean(axis=0)


def embed_rows(x, table):
    bits = as_bits(x)
    if len(bits) != table.n:
        raise DomainError(f"bitstring length {len(bits)} != table n={table.n}")
    b = bits.astype(np.float64)
    return np.column_stack([b, 1.0 - b, table.sin, table.cos])


# ---------------------------------------------------------------------------
# general (frozen) attention matrices


def random_matrices(m: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """m Gaussian 4x4 attention matrices."""
    return rng.normal(scale=scale, size=(m, 4, 4))


def query_rows(mats: np.ndarray) -> np.ndarray:
    """w0^T A_i for each head: the only part of A that affects scores."""
    return np.einsum("k,mkl->ml", CLS, np.asarray(mats, dtype=np.float64))


def matrix_positional_scores(mats, table: EmbeddingTable) -> np.ndarray:
    rows = query_rows(mats)
    return rows[:, 2:3] * table.sin + rows[:, 3:4] * table.cos


def matrix_token_scores(mats) -> np.ndarray:
    """(m, 2): column u holds w0^T A f'_emb(u)."""
    rows = query_rows(mats)
    return np.column_stack([rows[:, 1], rows[:, 0]])


def general_scores_block(mats, X: np.ndarray, table: EmbeddingTable) -> np.ndarray:
    """Scores for many inputs, shape (M, m, n)."""
    pos = matrix_positional_scores(mats, table)
    tok = matrix_token_scores(mats)
    Xb = X.astype(bool)[:, None, :]
    return pos[None] + np.where(Xb, tok[None, :, 1:2], tok[None, :, 0:1])


def hard_selection_block(mats, X, table) -> np.ndarray:
    """Selected 0-based positions, shape (M, m); ties go to the smallest index."""
    return np.argmax(general_scores_block(mats, X, table), axis=2)


def general_attention_block(mats, X, table, tau: float = 1.0, mode: str = SOFT) -> np.ndarray:
    """v* for many inputs under frozen general heads, shape (M, 4)."""
    s = general_scores_block(mats, X, table)
    if mode == HARD:
        gamma = np.zeros_like(s)
        idx = np.argmax(s, axis=2)
        np.put_along_axis(gamma, idx[:, :, None], 1.0, axis=2)
    else:
        gamma = softmax_scores(s, tau)
    gbar = gamma.mean(axis=1)  # (M, n)
    Xf = X.astype(np.float64)
    return np.column_stack([
        (gbar * Xf).sum(axis=1),
        (gbar * (1.0 - Xf)).sum(axis=1),
        gbar @ table.sin,
        gbar @ table.cos,
    ])


def head_permutation(mat, table: EmbeddingTable) -> np.ndarray:
    """Positions (1-indexed) ranked by positional score, highest first.

    Ties keep the smaller position first.
    """
    pos = matrix_positional_scores(np.asarray(mat)[None], table)[0]
    return np.argsort(-pos, kind="stable") + 1


def token_maximizer(mat) -> int:
    """argmax_u w0^T A f'_emb(u); a tie returns 0."""
    tok = matrix_token_scores(np.asarray(mat)[None])[0]
    return 1 if tok[1] > tok[0] else 0


def prefix_length(n: int, m: int) -> int:
    return -(-(n - 1) // m) - 1


def adversarial_position(mats, table: EmbeddingTable) -> int:
    """A position outside every head's top-ranked prefix.

    Each prefix has ceil((n-1)/m) - 1 entries, so the m prefixes cover at most
    n - 2 positions. Scans head 1's ranking from its lowest-ranked end.
    """
    mats = np.asarray(mats)
    n, m = table.n, len(mats)
    if m < 1 or n < 2:
        raise DomainError("need at least one head and n >= 2")
    L = prefix_length(n, m)
    covered = set()
    for A in mats:
        covered.update(int(p) for p in head_permutation(A, table)[:L])
    for p in head_permutation(mats[0], table)[::-1]:
        if int(p) not in covered:
            return int(p)
    raise AssertionError("pigeonhole violated")  # unreachable


def theorem2_bound(n: int, m: int, alpha_norm: float, beta_norm: float) -> float:
    """Lower bound on the risk of any FFNN head on frozen soft attention.

    (1 - 2m / 2**ceil((n-1)/(5m))) * (1 - |alpha||beta| 5 m^2 / n)**2, with each
    factor clamped at 0.
    """
    exponent = -(-(n - 1) // (5 * m))
    first = 1.0 - 2.0 * m / 2.0**exponent
    second = 1.0 - alpha_norm * beta_norm * 5.0 * m * m / n
    if first <= 0.0 or second <= 0.0:
        return 0.0
    return first * second * second


def corollary20_bound(n: int, m: int) -> float:
    """1 - 2m / 2**ceil((n-1)/m), clamped at 0."""
    return max(0.0, 1.0 - 2.0 * m / 2.0 ** (-(-(n - 1) // m)))
