"""End-to-end predictors built from embeddings, attention and a classifier."""

import numpy as np

from .attention import AttentionHeads, general_attention_block
from .embedding import EmbeddingTable, build_table
from .heads import FixedTelescopingHead, TrainableFFNN1


def count_weights(heads: AttentionHeads, table: EmbeddingTable, k: int) -> np.ndarray:
    """Per-position weights w with k * v*_1(x) = sum_j w_j x_j.

    Valid for 2-vector heads, whose attention does not depend on x.
    """
    gamma = heads.attention_map(table)
    return (k / heads.m) * gamma.sum(axis=0)


def weighted_counts(w: np.ndarray, X: np.ndarray) -> np.ndarray:
    """sum_j w_j X[:, j], accumulated in position order."""
    t = np.zeros(X.shape[0])
    for j in range(X.shape[1]):
        t += w[j] * X[:, j]
    return t


class ParityTransformer:
    """Trainable 2-vector heads on top of the frozen telescoping head."""

    def __init__(self, heads: AttentionHeads, classifier: FixedTelescopingHead, n: int):
        self.heads = heads
        self.classifier = classifier
        self.table = build_table(n)

    @property
    def n(self) -> int:
        return self.table.n

    @property
    def k(self) -> int:
        return self.classifier.k

    def count_weights(self) -> np.ndarray:
        return count_weights(self.heads, self.table, self.k)

    def predict(self, X) -> np.ndarray:
        t = weighted_counts(self.count_weights(), np.atleast_2d(X))
        return self.classifier.forward_count(t)

    def attention_map(self) -> np.ndarray:
        return self.heads.attention_map(self.table)

    def parameter_count(self) -> int:
        # 16 entries per full head matrix, then k output weights, k biases,
        # the shared input weight and the output bias of the frozen head.
        return 16 * self.heads.m + 2 * self.k + 2


class FrozenAttentionModel:
    """Frozen general 4x4 heads feeding a trainable one-hidden-layer network."""

    def __init__(self, mats, table: EmbeddingTable, net: TrainableFFNN1, tau=1.0, mode="soft"):
        self.mats = np.asarray(mats, dtype=np.float64)
        self.table = table
        self.net = net
        self.tau = tau
        self.mode = mode

    @property
    def m(self) -> int:
        return len(self.mats)

    def features(self, X) -> np.ndarray:
        return general_attention_block(self.mats, np.atleast_2d(X), self.table, self.tau, self.mode)

    def predict(self, X) -> np.ndarray:
        return self.net.forward(self.features(X))


class ConstantPredictor:
    def __init__(self, value=0.0):
        self.value = float(value)

    def predict(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.value)
