"""Classification heads: the frozen telescoping head, a trainable one-hidden-layer
network, and the exact ReLU parity network."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .parity import as_bits

DEFAULT_B_SIGMA = 1e-6


def smoothed_relu(x, b_sigma: float = DEFAULT_B_SIGMA):
    """sigma(x) = (x + sqrt(x^2 + b)) / 2, an upper approximation of ReLU."""
    if not b_sigma > 0:
        raise DomainError(f"b_sigma must be > 0, got {b_sigma}")
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (x + np.sqrt(x * x + b_sigma))


def smoothed_relu_grad(x, b_sigma: float = DEFAULT_B_SIGMA):
    if not b_sigma > 0:
        raise DomainError(f"b_sigma must be > 0, got {b_sigma}")
    x = np.asarray(x, dtype=np.float64)
    return 0.5 + x / (2.0 * np.sqrt(x * x + b_sigma))


def telescoping_weights(k: int) -> np.ndarray:
    """Output weights (-1)^i (8i - 4) for i = 1..k."""
    i = np.arange(1, k + 1)
    return np.where(i % 2 == 0, 1.0, -1.0) * (8.0 * i - 4.0)


def telescoping_biases(k: int) -> np.ndarray:
    return 0.5 - np.arange(1, k + 1, dtype=np.float64)


@dataclass(frozen=True)
class FixedTelescopingHead:
    """Frozen head that maps k * v*_1 (a soft bit count) to its parity sign."""

    k: int
    b_sigma: float = DEFAULT_B_SIGMA

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")
        if not self.b_sigma > 0:
            raise DomainError(f"b_sigma must be > 0, got {self.b_sigma}")

    def _z(self, t):
        return np.asarray(t, dtype=np.float64)[..., None] + telescoping_biases(self.k)

    def forward_count(self, t):
        """yhat as a function of t = k * v*_1."""
        return 1.0 + smoothed_relu(self._z(t), self.b_sigma) @ telescoping_weights(self.k)

    def grad_count(self, t):
        """d yhat / d t = sum_i (-1)^i (8i-4) sigma'(t + 0.5 - i)."""
        return smoothed_relu_grad(self._z(t), self.b_sigma) @ telescoping_weights(self.k)

    def forward(self, vstar1):
        return self.forward_count(self.k * np.asarray(vstar1, dtype=np.float64))

    def grad(self, vstar1):
        """d yhat / d v*_1."""
        return self.k * self.grad_count(self.k * np.asarray(vstar1, dtype=np.float64))

    def as_ffnn(self) -> "TrainableFFNN1":
        beta = np.zeros((self.k, 4))
        beta[:, 0] = self.k
        return TrainableFFNN1(beta, telescoping_biases(self.k), telescoping_weights(self.k),
                              1.0, self.b_sigma)


def fixed_head_forward(vstar1, head: FixedTelescopingHead):
    return head.forward(vstar1)


class TrainableFFNN1:
    """x -> sum_i alpha_i sigma(beta_i . x + b_i) + b on 4-dimensional inputs.

    Flat parameter order: beta (row-major, 4q), hidden biases (q), alpha (q), b.
    """

    def __init__(self, beta, biases, alpha, b=0.0, b_sigma=DEFAULT_B_SIGMA):
        self.beta = np.array(beta, dtype=np.float64).reshape(-1, 4)
        q = self.beta.shape[0]
        self.biases = np.array(biases, dtype=np.float64).reshape(q)
        self.alpha = np.array(alpha, dtype=np.float64).reshape(q)
        self.b = float(b)
        self.b_sigma = b_sigma

    @property
    def q(self) -> int:
        return self.beta.shape[0]

    @classmethod
    def zeros(cls, q, b_sigma=DEFAULT_B_SIGMA):
        return cls(np.zeros((q, 4)), np.zeros(q), np.zeros(q), 0.0, b_sigma)

    @classmethod
    def random(cls, q, rng, scale=0.5, b_sigma=DEFAULT_B_SIGMA):
        return cls(rng.normal(scale=scale, size=(q, 4)), rng.normal(scale=scale, size=q),
                   rng.normal(scale=scale, size=q), 0.0, b_sigma)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.beta.ravel(), self.biases, self.alpha, [self.b]])

    @classmethod
    def from_flat(cls, theta, q, b_sigma=DEFAULT_B_SIGMA):
        theta = np.asarray(theta, dtype=np.float64)
        return cls(theta[:4 * q], theta[4 * q:5 * q], theta[5 * q:6 * q], theta[6 * q], b_sigma)

    def alpha_norm(self) -> float:
        return float(np.linalg.norm(self.alpha))

    def beta_norm(self) -> float:
        return float(np.linalg.norm(self.beta))

    def forward(self, V):
        V = np.atleast_2d(np.asarray(V, dtype=np.float64))
        pre = V @ self.beta.T + self.biases
        return smoothed_relu(pre, self.b_sigma) @ self.alpha + self.b

    def predict(self, V):
        return self.forward(V)

    def per_input_grad(self, V) -> np.ndarray:
        """d yhat / d theta for every row of V, shape (M, 6q + 1)."""
        V = np.atleast_2d(np.asarray(V, dtype=np.float64))
        pre = V @ self.beta.T + self.biases
        act = smoothed_relu(pre, self.b_sigma)
        dact = smoothed_relu_grad(pre, self.b_sigma) * self.alpha  # (M, q)
        d_beta = dact[:, :, None] * V[:, None, :]
        return np.hstack([d_beta.reshape(len(V), -1), dact, act, np.ones((len(V), 1))])


def ffnn1_forward(v, net: TrainableFFNN1):
    out = net.forward(v)
    return float(out[0]) if np.ndim(v) == 1 else out


@dataclass(frozen=True)
class ReLUParityNet:
    """h_B(x) = 1 + sum_j (-1)^j (8j - 4) ReLU(sum_{p in B} x_p + 0.5 - j)."""

    support: tuple

    @property
    def k(self) -> int:
        return len(self.support)

    def forward_counts(self, s):
        z = np.asarray(s, dtype=np.float64)[..., None] + telescoping_biases(self.k)
        return 1.0 + np.maximum(z, 0.0) @ telescoping_weights(self.k)

    def predict(self, X):
        X = np.atleast_2d(X)
        if max(self.support) > X.shape[1] or min(self.support) < 1:
            raise DomainError(f"support {self.support} out of range for n={X.shape[1]}")
        idx = np.asarray(self.support) - 1
        return self.forward_counts(X[:, idx].sum(axis=1))


def relu_parity_forward(x, net: ReLUParityNet) -> float:
    bits = as_bits(x)
    return float(net.predict(bits[None])[0])


def parameter_count(model) -> int:
    """Distinct parameter counts under a weight-sharing convention.

    * ReLUParityNet: k output weights, k hidden biases, one shared input
      weight (1) and the output bias -> 2k + 2.
    * ParityTransformer with k heads: k full 4x4 head matrices (16k), plus
      the telescoping head's k output weights, k biases, the shared input
      weight k and the output bias -> 18k + 2.
    * TrainableFFNN1: 4q hidden weights, q hidden biases and one output bias;
      each output weight only contributes its sign once absorbed into its
      neuron (positive homogeneity of the ReLU limit) -> 5q + 1.
    """
    if isinstance(model, ReLUParityNet):
        return 2 * model.k + 2
    if isinstance(model, TrainableFFNN1):
        return 5 * model.q + 1
    if hasattr(model, "parameter_count"):
        return model.parameter_count()
    raise TypeError(f"no parameter-count convention for {type(model).__name__}")
