import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parity_attention.attention import HARD, target_heads
from parity_attention.errors import DomainError
from parity_attention.heads import (
    FixedTelescopingHead,
    ReLUParityNet,
    TrainableFFNN1,
    ffnn1_forward,
    fixed_head_forward,
    parameter_count,
    relu_parity_forward,
    smoothed_relu,
    smoothed_relu_grad,
)
from parity_attention.model import ParityTransformer
from parity_attention.parity import ParitySpec, input_block, label_block


def test_smoothed_relu_examples():
    b = 1e-6
    assert smoothed_relu(0.0, b) == pytest.approx(math.sqrt(b) / 2)
    assert smoothed_relu(10.0, b) == pytest.approx(10.0 + b / 40, rel=1e-12)
    assert smoothed_relu(-10.0, b) == pytest.approx(0.0, abs=1e-7)
    assert smoothed_relu_grad(0.0, b) == 0.5
    with pytest.raises(DomainError):
        smoothed_relu(1.0, 0.0)
    with pytest.raises(DomainError):
        smoothed_relu_grad(1.0, -1.0)


@given(st.floats(-100, 100), st.floats(1e-10, 1.0))
def test_smoothed_relu_upper_bound_and_slope(x, b):
    assert smoothed_relu(x, b) >= max(0.0, x) - 1e-12
    d = smoothed_relu_grad(x, b)
    assert 0.0 <= d <= 1.0


def test_smoothed_relu_grad_matches_fd():
    for x in (-0.3, 0.0, 1e-4, 2.0):
        h = 1e-7
        fd = (smoothed_relu(x + h, 1e-4) - smoothed_relu(x - h, 1e-4)) / (2 * h)
        assert smoothed_relu_grad(x, 1e-4) == pytest.approx(fd, rel=1e-6)


def test_fixed_head_at_integer_counts():
    for k in (1, 2, 3, 5):
        head = FixedTelescopingHead(k, 1e-8)
        assert fixed_head_forward(0.0, head) == pytest.approx(1.0, abs=1e-3)
        for s in range(k + 1):
            assert fixed_head_forward(s / k, head) == pytest.approx((-1) ** s, abs=1e-3)


def test_fixed_head_single_term():
    head = FixedTelescopingHead(1, 1e-6)
    assert fixed_head_forward(1.0, head) == pytest.approx(1 - 4 * smoothed_relu(0.5, 1e-6))


def test_fixed_head_grad_matches_fd():
    head = FixedTelescopingHead(3, 1e-4)
    for v in np.linspace(0, 1, 13):
        h = 1e-7
        fd = (head.forward(v + h) - head.forward(v - h)) / (2 * h)
        assert head.grad(v) == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_fixed_head_bound():
    for k in (1, 2, 3, 4):
        head = FixedTelescopingHead(k, 1.0)
        v = np.linspace(0, 1, 2001)
        assert np.abs(head.forward(v)).max() <= 4 * k * k * (k + 1)


def test_fixed_head_validation():
    with pytest.raises(DomainError):
        FixedTelescopingHead(0)
    with pytest.raises(DomainError):
        FixedTelescopingHead(2, 0.0)


def test_ffnn_zero_parameters():
    net = TrainableFFNN1.zeros(5)
    assert ffnn1_forward(np.ones(4), net) == pytest.approx(0.0)


def test_ffnn_encodes_fixed_head():
    head = FixedTelescopingHead(3, 1e-6)
    net = head.as_ffnn()
    V = np.column_stack([np.linspace(0, 1, 50), np.zeros(50), np.ones(50), np.ones(50)])
    assert np.array_equal(net.forward(V), head.forward(V[:, 0])) or np.allclose(
        net.forward(V), head.forward(V[:, 0]), rtol=0, atol=1e-12)


def test_ffnn_flat_roundtrip(rng):
    net = TrainableFFNN1.random(3, rng)
    again = TrainableFFNN1.from_flat(net.flat(), 3)
    assert np.array_equal(again.flat(), net.flat())
    assert net.flat().size == 6 * 3 + 1


def test_ffnn_per_input_grad_matches_fd(rng):
    net = TrainableFFNN1.random(4, rng, b_sigma=1e-3)
    V = rng.normal(size=(6, 4))
    G = net.per_input_grad(V)
    theta = net.flat()
    h = 1e-6
    for i in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        fd = (TrainableFFNN1.from_flat(up, 4, 1e-3).forward(V) - TrainableFFNN1.from_flat(dn, 4, 1e-3).forward(V)) / (2 * h)
        assert G[:, i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_relu_parity_examples():
    net = ReLUParityNet((2, 4))
    assert relu_parity_forward("1010", net) == 1.0
    assert relu_parity_forward("0100", net) == -1.0
    with pytest.raises(DomainError):
        relu_parity_forward("010", ReLUParityNet((4,)))


def test_relu_parity_exhaustive():
    rng = np.random.default_rng(3)
    for n in (3, 7, 12):
        X = input_block(n)
        for k in (1, 2, 3):
            spec = ParitySpec.of(n, rng.choice(np.arange(1, n + 1), k, replace=False))
            assert np.array_equal(ReLUParityNet(spec.parity_set).predict(X), label_block(spec))


def test_target_transformer_exact_in_hard_mode():
    for n in (6, 10, 14):
        for bits in ((1,), (2, n), (1, n // 2, n - 1)):
            spec = ParitySpec.of(n, bits)
            model = ParityTransformer(target_heads(spec.parity_set, n, 0.1, HARD),
                                      FixedTelescopingHead(spec.k, 1e-8), n)
            yhat = model.predict(input_block(n))
            assert np.abs(yhat - label_block(spec)).max() < 1e-3
            risk = np.mean(np.maximum(0, 1 - label_block(spec) * yhat) ** 2)
            assert risk < 1e-6


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_parameter_counts(k):
    assert parameter_count(ReLUParityNet(tuple(range(1, k + 1)))) == 2 * k + 2
    model = ParityTransformer(target_heads(tuple(range(1, k + 1)), 8, 0.1), FixedTelescopingHead(k), 8)
    assert parameter_count(model) == 18 * k + 2
    assert parameter_count(TrainableFFNN1.zeros(k)) == 5 * k + 1


def test_parameter_count_examples():
    assert parameter_count(ReLUParityNet((1, 2, 3))) == 8
    assert parameter_count(TrainableFFNN1.zeros(1)) == 6
    with pytest.raises(TypeError):
        parameter_count(object())


def test_all_two_sets_small_n():
    n = 6
    X = input_block(n)
    for bits in itertools.combinations(range(1, n + 1), 2):
        spec = ParitySpec.of(n, bits)
        assert np.array_equal(ReLUParityNet(bits).predict(X), label_block(spec))
