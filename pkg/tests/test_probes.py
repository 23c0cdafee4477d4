import math

import numpy as np
import pytest

from parity_attention.attention import (
    AttentionHeads,
    head_permutation,
    prefix_length,
    random_matrices,
    raw_scores,
    target_head,
    token_maximizer,
)
from parity_attention.embedding import build_table
from parity_attention.errors import CapacityError, DomainError
from parity_attention.heads import FixedTelescopingHead
from parity_attention.model import ParityTransformer
from parity_attention.parity import ParitySpec, enumerate_inputs, flip_bit, input_block, label_block
from parity_attention.probes import (
    ProbeReport,
    census_is_monotone,
    census_threshold,
    corollary20_certificate,
    grad_correlation_probe,
    lipschitz_bound,
    lipschitz_probe_yhat,
    midpoint_heads,
    pair_ratio,
    per_entry_curvature_bound,
    per_head_loss_grads,
    pl_constant_probe,
    smoothness_probe,
    soft_to_hard_check,
    theorem2_census,
    yhat_grad_lipschitz_probe,
)
from parity_attention.training import TrainConfig, TrajectoryLog, gd_train_attention, init_heads, per_input_attention_grads, yhat_and_grad

SPEC8 = ParitySpec.of(8, (2, 5))


def test_pair_ratio_excludes_identical_pairs():
    assert pair_ratio(0.0, 0.0) is None
    assert pair_ratio(1.0, 1e-9) is None
    assert pair_ratio(3.0, 2.0) == 1.5


def test_lipschitz_probe_within_bound():
    r = lipschitz_probe_yhat(SPEC8, 1000, seed=0, tau=0.25)
    assert r.passed and r.samples == 1000
    assert r.bound == lipschitz_bound(2, 0.25) == 8 * 4 / 0.25 * 2
    assert r.details["max_abs_partial"] <= r.details["partial_bound"]


def test_partial_derivative_bound_single_coordinate(rng):
    tau = 0.25
    for _ in range(200):
        model = ParityTransformer(AttentionHeads(rng.normal(size=(2, 2)) * 3, tau), FixedTelescopingHead(2), 8)
        _, g = yhat_and_grad(model, rng.integers(0, 2, size=(1, 8), dtype=np.uint8))
        assert np.abs(g).max() <= 8 * 4 / tau


def test_smoothness_probe_within_bound():
    r = smoothness_probe(SPEC8, 1000, seed=0, tau=0.25)
    assert r.passed and r.observed <= r.bound


def test_second_difference_against_entry_bound(rng):
    tau, b = 0.25, 1e-6
    bound = per_entry_curvature_bound(2, tau, b)
    h = 1e-5
    for _ in range(100):
        A = rng.normal(size=(2, 2))
        x = rng.integers(0, 2, size=(1, 8), dtype=np.uint8)
        i, c = rng.integers(0, 2), rng.integers(0, 2)
        E = np.zeros((2, 2))
        E[i, c] = h
        grads = [yhat_and_grad(ParityTransformer(AttentionHeads(P, tau), FixedTelescopingHead(2, b), 8), x)[1][0]
                 for P in (A + E, A - E)]
        second = (grads[0][2 * i + c] - grads[1][2 * i + c]) / (2 * h)
        assert abs(second) <= bound


def test_yhat_grad_probe_checks_premise():
    r = yhat_grad_lipschitz_probe(SPEC8, 300, seed=1, tau=0.25)
    assert r.details["premise_holds"] and r.details["max_abs_yhat"] <= 4 * 8
    assert r.passed


def fd_loss_grad(model, spec, x, h=1e-6):
    y = label_block(spec)[int(x @ (1 << np.arange(spec.n)))]
    theta = model.heads.params.ravel()
    out = np.zeros_like(theta)
    for i in range(theta.size):
        vals = []
        for s in (1, -1):
            t = theta.copy()
            t[i] += s * h
            m = ParityTransformer(model.heads.with_params(t.reshape(-1, 2)), model.classifier, model.n)
            yhat = m.predict(x[None])[0]
            vals.append(max(0.0, 1 - y * yhat) ** 2)
        out[i] = (vals[0] - vals[1]) / (2 * h)
    return out.reshape(-1, 2)


def test_per_head_loss_grads_against_fd():
    model = ParityTransformer(init_heads(2, 3, 0.25), FixedTelescopingHead(2, 1e-4), 8)
    X = input_block(8)
    G = per_head_loss_grads(model, SPEC8, X)
    _, G2 = per_input_attention_grads(model, SPEC8)
    assert np.allclose(G, G2, rtol=1e-12, atol=1e-15)
    for idx in (3, 77, 200):
        assert G[idx] == pytest.approx(fd_loss_grad(model, SPEC8, X[idx]), rel=1e-5, abs=1e-8)


def test_satisfied_margin_contributes_zero():
    model = ParityTransformer(init_heads(2, 3, 0.25), FixedTelescopingHead(2), 8)
    X = input_block(8)
    G = per_head_loss_grads(model, SPEC8, X)
    margin = label_block(SPEC8) * model.predict(X) >= 1
    assert margin.any()
    assert np.all(G[margin] == 0)


def test_grad_correlation_exhaustive_matches_pairwise_scan():
    heads = init_heads(2, 0, 0.25)
    r = grad_correlation_probe(heads, SPEC8)
    G = per_head_loss_grads(ParityTransformer(heads, FixedTelescopingHead(2), 8), SPEC8, input_block(8))
    brute = min(float(G[a, i] @ G[b, i]) for i in range(2) for a in range(256) for b in range(0, 256, 5))
    assert r.samples == 256 * 256
    assert r.observed <= brute
    diag = min(float(G[a, i] @ G[a, i]) for i in range(2) for a in range(256))
    assert diag >= 0
    assert r.details["tau_in_regime"]


def test_grad_correlation_sampled_mode():
    spec = ParitySpec.of(11, (3, 9))
    r = grad_correlation_probe(init_heads(2, 0, 2 / 11), spec)
    assert r.samples == 100_000 and isinstance(r.passed, bool)


def test_pl_probe_rejects_empty():
    with pytest.raises(DomainError):
        pl_constant_probe(TrajectoryLog(), 8, 2, 0.25)


def test_pl_probe_flags_stationary_start():
    # zero heads with parity bits at antipodal positions give a zero gradient by symmetry
    spec = ParitySpec.of(8, (4, 8))
    log, model = gd_train_attention(TrainConfig(epochs=3), spec, AttentionHeads(np.zeros((2, 2)), 0.25))
    r = pl_constant_probe(log, 8, 2, 0.25, model.attention_map())
    assert not r.passed and r.observed < 1e-20


def test_pl_probe_on_training_run():
    log, model = gd_train_attention(TrainConfig(epochs=20, seed=4), SPEC8)
    r = pl_constant_probe(log, 8, 2, 0.25, model.attention_map())
    ratios = [x.pl_ratio for x in log.records if x.risk >= 0.01]
    assert r.observed == min(ratios)
    assert r.passed == (min(ratios) > 1e-12)
    assert r.details["c2"] > 0 and r.bound > 0


def scaled_target_model(bits, n, scale, tau=0.1):
    params = np.stack([target_head(b, n) for b in bits]) * scale
    return ParityTransformer(AttentionHeads(params, tau), FixedTelescopingHead(len(bits)), n)


def test_soft_to_hard_on_sharp_heads():
    spec = ParitySpec.of(12, (2, 6, 9))
    check = soft_to_hard_check(scaled_target_model(spec.parity_set, 12, 30.0), spec)
    assert check.applicable and check.passed
    assert sorted(check.argmax_positions) == [2, 6, 9]
    assert all(g > 0.9 for g in check.top_gamma)
    assert check.hard_risk < 0.01


def test_soft_to_hard_skips_adjacent_bits_and_reports_midpoint():
    n = 20
    spec = ParitySpec.of(n, (3, 16, 17))
    mid = np.array([math.sin(2 * math.pi * 16.5 / n), math.cos(2 * math.pi * 16.5 / n)])
    params = np.stack([target_head(3, n), mid, mid]) * 5
    model = ParityTransformer(AttentionHeads(params, 0.1), FixedTelescopingHead(3), n)
    check = soft_to_hard_check(model, spec)
    assert not check.applicable and not check.passed
    assert check.midpoints == {16: 2}
    assert midpoint_heads(model.heads, n, 16) == 2


def test_soft_to_hard_fails_for_random_heads():
    spec = ParitySpec.of(10, (2, 7))
    check = soft_to_hard_check(ParityTransformer(init_heads(2, 5, 0.2), FixedTelescopingHead(2), 10), spec)
    assert not check.passed and len(check.top_gamma) == 2


def brute_corollary20_members(mats, n):
    t = build_table(n)
    L = prefix_length(n, len(mats))
    members = []
    for x in enumerate_inputs(n):
        ok = all(any(x[j - 1] == token_maximizer(A) for j in head_permutation(A, t)[:L]) for A in mats)
        members.append(ok)
    return np.array(members)


def selected(mats, x, t):
    return [int(np.argmax(raw_scores(A, x, t))) for A in mats]


def test_corollary20_against_brute_force(rng):
    n = 8
    t = build_table(n)
    for m in (1, 2, 3):
        mats = random_matrices(m, rng)
        r = corollary20_certificate(mats, n)
        members = brute_corollary20_members(mats, n)
        assert r.details["members"] == members.sum()
        p = r.details["position"]
        for x, ok in zip(enumerate_inputs(n), members):
            if ok:
                assert selected(mats, x, t) == selected(mats, flip_bit(x, p), t)
        assert r.passed


def test_corollary20_single_head_bound(rng):
    for n in (6, 10, 13):
        r = corollary20_certificate(random_matrices(1, rng), n)
        assert r.observed >= 1 - 2 / 2 ** (n - 1)
        assert r.bound == 1 - 2 / 2 ** (n - 1)


def test_corollary20_full_invariance_n10(rng):
    r = corollary20_certificate(random_matrices(2, rng), 10)
    assert r.details["invariant_fraction"] == 1.0 and r.details["closed_under_flip"]


def test_certified_pairs_have_opposite_labels(rng):
    n = 10
    mats = random_matrices(2, rng)
    p = corollary20_certificate(mats, n).details["position"]
    spec = ParitySpec.of(n, sorted({p, 1 if p != 1 else 2}))
    y = label_block(spec)
    flipped = np.arange(1 << n) ^ (1 << (p - 1))
    assert np.all(y == -y[flipped])


def test_certificate_capacity():
    with pytest.raises(CapacityError):
        corollary20_certificate(np.zeros((1, 4, 4)), 15)
    with pytest.raises(CapacityError):
        theorem2_census(np.zeros((1, 4, 4)), 15)


def test_theorem2_census_m1_n11(rng):
    r = theorem2_census(random_matrices(1, rng), 11)
    assert r.bound == 1 - 2 / 2**2
    assert r.observed >= r.bound and r.details["cap_holds"] and r.passed


def test_census_threshold_degenerate():
    assert census_threshold(4, 3) == 1
    assert census_threshold(11, 1) == 3
    assert census_threshold(10, 1) == 2


def test_all_maximizer_input_is_member():
    n = 10
    A = np.zeros((4, 4))
    A[0, 0] = 1.0  # maximizer 1
    A[0, 2] = 0.3
    mats = np.stack([A, A.copy()])
    r = theorem2_census(mats, n)
    assert r.details["members"] >= 1
    from parity_attention.probes import theorem2_members
    assert theorem2_members(mats, np.ones((1, n), dtype=np.uint8), build_table(n))[0]


def test_census_monotone(rng):
    for m in (2, 3, 4):
        assert census_is_monotone(random_matrices(m, rng), 11)


def test_probe_report_row():
    r = ProbeReport("x", np.int64(3), np.float64(0.5), 1, np.bool_(True))
    assert r.row() == {"probe": "x", "samples": 3, "observed": 0.5, "bound": 1.0, "pass": 1}
