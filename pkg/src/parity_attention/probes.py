"""Numeric probes of the training landscape and the fixed-attention certificates."""

import math
from dataclasses import dataclass, field

import numpy as np

from .attention import (
    HARD,
    SOFT,
    AttentionHeads,
    adversarial_position,
    corollary20_bound,
    general_scores_block,
    hard_selection_block,
    head_permutation,
    prefix_length,
    softmax_scores,
    token_maximizer,
)
from .embedding import build_table
from .errors import CapacityError, DomainError
from .heads import DEFAULT_B_SIGMA, FixedTelescopingHead
from .model import ParityTransformer
from .parity import ParitySpec, input_block, squared_hinge_grad
from .training import attention_risk_grad, softmax_jacobian_rows, yhat_and_grad

PAIR_EXHAUSTIVE_MAX_N = 10
CENSUS_MAX_N = 14
SAMPLED_PAIRS = 100_000
REL_SLACK = 1e-6
PL_ZERO = 1e-12  # pl ratios at or below this are roundoff around a stationary point


@dataclass
class ProbeReport:
    probe: str
    samples: int
    observed: float
    bound: float
    passed: bool
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples, self.observed = int(self.samples), float(self.observed)
        self.bound, self.passed = float(self.bound), bool(self.passed)

    def row(self) -> dict:
        return {"probe": self.probe, "samples": self.samples, "observed": self.observed,
                "bound": self.bound, "pass": int(bool(self.passed))}


# ---------------------------------------------------------------------------
# constants


def lipschitz_bound(k: int, tau: float) -> float:
    return 8.0 * k * k / tau * math.sqrt(2 * k)


def smoothness_bound(k: int, tau: float, b_sigma: float) -> float:
    return 2 * k * per_entry_curvature_bound(k, tau, b_sigma)


def per_entry_curvature_bound(k: int, tau: float, b_sigma: float) -> float:
    return 20.0 / tau**2 + 32.0 * k * k / (tau**2 * math.sqrt(b_sigma))


def yhat_grad_lipschitz_bound(k: int, tau: float, b_sigma: float) -> float:
    return math.sqrt(2 * k) * (4 * k**3 * per_entry_curvature_bound(k, tau, b_sigma) + (8.0 * k * k / tau) ** 2)


# ---------------------------------------------------------------------------
# pairwise ratio probes on yhat


def _model(params, k, n, tau, b_sigma):
    return ParityTransformer(AttentionHeads(params, tau, SOFT), FixedTelescopingHead(k, b_sigma), n)


def _random_pairs(spec, trials, seed, tau, b_sigma):
    """Yield (yhat, grad) at A and A' on a shared random input, plus |A - A'|."""
    rng = np.random.default_rng(seed)
    k, n = spec.k, spec.n
    for _ in range(trials):
        A = rng.normal(size=(k, 2))
        delta = rng.normal(size=(k, 2))
        delta *= 10.0 ** rng.uniform(-6, 0) / np.linalg.norm(delta)
        x = rng.integers(0, 2, size=(1, n), dtype=np.uint8)
        y0, g0 = yhat_and_grad(_model(A, k, n, tau, b_sigma), x)
        y1, g1 = yhat_and_grad(_model(A + delta, k, n, tau, b_sigma), x)
        yield y0[0], g0[0], y1[0], g1[0], float(np.linalg.norm(delta))


def pair_ratio(difference: float, distance: float, min_distance: float = 1e-8):
    """difference / distance, or None for (near-)identical parameter pairs."""
    return None if distance < min_distance else float(difference) / distance


def _ratio_probe(name, spec, trials, seed, tau, b_sigma, bound, quantity):
    worst, count, extra = 0.0, 0, {"max_abs_yhat": 0.0, "max_abs_partial": 0.0}
    for y0, g0, y1, g1, dist in _random_pairs(spec, trials, seed, tau, b_sigma):
        extra["max_abs_yhat"] = max(extra["max_abs_yhat"], float(abs(y0)), float(abs(y1)))
        extra["max_abs_partial"] = max(extra["max_abs_partial"], float(np.abs(g0).max()))
        ratio = pair_ratio(quantity(y0, g0, y1, g1), dist)
        if ratio is not None:
            worst = max(worst, ratio)
            count += 1
    return ProbeReport(name, count, worst, bound, worst <= bound * (1 + REL_SLACK), extra)


def lipschitz_probe_yhat(spec: ParitySpec, trials: int = 1000, seed: int = 0, tau: float = None,
                         b_sigma: float = DEFAULT_B_SIGMA) -> ProbeReport:
    """max |yhat(A) - yhat(A')| / |A - A'| against 8k^2 sqrt(2k) / tau."""
    tau = 2.0 / spec.n if tau is None else tau
    report = _ratio_probe("lipschitz_yhat", spec, trials, seed, tau, b_sigma,
                          lipschitz_bound(spec.k, tau), lambda y0, g0, y1, g1: abs(y0 - y1))
    report.details["partial_bound"] = 8.0 * spec.k**2 / tau
    return report


def smoothness_probe(spec: ParitySpec, trials: int = 1000, seed: int = 0, tau: float = None,
                     b_sigma: float = DEFAULT_B_SIGMA) -> ProbeReport:
    """max |grad yhat(A) - grad yhat(A')| / |A - A'|."""
    tau = 2.0 / spec.n if tau is None else tau
    return _ratio_probe("smoothness_yhat", spec, trials, seed, tau, b_sigma,
                        smoothness_bound(spec.k, tau, b_sigma),
                        lambda y0, g0, y1, g1: float(np.linalg.norm(g0 - g1)))


def yhat_grad_lipschitz_probe(spec: ParitySpec, trials: int = 1000, seed: int = 0, tau: float = None,
                              b_sigma: float = DEFAULT_B_SIGMA) -> ProbeReport:
    """Lipschitz ratio of yhat * grad yhat.

    The bound assumes |yhat| <= 4k^3; that premise is checked on every sampled
    value first, and a violated premise fails the probe.
    """
    tau = 2.0 / spec.n if tau is None else tau
    report = _ratio_probe("lipschitz_yhat_grad", spec, trials, seed, tau, b_sigma,
                          yhat_grad_lipschitz_bound(spec.k, tau, b_sigma),
                          lambda y0, g0, y1, g1: float(np.linalg.norm(y0 * g0 - y1 * g1)))
    premise = report.details["max_abs_yhat"] <= 4 * spec.k**3
    report.details["premise_holds"] = bool(premise)
    report.passed = report.passed and premise
    return report


# ---------------------------------------------------------------------------
# gradient correlation


def per_head_loss_grads(model: ParityTransformer, spec: ParitySpec, X: np.ndarray) -> np.ndarray:
    """d loss / d (a13, a14) of each head for each row of X, shape (M, m, 2)."""
    heads, clf = model.heads, model.classifier
    gamma = heads.attention_map(model.table)
    t = (clf.k / heads.m) * (X.astype(np.float64) @ gamma.sum(axis=0))
    yhat = clf.forward_count(t)
    y = np.prod(np.where(X[:, np.asarray(spec.parity_set) - 1] == 1, -1.0, 1.0), axis=1)
    g = squared_hinge_grad(y, yhat) * clf.grad_count(t)
    J = softmax_jacobian_rows(gamma, model.table, heads.tau)
    return (clf.k / heads.m) * g[:, None, None] * np.einsum("Mn,mnc->Mmc", X.astype(np.float64), J)


def grad_correlation_probe(heads: AttentionHeads, spec: ParitySpec, b_sigma: float = DEFAULT_B_SIGMA,
                           seed: int = 0, tol: float = 1e-9) -> ProbeReport:
    """Most negative per-head inner product of two inputs' loss gradients.

    Exhaustive over all ordered input pairs for n <= 10, else 10^5 sampled pairs.
    """
    model = ParityTransformer(heads, FixedTelescopingHead(spec.k, b_sigma), spec.n)
    regime = heads.tau <= 2.0 / spec.n * (1 + 1e-12)
    if spec.n <= PAIR_EXHAUSTIVE_MAX_N:
        G = per_head_loss_grads(model, spec, input_block(spec.n))
        worst = min(float((G[:, i, :] @ G[:, i, :].T).min()) for i in range(heads.m))
        samples = (1 << spec.n) ** 2
    else:
        rng = np.random.default_rng(seed)
        Xa = rng.integers(0, 2, size=(SAMPLED_PAIRS, spec.n), dtype=np.uint8)
        Xb = rng.integers(0, 2, size=(SAMPLED_PAIRS, spec.n), dtype=np.uint8)
        Ga, Gb = per_head_loss_grads(model, spec, Xa), per_head_loss_grads(model, spec, Xb)
        worst = float((Ga * Gb).sum(axis=2).min())
        samples = SAMPLED_PAIRS
    return ProbeReport("grad_correlation", samples, worst, -tol, worst >= -tol,
                       {"tau_in_regime": regime})


# ---------------------------------------------------------------------------
# PL tracking


def measured_c2(gamma: np.ndarray, tau: float) -> float:
    """Smallest attention weight next to each head's argmax, divided by tau."""
    n = gamma.shape[1]
    vals = []
    for row in gamma:
        j = int(np.argmax(row))
        vals.extend([row[(j - 1) % n], row[(j + 1) % n]])
    vals = [v for v in vals if v > 0]
    return min(vals) / tau if vals else math.nan


def pl_floor(n: int, k: int, tau: float, c2: float) -> float:
    mu1 = 2.0 * c2 * c2 * tau * tau / (n * n)
    mu2 = 64.0 * k * k * c2 * c2 / (n * n)
    return min(64.0 * mu1, mu2) / 2.0 ** (n + 1)


def pl_constant_probe(trajectory, n: int, k: int, tau: float, gamma: np.ndarray = None,
                      epsilon: float = 0.01) -> ProbeReport:
    """min_t pl_ratio over steps whose risk is still >= epsilon.

    Passes when that minimum exceeds PL_ZERO; a stationary point reached in
    floating point leaves a pl ratio of order 1e-30, not exactly 0.
    """
    if not trajectory.records:
        raise DomainError("empty trajectory")
    ratios = [r.pl_ratio for r in trajectory.records if r.risk >= epsilon]
    observed = min(ratios) if ratios else math.inf
    c2 = measured_c2(gamma, tau) if gamma is not None else math.nan
    floor = pl_floor(n, k, tau, c2) if math.isfinite(c2) else math.nan
    passed = not ratios or observed > PL_ZERO
    return ProbeReport("pl_ratio", len(ratios), observed, floor, passed,
                       {"c2": c2, "strictly_positive": bool(not ratios or observed > 0)})


# ---------------------------------------------------------------------------
# soft-to-hard


def circular_distance(a, b) -> np.ndarray:
    d = np.mod(np.asarray(a) - b, 2.0 * np.pi)
    return np.minimum(d, 2.0 * np.pi - d)


def adjacent_pairs(parity_set) -> list:
    return [(a, b) for a, b in zip(parity_set, parity_set[1:]) if b - a == 1]


def midpoint_heads(heads: AttentionHeads, n: int, left: int, window: float = 0.75) -> int:
    """Number of heads whose angle lies within 2*pi*window/n of position left + 1/2."""
    target = 2.0 * np.pi * (left + 0.5) / n
    return int((circular_distance(heads.angles(), target) <= 2.0 * np.pi * window / n).sum())


@dataclass
class SoftToHardReport:
    applicable: bool
    soft_risk: float
    hard_risk: float
    argmax_positions: list
    top_gamma: list
    bits_covered: dict
    midpoints: dict
    passed: bool


def soft_to_hard_check(model: ParityTransformer, spec: ParitySpec, epsilon: float = 0.01,
                       threads: int = 1) -> SoftToHardReport:
    gamma = model.attention_map()
    argmax = [int(j) + 1 for j in np.argmax(gamma, axis=1)]
    top = [float(v) for v in gamma.max(axis=1)]
    hard = ParityTransformer(model.heads.with_mode(HARD), model.classifier, model.n)
    hard_risk = attention_risk_grad(hard, spec, threads, with_grad=False).risk
    soft_risk = attention_risk_grad(model, spec, threads, with_grad=False).risk
    covered = {b: bool(np.any(gamma[:, b - 1] > 0.5)) for b in spec.parity_set}
    pairs = adjacent_pairs(spec.parity_set)
    midpoints = {a: midpoint_heads(model.heads, spec.n, a) for a, _ in pairs}
    applicable = not pairs and soft_risk < epsilon
    passed = applicable and hard_risk < epsilon and all(covered.values())
    return SoftToHardReport(applicable, soft_risk, hard_risk, argmax, top, covered, midpoints, passed)


# ---------------------------------------------------------------------------
# fixed-attention certificates


def _prefixes(mats, table, L):
    return [head_permutation(A, table)[:L] - 1 for A in mats]


def _flip(X, p):
    Y = X.copy()
    Y[:, p - 1] ^= 1
    return Y


def corollary20_members(mats, X, table) -> np.ndarray:
    """Every head's prefix holds at least one position carrying its token maximizer."""
    L = prefix_length(table.n, len(mats))
    mask = np.ones(len(X), dtype=bool)
    for A, pre in zip(mats, _prefixes(mats, table, L)):
        mask &= (X[:, pre] == token_maximizer(A)).any(axis=1)
    return mask


def corollary20_certificate(mats, n: int) -> ProbeReport:
    """Exhaustive flip-invariance and |X'| count for frozen hard-attention heads.

    ``observed`` is |X'|/2^n and ``bound`` is 1 - 2m/2^ceil((n-1)/m); the
    comparison itself is done in exact integers.
    """
    if n > CENSUS_MAX_N:
        raise CapacityError(f"exhaustive certificate needs n <= {CENSUS_MAX_N}, got {n}")
    mats = np.asarray(mats, dtype=np.float64)
    table, m = build_table(n), len(mats)
    p = adversarial_position(mats, table)
    X = input_block(n)
    members = corollary20_members(mats, X, table)
    same = (hard_selection_block(mats, X, table) == hard_selection_block(mats, _flip(X, p), table)).all(axis=1)
    count = int(members.sum())
    invariant = int((same & members).sum())
    E = -(-(n - 1) // m)
    bound_ok = count * 2**E >= (1 << n) * (2**E - 2 * m)
    closed = bool(np.array_equal(members, corollary20_members(mats, _flip(X, p), table)))
    passed = invariant == count and bound_ok
    return ProbeReport("corollary20", 1 << n, count / (1 << n), corollary20_bound(n, m), passed,
                       {"position": p, "members": count, "flip_invariant": invariant,
                        "invariant_fraction": invariant / count if count else 1.0,
                        "closed_under_flip": closed, "risk_floor": count / (1 << n)})


def census_threshold(n: int, m: int) -> int:
    """Smallest integer count that is >= n/(5m); at least 1."""
    return max(1, -(-n // (5 * m)))


def theorem2_members(mats, X, table, L: int = None, threshold: int = None) -> np.ndarray:
    """Each head sees at least ``threshold`` prefix positions carrying its token maximizer."""
    m = len(mats)
    L = prefix_length(table.n, m) if L is None else L
    threshold = census_threshold(table.n, m) if threshold is None else threshold
    mask = np.ones(len(X), dtype=bool)
    for A, pre in zip(mats, _prefixes(mats, table, L)):
        mask &= (X[:, pre] == token_maximizer(A)).sum(axis=1) >= threshold
    return mask


def theorem2_census(mats, n: int, tau: float = 1.0) -> ProbeReport:
    """Exact |X'| under the soft-attention membership rule plus the score cap.

    For certified x, head i's weight on the adversarial position is checked
    against 1 / (n/(5m) + 1).
    """
    if n > CENSUS_MAX_N:
        raise CapacityError(f"exhaustive census needs n <= {CENSUS_MAX_N}, got {n}")
    mats = np.asarray(mats, dtype=np.float64)
    table, m = build_table(n), len(mats)
    p = adversarial_position(mats, table)
    X = input_block(n)
    members = theorem2_members(mats, X, table)
    count = int(members.sum())
    E = -(-(n - 1) // (5 * m))
    bound_ok = count * 2**E >= (1 << n) * (2**E - 2 * m)
    bound = max(0.0, 1.0 - 2.0 * m / 2.0**E)
    cap = 1.0 / (n / (5.0 * m) + 1.0)
    gamma_p = softmax_scores(general_scores_block(mats, X[members], table), tau)[:, :, p - 1]
    worst_gamma = float(gamma_p.max()) if count else 0.0
    cap_ok = worst_gamma <= cap * (1 + 1e-12)
    return ProbeReport("theorem2_census", 1 << n, count / (1 << n), bound, bound_ok and cap_ok,
                       {"position": p, "members": count, "threshold": census_threshold(n, m),
                        "max_gamma_p": worst_gamma, "gamma_cap": cap, "cap_holds": cap_ok})


def census_is_monotone(mats, n: int) -> bool:
    """X' shrinks as heads are added, at a fixed prefix length and threshold."""
    mats = np.asarray(mats, dtype=np.float64)
    table = build_table(n)
    L, T = prefix_length(n, len(mats)), census_threshold(n, len(mats))
    X = input_block(n)
    masks = [theorem2_members(mats[:i], X, table, L, T) for i in range(1, len(mats) + 1)]
    return all(not np.any(b & ~a) for a, b in zip(masks, masks[1:]))
