"""Exact expected risk, analytic gradients and full-batch gradient descent.

Every expectation is an exact average over all 2**n inputs, reduced with the
fixed tree in :mod:`parity_attention.reduction`.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .attention import SOFT, AttentionHeads
from .embedding import EmbeddingTable, build_table
from .errors import DomainError, NumericFailure, UnsupportedMode
from .heads import DEFAULT_B_SIGMA, FixedTelescopingHead, TrainableFFNN1
from .model import FrozenAttentionModel, ParityTransformer, weighted_counts
from .parity import ParitySpec, check_capacity, input_block, label_block, squared_hinge, squared_hinge_grad
from .reduction import map_tree_sum, tree_sum


@dataclass
class TrainConfig:
    eta: float = 0.5
    epochs: int = 200
    epsilon: float = 0.01
    tau: float = None  # None -> 2/n
    seed: int = 0
    b_sigma: float = DEFAULT_B_SIGMA
    anneal_from: float = None  # linear tau schedule start; None keeps tau constant
    threads: int = 1
    eta_floor: float = 1e-12

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta must be > 0, got {self.eta}")
        if self.epochs < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be > 0, got {self.epsilon}")
        if self.tau is not None and not self.tau > 0:
            raise DomainError(f"tau must be > 0, got {self.tau}")
        if not self.b_sigma > 0:
            raise DomainError(f"b_sigma must be > 0, got {self.b_sigma}")

    def resolved_tau(self, n: int) -> float:
        return 2.0 / n if self.tau is None else self.tau

    def tau_at(self, step: int, n: int) -> float:
        tau = self.resolved_tau(n)
        if self.anneal_from is None:
            return tau
        frac = min(1.0, step / self.epochs)
        return self.anneal_from + (tau - self.anneal_from) * frac


@dataclass
class RiskReport:
    risk: float
    grad: np.ndarray = None
    per_input: dict = None

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad)) if self.grad is not None else math.nan


@dataclass
class StepRecord:
    step: int
    risk: float
    grad_norm: float
    pl_ratio: float
    eta: float
    min_head_gap: float = math.nan


@dataclass
class TrajectoryLog:
    records: list = field(default_factory=list)
    status: str = "epoch-limit"
    final_eta: float = math.nan

    @property
    def risks(self) -> np.ndarray:
        return np.array([r.risk for r in self.records])

    @property
    def pl_ratios(self) -> np.ndarray:
        return np.array([r.pl_ratio for r in self.records])

    @property
    def final_risk(self) -> float:
        return self.records[-1].risk

    @property
    def steps(self) -> int:
        return self.records[-1].step if self.records else 0


def pl_ratio(risk: float, grad_norm: float) -> float:
    """1/2 ||grad||^2 / L; NaN at L = 0."""
    return 0.5 * grad_norm * grad_norm / risk if risk > 0 else math.nan


# ---------------------------------------------------------------------------
# attention-head training


def init_heads(k: int, seed=0, tau: float = 0.1) -> AttentionHeads:
    """k unit 2-vectors (cos w, sin w) at angles w ~ Unif[0, 2*pi)."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    omega = rng.uniform(0.0, 2.0 * np.pi, size=k)
    return AttentionHeads(np.column_stack([np.cos(omega), np.sin(omega)]), tau, SOFT)


def expected_risk(model, spec: ParitySpec, threads: int = 1) -> float:
    """Exact mean squared hinge loss of ``model.predict`` over all inputs."""
    check_capacity(spec.n)
    predict = model.predict if hasattr(model, "predict") else model

    def chunk(start, stop):
        X = input_block(spec.n, start, stop)
        return squared_hinge(label_block(spec, start, stop), predict(X))

    return float(map_tree_sum(chunk, spec.n, threads)) / (1 << spec.n)


def softmax_jacobian_rows(gamma: np.ndarray, table: EmbeddingTable, tau: float) -> np.ndarray:
    """d gamma_p / d (a13, a14) for each head, shape (m, n, 2).

    Standard softmax Jacobian: gamma_p (d_p - sum_j gamma_j d_j) / tau with
    d_j = (sin, cos) of position j.
    """
    D = table.pos_part  # (n, 2)
    centred = D[None, :, :] - (gamma @ D)[:, None, :]
    return gamma[:, :, None] * centred / tau


def attention_risk_grad(model: ParityTransformer, spec: ParitySpec, threads: int = 1,
                        with_grad: bool = True) -> RiskReport:
    """Exact risk and its gradient w.r.t. [a13^(1), a14^(1), ..., a13^(m), a14^(m)]."""
    check_capacity(spec.n)
    if spec.n != model.n:
        raise DomainError(f"model n={model.n} but spec n={spec.n}")
    heads, clf = model.heads, model.classifier
    if with_grad and heads.mode != SOFT:
        raise UnsupportedMode("hard attention has no gradient with respect to the heads")
    w = model.count_weights()

    def chunk(start, stop):
        X = input_block(spec.n, start, stop)
        y = label_block(spec, start, stop)
        t = weighted_counts(w, X)
        yhat = clf.forward_count(t)
        loss = squared_hinge(y, yhat)
        if not with_grad:
            return loss
        g = squared_hinge_grad(y, yhat) * clf.grad_count(t)
        return loss, g[:, None] * X

    N = 1 << spec.n
    if not with_grad:
        return RiskReport(float(map_tree_sum(chunk, spec.n, threads)) / N)
    loss_sum, gx_sum = map_tree_sum(chunk, spec.n, threads)
    dw = gx_sum / N  # dL/dw_j
    d_gamma = (clf.k / heads.m) * dw
    gamma = heads.attention_map(model.table)
    J = softmax_jacobian_rows(gamma, model.table, heads.tau)  # (m, n, 2)
    grad = np.einsum("n,mnc->mc", d_gamma, J).ravel()
    return RiskReport(float(loss_sum) / N, grad)


def analytic_attention_gradient(model: ParityTransformer, spec: ParitySpec, threads: int = 1) -> np.ndarray:
    return attention_risk_grad(model, spec, threads).grad


def yhat_and_grad(model: ParityTransformer, X: np.ndarray):
    """Per-input prediction and d yhat / d params, shapes (M,) and (M, 2m)."""
    heads, clf = model.heads, model.classifier
    gamma = heads.attention_map(model.table)
    w = (clf.k / heads.m) * gamma.sum(axis=0)
    Xf = np.atleast_2d(X).astype(np.float64)
    t = weighted_counts(w, Xf)
    J = softmax_jacobian_rows(gamma, model.table, heads.tau)
    dt = (clf.k / heads.m) * np.einsum("Mn,mnc->Mmc", Xf, J).reshape(len(Xf), -1)
    return clf.forward_count(t), clf.grad_count(t)[:, None] * dt


def per_input_attention_grads(model: ParityTransformer, spec: ParitySpec) -> tuple:
    """Per-input losses and loss gradients over all inputs: (2^n,), (2^n, m, 2)."""
    check_capacity(spec.n, ceiling=16)
    X = input_block(spec.n)
    y = label_block(spec)
    yhat, dyhat = yhat_and_grad(model, X)
    dl = squared_hinge_grad(y, yhat)[:, None] * dyhat
    return squared_hinge(y, yhat), dl.reshape(len(X), model.heads.m, 2)


def finite_difference_gradient(fn, theta, step: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function of a flat parameter vector."""
    if not step > 0:
        raise DomainError(f"step must be > 0, got {step}")
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (fn(up) - fn(down)) / (2.0 * step)
    return grad


def attention_fd_gradient(model: ParityTransformer, spec: ParitySpec, step: float = 1e-6) -> np.ndarray:
    shape = model.heads.params.shape

    def risk(theta):
        trial = ParityTransformer(model.heads.with_params(theta.reshape(shape)), model.classifier, model.n)
        return attention_risk_grad(trial, spec, with_grad=False).risk

    return finite_difference_gradient(risk, model.heads.params.ravel(), step)


def min_head_gap(gamma: np.ndarray) -> float:
    """Smallest gap between the top two attention weights over heads."""
    if gamma.shape[1] < 2:
        return math.inf
    top2 = np.sort(gamma, axis=1)[:, -2:]
    return float((top2[:, 1] - top2[:, 0]).min())


def gd_train_attention(config: TrainConfig, spec: ParitySpec, heads: AttentionHeads = None):
    """Full-batch gradient descent on the k attention heads.

    The step size starts at ``config.eta`` and is halved (permanently) every
    time a step would increase the risk, so the logged risk never goes up.
    Returns ``(TrajectoryLog, ParityTransformer)``.
    """
    n = spec.n
    if heads is None:
        heads = init_heads(spec.k, config.seed, config.tau_at(0, n))
    clf = FixedTelescopingHead(spec.k, config.b_sigma)
    model = ParityTransformer(heads, clf, n)
    eta = config.eta
    log = TrajectoryLog()

    def evaluate(params, tau, step):
        trial = ParityTransformer(AttentionHeads(params, tau, SOFT), clf, n)
        report = attention_risk_grad(trial, spec, config.threads)
        if not (math.isfinite(report.risk) and np.all(np.isfinite(report.grad))):
            raise NumericFailure(step)
        return trial, report

    model, report = evaluate(heads.params, config.tau_at(0, n), 0)
    log.records.append(StepRecord(0, report.risk, report.grad_norm,
                                  pl_ratio(report.risk, report.grad_norm), eta,
                                  min_head_gap(model.attention_map())))
    for step in range(1, config.epochs + 1):
        if report.risk < config.epsilon:
            log.status = "converged"
            break
        tau = config.tau_at(step, n)
        if tau != model.heads.tau:
            model, report = evaluate(model.heads.params, tau, step)
        base = model.heads.params
        grad = report.grad.reshape(base.shape)
        while True:
            cand, cand_report = evaluate(base - eta * grad, tau, step)
            if cand_report.risk <= report.risk or eta <= config.eta_floor:
                break
            eta *= 0.5
        model, report = cand, cand_report
        log.records.append(StepRecord(step, report.risk, report.grad_norm,
                                      pl_ratio(report.risk, report.grad_norm), eta,
                                      min_head_gap(model.attention_map())))
    else:
        if report.risk < config.epsilon:
            log.status = "converged"
    log.final_eta = eta
    return log, model


# ---------------------------------------------------------------------------
# classifier training on frozen attention


def ffnn_risk_grad(net: TrainableFFNN1, V: np.ndarray, y: np.ndarray, with_grad: bool = True,
                   threads: int = 1) -> RiskReport:
    """Exact risk and gradient of a network over precomputed features V (2^n rows)."""
    n = int(round(math.log2(len(V))))

    def chunk(start, stop):
        yhat = net.forward(V[start:stop])
        loss = squared_hinge(y[start:stop], yhat)
        if not with_grad:
            return loss
        dl = squared_hinge_grad(y[start:stop], yhat)
        return loss, dl[:, None] * net.per_input_grad(V[start:stop])

    N = len(V)
    if not with_grad:
        return RiskReport(float(map_tree_sum(chunk, n, threads)) / N)
    loss_sum, grad_sum = map_tree_sum(chunk, n, threads)
    return RiskReport(float(loss_sum) / N, grad_sum / N)


def project_norms(net: TrainableFFNN1, cap: float) -> TrainableFFNN1:
    """Rescale alpha and beta equally so that |alpha| |beta| <= cap."""
    prod = net.alpha_norm() * net.beta_norm()
    if cap is None or prod <= cap:
        return net
    s = math.sqrt(cap / prod)
    return TrainableFFNN1(net.beta * s, net.biases, net.alpha * s, net.b, net.b_sigma)


@dataclass
class FFNNTrajectory(TrajectoryLog):
    alpha_norms: list = field(default_factory=list)
    beta_norms: list = field(default_factory=list)


def gd_train_ffnn(config: TrainConfig, spec: ParitySpec, frozen_mats, q: int = 4,
                  mode: str = SOFT, attn_tau: float = 1.0, norm_cap: float = None,
                  net: TrainableFFNN1 = None, table: EmbeddingTable = None):
    """Full-batch gradient descent on the classifier only; heads stay frozen.

    With ``norm_cap`` every iterate is projected onto |alpha| |beta| <= cap.
    Returns ``(FFNNTrajectory, FrozenAttentionModel)``.
    """
    check_capacity(spec.n, ceiling=20)
    table = table or build_table(spec.n)
    if net is None:
        net = TrainableFFNN1.random(q, np.random.default_rng(config.seed), b_sigma=config.b_sigma)
    net = project_norms(net, norm_cap)
    model = FrozenAttentionModel(frozen_mats, table, net, attn_tau, mode)
    V = model.features(input_block(spec.n))
    y = label_block(spec)
    eta = config.eta
    log = FFNNTrajectory()

    def evaluate(theta, step):
        cand = project_norms(TrainableFFNN1.from_flat(theta, net.q, config.b_sigma), norm_cap)
        report = ffnn_risk_grad(cand, V, y, threads=config.threads)
        if not (math.isfinite(report.risk) and np.all(np.isfinite(report.grad))):
            raise NumericFailure(step)
        return cand, report

    def record(step, net, report):
        log.records.append(StepRecord(step, report.risk, report.grad_norm,
                                      pl_ratio(report.risk, report.grad_norm), eta))
        log.alpha_norms.append(net.alpha_norm())
        log.beta_norms.append(net.beta_norm())

    net, report = evaluate(net.flat(), 0)
    record(0, net, report)
    for step in range(1, config.epochs + 1):
        if report.risk < config.epsilon:
            log.status = "converged"
            break
        while True:
            cand, cand_report = evaluate(net.flat() - eta * report.grad, step)
            if cand_report.risk <= report.risk or eta <= config.eta_floor:
                break
            eta *= 0.5
        net, report = cand, cand_report
        record(step, net, report)
    else:
        if report.risk < config.epsilon:
            log.status = "converged"
    log.final_eta = eta
    model.net = net
    return log, model


def mean_over_inputs(values) -> float:
    return float(tree_sum(values)) / len(values)
