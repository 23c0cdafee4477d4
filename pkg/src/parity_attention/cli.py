"""Command-line entry point: ``python -m parity_attention <subcommand> [flags]``.

Exit codes: 0 converged / all checks passed, 1 not converged or a probe failed,
2 usage or domain error, 3 numeric failure.
"""

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from .attention import HARD, SOFT, adversarial_position, head_matrix, random_matrices, target_head, target_heads, theorem2_bound
from .embedding import build_table
from .errors import CapacityError, DomainError, NumericFailure, UnsupportedMode
from .heads import DEFAULT_B_SIGMA, FixedTelescopingHead, ReLUParityNet, parameter_count
from .model import ParityTransformer
from .outputs import write_attention_csv, write_checkpoint, write_pgm, write_probes, write_trajectory
from .parity import ParitySpec, parse_bits_list, random_parity_set
from .probes import (
    ProbeReport,
    census_is_monotone,
    corollary20_certificate,
    grad_correlation_probe,
    lipschitz_probe_yhat,
    pl_constant_probe,
    smoothness_probe,
    soft_to_hard_check,
    theorem2_census,
    yhat_grad_lipschitz_probe,
)
from .training import (
    TrainConfig,
    analytic_attention_gradient,
    attention_fd_gradient,
    expected_risk,
    gd_train_attention,
    gd_train_ffnn,
    init_heads,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

# Keys that change how a run executes but not what it computes; kept out of
# the config comment so artifacts compare byte-for-byte across them.
EXECUTION_KEYS = ("threads", "out")

SUBCOMMAND_DEFAULTS = {
    "train": dict(n=20, k=3, epochs=200),
    "fixed-attention": dict(n=12, k=2, epochs=300, heads=2),
    "gradcheck": dict(n=8, k=2, epochs=1),
    "probe": dict(n=8, k=2, epochs=200),
    "express": dict(n=10, k=3, epochs=1),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parity-attention",
                                     description="Single-layer attention learning k-parity: training and checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults in SUBCOMMAND_DEFAULTS.items():
        p = sub.add_parser(name, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--n", type=int, default=defaults["n"], help="input length")
        p.add_argument("--k", type=int, default=defaults["k"], help="parity size")
        p.add_argument("--parity-bits", type=parse_bits_list, default=None,
                       help="comma-separated 1-indexed positions; random from --seed when omitted")
        p.add_argument("--tau", type=float, default=None,
                       help="softmax temperature (2/n for trained heads, 1 for frozen heads)")
        p.add_argument("--anneal-from", type=float, default=None,
                       help="start temperature of a linear schedule ending at --tau")
        p.add_argument("--eta", type=float, default=0.5, help="initial step size")
        p.add_argument("--epochs", type=int, default=defaults["epochs"], help="maximum GD steps")
        p.add_argument("--epsilon", type=float, default=0.01, help="target risk")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--b-sigma", type=float, default=DEFAULT_B_SIGMA, help="smoothed-ReLU constant")
        p.add_argument("--heads", type=int, default=defaults.get("heads"),
                       help="frozen head count m (fixed-attention)")
        p.add_argument("--mode", choices=(SOFT, HARD), default=SOFT, help="frozen attention mode")
        p.add_argument("--q", type=int, default=8, help="FFNN hidden width")
        p.add_argument("--norm-cap", type=float, default=None,
                       help="cap on |alpha||beta| (default n/(10 m^2))")
        p.add_argument("--control", action="store_true",
                       help="fixed-attention positive control with the exact target heads")
        p.add_argument("--trials", type=int, default=1000 if name == "probe" else 1,
                       help="random configurations / probe pairs")
        p.add_argument("--fd-step", type=float, default=1e-6, help="finite-difference step")
        p.add_argument("--out", default=f"runs/{name}", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for the exact sums")
    return parser


def resolve(args) -> dict:
    """Fill data-dependent defaults; returns the full config as a dict."""
    cfg = dict(vars(args))
    n, k = cfg["n"], cfg["k"]
    if n < 1 or k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= n, got n={n} k={k}")
    if cfg["threads"] < 1:
        raise DomainError("--threads must be >= 1")
    cfg["random_bits"] = cfg["parity_bits"] is None
    if cfg["random_bits"]:
        cfg["parity_bits"] = random_parity_set(n, k, np.random.default_rng([cfg["seed"], 1]))
    bits = tuple(int(b) for b in cfg["parity_bits"])
    if len(bits) != k:
        raise DomainError(f"--parity-bits has {len(bits)} positions but --k is {k}")
    cfg["parity_bits"] = tuple(ParitySpec.of(n, bits).parity_set)
    if cfg["tau"] is None:
        cfg["tau"] = 1.0 if cfg["command"] == "fixed-attention" else 2.0 / n
    if cfg["command"] == "fixed-attention":
        m = cfg["heads"]
        if m is None or m < 1:
            raise DomainError("--heads must be >= 1")
        if cfg["norm_cap"] is None:
            cfg["norm_cap"] = n / (10.0 * m * m)
    return cfg


def recorded(cfg: dict) -> dict:
    return {key: value for key, value in cfg.items() if key not in EXECUTION_KEYS}


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(eta=cfg["eta"], epochs=cfg["epochs"], epsilon=cfg["epsilon"], tau=cfg["tau"],
                       seed=cfg["seed"], b_sigma=cfg["b_sigma"], anneal_from=cfg["anneal_from"],
                       threads=cfg["threads"])


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_reports(reports):
    for r in reports:
        print(f"  {r.probe:<22} samples={r.samples:<10} observed={r.observed:.6g} "
              f"bound={r.bound:.6g} {'PASS' if r.passed else 'FAIL'}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(cfg) -> int:
    spec = ParitySpec.of(cfg["n"], cfg["parity_bits"])
    config = train_config(cfg)
    log, model = gd_train_attention(config, spec)
    out = _out_dir(cfg)
    meta = recorded(cfg)
    gamma = model.attention_map()
    write_trajectory(out / "trajectory.csv", meta, log)
    write_attention_csv(out / "attention.csv", meta, gamma)
    write_pgm(out / "attention.pgm", meta, gamma)
    write_checkpoint(out / "checkpoint.txt", meta, {
        "n": spec.n, "k": spec.k, "parity_bits": spec.parity_set, "tau": float(model.heads.tau),
        "b_sigma": float(config.b_sigma), "status": log.status, "steps": log.steps,
        "final_risk": float(log.final_risk), "final_eta": float(log.final_eta), "heads": model.heads.params,
    })
    check = soft_to_hard_check(model, spec, config.epsilon, config.threads)
    print(f"status={log.status} steps={log.steps} risk={log.final_risk:.6g} eta={log.final_eta:g}")
    for i, (pos, g) in enumerate(zip(check.argmax_positions, check.top_gamma), start=1):
        print(f"  head {i}: argmax position {pos} gamma={g:.4f}")
    print(f"hard-attention risk={check.hard_risk:.6g}")
    for left, count in check.midpoints.items():
        print(f"  adjacent bits {left},{left + 1}: {count} head(s) near the midpoint")
    return EXIT_OK if log.status == "converged" else EXIT_FAIL


def cmd_fixed_attention(cfg) -> int:
    n, k, m = cfg["n"], cfg["k"], cfg["heads"]
    table = build_table(n)
    rng = np.random.default_rng(cfg["seed"])
    reports = []
    if cfg["control"]:
        spec = ParitySpec.of(n, cfg["parity_bits"])
        mats = np.stack([head_matrix(*target_head(b, n)) for b in spec.parity_set])
        cap = None
    else:
        mats = random_matrices(m, rng)
        p = adversarial_position(mats, table)
        others = rng.permutation([j for j in range(1, n + 1) if j != p])[: k - 1]
        spec = ParitySpec.of(n, sorted([p, *map(int, others)]))
        cap = cfg["norm_cap"]
    config = train_config(cfg)
    log, model = gd_train_ffnn(config, spec, mats, q=cfg["q"], mode=cfg["mode"], attn_tau=cfg["tau"],
                               norm_cap=cap, table=table)
    risk = log.final_risk
    net = model.net
    print(f"parity set {spec.parity_set}; final risk={risk:.6g} after {log.steps} steps "
          f"|alpha|={net.alpha_norm():.4g} |beta|={net.beta_norm():.4g}")
    if cfg["control"]:
        reports.append(ProbeReport("control_risk", 1 << n, risk, 0.05, risk < 0.05))
    else:
        bound = theorem2_bound(n, len(mats), net.alpha_norm(), net.beta_norm())
        reports.append(ProbeReport("theorem2_risk", 1 << n, risk, bound - 0.05, risk >= bound - 0.05,
                                   {"bound": bound}))
        if n <= 14:
            reports.append(corollary20_certificate(mats, n))
            census = theorem2_census(mats, n, cfg["tau"])
            census.passed = census.passed and census_is_monotone(mats, n)
            reports.append(census)
    out = _out_dir(cfg)
    meta = recorded(cfg)
    write_trajectory(out / "trajectory.csv", meta, log)
    write_probes(out / "probes.csv", meta, reports)
    write_checkpoint(out / "checkpoint.txt", meta, {
        "n": n, "parity_bits": spec.parity_set, "mats": mats, "beta": net.beta, "biases": net.biases,
        "alpha": net.alpha, "b": float(net.b), "final_risk": float(risk)})
    _print_reports(reports)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def gradcheck_error(analytic, numeric) -> float:
    """Max relative error with a 1e-3 denominator floor (an absolute 1e-8 at rel 1e-5)."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    return float(np.max(np.abs(analytic - numeric) / scale))


def cmd_gradcheck(cfg) -> int:
    spec = ParitySpec.of(cfg["n"], cfg["parity_bits"])
    clf = FixedTelescopingHead(spec.k, cfg["b_sigma"])
    worst = 0.0
    for trial in range(cfg["trials"]):
        heads = init_heads(spec.k, [cfg["seed"], trial], cfg["tau"])
        model = ParityTransformer(heads, clf, spec.n)
        err = gradcheck_error(analytic_attention_gradient(model, spec, cfg["threads"]),
                              attention_fd_gradient(model, spec, cfg["fd_step"]))
        worst = max(worst, err)
    print(f"max relative error={worst:.3e} over {cfg['trials']} configuration(s)")
    return EXIT_OK if worst < 1e-5 else EXIT_FAIL


def cmd_probe(cfg) -> int:
    spec = ParitySpec.of(cfg["n"], cfg["parity_bits"])
    tau, b, seed, trials = cfg["tau"], cfg["b_sigma"], cfg["seed"], cfg["trials"]
    reports = [
        lipschitz_probe_yhat(spec, trials, seed, tau, b),
        smoothness_probe(spec, trials, seed, tau, b),
        yhat_grad_lipschitz_probe(spec, trials, seed, tau, b),
        grad_correlation_probe(init_heads(spec.k, seed, tau), spec, b, seed),
    ]
    log, model = gd_train_attention(train_config(cfg), spec)
    reports.append(pl_constant_probe(log, spec.n, spec.k, tau, model.attention_map(), cfg["epsilon"]))
    write_probes(_out_dir(cfg) / "probes.csv", recorded(cfg), reports)
    _print_reports(reports)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_express(cfg) -> int:
    n, k = cfg["n"], cfg["k"]
    sets = itertools.combinations(range(1, n + 1), k) if cfg["random_bits"] else [cfg["parity_bits"]]
    worst_relu, worst_tf, count = 0.0, 0.0, 0
    for bits in sets:
        spec = ParitySpec.of(n, bits)
        worst_relu = max(worst_relu, expected_risk(ReLUParityNet(spec.parity_set), spec, cfg["threads"]))
        tf = ParityTransformer(target_heads(spec.parity_set, n, cfg["tau"], HARD), FixedTelescopingHead(k, 1e-8), n)
        worst_tf = max(worst_tf, expected_risk(tf, spec, cfg["threads"]))
        count += 1
    relu_params = parameter_count(ReLUParityNet(tuple(range(1, k + 1))))
    tf_params = parameter_count(tf)
    print(f"checked {count} parity set(s) on all {1 << n} inputs")
    print(f"  ReLU parity net: max risk={worst_relu:.3g}, parameters={relu_params}")
    print(f"  target-head transformer (hard): max risk={worst_tf:.3g}, parameters={tf_params}")
    ok = worst_relu < 1e-6 and worst_tf < 1e-6
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "train": cmd_train,
    "fixed-attention": cmd_fixed_attention,
    "gradcheck": cmd_gradcheck,
    "probe": cmd_probe,
    "express": cmd_express,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        print("resolved config:")
        for key, value in sorted(cfg.items()):
            print(f"  {key} = {value}")
        return COMMANDS[cfg["command"]](cfg)
    except (DomainError, CapacityError, UnsupportedMode) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"numeric failure at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
