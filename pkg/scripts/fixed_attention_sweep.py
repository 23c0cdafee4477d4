"""Norm-capped classifier risk vs the lower bound, for several head counts and seeds.

Usage: python scripts/fixed_attention_sweep.py [--n 12] [--seeds 3] [--mode hard]
"""

import argparse
import csv
import sys

import numpy as np

from parity_attention import ParitySpec
from parity_attention.attention import adversarial_position, random_matrices, theorem2_bound
from parity_attention.embedding import build_table
from parity_attention.probes import corollary20_certificate
from parity_attention.training import TrainConfig, gd_train_ffnn

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=12)
    parser.add_argument("--k", type=int, default=2)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--mode", choices=("soft", "hard"), default="hard")
    parser.add_argument("--epochs", type=int, default=300)
    args = parser.parse_args()

    table = build_table(args.n)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["m", "seed", "parity_bits", "risk", "bound", "x_prime_fraction", "flip_invariant"])
    for m in (1, 2, 3):
        for seed in range(args.seeds):
            rng = np.random.default_rng(seed)
            mats = random_matrices(m, rng)
            p = adversarial_position(mats, table)
            others = rng.permutation([j for j in range(1, args.n + 1) if j != p])[: args.k - 1]
            spec = ParitySpec.of(args.n, sorted([p, *map(int, others)]))
            cap = args.n / (10 * m * m)
            log, model = gd_train_ffnn(TrainConfig(epochs=args.epochs, seed=seed), spec, mats, q=8,
                                       mode=args.mode, norm_cap=cap, table=table)
            bound = theorem2_bound(args.n, m, model.net.alpha_norm(), model.net.beta_norm())
            cert = corollary20_certificate(mats, args.n)
            out.writerow([m, seed, " ".join(map(str, spec.parity_set)), f"{log.final_risk:.6g}",
                          f"{bound:.6g}", f"{cert.observed:.6g}", cert.details["invariant_fraction"] == 1.0])
