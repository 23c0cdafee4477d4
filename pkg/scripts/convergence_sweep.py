"""Final risk of full-batch GD across step sizes, seeds and temperature schedules.

Usage: python scripts/convergence_sweep.py [--n 20] [--bits 8,11,18] [--epochs 30]
"""

import argparse
import csv
import sys

from parity_attention import ParitySpec
from parity_attention.parity import parse_bits_list
from parity_attention.training import TrainConfig, gd_train_attention

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=20)
    parser.add_argument("--bits", default="8,11,18")
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--tau", type=float, default=0.1)
    parser.add_argument("--seeds", type=int, default=4)
    parser.add_argument("--etas", default="0.5,5,50")
    args = parser.parse_args()

    spec = ParitySpec.of(args.n, parse_bits_list(args.bits))
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["eta", "seed", "anneal_from", "status", "steps", "final_risk", "final_eta"])
    for eta in (float(e) for e in args.etas.split(",")):
        for seed in range(args.seeds):
            for anneal in (None, 1.0):
                cfg = TrainConfig(eta=eta, epochs=args.epochs, tau=args.tau, seed=seed, anneal_from=anneal)
                log, _ = gd_train_attention(cfg, spec)
                out.writerow([eta, seed, anneal or "", log.status, log.steps, f"{log.final_risk:.6g}",
                              f"{log.final_eta:g}"])
                sys.stdout.flush()
