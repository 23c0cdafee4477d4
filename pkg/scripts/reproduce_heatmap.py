"""Train the n=20, B={8,11,18} model and print its attention heatmap as text.

Usage: python scripts/reproduce_heatmap.py [--epochs 30] [--out runs/heatmap]
"""

import argparse

import numpy as np

from parity_attention.cli import main
from parity_attention.outputs import read_pgm

SHADES = " .:-=+*#%@"


def render(levels: np.ndarray) -> str:
    idx = (levels * (len(SHADES) - 1)) // 255
    return "\n".join("".join(SHADES[i] for i in row) for row in idx)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--out", default="runs/heatmap")
    args = parser.parse_args()
    code = main(["train", "--n", "20", "--k", "3", "--parity-bits", "8,11,18", "--tau", "0.1",
                 "--epochs", str(args.epochs), "--out", args.out])
    print("position  " + "".join(str(j % 10) for j in range(1, 21)))
    for i, line in enumerate(render(read_pgm(f"{args.out}/attention.pgm")).splitlines(), start=1):
        print(f"head {i}    {line}")
    raise SystemExit(code)
