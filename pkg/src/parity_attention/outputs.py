"""Writers and readers for the experiment artifacts.

Every file starts with a ``#`` comment carrying the resolved config (the PGM
heatmap puts it right after its ``P2`` magic, where the format allows
comments). Floats in CSVs use ``repr`` (shortest round-trip); checkpoints use
``float.hex`` for exact replay.
"""

import csv
import io
import math
from pathlib import Path

import numpy as np

TRAJECTORY_COLUMNS = ("step", "risk", "grad_norm", "pl_ratio", "eta")
ATTENTION_COLUMNS = ("head", "position", "gamma")
PROBE_COLUMNS = ("probe", "samples", "observed", "bound", "pass")


def config_line(config: dict) -> str:
    parts = [f"{key}={_fmt_config(value)}" for key, value in sorted(config.items())]
    return "# config: " + " ".join(parts)


def _fmt_config(value) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_csv(path, config, columns, rows) -> Path:
    buf = io.StringIO()
    buf.write(config_line(config) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def write_trajectory(path, config: dict, log) -> Path:
    rows = ((r.step, float(r.risk), float(r.grad_norm), float(r.pl_ratio), float(r.eta)) for r in log.records)
    return _write_csv(path, config, TRAJECTORY_COLUMNS, rows)


def write_attention_csv(path, config: dict, gamma: np.ndarray) -> Path:
    rows = ((i + 1, j + 1, float(gamma[i, j])) for i in range(gamma.shape[0]) for j in range(gamma.shape[1]))
    return _write_csv(path, config, ATTENTION_COLUMNS, rows)


def write_probes(path, config: dict, reports) -> Path:
    rows = ((r.probe, r.samples, float(r.observed), float(r.bound), int(r.passed)) for r in reports)
    return _write_csv(path, config, PROBE_COLUMNS, rows)


def gray_levels(gamma: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(255.0 * np.asarray(gamma)), 0, 255).astype(int)


def write_pgm(path, config: dict, gamma: np.ndarray) -> Path:
    """Plain (P2) 8-bit heatmap: one row per head, one column per position."""
    levels = gray_levels(gamma)
    rows, cols = levels.shape
    lines = ["P2", config_line(config), f"{cols} {rows}", "255"]
    lines += [" ".join(str(v) for v in row) for row in levels]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_pgm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if tokens[0] != "P2":
        raise ValueError("not a plain PGM file")
    cols, rows, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:]])
    if data.size != rows * cols or data.max(initial=0) > maxval:
        raise ValueError("malformed PGM payload")
    return data.reshape(rows, cols)


def read_csv(path) -> tuple:
    """Return (config comment line, list of row dicts)."""
    text = Path(path).read_text().splitlines()
    return text[0], list(csv.DictReader(text[1:]))


def write_checkpoint(path, config: dict, values: dict) -> Path:
    """key=value lines; floats (and float arrays, flattened) as hex."""
    lines = [config_line(config)]
    for key, value in values.items():
        if isinstance(value, np.ndarray):
            for idx, v in enumerate(value.ravel()):
                lines.append(f"{key}.{idx}={float(v).hex()}")
        elif isinstance(value, float):
            lines.append(f"{key}={value.hex()}")
        else:
            lines.append(f"{key}={_fmt_config(value)}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_checkpoint(path) -> dict:
    """Parse a checkpoint back; hex floats are decoded, everything else stays text."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        key, value = line.split("=", 1)
        try:
            out[key] = float.fromhex(value) if "0x" in value or value in ("inf", "-inf", "nan") else value
        except ValueError:
            out[key] = value
    return out


def checkpoint_array(values: dict, key: str) -> np.ndarray:
    idx = sorted(int(k.rsplit(".", 1)[1]) for k in values if k.startswith(key + "."))
    return np.array([values[f"{key}.{i}"] for i in idx])
