#!/usr/bin/env python3
"""Render BER sweep figures from simulator CSV output.

Standalone post-processing: reads the delimited results written by the
simulator CLI and draws one semilog BER figure, one labeled series per
algorithm with binomial error bars.  The simulator itself is never
imported; the CSV file format is the only interface.

Usage:
    python3 render.py <results.csv> <kind> <out.png>

where <kind> is one of ber_vs_snr, ber_vs_beta, ber_vs_iter.
"""

import csv
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

REQUIRED_COLUMNS = (
    "sweep_name", "sweep_value", "algorithm", "bits", "errors", "ber",
    "subframes", "erasures", "seed", "config_hash", "walltime_s",
)

KINDS = {
    "ber_vs_snr": ("snr_db", "SNR (dB)"),
    "ber_vs_beta": ("beta", "oscillator linewidth beta (Hz)"),
    "ber_vs_iter": ("iterations", "iterations"),
}

SERIES_ORDER = ["no_pn", "ide", "cpe_a0", "cpe_plain", "no_comp"]


class SchemaError(ValueError):
    """The CSV does not match the expected results layout."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    kind: str
    out_path: str


def load_results(path):
    """Parse results rows and '#' header comments from a sweep CSV."""
    comments = []
    data_lines = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                comments.append(line.lstrip("# "))
            else:
                data_lines.append(line)
    if not data_lines:
        raise SchemaError(f"{path}: no header row found")
    reader = csv.DictReader(data_lines)
    missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    rows = []
    for raw in reader:
        rows.append({
            "sweep_name": raw["sweep_name"],
            "sweep_value": float(raw["sweep_value"]),
            "algorithm": raw["algorithm"],
            "bits": int(raw["bits"]),
            "ber": float(raw["ber"]),
        })
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows, comments


def std_error(ber, bits):
    """Binomial standard error of the BER estimate, floored at 1/bits."""
    p = min(max(ber, 1.0 / bits), 1.0 - 1.0 / bits)
    return (p * (1.0 - p) / bits) ** 0.5


def render(spec: FigureSpec):
    """Draw the figure and write it to spec.out_path; returns the Figure."""
    if spec.kind not in KINDS:
        raise ValueError(f"unknown figure kind {spec.kind!r}; "
                         f"expected one of {sorted(KINDS)}")
    sweep_name, x_label = KINDS[spec.kind]
    rows, comments = load_results(spec.csv_path)
    sweeps = {r["sweep_name"] for r in rows}
    if sweeps != {sweep_name}:
        raise SchemaError(
            f"{spec.csv_path}: sweep {sorted(sweeps)} does not match "
            f"figure kind {spec.kind} (expected {sweep_name})"
        )
    values = sorted({r["sweep_value"] for r in rows})
    if len(values) < 2:
        raise ValueError(f"{spec.csv_path}: need at least 2 sweep points, "
                         f"got {len(values)}")

    algorithms = sorted(
        {r["algorithm"] for r in rows},
        key=lambda a: SERIES_ORDER.index(a) if a in SERIES_ORDER else 99,
    )
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for alg in algorithms:
        pts = sorted((r for r in rows if r["algorithm"] == alg),
                     key=lambda r: r["sweep_value"])
        x = [r["sweep_value"] for r in pts]
        y = [max(r["ber"], 1.0 / r["bits"]) for r in pts]
        yerr = [std_error(r["ber"], r["bits"]) for r in pts]
        lo = [min(e, v * 0.999) for v, e in zip(y, yerr)]
        ax.errorbar(x, y, yerr=[lo, yerr], marker="o", capsize=3, label=alg)
    ax.set_yscale("log")
    ax.set_xlabel(x_label)
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    fixed = next((c[len("fixed: "):] for c in comments if c.startswith("fixed: ")), "")
    ax.set_title(f"BER vs {x_label.split(' (')[0]}" + (f"\n{fixed}" if fixed else ""),
                 fontsize=9)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150)
    return fig


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    try:
        render(FigureSpec(csv_path=argv[0], kind=argv[1], out_path=argv[2]))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
