#!/usr/bin/env python3
"""Render gap_curve.csv files produced by `riskopt probe` as a log-log plot.

Usage: plot_gap_curve.py OUT.png CURVE.csv [CURVE.csv ...]

Each curve is labelled by its directory name, so pointing this at the `a/`
and `b/` outputs of `riskopt compare` overlays the two objectives.
"""

import csv
import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    eps = [float(r["eps"]) for r in rows]
    gap = [abs(float(r["solvency_gap"])) for r in rows]
    err = [float(r["mc_stderr"]) for r in rows]
    return eps, gap, err


def main():
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    out, curves = sys.argv[1], sys.argv[2:]
    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in curves:
        eps, gap, err = load(curve)
        label = pathlib.Path(curve).parent.name or pathlib.Path(curve).stem
        ax.errorbar(eps, gap, yerr=[3 * e for e in err], marker="o", label=label)
    ax.set_xscale("log")
    ax.set_yscale("symlog", linthresh=1e-9)
    ax.set_xlabel("perturbation size")
    ax.set_ylabel("|solvency gap|")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
