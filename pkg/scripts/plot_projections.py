"""Plot the two-user projections written by ``sudregion trace`` for a 3-user network.

Usage: python scripts/plot_projections.py OUT_DIR [--save fig.png]
"""

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def load_curve(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--save", type=Path)
    args = ap.parse_args()

    fig, axes = plt.subplots(1, 3, figsize=(13, 4), constrained_layout=True)
    for u, ax in enumerate(axes, start=1):
        for mode, style in (("inactive", "-"), ("at_max", "--")):
            path = args.out_dir / f"proj_user{u}_{mode}.csv"
            if not path.exists():
                continue
            (xa, xb), curve = load_curve(path)
            if curve.size:
                ax.step(curve[:, 0], curve[:, 1], style, where="post",
                        label=f"user {u} {mode.replace('_', ' ')}")
            ax.set_xlabel(xa.replace("_", " "))
            ax.set_ylabel(xb.replace("_", " "))
        ax.set_xlim(left=0)
        ax.set_ylim(bottom=0)
        ax.grid(alpha=0.3)
        ax.legend()
    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
