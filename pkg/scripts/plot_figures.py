"""Render the CSVs written by reproduce_figures.sh (needs matplotlib)."""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: [r[k] for r in rows] for k in rows[0]}


def num(col):
    return [float(x) for x in col]


def policy_plot(ax, data, title):
    t = num(data["t"])
    ax.plot(t, num(data["pi_star"]), label="pi*")
    ax.plot(t, num(data["cap_pi_u"]), "--", label="Cap(pi_u)")
    ax.plot(t, num(data["pi_u"]), ":", label="pi_u")
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.legend()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("data", nargs="?", default="figures")
    args = ap.parse_args()
    d = Path(args.data)

    fig, ax = plt.subplots(figsize=(6, 4))
    policy_plot(ax, read(d / "fig1_policy_table1.csv"), "base market, K = [0, 1]")
    fig.savefig(d / "fig1.png", dpi=150, bbox_inches="tight")

    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    for ax, axis in zip(axes.flat, ("b", "sigma", "kappa", "rho")):
        data = read(d / f"fig2_sweep_{axis}.csv")
        ax.plot(num(data["axis"]), [100 * x for x in num(data["L0"])])
        ax.set_xlabel(axis)
        ax.set_ylabel("loss (%)")
    fig.tight_layout()
    fig.savefig(d / "fig2.png", dpi=150)

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, m in zip(axes, ("1.75", "2")):
        policy_plot(ax, read(d / f"fig34_policy_crisis_{m}.csv"), f"stress set, alpha = {m} pi_M")
    fig.tight_layout()
    fig.savefig(d / "fig34.png", dpi=150)

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    data = read(d / "fig5_sweep_alpha.csv")
    axes[0].plot(num(data["axis"]), [100 * x for x in num(data["L0"])])
    axes[0].set_xlabel("alpha / pi_M")
    axes[0].set_ylabel("loss at t = 0 (%)")
    for m in ("1.5", "1.75", "1.9", "1.95", "2"):
        c = read(d / f"fig6_wel_curve_{m}.csv")
        axes[1].plot(num(c["t"]), [100 * x for x in num(c["L"])], label=f"{m} pi_M")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("loss (%)")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(d / "fig56.png", dpi=150)
    print(f"wrote PNGs to {d}")


if __name__ == "__main__":
    main()
