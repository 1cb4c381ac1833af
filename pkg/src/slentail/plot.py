"""Scaling plot for `slentail bench --plot`."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def scaling_plot(rows, path: str) -> None:
    """rows: (query, lhs_atoms, valid, nodes, milliseconds) tuples."""
    rows = sorted(rows, key=lambda r: (r[1], r[0]))
    xs = [max(r[1], 1) for r in rows]
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.6))
    left.loglog(xs, [r[3] for r in rows], "o-")
    left.set_xlabel("left-hand atoms")
    left.set_ylabel("normalized sequents")
    right.loglog(xs, [max(r[4], 1e-3) for r in rows], "s-", color="tab:orange")
    right.set_xlabel("left-hand atoms")
    right.set_ylabel("milliseconds")
    for ax in (left, right):
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
