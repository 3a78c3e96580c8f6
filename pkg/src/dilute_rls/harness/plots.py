"""Deterministic SVG plots from a metrics table.

Plots are convenience output; the CSVs are the contract.  Byte determinism
needs a pinned hashsalt (matplotlib salts its SVG element ids) and a stripped
Date field.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "dilute-rls"

import matplotlib.pyplot as plt  # noqa: E402

from ..analysis import AGGREGATE, MetricsTable  # noqa: E402

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _save(fig, path: str) -> None:
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def emit_plots(table: MetricsTable, out_dir: str, stem: str) -> list[str]:
    """Write the standard panels for whichever metrics are present."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    ts, errs = table.series("error_sq")
    if ts.size:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.loglog(ts, errs, "o-")
        ax.set_xlabel("t")
        ax.set_ylabel("mean squared estimation error")
        ax.set_title("estimation error vs horizon")
        fig.tight_layout()
        path = os.path.join(out_dir, f"plot_error_{stem}.svg")
        _save(fig, path)
        written.append(path)

    ts_c, coop = table.series("coop_ratio")
    ts_n, noncoop = table.series("noncoop_ratio_max")
    if ts_c.size or ts_n.size:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        if ts_c.size:
            ax.semilogy(ts_c, coop, "o-", label="cooperative")
        if ts_n.size:
            ax.semilogy(ts_n, noncoop, "s--", label="noncooperative (worst agent)")
        ax.set_xlabel("t")
        ax.set_ylabel("p_t log t / lambda_min")
        ax.set_title("excitation ratios")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, f"plot_ratios_{stem}.svg")
        _save(fig, path)
        written.append(path)

    for metric, fname in (("avg_regret", "regret"), ("sync_avg_regret", "sync_regret")):
        ts_r, reg = table.series(metric)
        if ts_r.size:
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.loglog(ts_r, reg, "o-")
            ax.set_xlabel("t")
            ax.set_ylabel("averaged regret")
            ax.set_title(f"{metric} vs horizon")
            fig.tight_layout()
            path = os.path.join(out_dir, f"plot_{fname}_{stem}.svg")
            _save(fig, path)
            written.append(path)

    return written
