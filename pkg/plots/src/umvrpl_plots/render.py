"""Batch figure rendering: four figure families over a sweep CSV.

Every renderer returns a small metadata dict (computed markers, means) so
tests can assert on what was drawn without parsing the image.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .stats import (EmptySelectionError, critical_radius, log2_star, select,
                    summarize)

POLICY_COLORS = {"bp": "tab:red", "dmar": "tab:blue",
                 "bp_gci": "tab:red", "dmar_gci": "tab:blue"}

FAMILIES = ("cost_vs_k", "clusters_vs_k", "critical_radius", "exploration_split")


def _curve(ax, rows, policy, value, label=None, color=None, dashed=False):
    stats = summarize([r for r in rows if r["policy"] == policy], ("k",), value)
    ks = [g[0] for g in stats]
    means = [stats[(k,)]["mean"] for k in ks]
    los = [m - (stats[(k,)]["ci95"] or 0.0) for k, m in zip(ks, means)]
    his = [m + (stats[(k,)]["ci95"] or 0.0) for k, m in zip(ks, means)]
    style = dict(color=color or POLICY_COLORS.get(policy),
                 linestyle="--" if dashed else "-")
    ax.plot(ks, means, marker="o", label=label or policy, **style)
    ax.fill_between(ks, los, his, alpha=0.2, color=style["color"])
    return {k: m for k, m in zip(ks, means)}


def render_cost_vs_k(rows, out_path, side=None, ratio=None, view_mode=None):
    """Mean cost curves with CI bands for BP vs DMAR, planner-time overlay,
    critical-radius marker and effective-range shading."""
    rows = select(rows, side=side, ratio=ratio, view_mode=view_mode,
                  policies={"bp", "dmar"})
    side = side if side is not None else rows[0]["side"]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    _curve(ax, rows, "bp", "total_cost", label="base policy")
    _curve(ax, rows, "dmar", "total_cost", label="rollout")
    ax2 = ax.twinx()
    for pol in ("bp", "dmar"):
        _curve(ax2, rows, pol, "planner_time_ms",
               label=f"{pol} planner ms", dashed=True)
    ax2.set_ylabel("mean planner time (ms)")
    star = log2_star(side * side)
    ax.axvspan(2 * star, 3 * star, alpha=0.12, color="orange",
               label="effective range")
    kstar = critical_radius(rows)[side]
    if kstar is not None:
        ax.axvline(kstar, color="gray", linestyle=":", label=f"k* = {kstar}")
    ax.set_xlabel("sensing radius k")
    ax.set_ylabel("mean total cost")
    ax.set_title(f"{side}x{side}, cost vs sensing radius")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return {"kstar": kstar, "effective_range": (2 * star, 3 * star)}


def render_clusters_vs_k(rows, out_path, side=None, ratio=None, view_mode=None):
    rows = select(rows, side=side, ratio=ratio, view_mode=view_mode,
                  policies={"bp", "dmar"})
    side = side if side is not None else rows[0]["side"]
    fig, ax = plt.subplots(figsize=(6, 4))
    means = {}
    for pol in ("bp", "dmar"):
        means[pol] = _curve(ax, rows, pol, "mean_clusters_per_round",
                            label=f"{pol} clusters")
    ax.set_xlabel("sensing radius k")
    ax.set_ylabel("mean clusters per round")
    ax.set_title(f"{side}x{side}, cluster formation vs sensing radius")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return {"means": means}


def render_critical_radius(rows, out_path, ratio=None, view_mode=None):
    """Estimated k*(N) against slow-growing reference functions."""
    rows = select(rows, ratio=ratio, view_mode=view_mode,
                  policies={"bp", "dmar"})
    kstar = critical_radius(rows)
    sides = sorted(kstar)
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [s * s for s in sides]
    measured = [kstar[s] for s in sides]
    ax.plot(xs, [m if m is not None else float("nan") for m in measured],
            marker="s", color="black", label="measured k*")
    import math
    ax.plot(xs, [log2_star(x) for x in xs], marker=".", linestyle="--",
            label="log2*(N)")
    ax.plot(xs, [math.log2(math.log2(x)) for x in xs], marker=".",
            linestyle=":", label="log2 log2 N")
    ax.plot(xs, [math.log2(x) for x in xs], marker=".", linestyle="-.",
            label="log2 N")
    ax.set_xlabel("grid size N")
    ax.set_ylabel("critical radius")
    ax.legend(fontsize=8)
    ax.set_title("critical sensing radius vs slow-growing references")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return {"kstar": {s: kstar[s] for s in sides}}


def render_exploration_split(rows, out_path, side=None, ratio=None,
                             view_mode=None):
    """Cost curves for a paired policy family plus the green-dashed
    proportion of cost attributable to exploration moves."""
    pairs = [("bp_gci", "dmar_gci"), ("bp", "dmar")]
    rows_all = rows
    chosen = None
    for pair in pairs:
        try:
            chosen = select(rows_all, side=side, ratio=ratio,
                            view_mode=view_mode, policies=set(pair))
            if {r["policy"] for r in chosen} == set(pair):
                break
        except EmptySelectionError:
            continue
    if chosen is None:
        raise EmptySelectionError("no paired policy rows for the split figure")
    side = side if side is not None else chosen[0]["side"]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for pol in sorted({r["policy"] for r in chosen}):
        _curve(ax, chosen, pol, "total_cost")
    ax2 = ax.twinx()
    ks = sorted({r["k"] for r in chosen})
    props = []
    for k in ks:
        sub = [r for r in chosen if r["k"] == k]
        tot = sum(r["total_cost"] for r in sub)
        expl = sum(r["exploration_cost"] for r in sub)
        props.append(expl / tot if tot else 0.0)
    ax2.plot(ks, props, color="green", linestyle="--", marker="x",
             label="exploration proportion")
    ax2.set_ylim(0, 1)
    ax2.set_ylabel("exploration share of cost")
    ax.set_xlabel("sensing radius k")
    ax.set_ylabel("mean total cost")
    ax.set_title(f"{side}x{side}, cost and exploration share")
    ax.legend(loc="upper left", fontsize=8)
    ax2.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return {"exploration_share": dict(zip(ks, props))}


def render(rows, family: str, out_path, **filters):
    if family == "cost_vs_k":
        return render_cost_vs_k(rows, out_path, **filters)
    if family == "clusters_vs_k":
        return render_clusters_vs_k(rows, out_path, **filters)
    if family == "critical_radius":
        filters.pop("side", None)
        return render_critical_radius(rows, out_path, **filters)
    if family == "exploration_split":
        return render_exploration_split(rows, out_path, **filters)
    raise ValueError(f"unknown figure family {family!r}; "
                     f"expected one of {FAMILIES}")
