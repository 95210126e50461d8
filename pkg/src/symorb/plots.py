"""Static SVG figures: orbit projections, stability curves, bifurcation graphs.

Rendering is headless and deterministic: the Agg backend, a fixed hash salt
for SVG element ids, and no embedded creation date, so re-running a scenario
reproduces byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "symorb"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .integrate import propagate  # noqa: E402

_PANELS = ((0, 1, "x", "y"), (0, 2, "x", "z"), (1, 2, "y", "z"))


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def orbit_projections(mu: float, sols, path, config=None) -> None:
    """Render xy / xz / yz projections of one or more orbits to an SVG file.

    Parameters
    ----------
    mu : float
        Mass ratio; fixes the primary positions drawn for scale.
    sols : OrbitSolution or sequence of OrbitSolution
        Orbits are propagated over one full period each.
    path : str or Path
        Output file.
    config : IntegratorConfig, optional
    """
    if not isinstance(sols, (list, tuple)):
        sols = [sols]
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.4), constrained_layout=True)
    cmap = plt.get_cmap("viridis")
    shades = [cmap(0.15 + 0.7 * k / max(len(sols) - 1, 1)) for k in range(len(sols))]
    for sol, shade in zip(sols, shades):
        res = propagate(mu, sol.initial_state, sol.period, config, store=True)
        for ax, (i, j, _, _) in zip(axes, _PANELS):
            ax.plot(res.states[:, i], res.states[:, j], color=shade, lw=0.9)
    for ax, (i, j, xl, yl) in zip(axes, _PANELS):
        moon = (1.0 - mu, 0.0, 0.0)
        earth = (-mu, 0.0, 0.0)
        ax.plot([moon[i]], [moon[j]], marker="o", ms=4, color="0.3")
        ax.plot([earth[i]], [earth[j]], marker="o", ms=6, color="0.1")
        ax.set_xlabel(xl)
        ax.set_ylabel(yl)
        ax.set_aspect("equal", adjustable="datalim")
        ax.grid(alpha=0.25, lw=0.4)
    _save(fig, path)


def stability_curve(branch, path, events=()) -> None:
    """Plot the stability parameters of a branch against C with event markers.

    Every vertical-resonance event is marked on the curve and labeled
    ``p:q``; single-turn, doubling, and planar events get their kind as the
    label.
    """
    cs = np.array([m.sol.jacobi for m in branch.members])
    fig, ax = plt.subplots(figsize=(6.4, 4.2), constrained_layout=True)
    planar = not branch.spatial()
    if planar:
        series = {
            "s_v": [m.report.s_vertical for m in branch.members],
            "s_p": [m.report.s_planar for m in branch.members],
        }
    else:
        series = {
            "s_1": [m.report.pairs[0].s_real if m.report.pairs[0].kind.name != "COMPLEX"
                    else np.nan for m in branch.members],
            "s_2": [m.report.pairs[1].s_real if m.report.pairs[1].kind.name != "COMPLEX"
                    else np.nan for m in branch.members],
        }
    for label, vals in series.items():
        vals = np.array([np.nan if v is None else v for v in vals], dtype=float)
        ax.plot(cs, vals, lw=1.0, label=label)
    ax.axhline(1.0, color="0.6", lw=0.6)
    ax.axhline(-1.0, color="0.6", lw=0.6)
    for ev in events:
        label = f"{ev.p}:{ev.q}" if ev.kind == "vsr" else ev.kind.replace("_", " ")
        ax.plot([ev.c_critical], [ev.s_value], marker="o", ms=4, color="crimson")
        ax.annotate(label, (ev.c_critical, ev.s_value), textcoords="offset points",
                    xytext=(4, 6), fontsize=8)
    ax.set_xlabel("C")
    ax.set_ylabel("stability parameter")
    ax.set_title(branch.name)
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.25, lw=0.4)
    _save(fig, path)


def bifurcation_diagram(families, nodes, path, title="") -> None:
    """Draw a labeled family/event graph over the C axis.

    Parameters
    ----------
    families : sequence of dict
        Edges.  Keys: ``name``; ``c0``/``c1`` (C extent); ``cz`` (index label
        string); optional ``doubly`` (thick line for doubly symmetric
        families), ``mirror`` (dashed; a sigma-reflected partner), ``lane``
        (vertical slot, assigned in order when missing).
    nodes : sequence of dict
        Vertices.  Keys: ``label``; ``c``; ``lanes`` (the lanes the event
        joins).
    path : str or Path
        Output file.
    title : str
    """
    fig, ax = plt.subplots(figsize=(7.2, 4.2), constrained_layout=True)
    lanes = {}
    for k, fam in enumerate(families):
        lane = fam.get("lane", k)
        lanes[fam["name"]] = lane
        style = "--" if fam.get("mirror") else "-"
        width = 2.6 if fam.get("doubly") else 1.3
        ax.plot([fam["c0"], fam["c1"]], [lane, lane], style, lw=width,
                color=f"C{k % 10}")
        mid = 0.5 * (fam["c0"] + fam["c1"])
        text = fam["name"] if not fam.get("cz") else f"{fam['name']}  [{fam['cz']}]"
        ax.annotate(text, (mid, lane), textcoords="offset points", xytext=(0, 6),
                    ha="center", fontsize=8)
    for node in nodes:
        ys = [lanes.get(n, 0) if isinstance(n, str) else n for n in node["lanes"]]
        ax.plot([node["c"]] * len(ys), ys, ":", lw=0.8, color="0.4")
        ax.plot([node["c"]], [max(ys)], marker="o", ms=5, color="0.15")
        ax.annotate(node["label"], (node["c"], max(ys)),
                    textcoords="offset points", xytext=(4, -12), fontsize=8)
    ax.set_xlabel("C")
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    ax.grid(axis="x", alpha=0.25, lw=0.4)
    _save(fig, path)
