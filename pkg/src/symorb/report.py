"""Delimited artifacts: family tables as CSV, event and landing metadata as JSON.

One table row per corrected family member, mirroring the layout of the
reference data tables: Jacobi constant, start-section state, section time,
one descriptor block per nontrivial Floquet pair (kind, stability parameter,
multiplier, Krein-signed angle and Krein sign), the tracked Conley-Zehnder
indices, and the cover-goodness flag.  All floats are serialized with eight
decimal digits in a fixed column order so identical branches export to
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from .czindex import is_good_cover
from .errors import DegenerateIndexError
from .stability import PairKind, PairReport

_KIND_TOKEN = {
    PairKind.ELLIPTIC: "E",
    PairKind.POSITIVE_HYPERBOLIC: "H+",
    PairKind.NEGATIVE_HYPERBOLIC: "H-",
    PairKind.COMPLEX: "C",
}

_PAIR_FIELDS = ("kind", "s", "lam_re", "lam_im", "theta", "krein")

HEADER = (
    ["C", "x0", "y0", "z0", "vx0", "vy0", "vz0", "t_section", "period", "sym"]
    + [f"p1_{f}" for f in _PAIR_FIELDS]
    + [f"p2_{f}" for f in _PAIR_FIELDS]
    + ["cz", "cz_vertical", "cz_planar", "frozen", "good", "residual"]
)


def _f8(x: float) -> str:
    return "%.8f" % float(x)


def _pair_cells(pair: PairReport) -> list[str]:
    cells = [_KIND_TOKEN[pair.kind], _f8(pair.s.real if isinstance(pair.s, complex)
                                         else pair.s)]
    cells += [_f8(pair.lam.real), _f8(pair.lam.imag)]
    cells.append("" if pair.theta_signed is None else _f8(pair.theta_signed))
    cells.append("" if pair.krein is None or pair.krein.sign == 0
                 else "%+d" % pair.krein.sign)
    return cells


@dataclass
class FamilyTable:
    """Export form of one family branch.

    rows are lists of preformatted cells in HEADER order; cover is the
    covering multiplicity the index columns were evaluated at.
    """

    name: str
    cover: int
    rows: list[list[str]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(HEADER)
        writer.writerows(self.rows)
        return buf.getvalue()


def family_table(branch, cover: int = 1) -> FamilyTable:
    """Tabulate a branch; index columns report the cover-th iterate.

    Parameters
    ----------
    branch : FamilyBranch
        Continued family with stability reports (index samples optional).
    cover : int
        Covering multiplicity for the Conley-Zehnder and goodness columns.

    Returns
    -------
    FamilyTable
    """
    rows = []
    for m in branch.members:
        sol, rep, sample = m.sol, m.report, m.sample
        cells = [_f8(sol.jacobi)]
        cells += [_f8(v) for v in sol.initial_state]
        cells += [_f8(sol.t_section), _f8(sol.period), sol.sym.name]
        cells += _pair_cells(rep.pairs[0])
        cells += _pair_cells(rep.pairs[1])
        if sample is None:
            cells += ["", "", "", "", ""]
        else:
            frozen = sample.complex_frozen
            try:
                cz = str(sample.tracks[0].index(cover)
                         + sample.tracks[1].index(cover))
            except DegenerateIndexError:
                cz = ""
            cells.append(cz)
            cells.append("" if sample.mu_spatial is None else str(sample.mu_spatial))
            cells.append("" if sample.mu_planar is None else str(sample.mu_planar))
            cells.append("1" if frozen else "0")
            cells.append("1" if is_good_cover(sample.tracks, cover, frozen) else "0")
        cells.append("%.3e" % sol.residual)
        rows.append(cells)
    return FamilyTable(name=branch.name, cover=cover, rows=rows)


def export_table(branch, path, cover: int = 1) -> None:
    """Write the family CSV for a branch."""
    table = family_table(branch, cover)
    with open(path, "w", newline="") as f:
        f.write(table.to_csv())


def event_payload(ev) -> dict:
    """JSON-ready descriptor of one bifurcation event."""
    orb = ev.orbit
    return {
        "kind": ev.kind,
        "p": ev.p,
        "q": ev.q,
        "c_critical": round(float(ev.c_critical), 10),
        "s_value": round(float(ev.s_value), 10),
        "krein_sign": ev.krein_sign,
        "theta": None if ev.theta is None else round(float(ev.theta), 10),
        "member_index": ev.member_index,
        "state": [round(float(v), 12) for v in orb.initial_state],
        "t_section": round(float(orb.t_section), 12),
        "sym": orb.sym.name,
    }


def termination_payload(term) -> dict:
    """JSON-ready descriptor of a branch termination."""
    out = {"kind": term.kind, "c_terminal": round(float(term.c_terminal), 10)}
    if term.landing is not None:
        landing = {}
        for k, v in term.landing.items():
            landing[k] = round(float(v), 10) if isinstance(v, float) else v
        out["landing"] = landing
    return out


def branch_payload(branch, events=(), termination=None) -> dict:
    """JSON-ready summary of a branch run: extent, folds, events, ending."""
    cs = [m.sol.jacobi for m in branch.members]
    out = {
        "family": branch.name,
        "mu": branch.mu,
        "sym": branch.sym.name,
        "members": len(branch.members),
        "c_first": round(float(cs[0]), 10),
        "c_last": round(float(cs[-1]), 10),
        "c_min": round(float(min(cs)), 10),
        "c_max": round(float(max(cs)), 10),
        "folds": [round(float(branch.members[i].sol.jacobi), 10)
                  for i in branch.folds],
        "termination": branch.termination,
        "lineage": branch.lineage,
        "events": [event_payload(e) for e in events],
    }
    if termination is not None:
        out["terminal"] = termination_payload(termination)
    return out


def write_json(payload, path) -> None:
    """Write a JSON artifact with a stable key order."""
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
