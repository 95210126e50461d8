"""Command-line front end: scenarios, family runs, scans, branching, artifacts.

A scenario is a flat ``key = value`` file (``#`` comments allowed).  Unknown
keys are rejected.  Recognized keys, all optional unless stated:

==================  =====================================================
name                run label; prefixes every artifact file name
mu                  mass ratio (default: Earth-Moon)
seed                dro | lpo | lyapunov | vertical | state  (required)
radius              start radius for dro / lpo seeds
point               L1 | L2 | L3 for lyapunov / vertical seeds
amplitude           offset for lyapunov / vertical seeds
state               six comma-separated floats (seed = state)
symmetry            SIMPLE_OX | SIMPLE_XOZ | DOUBLY_OX_XOZ | DOUBLY_XOZ_OX
t_section           section time guess (seed = state)
step                signed continuation step (sign = direction)
max_step            step magnitude cap
grow                step growth factor per accepted member
c_min, c_max        Jacobi bounds of the run
max_members         member cap
guard_radius        Moon-distance termination guard
q_max               largest cover order scanned for critical orbits
include_planar      0/1: also scan planar-pair resonances
tracker             two comma-separated pair indices seeding index tracking
cover               cover order for the exported index columns
branch_event        event chain, for example ``vsr:9:10`` or
                    ``single_turn:1,period_doubling:-1``; each element
                    selects kind[:p]:q for resonances (optional trailing
                    :k picks the k-th match) or kind:k by signed ordinal
branch_pick         both | 0 | 1: which spatial seeds to continue
branch_step         continuation step on the branched family
branch_max_step     step cap on the branched family
branch_c_min        Jacobi bounds on the branched family
branch_c_max
branch_max_members  member cap on the branched family
registry            comma-separated bundled planar scenarios used to
                    identify returned-to-plane landings
output              artifact directory (overridden by SYMORB_OUT)
==================  =====================================================

Exit codes: 0 success, 2 configuration error, 3 numerical failure or
continuation stall, 4 I/O failure.  On any failure an ``error.json``
record is written to the output directory when possible.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import plots, report
from .continuation import (Bounds, FamilyBranch, StepPolicy, branch_back,
                           branch_index_factory, branch_spatial, bridge_detect,
                           continue_family, detect_critical, open_branch)
from .correct import SymmetryClass
from .dynamics import EARTH_MOON_MU
from .errors import ConfigError, SymorbError
from .seeds import (SeedGuess, dro_seed, lpo_seed, lyapunov_seed,
                    vertical_seed)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_SYMMETRIES = {s.name: s for s in SymmetryClass}
_SEED_KINDS = ("dro", "lpo", "lyapunov", "vertical", "state")


@dataclass
class ScenarioConfig:
    """Validated flat scenario; field names equal file keys."""

    name: str = "run"
    mu: float = EARTH_MOON_MU
    seed: str = ""
    radius: float = 0.02
    point: str = "L2"
    amplitude: float = 0.01
    state: tuple[float, ...] | None = None
    symmetry: str = "SIMPLE_OX"
    t_section: float | None = None
    step: float = 1e-3
    max_step: float = 2e-3
    grow: float = 1.25
    c_min: float = -math.inf
    c_max: float = math.inf
    max_members: int = 4000
    guard_radius: float = 2e-3
    q_max: int = 10
    include_planar: bool = True
    tracker: tuple[int, int] | None = None
    cover: int = 1
    branch_event: tuple[str, ...] = ()
    branch_pick: str = "both"
    branch_step: float = 1e-3
    branch_max_step: float = 2e-3
    branch_c_min: float = -math.inf
    branch_c_max: float = math.inf
    branch_max_members: int = 4000
    registry: tuple[str, ...] = ()
    output: str = "out"


def _parse_bool(v: str) -> bool:
    if v in ("0", "1"):
        return v == "1"
    raise ConfigError(f"expected 0 or 1, got {v!r}")


def _parse_floats(v: str, n: int) -> tuple[float, ...]:
    parts = [p.strip() for p in v.split(",")]
    if len(parts) != n:
        raise ConfigError(f"expected {n} comma-separated values, got {len(parts)}")
    return tuple(float(p) for p in parts)


_PARSERS = {
    "name": str,
    "mu": float,
    "seed": str,
    "radius": float,
    "point": str,
    "amplitude": float,
    "state": lambda v: _parse_floats(v, 6),
    "symmetry": str,
    "t_section": float,
    "step": float,
    "max_step": float,
    "grow": float,
    "c_min": float,
    "c_max": float,
    "max_members": int,
    "guard_radius": float,
    "q_max": int,
    "include_planar": _parse_bool,
    "tracker": lambda v: tuple(int(p) for p in _parse_floats(v, 2)),
    "cover": int,
    "branch_event": lambda v: tuple(p.strip() for p in v.split(",") if p.strip()),
    "branch_pick": str,
    "branch_step": float,
    "branch_max_step": float,
    "branch_c_min": float,
    "branch_c_max": float,
    "branch_max_members": int,
    "registry": lambda v: tuple(p.strip() for p in v.split(",") if p.strip()),
    "output": str,
}


def parse_scenario(text: str, name: str = "run") -> ScenarioConfig:
    """Parse and validate a flat key = value scenario file."""
    values: dict = {"name": name}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    cfg = ScenarioConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: ScenarioConfig) -> None:
    if cfg.seed not in _SEED_KINDS:
        raise ConfigError(f"seed must be one of {_SEED_KINDS}, got {cfg.seed!r}")
    if cfg.seed == "state":
        if cfg.state is None or cfg.t_section is None:
            raise ConfigError("seed = state requires state and t_section")
        if cfg.symmetry not in _SYMMETRIES:
            raise ConfigError(f"unknown symmetry {cfg.symmetry!r}")
    if cfg.seed in ("lyapunov", "vertical") and cfg.point not in ("L1", "L2", "L3"):
        raise ConfigError(f"point must be L1, L2 or L3, got {cfg.point!r}")
    if cfg.branch_pick not in ("both", "0", "1"):
        raise ConfigError("branch_pick must be both, 0 or 1")
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, float) and math.isnan(v):
            raise ConfigError(f"{f.name} is NaN")
    if not (0.0 < cfg.mu < 0.5):
        raise ConfigError("mu must lie in (0, 0.5)")
    if cfg.max_members < 1 or cfg.branch_max_members < 1:
        raise ConfigError("member caps must be positive")
    if cfg.q_max < 1:
        raise ConfigError("q_max must be positive")


def bundled_scenarios() -> list[str]:
    """Names of the scenario files shipped with the package."""
    root = resources.files("symorb").joinpath("scenarios")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_scenario(ref: str) -> ScenarioConfig:
    """Load a scenario by bundled name or filesystem path."""
    path = Path(ref)
    if path.suffix == ".cfg" and path.exists():
        return parse_scenario(path.read_text(), name=path.stem)
    res = resources.files("symorb").joinpath(f"scenarios/{ref}.cfg")
    if res.is_file():
        return parse_scenario(res.read_text(), name=ref)
    raise ConfigError(f"scenario {ref!r}: no such file or bundled name "
                      f"(bundled: {', '.join(bundled_scenarios())})")


def build_seed(cfg: ScenarioConfig) -> SeedGuess:
    """Construct the starting guess named by the scenario."""
    if cfg.seed == "dro":
        return dro_seed(cfg.mu, cfg.radius)
    if cfg.seed == "lpo":
        return lpo_seed(cfg.mu, cfg.radius)
    if cfg.seed == "lyapunov":
        return lyapunov_seed(cfg.mu, cfg.point, cfg.amplitude)
    if cfg.seed == "vertical":
        return vertical_seed(cfg.mu, cfg.point, cfg.amplitude)
    sym = _SYMMETRIES[cfg.symmetry]
    from .correct import class_info
    state = np.array(cfg.state, dtype=float)
    info = class_info(sym)
    fixed = max((i for i in info.free if i < 3),
                key=lambda i: abs(state[i]), default=info.free[0])
    return SeedGuess(sym=sym, state=state, t_section=float(cfg.t_section),
                     kind="explicit", fixed=fixed)


def _bounds(cfg: ScenarioConfig, branch: bool = False) -> Bounds:
    if branch:
        return Bounds(c_min=cfg.branch_c_min, c_max=cfg.branch_c_max,
                      max_members=cfg.branch_max_members,
                      guard_radius=cfg.guard_radius)
    return Bounds(c_min=cfg.c_min, c_max=cfg.c_max, max_members=cfg.max_members,
                  guard_radius=cfg.guard_radius)


def _steps(cfg: ScenarioConfig, branch: bool = False) -> StepPolicy:
    if branch:
        return StepPolicy(step=cfg.branch_step, max_step=cfg.branch_max_step,
                          grow=cfg.grow)
    return StepPolicy(step=cfg.step, max_step=cfg.max_step, grow=cfg.grow)


def run_family(cfg: ScenarioConfig) -> FamilyBranch:
    """Continue the scenario's family."""
    return continue_family(cfg.mu, build_seed(cfg), _bounds(cfg), _steps(cfg),
                           name=cfg.name, tracker_seed=cfg.tracker)


def _select_event(events, spec: str):
    """Pick one event from a detected list by a chain element spec."""
    parts = spec.split(":")
    kind = parts[0]
    matches = [e for e in events if e.kind == kind]
    if kind in ("vsr", "planar_resonance") and len(parts) >= 3:
        p, q = int(parts[1]), int(parts[2])
        matches = [e for e in matches if e.p == p and e.q == q]
        k = int(parts[3]) if len(parts) > 3 else 1
    else:
        k = int(parts[1]) if len(parts) > 1 else 1
    if not matches:
        raise ConfigError(f"branch_event {spec!r}: no matching event")
    idx = k - 1 if k > 0 else k
    try:
        return matches[idx]
    except IndexError:
        raise ConfigError(
            f"branch_event {spec!r}: only {len(matches)} matches") from None


def run_branches(cfg: ScenarioConfig):
    """Run the scenario, follow its branch_event chain, continue both seeds.

    Returns (parent branch, parent events, list of (branch, termination)).
    """
    parent = run_family(cfg)
    events = detect_critical(cfg.mu, parent, q_max=cfg.q_max,
                             include_planar=cfg.include_planar)
    chain = list(cfg.branch_event)
    for spec in chain[:-1]:
        ev = _select_event(events, spec)
        factory = branch_index_factory(cfg.mu, parent, ev)
        seed = branch_spatial(cfg.mu, ev)[0]
        sol0 = open_branch(cfg.mu, seed, parent=ev.orbit)
        parent = continue_family(
            cfg.mu, sol0, _bounds(cfg, branch=True), _steps(cfg, branch=True),
            name=f"{cfg.name}-{spec.replace(':', '-')}",
            tracker_seed=factory, back=branch_back(ev, seed, sol0),
            lineage={"parent": cfg.name, "event": spec})
        events = detect_critical(cfg.mu, parent, q_max=cfg.q_max,
                                 include_planar=cfg.include_planar)
    if not chain:
        return parent, events, []
    ev = _select_event(events, chain[-1])
    factory = branch_index_factory(cfg.mu, parent, ev)
    seeds = branch_spatial(cfg.mu, ev)
    picks = range(len(seeds)) if cfg.branch_pick == "both" else [int(cfg.branch_pick)]
    registry = {}
    for name in cfg.registry:
        sub = load_scenario(name)
        if sub.branch_event:
            _, _, sub_branches = run_branches(sub)
            registry[name] = sub_branches[0][0]
        else:
            registry[name] = run_family(sub)
    out = []
    for j in picks:
        seed = seeds[j]
        sol0 = open_branch(cfg.mu, seed, parent=ev.orbit)
        colors = ("red", "blue")
        branch = continue_family(
            cfg.mu, sol0, _bounds(cfg, branch=True), _steps(cfg, branch=True),
            name=f"{cfg.name}-{colors[j] if j < 2 else j}",
            tracker_seed=factory, back=branch_back(ev, seed, sol0),
            lineage={"parent": parent.name, "event": chain[-1], "side": j})
        term = bridge_detect(cfg.mu, branch, registry=registry or None)
        out.append((branch, term))
    return parent, events, out


def _outdir(cfg: ScenarioConfig) -> Path:
    out = Path(os.environ.get("SYMORB_OUT", cfg.output))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit_family(cfg: ScenarioConfig, out: Path, branch: FamilyBranch,
                 events=(), termination=None, with_plots=True,
                 with_table=True) -> list[str]:
    written = []
    base = branch.name
    if with_table:
        path = out / f"{base}_family.csv"
        report.export_table(branch, path, cover=cfg.cover)
        written.append(str(path))
    payload = report.branch_payload(branch, events, termination)
    path = out / f"{base}_summary.json"
    report.write_json(payload, path)
    written.append(str(path))
    if events:
        path = out / f"{base}_events.json"
        report.write_json([report.event_payload(e) for e in events], path)
        written.append(str(path))
    if with_plots:
        sols = branch.solutions
        sample = sols[:: max(len(sols) // 12, 1)]
        path = out / f"{base}_orbits.svg"
        plots.orbit_projections(cfg.mu, sample, path)
        written.append(str(path))
        path = out / f"{base}_stability.svg"
        plots.stability_curve(branch, path, events)
        written.append(str(path))
    return written


def _emit_bridge_diagram(cfg: ScenarioConfig, out: Path, parent, events,
                         branches) -> str:
    fams = []
    cs = [m.sol.jacobi for m in parent.members]
    first = parent.members[0].sample
    label = "" if first is None else str(first.mu)
    fams.append({"name": parent.name, "c0": min(cs), "c1": max(cs),
                 "cz": label, "doubly": False})
    for k, (br, term) in enumerate(branches):
        cs = [m.sol.jacobi for m in br.members]
        s = br.members[0].sample
        czs = sorted({m.sample.mu for m in br.members if m.sample is not None})
        fams.append({
            "name": br.name, "c0": min(cs), "c1": max(cs),
            "cz": ",".join(str(c) for c in czs) if czs else "",
            "doubly": br.sym.name.startswith("DOUBLY"), "lane": k + 1,
        })
        fams.append({"name": br.name + "-mirror", "c0": min(cs), "c1": max(cs),
                     "cz": "", "mirror": True, "lane": k + 1.18})
    nodes = []
    for spec_ev in events:
        if spec_ev.kind == "vsr" and cfg.branch_event and \
                cfg.branch_event[-1].startswith("vsr"):
            sel = _select_event(events, cfg.branch_event[-1])
            if spec_ev is sel:
                nodes.append({"label": f"{spec_ev.p}:{spec_ev.q}",
                              "c": spec_ev.c_critical,
                              "lanes": [0] + [f["lane"] for f in fams
                                              if "lane" in f]})
    for br, term in branches:
        if term.landing:
            nodes.append({
                "label": "{}:{} {}".format(term.landing.get("p", "?"),
                                           term.landing.get("q", "?"),
                                           term.landing.get("family", "")),
                "c": term.c_terminal,
                "lanes": [fams[1 + 2 * branches.index((br, term))]["lane"]],
            })
    path = out / f"{cfg.name}_diagram.svg"
    plots.bifurcation_diagram(fams, nodes, path, title=cfg.name)
    return str(path)


def _fail(out: Path | None, code: int, kind: str, message: str) -> int:
    record = {"error": kind, "message": message}
    sys.stderr.write(f"{kind}: {message}\n")
    if out is not None:
        try:
            report.write_json(record, out / "error.json")
        except OSError:
            pass
    return code


def cmd_continue(args) -> int:
    return _run_scenario(args, scan=False, branch=False, plots_only=False,
                         table_only=False)


def cmd_scan(args) -> int:
    return _run_scenario(args, scan=True, branch=False, plots_only=False,
                         table_only=False)


def cmd_branch(args) -> int:
    return _run_scenario(args, scan=True, branch=True, plots_only=False,
                         table_only=False)


def cmd_export(args) -> int:
    return _run_scenario(args, scan=False, branch=False, plots_only=False,
                         table_only=True)


def cmd_plot(args) -> int:
    return _run_scenario(args, scan=True, branch=False, plots_only=True,
                         table_only=False)


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    over = {}
    if args.mu is not None:
        over["mu"] = args.mu
    if args.output is not None:
        over["output"] = args.output
    if over:
        cfg = replace(cfg, **over)
        _validate(cfg)
    return cfg


def _run_scenario(args, scan: bool, branch: bool, plots_only: bool,
                  table_only: bool) -> int:
    out = None
    try:
        cfg = _apply_overrides(load_scenario(args.scenario), args)
        out = _outdir(cfg)
    except (ConfigError, OSError) as exc:
        return _fail(out, EXIT_CONFIG, "config", str(exc))
    try:
        if branch:
            parent, events, branches = run_branches(cfg)
        else:
            parent = run_family(cfg)
            events = (detect_critical(cfg.mu, parent, q_max=cfg.q_max,
                                      include_planar=cfg.include_planar)
                      if scan else [])
            branches = []
        if parent.termination == "stall":
            return _fail(out, EXIT_NUMERICAL, "stall",
                         f"continuation stalled at C = {parent.jacobi[-1]:.8f}")
    except SymorbError as exc:
        return _fail(out, EXIT_NUMERICAL, "numerical", str(exc))
    except ConfigError as exc:
        return _fail(out, EXIT_CONFIG, "config", str(exc))
    try:
        written = _emit_family(cfg, out, parent, events,
                               with_plots=not table_only,
                               with_table=not plots_only)
        for br, term in branches:
            written += _emit_family(cfg, out, br, (), term,
                                    with_plots=not table_only,
                                    with_table=not plots_only)
        if branches and not table_only:
            written.append(_emit_bridge_diagram(cfg, out, parent, events, branches))
    except OSError as exc:
        return _fail(out, EXIT_IO, "io", str(exc))
    for path in written:
        print(path)
    return EXIT_OK


def cmd_verify(args) -> int:
    """Run the fast acceptance checkpoints: row regression and properties."""
    from .verify import run_checkpoints
    try:
        ok = run_checkpoints(full=args.full, stream=sys.stdout)
    except SymorbError as exc:
        return _fail(None, EXIT_NUMERICAL, "numerical", str(exc))
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_list(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="symorb",
        description="Symmetric periodic orbits: continuation, stability, "
                    "indices, and bifurcation bridges.")
    parser.add_argument("--mu", type=float, default=None,
                        help="override the scenario mass ratio")
    parser.add_argument("--output", default=None,
                        help="override the artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, desc in (
            ("continue", cmd_continue, "continue a family and export it"),
            ("scan", cmd_scan, "continue and detect critical orbits"),
            ("branch", cmd_branch, "scan, branch at an event, classify endings"),
            ("export", cmd_export, "write only the family CSV artifacts"),
            ("plot", cmd_plot, "write only the figure artifacts")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("scenario", help="bundled scenario name or .cfg path")
        p.set_defaults(fn=fn)

    p = sub.add_parser("verify", help="run the acceptance checkpoints")
    p.add_argument("--full", action="store_true",
                   help="include the slow campaign checkpoints")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("list", help="list bundled scenarios")
    p.set_defaults(fn=cmd_list)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
