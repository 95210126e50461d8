"""Family continuation, critical orbit detection and spatial branching.

A family is advanced by a secant predictor that holds one free coordinate
fixed per step and re-picks the fastest-moving coordinate whenever the
current parameter stalls, so folds in any single coordinate are crossed
without manual intervention.  Critical orbits are located by bracketing a
stability index level between consecutive members and bisecting on the
continuation parameter.  At a vertical critical orbit two spatial seeds are
emitted, one per start section, with the symmetry class dictated by the
parity of the multiplicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as _dc_replace
from math import gcd

import numpy as np

from typing import Callable

from .correct import (CorrectorPolicy, OrbitSolution, SymmetryClass,
                      class_info, correct, predict)
from .czindex import IndexSample, IndexTracker, nearest_track, seed_branch
from .dynamics import Symmetry, apply_symmetry_lagrangian
from .errors import (AmbiguousRotationError, ConvergenceError,
                     EventNotFoundError, IllConditionedError, SymorbError)
from .integrate import IntegratorConfig, propagate
from .seeds import SeedGuess
from .stability import PairKind, MonodromyReport, monodromy_report

# Spatial branch members below this out-of-plane amplitude count as planar.
RETURN_TO_PLANE_TOL = 1e-6
# Step halvings before a continuation is declared stalled.
MAX_HALVINGS = 10
# Event polishing: minimum bisection depth and index accuracy target.
BISECT_MIN_ITERS = 12
BISECT_MAX_ITERS = 60
EVENT_S_TOL = 1e-8

_OX_START = (SymmetryClass.SIMPLE_OX, SymmetryClass.DOUBLY_OX_XOZ)
_XOZ_START = (SymmetryClass.SIMPLE_XOZ, SymmetryClass.DOUBLY_XOZ_OX)

TrackerFactory = Callable[[MonodromyReport], IndexTracker]


@dataclass(frozen=True)
class Bounds:
    """Termination bounds of a continuation run."""

    c_min: float = -np.inf
    c_max: float = np.inf
    max_members: int = 4000
    guard_radius: float = 2e-3
    period_cap: float = 100.0


@dataclass(frozen=True)
class StepPolicy:
    """Continuation step control.

    step is the signed initial increment of the fixed coordinate; its
    magnitude is capped by max_step, grown by grow after each success and
    halved on corrector failure.
    """

    step: float = 1e-3
    max_step: float = 2e-3
    grow: float = 1.25
    corrector: CorrectorPolicy = field(default_factory=CorrectorPolicy)


@dataclass
class FamilyMember:
    """One corrected orbit with its Floquet report and index sample."""

    sol: OrbitSolution
    report: MonodromyReport
    sample: IndexSample | None = None


@dataclass(frozen=True)
class BifurcationEvent:
    """A critical orbit located on a family.

    kind is one of "vsr", "single_turn", "period_doubling",
    "planar_resonance", "birth_death".  For resonances p:q the angle of the
    critical pair fixes p through the Krein-signed rotation number.
    """

    kind: str
    p: int | None
    q: int | None
    c_critical: float
    orbit: OrbitSolution
    s_value: float
    krein_sign: int | None = None
    theta: float | None = None
    member_index: int = -1


@dataclass
class FamilyBranch:
    """An ordered one-parameter family of corrected orbits."""

    name: str
    mu: float
    sym: SymmetryClass
    members: list[FamilyMember] = field(default_factory=list)
    folds: list[int] = field(default_factory=list)
    termination: str = "none"
    terminal: dict = field(default_factory=dict)
    lineage: dict = field(default_factory=dict)

    @property
    def solutions(self) -> list[OrbitSolution]:
        return [m.sol for m in self.members]

    @property
    def reports(self) -> list[MonodromyReport]:
        return [m.report for m in self.members]

    @property
    def jacobi(self) -> np.ndarray:
        return np.array([m.sol.jacobi for m in self.members])

    def spatial(self) -> bool:
        return not self.members[0].sol.planar


def _amplitude(sol: OrbitSolution) -> float:
    """Out-of-plane amplitude proxy from the section coordinates."""
    if sol.planar:
        return 0.0
    if sol.sym in _XOZ_START:
        return abs(sol.initial_state[2])
    return abs(sol.initial_state[5])


def _check_bounds(sol: OrbitSolution, bounds: Bounds, spatial_branch: bool) -> str | None:
    if not (bounds.c_min <= sol.jacobi <= bounds.c_max):
        return "bound"
    if sol.min_r2 < bounds.guard_radius:
        return "collision"
    if sol.period > bounds.period_cap:
        return "period_cap"
    if spatial_branch and _amplitude(sol) < RETURN_TO_PLANE_TOL:
        return "returned_to_plane"
    return None


def _interp_guess(a: OrbitSolution, b: OrbitSolution, lam: float) -> tuple[np.ndarray, float]:
    s = a.initial_state + lam * (b.initial_state - a.initial_state)
    t = a.t_section + lam * (b.t_section - a.t_section)
    return s, t


def _corrected_member(mu: float, sym: SymmetryClass, state: np.ndarray, t: float,
                      fixed: int, pol: CorrectorPolicy) -> tuple[OrbitSolution, MonodromyReport]:
    from dataclasses import replace as _replace
    sol = correct(mu, sym, state, t, _replace(pol, fixed_param=fixed))
    return sol, monodromy_report(mu, sol, pol.config)


def _update_tracker(mu: float, tracker: IndexTracker, prev: FamilyMember,
                    sol: OrbitSolution, rep: MonodromyReport,
                    pol: CorrectorPolicy, depth: int = 0) -> list[FamilyMember]:
    """Advance the index tracker to sol, inserting midpoints when a pair
    rotates too fast for unambiguous unwrapping."""
    try:
        sample = tracker.update(rep)
        return [FamilyMember(sol, rep, sample)]
    except AmbiguousRotationError:
        if depth >= 16:
            raise
    state, t = _interp_guess(prev.sol, sol, 0.5)
    mid_sol, mid_rep = _corrected_member(mu, sol.sym, state, t, sol.fixed_param, pol)
    inserted = _update_tracker(mu, tracker, prev, mid_sol, mid_rep, pol, depth + 1)
    inserted += _update_tracker(mu, tracker, inserted[-1], sol, rep, pol, depth + 1)
    return inserted


def continue_family(mu: float, seed: SeedGuess | OrbitSolution,
                    bounds: Bounds | None = None,
                    steps: StepPolicy | None = None,
                    *, name: str = "",
                    tracker_seed: tuple[int, int] | TrackerFactory | None = None,
                    lineage: dict | None = None,
                    back: OrbitSolution | None = None) -> FamilyBranch:
    """Continue a periodic orbit family from a seed until a bound is hit.

    Parameters
    ----------
    mu : float
        Mass ratio.
    seed : SeedGuess or OrbitSolution
        Starting guess (corrected internally) or an already corrected member.
    bounds : Bounds
        Termination bounds; defaults accept almost everything.
    steps : StepPolicy
        Step size control; the sign of steps.step selects the direction.
    name : str
        Family label carried into reports.
    tracker_seed : (int, int) or callable, optional
        Single-turn Conley-Zehnder indices of the two nontrivial pairs at
        the seed (vertical first for planar orbits), or a factory mapping
        the first member's stability report to a seeded IndexTracker;
        enables index tracking.
    lineage : dict, optional
        Parent family / event descriptor stored on the branch.
    back : OrbitSolution, optional
        Reference member behind the seed (a branch parent's cover state);
        the first step then extrapolates away from it instead of offsetting
        a bare coordinate, which also fixes the step direction.

    Returns
    -------
    FamilyBranch
        Members in continuation order with termination classification.
    """
    bounds = bounds or Bounds()
    steps = steps or StepPolicy()
    pol = steps.corrector

    if isinstance(seed, SeedGuess):
        from dataclasses import replace as _replace
        sol0 = correct(mu, seed.sym, seed.state, seed.t_section,
                       _replace(pol, fixed_param=seed.fixed))
    else:
        sol0 = seed
    rep0 = monodromy_report(mu, sol0, pol.config)
    tracker = None
    sample0 = None
    if tracker_seed is not None:
        if callable(tracker_seed):
            tracker = tracker_seed(rep0)
        else:
            tracker = IndexTracker.seed(rep0, tracker_seed)
        sample0 = tracker.current()

    branch = FamilyBranch(name=name, mu=mu, sym=sol0.sym,
                          members=[FamilyMember(sol0, rep0, sample0)],
                          lineage=lineage or {})
    spatial_branch = not sol0.planar
    fixed = sol0.fixed_param
    step = float(steps.step)
    halvings = 0

    while True:
        last = branch.members[-1].sol
        term = _check_bounds(last, bounds, spatial_branch)
        if term:
            branch.termination = term
            break
        if len(branch.members) >= bounds.max_members:
            branch.termination = "member_cap"
            break

        if len(branch.members) == 1 and back is not None:
            du0 = last.initial_state[fixed] - back.initial_state[fixed]
            if du0 != 0.0:
                step = float(np.copysign(abs(step), du0))
            pr = predict(last, back, step, fixed=fixed)
            guess, t_guess = pr.state, pr.t_section
        elif len(branch.members) == 1:
            g = last.initial_state.copy()
            g[fixed] += step
            guess, t_guess = g, last.t_section
        else:
            older = branch.members[-2].sol
            du = np.append(last.initial_state - older.initial_state,
                           last.t_section - older.t_section)
            info = class_info(last.sym)
            free = [i for i in info.free] if not last.planar else [0, 4]
            moves = {j: abs(du[j]) for j in free}
            best = max(moves, key=moves.get)
            # Re-pick the continuation parameter when another coordinate
            # moves much faster; rescale the step to the recent pace.
            if best != fixed and moves[best] > 2.0 * max(moves[fixed], 1e-300):
                fixed = best
                step = float(np.clip(du[best], -steps.max_step, steps.max_step))
                if step == 0.0:
                    step = steps.step
            pr = predict(last, older, step, fixed=fixed)
            guess, t_guess = pr.state, pr.t_section

        try:
            sol, rep = _corrected_member(mu, last.sym, guess, t_guess, fixed, pol)
        except (ConvergenceError, IllConditionedError):
            halvings += 1
            if halvings > MAX_HALVINGS:
                branch.termination = "stall"
                break
            step *= 0.5
            continue
        halvings = 0

        if tracker is not None:
            new_members = _update_tracker(mu, tracker, branch.members[-1], sol, rep, pol)
        else:
            new_members = [FamilyMember(sol, rep)]
        branch.members.extend(new_members)

        n = len(branch.members)
        if n >= 3:
            c = [m.sol.jacobi for m in branch.members[-3:]]
            if (c[1] - c[0]) * (c[2] - c[1]) < 0.0:
                branch.folds.append(n - 2)

        grown = step * steps.grow
        step = float(np.clip(grown, -steps.max_step, steps.max_step))
    return branch


def _series(branch: FamilyBranch, which: str) -> list[float | None]:
    """Stability index series along the branch; None where undefined."""
    out: list[float | None] = []
    for m in branch.members:
        rep = m.report
        if which == "vertical":
            pair = rep.pair_vertical
        elif which == "planar":
            pair = rep.pair_planar
        else:
            k = int(which)
            pair = rep.pairs[k] if len(rep.pairs) > k else None
        if pair is None or pair.kind is PairKind.COMPLEX:
            out.append(None)
        else:
            out.append(float(pair.s.real))
    return out


def _pair_of(rep: MonodromyReport, which: str):
    if which == "vertical":
        return rep.pair_vertical
    if which == "planar":
        return rep.pair_planar
    return rep.pairs[int(which)]


def _vertical_targets(q_max: int) -> list[tuple[float, str, int | None, int | None]]:
    targets: list[tuple[float, str, int | None, int | None]] = [
        (1.0, "single_turn", 0, 1), (-1.0, "period_doubling", 1, 2)]
    seen = set()
    for q in range(3, q_max + 1):
        for p in range(1, q):
            if gcd(p, q) != 1:
                continue
            val = np.cos(2 * np.pi * p / q)
            key = round(val, 12)
            if key in seen:
                continue
            seen.add(key)
            targets.append((float(val), "vsr", p, q))
    return targets


def _polish(mu: float, branch: FamilyBranch, i: int, value: float, which: str,
            pol: CorrectorPolicy) -> tuple[OrbitSolution, MonodromyReport]:
    """Bisect the continuation parameter between members i and i+1 until the
    chosen stability index meets value to EVENT_S_TOL."""
    a, b = branch.members[i].sol, branch.members[i + 1].sol
    fixed = b.fixed_param
    pa = _pair_of(branch.members[i].report, which)
    fa = float(pa.s.real) - value
    lo, hi = 0.0, 1.0
    best: tuple[OrbitSolution, MonodromyReport] | None = None
    for it in range(BISECT_MAX_ITERS):
        lam = 0.5 * (lo + hi)
        state, t = _interp_guess(a, b, lam)
        sol, rep = _corrected_member(mu, b.sym, state, t, fixed, pol)
        pair = _pair_of(rep, which)
        if pair is None or pair.kind is PairKind.COMPLEX:
            # Complex splitting inside the bracket: tighten toward the real side.
            hi = lam
            continue
        f = float(pair.s.real) - value
        best = (sol, rep)
        if it + 1 >= BISECT_MIN_ITERS and abs(f) < EVENT_S_TOL:
            return sol, rep
        if fa * f <= 0.0:
            hi = lam
        else:
            lo = lam
            fa = f
    if best is None:
        raise EventNotFoundError(f"bisection lost the bracket for s={value:.6f}")
    return best


def _emit(branch: FamilyBranch, which: str, kind: str, p, q,
          sol: OrbitSolution, rep: MonodromyReport, i: int) -> BifurcationEvent | None:
    pair = _pair_of(rep, which)
    s_val = float(pair.s.real)
    theta = pair.theta_signed
    krein = pair.krein.sign if pair.krein is not None else None
    if kind == "vsr":
        # The Krein-signed angle fixes which p the crossing belongs to.
        p_act = int(round(q * theta / (2 * np.pi))) if theta is not None else p
        if gcd(p_act, q) != 1:
            return None  # reducible: belongs to a lower-q target
        p = p_act
    name = kind if which != "planar" else "planar_resonance"
    return BifurcationEvent(kind=name, p=p, q=q, c_critical=sol.jacobi,
                            orbit=sol, s_value=s_val, krein_sign=krein,
                            theta=theta, member_index=i)


def detect_critical(mu: float, branch: FamilyBranch, q_max: int = 10,
                    policy: CorrectorPolicy | None = None,
                    include_planar: bool = True) -> list[BifurcationEvent]:
    """Locate critical orbits along a family.

    Scans the vertical stability index for crossings of cos(2*pi*p/q) with
    q <= q_max and of +-1, bisecting each bracket on the continuation
    parameter.  For planar families the planar index is scanned the same way
    (events reported as planar resonances); folds recorded during the
    continuation are emitted as birth-death events.

    Parameters
    ----------
    mu : float
        Mass ratio.
    branch : FamilyBranch
        Family with monodromy reports.
    q_max : int
        Largest resonance multiplicity searched.
    policy : CorrectorPolicy, optional
        Corrector used for the bisection refinements.
    include_planar : bool
        Also scan the planar index of planar families.

    Returns
    -------
    list of BifurcationEvent
        In continuation order; VSR events satisfy |s_v - cos(2 pi p/q)| <= 1e-8.
    """
    pol = policy or CorrectorPolicy()
    events: list[BifurcationEvent] = []
    planar_family = branch.members[0].sol.planar
    if planar_family:
        channels = ["vertical"] + (["planar"] if include_planar else [])
    else:
        channels = ["0", "1"]

    targets = _vertical_targets(q_max)
    for which in channels:
        series = _series(branch, which)
        for value, kind, p, q in targets:
            for i in range(len(series) - 1):
                f1 = None if series[i] is None else series[i] - value
                f2 = None if series[i + 1] is None else series[i + 1] - value
                if f1 is None or f2 is None:
                    continue
                if f1 == 0.0:
                    sol, rep = branch.members[i].sol, branch.members[i].report
                elif f1 * f2 < 0.0:
                    try:
                        sol, rep = _polish(mu, branch, i, value, which, pol)
                    except (ConvergenceError, IllConditionedError, EventNotFoundError):
                        continue
                else:
                    continue
                ev = _emit(branch, which, kind, p, q, sol, rep, i)
                if ev is not None:
                    events.append(ev)

    for fi in branch.folds:
        m = branch.members[fi]
        events.append(BifurcationEvent(
            kind="birth_death", p=None, q=None, c_critical=m.sol.jacobi,
            orbit=m.sol, s_value=np.nan, member_index=fi))

    # Deduplicate crossings detected from both adjacent brackets.
    events.sort(key=lambda e: (e.member_index, e.c_critical))
    unique: list[BifurcationEvent] = []
    for ev in events:
        dup = any(u.kind == ev.kind and u.p == ev.p and u.q == ev.q
                  and abs(u.c_critical - ev.c_critical) < 1e-7 for u in unique)
        if not dup:
            unique.append(ev)
    return unique


def _vertical_eigvec(M_cov: np.ndarray) -> np.ndarray:
    """Out-of-plane eigenvector of the cover monodromy at eigenvalue 1."""
    B = M_cov[np.ix_([2, 5], [2, 5])]
    if np.max(np.abs(B - np.eye(2))) < 1e-6:
        return np.array([1.0, 1.0]) / np.sqrt(2.0)
    vals, vecs = np.linalg.eig(B)
    k = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[k] - 1.0) > 1e-2:
        raise IllConditionedError(
            f"no out-of-plane multiplier near 1 (closest {vals[k]:.6f})")
    v = np.real(vecs[:, k])
    n = np.linalg.norm(v)
    if n == 0.0:
        raise IllConditionedError("degenerate out-of-plane eigenvector")
    return v / n


def _slow_representative(mu: float, sol: OrbitSolution,
                         config: IntegratorConfig | None = None) -> OrbitSolution:
    """Re-anchor a simple-class orbit at its slower perpendicular crossing.

    A simple-class orbit meets its section perpendicularly twice per period,
    at t = 0 and t = t_section.  Continuation can migrate the stored
    representative onto the faster of the two (near a primary), where the
    section projection of a branching eigenvector degenerates against the
    family tangent.  If the other crossing is slower, re-correct there.
    """
    if sol.sym not in (SymmetryClass.SIMPLE_OX, SymmetryClass.SIMPLE_XOZ):
        return sol
    end = propagate(mu, sol.initial_state, sol.t_section, config).state
    if np.linalg.norm(end[3:]) >= np.linalg.norm(sol.initial_state[3:]):
        return sol
    info = class_info(sol.sym)
    end[list(info.zero)] = 0.0
    # fix the largest position-like free coordinate for the re-correction
    fixed = max((i for i in info.free if i < 3),
                key=lambda i: abs(end[i]), default=sol.fixed_param)
    pol = CorrectorPolicy(fixed_param=fixed,
                          config=config or IntegratorConfig())
    return correct(mu, sol.sym, end, sol.t_section, policy=pol)


def branch_spatial(mu: float, ev: BifurcationEvent, eps: float = 1e-3,
                   config: IntegratorConfig | None = None) -> list[SeedGuess]:
    """Seeds of the two spatial families rooted at a vertical critical orbit.

    For a planar parent the q-cover monodromy has its out-of-plane pair at
    eigenvalue 1; the two branches start on the two sections, displaced by
    eps along the out-of-plane eigenvector component that the section start
    allows (z for xz-plane starts, vz for axis starts).  Odd multiplicity
    gives the two simple classes, even multiplicity the two doubly symmetric
    ones.  For a spatial parent at a period-doubling the two seeds are the
    +-eps displacements along the eigenvector at multiplier -1, in the
    parent's own class with doubled period.

    Parameters
    ----------
    mu : float
        Mass ratio.
    ev : BifurcationEvent
        A "vsr", "single_turn" or "period_doubling" event.
    eps : float
        Branch-off amplitude in normalized units.
    config : IntegratorConfig, optional

    Returns
    -------
    list of SeedGuess
        Two corrector-ready guesses.
    """
    if ev.kind not in ("vsr", "single_turn", "period_doubling"):
        raise ValueError(f"cannot branch from event kind {ev.kind!r}")
    parent = ev.orbit
    if not parent.planar:
        if ev.kind != "period_doubling":
            raise ValueError("spatial parents branch only at period doublings")
        parent = _slow_representative(mu, parent, config)
        rep = monodromy_report(mu, parent, config)
        vals, vecs = np.linalg.eig(rep.M)
        k = int(np.argmin(np.abs(vals + 1.0)))
        if abs(vals[k] + 1.0) > 1e-2:
            raise IllConditionedError(
                f"no multiplier near -1 (closest {vals[k]:.6f})")
        v = np.real(vecs[:, k])
        info = class_info(parent.sym)
        v[list(info.zero)] = 0.0
        n = np.linalg.norm(v)
        if n == 0.0:
            raise IllConditionedError("doubling eigenvector vanishes on the section")
        v /= n
        t_new = parent.period  # doubled orbit: section time = old full period
        out = []
        for sgn in (+1.0, -1.0):
            s = parent.initial_state + sgn * eps * v
            out.append(SeedGuess(sym=parent.sym, state=s, t_section=t_new,
                                 kind=f"{ev.kind}-branch", fixed=parent.fixed_param,
                                 parent_state=parent.initial_state.copy()))
        return out

    rep = monodromy_report(mu, parent, config)
    q = ev.q if ev.kind == "vsr" else (1 if ev.kind == "single_turn" else 2)
    M_cov = np.linalg.matrix_power(rep.M, q)
    v = _vertical_eigvec(M_cov)
    t_cov = q * parent.period
    if q % 2 == 1:
        classes = (SymmetryClass.SIMPLE_XOZ, SymmetryClass.SIMPLE_OX)
        t_guess = t_cov / 2.0
    else:
        classes = (SymmetryClass.DOUBLY_XOZ_OX, SymmetryClass.DOUBLY_OX_XOZ)
        t_guess = t_cov / 4.0
    z_off = eps * (v[0] if abs(v[0]) > 1e-8 else 1.0)
    vz_off = eps * (v[1] if abs(v[1]) > 1e-8 else 1.0)
    s_z = parent.initial_state.copy()
    s_z[2] += z_off
    s_vz = parent.initial_state.copy()
    s_vz[5] += vz_off
    label = f"{ev.p}:{ev.q}-branch" if ev.kind == "vsr" else f"{ev.kind}-branch"
    return [SeedGuess(sym=classes[0], state=s_z, t_section=t_guess, kind=label,
                      fixed=2, parent_state=parent.initial_state.copy()),
            SeedGuess(sym=classes[1], state=s_vz, t_section=t_guess, kind=label,
                      fixed=5, parent_state=parent.initial_state.copy())]


def branch_planar(mu: float, ev: BifurcationEvent, eps: float = 1e-3,
                  config: IntegratorConfig | None = None) -> list[SeedGuess]:
    """Seeds of the planar family rooted at a planar p:q resonance.

    The in-plane block of the q-cover monodromy has a multiplier pair at 1;
    the eigenvector's axis components displace the section start on both
    sides.
    """
    if ev.kind != "planar_resonance" or not ev.orbit.planar:
        raise ValueError("planar branching needs a planar resonance event")
    parent = ev.orbit
    rep = monodromy_report(mu, parent, config)
    q = ev.q
    M_cov = np.linalg.matrix_power(rep.M, q)
    P = M_cov[np.ix_([0, 1, 3, 4], [0, 1, 3, 4])]
    vals, vecs = np.linalg.eig(P)
    order = np.argsort(np.abs(vals - 1.0))
    v = None
    for k in order[:2]:
        cand = np.real(vecs[:, k])
        if abs(vals[k] - 1.0) > 1e-2:
            break
        proj = np.hypot(cand[0], cand[3])
        if proj > 1e-8:
            v = np.array([cand[0], 0.0, 0.0, 0.0, cand[3], 0.0]) / proj
            break
    if v is None:
        raise IllConditionedError("planar cover eigenvector has no axis component")
    t_guess = q * parent.period / 2.0
    out = []
    for sgn in (+1.0, -1.0):
        out.append(SeedGuess(sym=SymmetryClass.SIMPLE_OX,
                             state=parent.initial_state + sgn * eps * v,
                             t_section=t_guess, kind=f"{ev.p}:{ev.q}-planar-branch",
                             fixed=0))
    return out


def branch_index_factory(mu: float, parent: FamilyBranch, ev: BifurcationEvent,
                         config: IntegratorConfig | None = None
                         ) -> TrackerFactory | None:
    """Index-tracker factory for a family rooted at an event on a parent.

    The parent tracker state at the branch point is covered q times; the
    resonant pair is re-anchored at the cover rotation and handed to
    seed_branch together with the first corrected member of the new family.
    Returns None when the parent branch carries no index data.
    """
    if ev.member_index < 0 or ev.member_index >= len(parent.members):
        return None
    member = parent.members[ev.member_index]
    if member.sample is None:
        return None
    planar_parent = member.sol.planar
    rep_e = monodromy_report(mu, ev.orbit, config)
    clone = IndexTracker(member.sample.tracks, planar=planar_parent)
    try:
        clone.update(rep_e)
    except AmbiguousRotationError:
        clone = IndexTracker(member.sample.tracks, planar=planar_parent)
    tracks = clone.tracks
    if ev.kind == "period_doubling":
        q, target = 2, -1.0
    elif ev.kind == "single_turn":
        q, target = 1, 1.0
    elif ev.kind in ("vsr", "planar_resonance"):
        q = ev.q
        target = np.cos(2.0 * np.pi * ev.p / ev.q)
    else:
        return None
    if planar_parent:
        resonant = 1 if ev.kind == "planar_resonance" else 0
    elif ev.kind == "period_doubling":
        # the doubling pair has indeterminate Krein sign at -1, so pick the
        # track whose rotation sits at an odd multiple of pi
        def _odd_dist(tr) -> float:
            r = (tr.phi if tr.elliptic else tr.n * np.pi) / np.pi
            return abs(r - (2.0 * round((r - 1.0) / 2.0) + 1.0))
        resonant = 0 if _odd_dist(tracks[0]) <= _odd_dist(tracks[1]) else 1
    else:
        j = int(np.argmin([abs(p.s_real - target) for p in rep_e.pairs]))
        resonant = nearest_track(tracks, rep_e.pairs[j])

    def factory(rep0: MonodromyReport) -> IndexTracker:
        return seed_branch(tracks, resonant, q, rep0)

    return factory


def open_branch(mu: float, seed: SeedGuess, eps_min: float = 1e-6,
                policy: CorrectorPolicy | None = None,
                parent: OrbitSolution | None = None) -> OrbitSolution:
    """Correct a branch seed, halving the branch-off amplitude on failure.

    The out-of-plane displacement of the seed relative to the parent section
    state is scaled down by factors of two until the corrector converges or
    the amplitude floor is reached.
    """
    from dataclasses import replace as _replace
    pol = _replace(policy or CorrectorPolicy(), fixed_param=seed.fixed)
    base = seed.parent_state
    if base is None and parent is not None:
        base = parent.initial_state
    scale = 1.0
    last_err: Exception | None = None
    while True:
        s = seed.state.copy()
        if base is not None and scale != 1.0:
            s = base + scale * (seed.state - base)
        try:
            return correct(mu, seed.sym, s, seed.t_section, pol)
        except (ConvergenceError, IllConditionedError) as exc:
            last_err = exc
            if base is None:
                raise
            off = np.max(np.abs(s - base))
            if off * 0.5 < eps_min:
                raise ConvergenceError(
                    f"branch seed failed down to amplitude {off:.2e}",
                    residual=np.nan, iters=0) from last_err
            scale *= 0.5


def branch_back(ev: BifurcationEvent, seed: SeedGuess,
                sol0: OrbitSolution) -> OrbitSolution:
    """Pseudo-member at the branch point of a freshly opened branch.

    Pairs the parent's cover state with the branch section time so the
    first continuation step can extrapolate away from the parent.
    """
    from dataclasses import replace as _replace
    base = seed.parent_state if seed.parent_state is not None \
        else ev.orbit.initial_state
    return _replace(sol0, initial_state=base.copy(),
                    t_section=seed.t_section)


def winding_number(mu: float, sol: OrbitSolution,
                   config: IntegratorConfig | None = None) -> int:
    """Signed turns of the orbit around the smaller primary per period."""
    res = propagate(mu, sol.initial_state, sol.period, config, store=True)
    x = res.states[:, 0] - (1.0 - mu)
    y = res.states[:, 1]
    ang = np.unwrap(np.arctan2(y, x))
    return int(round((ang[-1] - ang[0]) / (2 * np.pi)))


def _perpendicular_crossings(mu: float, sol: OrbitSolution,
                             config: IntegratorConfig | None = None) -> int:
    """Count interior perpendicular axis crossings over the half period."""
    res = propagate(mu, sol.initial_state, sol.period / 2.0, config, store=True)
    t, states = res.times, res.states
    count = 0
    for k in range(1, len(t) - 1):
        y1, y2 = states[k, 1], states[k + 1, 1]
        if y1 == 0.0 or y1 * y2 >= 0.0:
            continue
        lam = y1 / (y1 - y2)
        vx = states[k, 3] + lam * (states[k + 1, 3] - states[k, 3])
        speed = np.linalg.norm(states[k, 3:])
        if abs(vx) < 1e-3 * max(speed, 1e-12):
            count += 1
    return count


@dataclass(frozen=True)
class Termination:
    """Classification of how a branch ended."""

    kind: str
    c_terminal: float
    landing: dict | None = None


def identify_planar_orbit(mu: float, guess_state: np.ndarray, t_half: float,
                          q_hint: int | None = None,
                          policy: CorrectorPolicy | None = None,
                          registry: dict[str, FamilyBranch] | None = None) -> dict:
    """Identify the primitive planar orbit under a (possibly covered) guess.

    Returns a descriptor with the primitive's section data, its multiplicity
    under the given half period, the vertical rotation fraction p/q of the
    cover, the revolution sense, and a family label when a registry of known
    planar families matches the member.
    """
    pol = policy or CorrectorPolicy()
    s = np.asarray(guess_state, dtype=float).copy()
    s[2] = s[5] = 0.0
    cover = correct(mu, SymmetryClass.SIMPLE_OX, s, t_half, pol)
    q = q_hint or (_perpendicular_crossings(mu, cover, pol.config) + 1)
    prim = correct(mu, SymmetryClass.SIMPLE_OX, cover.initial_state,
                   cover.t_section / q, pol)
    if abs(prim.period * q - cover.period) > 1e-6 * cover.period:
        # Crossing count misled us: fall back to the cover itself.
        q, prim = 1, cover
    rep = monodromy_report(mu, prim, pol.config)
    pv = rep.pair_vertical
    theta = pv.theta_signed if pv.theta_signed is not None else 0.0
    p = int(round(q * theta / (2 * np.pi)))
    s_cover = float(np.cos(q * theta))
    sense = winding_number(mu, prim, pol.config)
    label = "retrograde" if sense < 0 else "prograde"
    if registry:
        for fam_name, fam in registry.items():
            if _match_member(fam, prim):
                label = fam_name
                break
    return {
        "family": label,
        "sense": sense,
        "p": p,
        "q": q,
        "c": prim.jacobi,
        "x0": float(prim.initial_state[0]),
        "vy0": float(prim.initial_state[4]),
        "t_half": prim.t_section,
        "theta_v": float(theta),
        "cover_closure": abs(s_cover - 1.0),
    }


def _match_member(fam: FamilyBranch, sol: OrbitSolution, tol: float = 1e-4) -> bool:
    """True when sol lies on fam within tol, by C-interpolated section data."""
    cs = fam.jacobi
    xs = np.array([m.sol.initial_state[0] for m in fam.members])
    c = sol.jacobi
    x = sol.initial_state[0]
    # direct hit on a member, including the family ends where no C
    # bracket exists
    if np.any((np.abs(cs - c) < 1e-6) & (np.abs(xs - x) < tol)):
        return True
    for k in range(len(cs) - 1):
        c1, c2 = cs[k], cs[k + 1]
        if (c1 - c) * (c2 - c) > 0.0:
            continue
        lam = 0.0 if c2 == c1 else (c - c1) / (c2 - c1)
        x_interp = xs[k] + lam * (xs[k + 1] - xs[k])
        if abs(x_interp - sol.initial_state[0]) < tol:
            return True
    return False


def _identify_double(mu: float, last: OrbitSolution,
                     policy: CorrectorPolicy | None,
                     registry: dict[str, FamilyBranch]) -> dict | None:
    """Match a branch end that closed onto the double cover of a known orbit.

    The terminal section state is re-corrected at half its section time; when
    that primitive doubles back to the terminal period, it is looked up in the
    registry under either of its perpendicular crossings.
    """
    pol = policy or CorrectorPolicy()
    try:
        prim = correct(mu, last.sym, last.initial_state,
                       last.t_section / 2.0, pol)
    except SymorbError:
        return None
    if abs(2.0 * prim.period - last.period) > 1e-6 * last.period:
        return None
    anchors = [prim]
    try:
        other = propagate(mu, prim.initial_state, prim.t_section, pol.config)
        anchors.append(_dc_replace(prim, initial_state=other.state))
    except SymorbError:
        pass
    for fam_name, fam in registry.items():
        if any(_match_member(fam, a) for a in anchors):
            return {
                "family": fam_name,
                "p": 1,
                "q": 2,
                "c": prim.jacobi,
                "x0": float(prim.initial_state[0]),
                "t_half": prim.t_section,
            }
    return None


def bridge_detect(mu: float, branch: FamilyBranch,
                  policy: CorrectorPolicy | None = None,
                  registry: dict[str, FamilyBranch] | None = None) -> Termination:
    """Classify how a terminated spatial branch ended.

    returned-to-plane endings are resolved into the landing planar family:
    the final member's section state is flattened, corrected as a planar
    cover, reduced to its primitive, and identified by revolution sense and
    (when a registry is given) by matching against known planar families.

    Parameters
    ----------
    mu : float
        Mass ratio.
    branch : FamilyBranch
        A terminated branch.
    policy : CorrectorPolicy, optional
    registry : dict, optional
        Known planar families for landing identification.

    Returns
    -------
    Termination
    """
    if branch.termination == "none":
        raise ValueError("branch has not terminated")
    last = branch.members[-1].sol
    if branch.termination != "returned_to_plane":
        landing = (_identify_double(mu, last, policy, registry)
                   if registry else None)
        return Termination(kind=branch.termination, c_terminal=last.jacobi,
                           landing=landing)
    landing = identify_planar_orbit(
        mu, last.initial_state, last.period / 2.0,
        policy=policy, registry=registry)
    return Termination(kind="returned_to_plane", c_terminal=last.jacobi,
                       landing=landing)


def sigma_mirror(sol: OrbitSolution) -> np.ndarray:
    """Section state of the z-reflected mirror orbit."""
    return apply_symmetry_lagrangian(Symmetry.SIGMA, sol.initial_state)
