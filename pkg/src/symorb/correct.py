"""Differential correction of symmetric periodic orbits.

A symmetric periodic orbit is pinned down by a perpendicular section start
(on the x-axis or on the xz-plane) together with a perpendicular arrival at
the half or quarter period.  Newton's method acts on the free initial
coordinates and the arrival time jointly: the linear system couples rows of
the variational matrix with the flow derivative, one unknown is held fixed,
and the remaining square system is solved with row equilibration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .dynamics import Symmetry, jacobi_constant, vector_field
from .errors import CollisionError, ConvergenceError, IllConditionedError
from .integrate import IntegratorConfig, DEFAULT_CONFIG, propagate, propagate_variational


class SymmetryClass(Enum):
    """How a periodic orbit closes up on the symmetry sections.

    Simple classes start perpendicular on one section and meet the same
    section perpendicularly at half period.  Doubly symmetric classes start
    perpendicular on one section and meet the other one perpendicularly at
    quarter period; the first name gives the start section.
    """

    SIMPLE_OX = "simple_ox"
    SIMPLE_XOZ = "simple_xoz"
    DOUBLY_OX_XOZ = "doubly_ox_xoz"
    DOUBLY_XOZ_OX = "doubly_xoz_ox"


@dataclass(frozen=True)
class _ClassInfo:
    zero: tuple[int, ...]   # state components that vanish on the start section
    free: tuple[int, ...]   # free initial coordinates
    cond: tuple[int, ...]   # state components driven to zero at arrival
    period_mult: int        # period / section time
    start: Symmetry
    target: Symmetry


_CLASS: dict[SymmetryClass, _ClassInfo] = {
    SymmetryClass.SIMPLE_OX: _ClassInfo(
        zero=(1, 2, 3), free=(0, 4, 5), cond=(1, 2, 3), period_mult=2,
        start=Symmetry.OX, target=Symmetry.OX),
    SymmetryClass.SIMPLE_XOZ: _ClassInfo(
        zero=(1, 3, 5), free=(0, 2, 4), cond=(1, 3, 5), period_mult=2,
        start=Symmetry.XOZ, target=Symmetry.XOZ),
    SymmetryClass.DOUBLY_OX_XOZ: _ClassInfo(
        zero=(1, 2, 3), free=(0, 4, 5), cond=(1, 3, 5), period_mult=4,
        start=Symmetry.OX, target=Symmetry.XOZ),
    SymmetryClass.DOUBLY_XOZ_OX: _ClassInfo(
        zero=(1, 3, 5), free=(0, 2, 4), cond=(1, 2, 3), period_mult=4,
        start=Symmetry.XOZ, target=Symmetry.OX),
}

_COORD_NAMES = {0: "x", 1: "y", 2: "z", 3: "vx", 4: "vy", 5: "vz"}
_NAME_TO_COORD = {v: k for k, v in _COORD_NAMES.items()}


def class_info(sym: SymmetryClass) -> _ClassInfo:
    """Section/condition layout of a symmetry class."""
    return _CLASS[sym]


@dataclass(frozen=True)
class CorrectorPolicy:
    """Knobs of the Newton correction.

    fixed_param is the state index (or name) of the initial coordinate held
    fixed; it must be one of the free coordinates of the symmetry class.  The
    residual target is tol; a solution is still accepted if the iteration
    stalls below accept_tol.  cond_limit only flags ill conditioning to the
    caller (for parameter switching); it does not abort the solve.
    """

    fixed_param: int | str | None = None
    tol: float = 1e-10
    accept_tol: float = 1e-8
    max_iters: int = 25
    max_damping: int = 5
    cond_limit: float = 1e8
    min_time_fraction: float = 0.05
    config: IntegratorConfig = field(default_factory=IntegratorConfig)


@dataclass
class OrbitSolution:
    """A corrected symmetric periodic orbit.

    initial_state is the exact section representative (section components are
    identically zero); t_section is the half period for simple classes and the
    quarter period for doubly symmetric ones.
    """

    sym: SymmetryClass
    initial_state: np.ndarray
    t_section: float
    period: float
    jacobi: float
    residual: float
    iterations: int
    planar: bool
    fixed_param: int
    cond: float
    switch_hint: bool = False
    min_r1: float = np.inf
    min_r2: float = np.inf

    def free_values(self) -> np.ndarray:
        """Initial free coordinates followed by the section time."""
        info = _CLASS[self.sym]
        return np.append(self.initial_state[list(info.free)], self.t_section)


def _resolve_fixed(info: _ClassInfo, fixed_param) -> int:
    if fixed_param is None:
        return info.free[0]
    p = _NAME_TO_COORD.get(fixed_param, fixed_param)
    if p not in info.free:
        raise ValueError(
            f"fixed parameter {fixed_param!r} is not free for this class "
            f"(free: {[_COORD_NAMES[i] for i in info.free]})")
    return int(p)


def is_planar_guess(sym: SymmetryClass, s: np.ndarray) -> bool:
    """True when the guess lies exactly in the orbital plane."""
    return sym is SymmetryClass.SIMPLE_OX and s[2] == 0.0 and s[5] == 0.0


def _layout(sym: SymmetryClass, s: np.ndarray, fixed: int):
    """Free coordinates (minus the fixed one) and conditions for the solve."""
    info = _CLASS[sym]
    if is_planar_guess(sym, s):
        free = tuple(i for i in (0, 4) if i != fixed)
        cond = (1, 3)
    else:
        free = tuple(i for i in info.free if i != fixed)
        cond = info.cond
    return free, cond


def _residual_at(mu, s, t, cond, cfg):
    try:
        res = propagate(mu, s, t, cfg)
    except CollisionError:
        return np.inf, None
    return float(np.max(np.abs(res.state[list(cond)]))), res


def correct(mu: float, sym: SymmetryClass, guess: np.ndarray, t_guess: float,
            policy: CorrectorPolicy | None = None) -> OrbitSolution:
    """Correct a guess into a symmetric periodic orbit.

    Parameters
    ----------
    mu : float
        Mass ratio.
    sym : SymmetryClass
        Which perpendicular start/arrival pattern to enforce.
    guess : ndarray
        Initial Lagrangian state; components on the start section are zeroed.
    t_guess : float
        Approximate section time (half or quarter period).
    policy : CorrectorPolicy, optional

    Returns
    -------
    OrbitSolution

    Raises
    ------
    ConvergenceError
        If the residual does not reach the acceptance bound.
    IllConditionedError
        If the Newton matrix is singular.
    """
    pol = policy or CorrectorPolicy()
    info = _CLASS[sym]
    fixed = _resolve_fixed(info, pol.fixed_param)
    cfg = pol.config
    s = np.asarray(guess, dtype=float).copy()
    s[list(info.zero)] = 0.0
    planar = is_planar_guess(sym, s)
    if planar and fixed not in (0, 4):
        fixed = 0
    t = float(t_guess)
    if t <= 0:
        raise ValueError("t_guess must be positive")
    # t = 0 satisfies the arrival conditions trivially for any perpendicular
    # start, so keep Newton away from that spurious root.
    t_floor = pol.min_time_fraction * t
    free, cond = _layout(sym, s, fixed)
    ncond = len(cond)

    last_cond = np.inf
    r = np.inf
    best: tuple[float, np.ndarray, float] | None = None
    it = 0
    for it in range(1, pol.max_iters + 1):
        try:
            rv = propagate_variational(mu, s, t, cfg)
        except CollisionError as exc:
            raise ConvergenceError(
                f"collision during correction: {exc}", residual=r, iters=it) from exc
        state_t = rv.state[:6]
        vmat = rv.V
        fvec = np.array([state_t[i] for i in cond])
        r = float(np.max(np.abs(fvec)))
        if best is None or r < best[0]:
            best = (r, s.copy(), t)
        if r <= pol.tol:
            break
        flow = vector_field(mu, state_t)
        jac = np.empty((ncond, ncond))
        for i, ci in enumerate(cond):
            for j, fj in enumerate(free):
                jac[i, j] = vmat[ci, fj]
            jac[i, -1] = flow[ci]
        rhs = -fvec
        # Row equilibration keeps near-planar seeds solvable: the out-of-plane
        # condition row scales with the branch amplitude.
        scale = np.max(np.abs(jac), axis=1)
        scale[scale == 0.0] = 1.0
        jac /= scale[:, None]
        rhs = rhs / scale
        last_cond = float(np.linalg.cond(jac))
        try:
            delta = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError as exc:
            raise IllConditionedError(
                f"singular correction matrix (cond={last_cond:.3e})") from exc
        # Damped update: halve the step while the residual grows.  If no
        # damping level improves, keep the most damped trial and move on.
        lam = 1.0
        trial = None
        for _ in range(pol.max_damping + 1):
            s_try = s.copy()
            for j, fj in enumerate(free):
                s_try[fj] += lam * delta[j]
            t_try = t + lam * delta[-1]
            if t_try <= t_floor:
                lam *= 0.5
                continue
            trial = (s_try, t_try)
            r_try, _ = _residual_at(mu, s_try, t_try, cond, cfg)
            if r_try < r:
                break
            lam *= 0.5
        if trial is None:
            raise ConvergenceError(
                f"section time collapsed to zero after {it} iterations",
                residual=r, iters=it)
        s, t = trial

    # Near-collision passages put a conditioning floor under the residual, so
    # an oscillating tail can end above the best iterate; report the best.
    if best is not None and best[0] < r:
        _, s, t = best
    r_final, res = _residual_at(mu, s, t, cond, cfg)
    if res is None or not np.isfinite(r_final) or r_final > pol.accept_tol:
        raise ConvergenceError(
            f"corrector stalled at residual {r_final:.3e} after {it} iterations",
            residual=r_final, iters=it)
    return OrbitSolution(
        sym=sym,
        initial_state=s,
        t_section=t,
        period=info.period_mult * t,
        jacobi=jacobi_constant(mu, s),
        residual=r_final,
        iterations=it,
        planar=planar,
        fixed_param=fixed,
        cond=last_cond,
        switch_hint=bool(last_cond > pol.cond_limit),
        min_r1=res.min_r1,
        min_r2=res.min_r2,
    )


def perpendicularity_residual(mu: float, sol: OrbitSolution,
                              config: IntegratorConfig | None = None) -> float:
    """Largest violated arrival condition, recomputed from scratch."""
    cfg = config or DEFAULT_CONFIG
    _, cond = _layout(sol.sym, sol.initial_state, sol.fixed_param)
    r, _ = _residual_at(mu, sol.initial_state, sol.t_section, cond, cfg)
    return r


# Secant slope magnitude beyond which the stepped parameter looks near an
# extremum and the caller should switch to a faster-moving coordinate.
SWITCH_SLOPE = 1e3


@dataclass(frozen=True)
class Prediction:
    """Secant extrapolation of a family member used to seed the corrector."""

    state: np.ndarray
    t_section: float
    switch: bool


def predict(prev: OrbitSolution, older: OrbitSolution, step: float,
            fixed: int | None = None) -> Prediction:
    """Extrapolate the next family member by a secant through two solutions.

    step is the desired increment of the fixed parameter.  The switch flag is
    raised when some other coordinate moves more than SWITCH_SLOPE times
    faster than the fixed one, or when the fixed one did not move at all.
    """
    if prev.sym is not older.sym:
        raise ValueError("predictor needs two members of the same class")
    fixed = prev.fixed_param if fixed is None else fixed
    info = _CLASS[prev.sym]
    u1 = np.append(older.initial_state.copy(), older.t_section)
    u2 = np.append(prev.initial_state.copy(), prev.t_section)
    du = u2 - u1
    dk = du[fixed]
    if dk == 0.0 or abs(dk) < 1e-15 * max(1.0, abs(u2[fixed])):
        s = prev.initial_state.copy()
        s[fixed] += step
        return Prediction(state=s, t_section=prev.t_section, switch=True)
    slope = du / dk
    u = u2 + step * slope
    switch = bool(np.max(np.abs(slope[list(info.free) + [6]])) > SWITCH_SLOPE)
    return Prediction(state=u[:6], t_section=float(u[6]), switch=switch)
