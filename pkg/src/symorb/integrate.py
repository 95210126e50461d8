"""Adaptive propagation of states and variational matrices, with section events.

The underlying one-step method is an extrapolated midpoint scheme of order
twelve with an embedded order-ten error estimate (see ``_kernels``).  Error
control always acts on the six state components; the variational block rides
along as 36 extra equations ``dV/dt = A(t) V`` in the joint 42-dimensional
system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .dynamics import GUARD_RADIUS
from .errors import CollisionError, EventNotFoundError, IntegrationError


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control settings for the adaptive integrator."""

    abs_tol: float = 1e-13
    rel_tol: float = 1e-13
    h_init: float = 1e-2
    h_min: float = 1e-13
    h_max: float = 10.0
    max_steps: int = 200_000

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be positive")
        if not (0 < self.h_min <= self.h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


DEFAULT_CONFIG = IntegratorConfig()


class SectionAxis(Enum):
    """Coordinate plane whose zero set defines the Poincare section."""

    Y_ZERO = 1
    Z_ZERO = 2


@dataclass(frozen=True)
class EventSpec:
    """A section-crossing stopping condition.

    direction filters on the sign of the matching velocity component at the
    crossing (0 accepts both); count selects which matching crossing stops the
    propagation, counting strictly after the initial time.
    """

    axis: SectionAxis = SectionAxis.Y_ZERO
    direction: int = 0
    count: int = 1
    tol: float = 1e-12

    def __post_init__(self):
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0, or 1")
        if self.count < 1:
            raise ValueError("count must be at least 1")


@dataclass
class PropagationResult:
    """Terminal state of a propagation plus bookkeeping counters."""

    t: float
    state: np.ndarray
    n_accepted: int
    n_rejected: int
    min_r1: float
    min_r2: float
    event_time: float | None = None
    times: np.ndarray | None = None
    states: np.ndarray | None = None

    @property
    def V(self) -> np.ndarray:
        """Variational matrix, available when 42 components were propagated."""
        if self.state.size != 42:
            raise AttributeError("propagation did not carry a variational block")
        return self.state[6:].reshape(6, 6)


# Cap on stored trajectory points; storage beyond this is silently dropped.
_STORE_CAP = 400_000


def _run(mu, y0, t0, t1, cfg, ev, store):
    dim = y0.size
    if store:
        cap = min(cfg.max_steps + 2, _STORE_CAP)
        ts = np.empty(cap)
        ys = np.empty((cap, dim))
    else:
        ts = np.empty(0)
        ys = np.empty((0, dim))
    if ev is None:
        ev_idx, ev_dir, ev_count, ev_tol = -1, 0, 1, 1e-12
    else:
        ev_idx, ev_dir, ev_count, ev_tol = ev.axis.value, ev.direction, ev.count, ev.tol
    status, t, y, nacc, nrej, nstored, r1, r2 = _kernels.drive(
        float(mu), y0, float(t0), float(t1),
        cfg.abs_tol, cfg.rel_tol, cfg.h_init, cfg.h_min, cfg.h_max,
        cfg.max_steps, GUARD_RADIUS,
        ev_idx, ev_dir, ev_count, ev_tol, store, ts, ys,
    )
    res = PropagationResult(
        t=t, state=y, n_accepted=nacc, n_rejected=nrej, min_r1=r1, min_r2=r2,
        times=ts[:nstored] if store else None,
        states=ys[:nstored] if store else None,
    )
    if status == _kernels.COLLISION:
        raise CollisionError(f"trajectory hit a primary at t={t:.6f}", t=t)
    if status == _kernels.STEP_LIMIT:
        raise IntegrationError(f"step limit {cfg.max_steps} reached at t={t:.6f}")
    if status == _kernels.UNDERFLOW:
        raise IntegrationError(f"step size underflow at t={t:.6f}")
    if status == _kernels.NO_EVENT:
        raise EventNotFoundError(
            f"no matching crossing of {ev.axis.name} before t={t1:.6f}"
        )
    if status == _kernels.EVENT:
        res.event_time = t
    return res


def _span(t_span) -> tuple[float, float]:
    if np.isscalar(t_span):
        return 0.0, float(t_span)
    t0, t1 = t_span
    return float(t0), float(t1)


def propagate(mu, s0, t_span, config: IntegratorConfig | None = None,
              store: bool = False) -> PropagationResult:
    """Propagate a state over a time span.

    Parameters
    ----------
    mu : float
        Mass ratio.
    s0 : ndarray
        Initial Lagrangian state, shape (6,).
    t_span : float or (float, float)
        Final time (starting from zero) or explicit (t0, t1); t1 < t0
        integrates backward.
    config : IntegratorConfig, optional
    store : bool
        Keep the accepted-step trajectory in the result.
    """
    cfg = config or DEFAULT_CONFIG
    t0, t1 = _span(t_span)
    y0 = np.asarray(s0, dtype=float).copy()
    if y0.size != 6:
        raise ValueError("propagate expects a 6-component state")
    return _run(mu, y0, t0, t1, cfg, None, store)


def propagate_variational(mu, s0, t_span, config: IntegratorConfig | None = None,
                          store: bool = False, v0: np.ndarray | None = None
                          ) -> PropagationResult:
    """Propagate state and variational matrix jointly.

    The variational matrix starts at the identity unless ``v0`` chains a
    previous segment.  Access the terminal matrix through ``result.V``.
    """
    cfg = config or DEFAULT_CONFIG
    t0, t1 = _span(t_span)
    s0 = np.asarray(s0, dtype=float)
    if s0.size == 42:
        y0 = s0.copy()
    elif s0.size == 6:
        vmat = np.eye(6) if v0 is None else np.asarray(v0, dtype=float)
        y0 = np.concatenate([s0, vmat.ravel()])
    else:
        raise ValueError("state must have 6 or 42 components")
    return _run(mu, y0, t0, t1, cfg, None, store)


def propagate_to_event(mu, s0, event: EventSpec, t_max: float,
                       config: IntegratorConfig | None = None,
                       store: bool = False, variational: bool = False
                       ) -> PropagationResult:
    """Propagate until the requested section crossing.

    Raises EventNotFoundError if the crossing does not occur by ``t_max``.
    The returned state satisfies |section value| < event.tol.
    """
    cfg = config or DEFAULT_CONFIG
    s0 = np.asarray(s0, dtype=float)
    if variational and s0.size == 6:
        y0 = np.concatenate([s0, np.eye(6).ravel()])
    else:
        y0 = s0.copy()
    return _run(mu, y0, 0.0, float(t_max), cfg, event, store)


def fixed_step(mu, s, h) -> np.ndarray:
    """One macro step of the order-twelve scheme at fixed step size."""
    return _kernels.step_fixed(float(mu), np.asarray(s, dtype=float), float(h))
