"""Compiled numerical core: vector field, extrapolation integrator, event root finding.

Everything in this module operates on bare float64 arrays so numba can compile
it once and the rest of the package can stay plain Python.  State layout is
Lagrangian, ``(x, y, z, vx, vy, vz)``; the 42-component variant appends the
variational matrix V row-major (``y[6 + 6*i + j] = V[i, j]``) and integrates
``dV/dt = A(t) V`` alongside the state.

The stepper is the extrapolated Gragg midpoint rule on the even step-number
sequence 2, 4, ..., 12.  Six Aitken-Neville levels make the advanced value a
fixed-coefficient explicit Runge-Kutta method of order twelve; the difference
against the fifth column supplies an embedded order-ten error estimate used by
a PI step-size controller.  Error control uses the state components only.
"""

import numpy as np
from numba import njit

# Status codes returned by the driver.
OK = 0
EVENT = 1
COLLISION = 2
STEP_LIMIT = 3
UNDERFLOW = 4
NO_EVENT = 5

# Even step-number sequence for the midpoint extrapolation.
_SEQ = np.array([2.0, 4.0, 6.0, 8.0, 10.0, 12.0])
_KLEV = 6

_SAFETY = 0.9
_FACMIN = 0.2
_FACMAX = 5.0
_ALPHA = 0.7 / 11.0
_BETA = 0.4 / 11.0
_EXPO_REJ = 1.0 / 11.0


@njit(cache=True)
def deriv(mu, y, out):
    """Rotating-frame equations of motion, optionally with variational block."""
    x = y[0]
    yy = y[1]
    z = y[2]
    vx = y[3]
    vy = y[4]
    vz = y[5]
    dx1 = x + mu
    dx2 = x - 1.0 + mu
    r1s = dx1 * dx1 + yy * yy + z * z
    r2s = dx2 * dx2 + yy * yy + z * z
    r1 = np.sqrt(r1s)
    r2 = np.sqrt(r2s)
    q1 = (1.0 - mu) / (r1s * r1)
    q2 = mu / (r2s * r2)
    out[0] = vx
    out[1] = vy
    out[2] = vz
    out[3] = 2.0 * vy + x - q1 * dx1 - q2 * dx2
    out[4] = -2.0 * vx + yy - (q1 + q2) * yy
    out[5] = -(q1 + q2) * z
    if y.size > 6:
        c = q1 + q2
        f1 = 3.0 * (1.0 - mu) / (r1s * r1s * r1)
        f2 = 3.0 * mu / (r2s * r2s * r2)
        uxx = 1.0 - c + f1 * dx1 * dx1 + f2 * dx2 * dx2
        uyy = 1.0 - c + (f1 + f2) * yy * yy
        uzz = -c + (f1 + f2) * z * z
        uxy = (f1 * dx1 + f2 * dx2) * yy
        uxz = (f1 * dx1 + f2 * dx2) * z
        uyz = (f1 + f2) * yy * z
        for j in range(6):
            v0 = y[6 + j]
            v1 = y[12 + j]
            v2 = y[18 + j]
            v3 = y[24 + j]
            v4 = y[30 + j]
            v5 = y[36 + j]
            out[6 + j] = v3
            out[12 + j] = v4
            out[18 + j] = v5
            out[24 + j] = uxx * v0 + uxy * v1 + uxz * v2 + 2.0 * v4
            out[30 + j] = uxy * v0 + uyy * v1 + uyz * v2 - 2.0 * v3
            out[36 + j] = uxz * v0 + uyz * v1 + uzz * v2


@njit(cache=True)
def radii(mu, y):
    """Distances to the two primaries."""
    dx1 = y[0] + mu
    dx2 = y[0] - 1.0 + mu
    rr = y[1] * y[1] + y[2] * y[2]
    r1 = np.sqrt(dx1 * dx1 + rr)
    r2 = np.sqrt(dx2 * dx2 + rr)
    return r1, r2


@njit(cache=True)
def _midpoint(mu, y, h, f0, nsub):
    """Gragg midpoint rule with nsub substeps over one macro step h."""
    hs = h / nsub
    um = y.copy()
    u = y + hs * f0
    fm = np.empty_like(y)
    for _ in range(1, nsub):
        deriv(mu, u, fm)
        un = um + 2.0 * hs * fm
        um = u
        u = un
    return u


@njit(cache=True)
def step_fixed(mu, y, h):
    """Single macro step at full order twelve, no error estimate."""
    f0 = np.empty_like(y)
    deriv(mu, y, f0)
    dim = y.size
    dtab = np.empty((_KLEV, dim))
    for j in range(_KLEV):
        nsub = int(_SEQ[j])
        cur = _midpoint(mu, y, h, f0, nsub)
        for k in range(1, j + 1):
            ratio = _SEQ[j] / _SEQ[j - k]
            denom = ratio * ratio - 1.0
            nxt = cur + (cur - dtab[k - 1]) / denom
            dtab[k - 1] = cur
            cur = nxt
        dtab[j] = cur
    return dtab[_KLEV - 1]


@njit(cache=True)
def _attempt(mu, y, h, f0, atol, rtol):
    """One trial macro step; returns advanced state and scaled error norm."""
    dim = y.size
    dtab = np.empty((_KLEV, dim))
    for j in range(_KLEV):
        nsub = int(_SEQ[j])
        cur = _midpoint(mu, y, h, f0, nsub)
        for k in range(1, j + 1):
            ratio = _SEQ[j] / _SEQ[j - k]
            denom = ratio * ratio - 1.0
            nxt = cur + (cur - dtab[k - 1]) / denom
            dtab[k - 1] = cur
            cur = nxt
        dtab[j] = cur
    ynew = dtab[_KLEV - 1]
    emb = dtab[_KLEV - 2]
    err = 0.0
    for i in range(6):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        d = (ynew[i] - emb[i]) / sc
        err += d * d
    return ynew, np.sqrt(err / 6.0)


@njit(cache=True)
def _refine_root(mu, y, h, idx, sa, xi_lo, xi_hi, ev_tol):
    """Locate a zero of state component idx inside one macro step.

    Works in the normalized offset xi in (0, 1], tau = xi*h.  sa is the sign
    of the section function at the left end.  Newton on the section function
    (derivative is the matching velocity component) with a maintained bracket
    and bisection fallback; at most 50 Newton iterations, 60 total.
    """
    lo = xi_lo
    hi = xi_hi
    xi = 0.5 * (lo + hi)
    yr = step_fixed(mu, y, xi * h)
    for it in range(60):
        g = yr[idx]
        if abs(g) < ev_tol:
            break
        if (g > 0.0) == (sa > 0.0):
            lo = xi
        else:
            hi = xi
        moved = False
        if it < 50:
            gd = yr[idx + 3] * h
            if gd != 0.0:
                xin = xi - g / gd
                if lo < xin < hi:
                    xi = xin
                    moved = True
        if not moved:
            xi = 0.5 * (lo + hi)
        yr = step_fixed(mu, y, xi * h)
    return xi, yr


@njit(cache=True)
def drive(mu, y0, t0, t1, atol, rtol, h0, hmin, hmax, max_steps, guard,
          ev_idx, ev_dir, ev_count, ev_tol, store, ts, ys):
    """Adaptive propagation from t0 to t1 with optional section event stop.

    ev_idx < 0 disables event handling; otherwise ev_idx is 1 (y = 0 section)
    or 2 (z = 0 section), ev_dir in {-1, 0, 1} filters on the sign of the
    matching velocity at the crossing, and the ev_count-th matching crossing
    stops the run.  Returns (status, t, y, naccept, nreject, nstored,
    min_r1, min_r2).
    """
    dim = y0.size
    y = y0.copy()
    t = t0
    span = t1 - t0
    nstored = 0
    r1, r2 = radii(mu, y)
    minr1 = r1
    minr2 = r2
    if store and ts.size > 0:
        ts[0] = t
        for i in range(dim):
            ys[0, i] = y[i]
        nstored = 1
    if span == 0.0:
        return OK, t, y, 0, 0, nstored, minr1, minr2
    sgn = 1.0 if span > 0.0 else -1.0
    h = sgn * min(abs(h0), abs(span), hmax)
    if abs(h) < hmin:
        h = sgn * hmin
    f0 = np.empty(dim)
    deriv(mu, y, f0)
    facold = 1e-4
    nacc = 0
    nrej = 0
    ntot = 0
    just_rejected = False
    count_left = ev_count
    while sgn * (t1 - t) > 0.0:
        if ntot >= max_steps:
            return STEP_LIMIT, t, y, nacc, nrej, nstored, minr1, minr2
        ntot += 1
        last = False
        if sgn * (t + h - t1) >= 0.0:
            h = t1 - t
            last = True
        if abs(h) < hmin and not last:
            return UNDERFLOW, t, y, nacc, nrej, nstored, minr1, minr2
        ynew, err = _attempt(mu, y, h, f0, atol, rtol)
        if err <= 1.0:
            if ev_idx >= 0:
                # Scan (0, h] for section crossings, oldest first.
                ga = y[ev_idx]
                if ga != 0.0:
                    sa = 1.0 if ga > 0.0 else -1.0
                else:
                    gv = y[ev_idx + 3]
                    sa = 1.0 if gv > 0.0 else (-1.0 if gv < 0.0 else 0.0)
                xi_a = 0.0
                gb = ynew[ev_idx]
                for _ in range(8):
                    if sa == 0.0 or xi_a >= 1.0 - 1e-14:
                        break
                    sb = 1.0 if gb > 0.0 else (-1.0 if gb < 0.0 else 0.0)
                    if sb == sa:
                        break
                    xi, yr = _refine_root(mu, y, h, ev_idx, sa, xi_a, 1.0, ev_tol)
                    gd = yr[ev_idx + 3]
                    matches = (ev_dir == 0) or (gd > 0.0 and ev_dir > 0) or (gd < 0.0 and ev_dir < 0)
                    if matches:
                        count_left -= 1
                        if count_left == 0:
                            t_ev = t + xi * h
                            if store and nstored < ts.size:
                                ts[nstored] = t_ev
                                for i in range(dim):
                                    ys[nstored, i] = yr[i]
                                nstored += 1
                            return EVENT, t_ev, yr, nacc, nrej, nstored, minr1, minr2
                    xi_a = xi
                    sa = 1.0 if gd > 0.0 else (-1.0 if gd < 0.0 else 0.0)
            r1, r2 = radii(mu, ynew)
            if r1 < minr1:
                minr1 = r1
            if r2 < minr2:
                minr2 = r2
            t = t + h
            y = ynew
            if r1 < guard or r2 < guard:
                return COLLISION, t, y, nacc, nrej, nstored, minr1, minr2
            deriv(mu, y, f0)
            if store and nstored < ts.size:
                ts[nstored] = t
                for i in range(dim):
                    ys[nstored, i] = y[i]
                nstored += 1
            nacc += 1
            e = max(err, 1e-16)
            fac = _SAFETY * e ** (-_ALPHA) * facold ** _BETA
            if just_rejected and fac > 1.0:
                fac = 1.0
            fac = min(_FACMAX, max(_FACMIN, fac))
            facold = max(err, 1e-4)
            h = sgn * min(abs(h) * fac, hmax)
            just_rejected = False
        else:
            nrej += 1
            fac = max(_FACMIN, _SAFETY * err ** (-_EXPO_REJ))
            h = h * fac
            just_rejected = True
    if ev_idx >= 0:
        return NO_EVENT, t, y, nacc, nrej, nstored, minr1, minr2
    return OK, t, y, nacc, nrej, nstored, minr1, minr2
