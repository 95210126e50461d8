"""Rotating-frame dynamics of the spatial circular restricted three-body problem.

Units are normalized: the primary separation, the total mass, and the inverse
mean motion are all one, so the primaries sit at (-mu, 0, 0) and (1-mu, 0, 0)
and revolve with period 2*pi.  State vectors are float64 arrays; the
Lagrangian layout is ``(x, y, z, vx, vy, vz)`` and the Hamiltonian layout is
``(x, y, z, px, py, pz)`` with ``px = vx - y``, ``py = vy + x``, ``pz = vz``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import CollisionError

# Earth-Moon mass ratio used throughout the worked families; stored as the
# evaluated rational, not a truncated decimal.
EARTH_MOON_MU = 1.0 / 82.27

# Hard lower bound on the distance to either primary inside the vector field.
GUARD_RADIUS = 1e-12


class MassRatio(float):
    """Mass ratio of the smaller primary, validated to lie in (0, 1/2]."""

    def __new__(cls, value: float) -> "MassRatio":
        v = float(value)
        if not np.isfinite(v) or not (0.0 < v <= 0.5):
            raise ValueError(f"mass ratio must lie in (0, 1/2], got {value!r}")
        return super().__new__(cls, v)


class Symmetry(Enum):
    """Discrete symmetries of the rotating-frame problem.

    OX is the half-turn about the x-axis combined with time reversal, XOZ the
    reflection through the xz-plane combined with time reversal, and SIGMA the
    reflection through the orbital plane (no time reversal).  SIGMA equals the
    composition of the other two.
    """

    OX = "ox"
    XOZ = "xoz"
    SIGMA = "sigma"


# Sign patterns of the three involutions.  The same diagonal applies to both
# state layouts because position and velocity signs flip consistently with
# the momentum definitions.
_SYMMETRY_SIGNS = {
    Symmetry.OX: np.array([1.0, -1.0, -1.0, -1.0, 1.0, 1.0]),
    Symmetry.XOZ: np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0]),
    Symmetry.SIGMA: np.array([1.0, 1.0, -1.0, 1.0, 1.0, -1.0]),
}

# Whether the involution reverses time (is anti-symplectic).
_TIME_REVERSING = {Symmetry.OX: True, Symmetry.XOZ: True, Symmetry.SIGMA: False}

# Constant Jacobian of the Lagrangian -> Hamiltonian chart change.
L_TO_H = np.array(
    [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    ]
)

H_TO_L = np.array(
    [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    ]
)

# Standard symplectic form in Hamiltonian coordinates (q, p ordering).
J_SYMPLECTIC = np.block(
    [[np.zeros((3, 3)), np.eye(3)], [-np.eye(3), np.zeros((3, 3))]]
)


def state(x=0.0, y=0.0, z=0.0, vx=0.0, vy=0.0, vz=0.0) -> np.ndarray:
    """Build a Lagrangian state vector."""
    return np.array([x, y, z, vx, vy, vz], dtype=float)


def to_hamiltonian(s: np.ndarray) -> np.ndarray:
    """Convert a Lagrangian state to Hamiltonian coordinates."""
    x, y, z, vx, vy, vz = s
    return np.array([x, y, z, vx - y, vy + x, vz])


def to_lagrangian(sh: np.ndarray) -> np.ndarray:
    """Convert a Hamiltonian state to Lagrangian coordinates."""
    x, y, z, px, py, pz = sh
    return np.array([x, y, z, px + y, py - x, pz])


def apply_symmetry(sym: Symmetry, sh: np.ndarray) -> np.ndarray:
    """Apply one of the discrete involutions to a Hamiltonian state."""
    return _SYMMETRY_SIGNS[sym] * sh


def apply_symmetry_lagrangian(sym: Symmetry, s: np.ndarray) -> np.ndarray:
    """Apply one of the discrete involutions to a Lagrangian state."""
    return _SYMMETRY_SIGNS[sym] * s


def symmetry_matrix(sym: Symmetry) -> np.ndarray:
    """Diagonal matrix of the involution (valid in either state layout)."""
    return np.diag(_SYMMETRY_SIGNS[sym])


def reverses_time(sym: Symmetry) -> bool:
    """True for the anti-symplectic involutions (OX and XOZ)."""
    return _TIME_REVERSING[sym]


def vector_field(mu: float, s: np.ndarray) -> np.ndarray:
    """Equations of motion in the rotating frame.

    Parameters
    ----------
    mu : float
        Mass ratio of the smaller primary.
    s : ndarray
        Lagrangian state, shape (6,), or state plus row-major variational
        matrix, shape (42,).

    Returns
    -------
    ndarray
        Time derivative with the same shape as ``s``.

    Raises
    ------
    CollisionError
        If the position lies inside the guard radius of either primary.
    """
    s = np.asarray(s, dtype=float)
    r1, r2 = _kernels.radii(mu, s)
    if r1 < GUARD_RADIUS or r2 < GUARD_RADIUS:
        raise CollisionError(
            f"state inside collision guard (r1={r1:.3e}, r2={r2:.3e})",
            body="primary" if r1 < r2 else "secondary",
        )
    out = np.empty_like(s)
    _kernels.deriv(mu, s, out)
    return out


def hamiltonian(mu: float, sh: np.ndarray) -> float:
    """Rotating-frame Hamiltonian evaluated on a Hamiltonian state."""
    x, y, z, px, py, pz = sh
    r1 = np.sqrt((x + mu) ** 2 + y * y + z * z)
    r2 = np.sqrt((x - 1.0 + mu) ** 2 + y * y + z * z)
    kinetic = 0.5 * (px * px + py * py + pz * pz)
    return kinetic - (1.0 - mu) / r1 - mu / r2 + px * y - py * x


def jacobi_constant(mu: float, s: np.ndarray) -> float:
    """Jacobi constant C = -2H of a Lagrangian state."""
    return -2.0 * hamiltonian(mu, to_hamiltonian(np.asarray(s, dtype=float)[:6]))


@dataclass(frozen=True)
class LibrationPointInfo:
    """Equilibrium point with its energy and, for collinear points, the
    in-plane and out-of-plane linear oscillation frequencies."""

    name: str
    position: np.ndarray
    jacobi: float
    omega_planar: float | None
    omega_vertical: float | None


def _axis_force(mu: float, x: float) -> float:
    d1 = x + mu
    d2 = x - 1.0 + mu
    return x - (1.0 - mu) * d1 / abs(d1) ** 3 - mu * d2 / abs(d2) ** 3


def _axis_force_prime(mu: float, x: float) -> float:
    d1 = x + mu
    d2 = x - 1.0 + mu
    return 1.0 + 2.0 * (1.0 - mu) / abs(d1) ** 3 + 2.0 * mu / abs(d2) ** 3


def _collinear_root(mu: float, lo: float, hi: float, tol: float = 1e-14) -> float:
    """Safeguarded Newton (bisection fallback) on the x-axis force balance."""
    flo = _axis_force(mu, lo)
    fhi = _axis_force(mu, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError("collinear bracket does not straddle a root")
    x = 0.5 * (lo + hi)
    for _ in range(200):
        f = _axis_force(mu, x)
        if f == 0.0:
            return x
        if (f > 0.0) == (flo > 0.0):
            lo = x
        else:
            hi = x
        step = f / _axis_force_prime(mu, x)
        xn = x - step
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) < tol:
            return xn
        x = xn
    return x


def _collinear_frequencies(mu: float, x: float) -> tuple[float, float]:
    c = (1.0 - mu) / abs(x + mu) ** 3 + mu / abs(x - 1.0 + mu) ** 3
    oxx = 1.0 + 2.0 * c
    oyy = 1.0 - c
    # Planar characteristic polynomial l^4 + (4 - oxx - oyy) l^2 + oxx*oyy = 0
    b = 4.0 - oxx - oyy
    disc = np.sqrt(b * b - 4.0 * oxx * oyy)
    l2_minus = (-b - disc) / 2.0  # the negative root gives the center pair
    omega_p = np.sqrt(-l2_minus)
    return omega_p, np.sqrt(c)


def libration_points(mu: float) -> dict[str, LibrationPointInfo]:
    """All five equilibria with energies and collinear linear frequencies.

    The collinear points are interior/exterior roots of the x-axis force
    balance; the triangular points sit at (1/2 - mu, +-sqrt(3)/2, 0).
    """
    mu = float(mu)
    eps = 1e-9
    xs = {
        "L1": _collinear_root(mu, -mu + eps, 1.0 - mu - eps),
        "L2": _collinear_root(mu, 1.0 - mu + eps, 3.0),
        "L3": _collinear_root(mu, -3.0, -mu - eps),
    }
    out: dict[str, LibrationPointInfo] = {}
    for name, x in xs.items():
        wp, wv = _collinear_frequencies(mu, x)
        pos = np.array([x, 0.0, 0.0])
        cj = jacobi_constant(mu, state(x=x))
        out[name] = LibrationPointInfo(name, pos, cj, wp, wv)
    for name, sy in (("L4", 1.0), ("L5", -1.0)):
        pos = np.array([0.5 - mu, sy * np.sqrt(3.0) / 2.0, 0.0])
        cj = jacobi_constant(mu, state(x=pos[0], y=pos[1]))
        out[name] = LibrationPointInfo(name, pos, cj, None, None)
    return out
