"""Initial guesses for the basic periodic orbit families.

Small circular orbits around the smaller primary are seeded from the Kepler
approximation with the epicyclic frequency shift of the rotating frame, and
orbits around a collinear libration point from the center eigenvectors of the
linearized flow.  All guesses are meant for the differential corrector and
come with the matching symmetry class and section-time estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correct import SymmetryClass
from .dynamics import libration_points, state, vector_field
from .errors import ConfigError


@dataclass(frozen=True)
class SeedGuess:
    """A corrector-ready guess: symmetry class, state and section time.

    parent_state, when set, is the section state the guess was displaced
    from; branch-off amplitude scaling and directed first steps measure
    against it.
    """

    sym: SymmetryClass
    state: np.ndarray
    t_section: float
    kind: str
    fixed: int = 0  # recommended corrector parameter to hold fixed
    parent_state: np.ndarray | None = None


# Single-turn Conley-Zehnder indices of the basic families at their seeds,
# split into (planar, spatial) parts; the vertical Lyapunov family starts as
# a spatial orbit, so only its total is defined.
SEED_INDEX: dict[str, tuple[int | None, int | None, int]] = {
    "dro": (1, 1, 2),
    "lpo": (3, 3, 6),
    "lyapunov": (2, 1, 3),
    "vertical": (None, None, 5),
}


def seed_index(kind: str) -> tuple[int | None, int | None, int]:
    """(planar, spatial, total) single-turn index of a basic family seed."""
    try:
        return SEED_INDEX[kind]
    except KeyError:
        raise ConfigError(
            f"unknown family kind {kind!r} (known: {sorted(SEED_INDEX)})") from None


def moon_circle_seed(mu: float, radius: float, retrograde: bool = True) -> SeedGuess:
    """Planar circular orbit of given radius around the smaller primary.

    Parameters
    ----------
    mu : float
        Mass ratio.
    radius : float
        Orbit radius in rotating units; must be well inside the Hill sphere
        for the Kepler approximation to correct cleanly.
    retrograde : bool
        Sense of revolution in the rotating frame.  Retrograde seeds start
        the distant retrograde family, prograde ones the low prograde family.

    Returns
    -------
    SeedGuess
        Planar SIMPLE_OX guess starting on the axis right of the primary.
    """
    if radius <= 0:
        raise ConfigError("radius must be positive")
    n = np.sqrt(mu / radius**3)
    v_circ = np.sqrt(mu / radius)
    if retrograde:
        # Epicyclic rate adds the frame rotation; the frame-drag term makes
        # the relative speed slightly above circular.
        vy = -(v_circ + radius)
        rate = n + 1.0
        kind = "dro"
    else:
        if n <= 1.0:
            raise ConfigError("prograde circle outside the synchronous radius")
        vy = v_circ - radius
        rate = n - 1.0
        kind = "lpo"
    s = state(x=1.0 - mu + radius, vy=vy)
    return SeedGuess(sym=SymmetryClass.SIMPLE_OX, state=s,
                     t_section=np.pi / rate, kind=kind)


def dro_seed(mu: float, radius: float = 0.02) -> SeedGuess:
    """Distant-retrograde family seed (retrograde Kepler circle)."""
    return moon_circle_seed(mu, radius, retrograde=True)


def lpo_seed(mu: float, radius: float = 0.02) -> SeedGuess:
    """Low-prograde family seed (prograde Kepler circle)."""
    return moon_circle_seed(mu, radius, retrograde=False)


def _collinear_info(mu: float, point: str):
    pts = libration_points(mu)
    key = point.upper()
    if key not in pts:
        raise ConfigError(f"unknown libration point {point!r} (known: {sorted(pts)})")
    return pts[key]


def _planar_center_mode(mu: float, point: str) -> tuple[float, float, np.ndarray]:
    """Libration point x, in-plane center frequency and its real mode shape.

    The planar linearization at a collinear point has one center pair
    +-i*nu; reversibility lets the eigenvector be phased so that the x and
    vy components are real while y and vx are imaginary, which is exactly a
    perpendicular axis crossing of the linear ellipse.
    """
    info = _collinear_info(mu, point)
    x_l = float(info.position[0])
    s0 = state(x=x_l)
    # Numerical Jacobian of the planar vector field restricted to (x, y, vx, vy).
    idx = [0, 1, 3, 4]
    jac = np.empty((4, 4))
    eps = 1e-7
    for j, cj in enumerate(idx):
        sp = s0.copy(); sp[cj] += eps
        sm = s0.copy(); sm[cj] -= eps
        df = (vector_field(mu, sp) - vector_field(mu, sm)) / (2 * eps)
        jac[:, j] = df[idx]
    vals, vecs = np.linalg.eig(jac)
    centers = [k for k in range(4) if abs(vals[k].real) < 1e-9 and vals[k].imag > 1e-9]
    if not centers:
        raise ConfigError(f"no planar center mode at {point!r}")
    k = centers[0]
    nu = float(vals[k].imag)
    w = vecs[:, k]
    w = w / w[0]  # phase: x component real and positive
    mode = np.array([w[0].real, 0.0, 0.0, w[3].real])  # (x, y, vx, vy) at the crossing
    return x_l, nu, mode


def lyapunov_seed(mu: float, point: str = "L2", amplitude: float = 0.01) -> SeedGuess:
    """Planar Lyapunov guess at a collinear libration point.

    Parameters
    ----------
    mu : float
        Mass ratio.
    point : str
        Collinear point name ("L1", "L2", "L3").
    amplitude : float
        x-excursion of the linear ellipse, in rotating units.

    Returns
    -------
    SeedGuess
        Planar SIMPLE_OX guess on the axis at the ellipse's x-extreme.
    """
    x_l, nu, mode = _planar_center_mode(mu, point)
    s = state(x=x_l + amplitude * mode[0], vy=amplitude * mode[3])
    return SeedGuess(sym=SymmetryClass.SIMPLE_OX, state=s,
                     t_section=np.pi / nu, kind="lyapunov")


def vertical_seed(mu: float, point: str = "L2", amplitude: float = 0.05) -> SeedGuess:
    """Vertical Lyapunov guess at a collinear libration point.

    The out-of-plane linearization is an oscillator z'' = -c z; the orbit is
    doubly symmetric, so the guess starts on the axis moving upward and the
    corrector closes it perpendicular to the xz-plane a quarter period later.
    """
    info = _collinear_info(mu, point)
    x_l = float(info.position[0])
    omega = float(info.omega_vertical)
    s = state(x=x_l, vz=amplitude * omega)
    # Fix the out-of-plane speed: with x fixed at the libration point the
    # corrector would collapse onto the equilibrium.
    return SeedGuess(sym=SymmetryClass.DOUBLY_OX_XOZ, state=s,
                     t_section=np.pi / (2 * omega), kind="vertical", fixed=5)
