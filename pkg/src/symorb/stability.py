"""Monodromy assembly, Floquet stability indices, and Krein signatures.

For a symmetric periodic orbit the full-period monodromy follows from the
variational matrix at the half or quarter period conjugated with the diagonal
involution matrices, so no integration past the section point is needed.  The
monodromy in Lagrangian coordinates is not symplectic; a constant linear
change to Hamiltonian coordinates makes it so, after which eigenvalues come
in reciprocal pairs {1, 1, l1, 1/l1, l2, 1/l2}.

Each nontrivial pair carries a stability index s = (l + 1/l)/2, a kind
(elliptic, positive/negative hyperbolic, or part of a complex quadruple), and
for non-degenerate pairs a Krein signature sign(v^T B v) read off a block
normal form of the Hamiltonian monodromy adapted to the start section.  The
signature orients elliptic rotation: positive means the angle lies in
(0, pi), negative means the rotation is by -theta, reported in (pi, 2*pi).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .correct import OrbitSolution, SymmetryClass, class_info
from .dynamics import (
    H_TO_L,
    J_SYMPLECTIC,
    L_TO_H,
    Symmetry,
    symmetry_matrix,
)
from .errors import IllConditionedError
from .integrate import IntegratorConfig, DEFAULT_CONFIG, propagate_variational

# |s| within this margin of 1 marks a pair as critical (at or numerically at
# a bifurcation).
CRITICAL_MARGIN = 1e-7

# Krein form value below which the signature is reported indeterminate.
KREIN_DEGENERATE = 1e-12

# Conditioning bound on the section variational matrix.
COND_LIMIT = 1e14

_L_OX = symmetry_matrix(Symmetry.OX)
_L_XOZ = symmetry_matrix(Symmetry.XOZ)

# Block normal form basis for starts on the x-axis: columns span the fixed
# subspace {y = z = px = 0} and its symplectic complement {x = py = pz = 0}.
S_OX = np.array(
    [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    ]
)

# Analogous basis for starts on the xz-plane, built from the splitting
# {y = px = pz = 0} + {x = z = py = 0} by the same pairing recipe.
S_XOZ = np.array(
    [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, -1.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    ]
)


class PairKind(Enum):
    ELLIPTIC = "elliptic"
    POSITIVE_HYPERBOLIC = "positive_hyperbolic"
    NEGATIVE_HYPERBOLIC = "negative_hyperbolic"
    COMPLEX = "complex"


@dataclass(frozen=True)
class KreinData:
    """Krein signature of one Floquet pair.

    sign is +1 or -1, or 0 when |v^T B v| falls under the degeneracy bound or
    the eigenvector of A^T could not be matched.  block_residual is the worst
    violation of the structural identities (B, C, AB, A^T C symmetric and
    A^2 - BC = id) of the normal form.
    """

    sign: int
    value: float
    eig_gap: float
    block_residual: float


@dataclass
class PairReport:
    """One nontrivial Floquet multiplier pair."""

    s: complex
    kind: PairKind
    lam: complex
    theta: float | None
    theta_signed: float | None
    krein: KreinData | None
    critical: bool

    @property
    def s_real(self) -> float:
        return float(np.real(self.s))


@dataclass
class MonodromyReport:
    """Stability data of one corrected orbit."""

    M: np.ndarray
    M_H: np.ndarray
    cond_V: float
    alpha: float
    beta: float
    pairs: tuple[PairReport, PairReport]
    trivial_error: float
    planar: bool
    pair_planar: PairReport | None = None
    pair_vertical: PairReport | None = None

    @property
    def s_vertical(self) -> float | None:
        return self.pair_vertical.s_real if self.pair_vertical else None

    @property
    def s_planar(self) -> float | None:
        return self.pair_planar.s_real if self.pair_planar else None


def hamiltonian_variational(V: np.ndarray) -> np.ndarray:
    """Variational matrix in Hamiltonian coordinates (a symplectic matrix)."""
    return L_TO_H @ V @ H_TO_L


def symplectic_inverse(V: np.ndarray) -> np.ndarray:
    """Inverse of a Lagrangian variational matrix via the symplectic identity.

    The Hamiltonian-coordinates image W of V is symplectic, so W^{-1} equals
    -J W^T J; this avoids an LU factorization of a possibly stiff matrix.
    """
    W = hamiltonian_variational(V)
    Winv = -J_SYMPLECTIC @ W.T @ J_SYMPLECTIC
    return H_TO_L @ Winv @ L_TO_H


def assemble_monodromy(sym: SymmetryClass, V_section: np.ndarray) -> np.ndarray:
    """Full-period monodromy from the section variational matrix.

    V_section is V(T/2) for the simple classes and V(T/4) for the doubly
    symmetric ones, in Lagrangian coordinates.
    """
    cond = float(np.linalg.cond(V_section))
    if cond > COND_LIMIT:
        raise IllConditionedError(
            f"section variational matrix condition {cond:.3e} exceeds {COND_LIMIT:.0e}")
    Vi = symplectic_inverse(V_section)
    if sym is SymmetryClass.SIMPLE_OX:
        return _L_OX @ Vi @ _L_OX @ V_section
    if sym is SymmetryClass.SIMPLE_XOZ:
        return _L_XOZ @ Vi @ _L_XOZ @ V_section
    if sym is SymmetryClass.DOUBLY_OX_XOZ:
        half = _L_OX @ Vi @ _L_XOZ @ V_section
        return half @ half
    half = _L_XOZ @ Vi @ _L_OX @ V_section
    return half @ half


def to_hamiltonian_monodromy(M: np.ndarray) -> np.ndarray:
    """Conjugate a Lagrangian monodromy into Hamiltonian coordinates."""
    return L_TO_H @ M @ H_TO_L


def stability_indices(M: np.ndarray) -> tuple[float, float, complex, complex]:
    """(alpha, beta, s1, s2) of a monodromy matrix.

    alpha = 2 - tr(M) and beta = 2 tr(M^2) - alpha^2 + 4; the two stability
    indices are the roots -(alpha -+ sqrt(beta))/4.  beta < 0 signals a
    complex quadruple of Floquet multipliers off the unit circle and real
    axis, in which case s1 and s2 are complex conjugates.
    """
    alpha = 2.0 - float(np.trace(M))
    beta = 2.0 * float(np.trace(M @ M)) - alpha * alpha + 4.0
    root = np.sqrt(complex(beta))
    s1 = (-alpha - root) / 4.0
    s2 = (-alpha + root) / 4.0
    if beta >= 0.0:
        s1, s2 = float(np.real(s1)), float(np.real(s2))
    return alpha, beta, s1, s2


def _kind_of(s: float) -> PairKind:
    if s > 1.0:
        return PairKind.POSITIVE_HYPERBOLIC
    if s < -1.0:
        return PairKind.NEGATIVE_HYPERBOLIC
    return PairKind.ELLIPTIC


def _multiplier(s: complex) -> complex:
    lam = s + np.sqrt(complex(s) ** 2 - 1.0)
    if abs(lam) < 1.0:
        lam = 1.0 / lam
    return lam


def krein_signature(M_H: np.ndarray, s_value: float, start: Symmetry) -> KreinData:
    """Krein signature of the pair with stability index s_value.

    The block normal form S^{-1} M_H S = [[A, B], [C, A^T]] is taken in the
    basis adapted to the start section (x-axis or xz-plane).  The signature is
    sign(v^T B v) for v the eigenvector of A^T at eigenvalue s_value.
    """
    S = S_OX if start is Symmetry.OX else S_XOZ
    N = np.linalg.solve(S, M_H @ S)
    A = N[:3, :3]
    B = N[:3, 3:]
    C = N[3:, :3]
    D = N[3:, 3:]
    res = max(
        float(np.max(np.abs(B - B.T))),
        float(np.max(np.abs(C - C.T))),
        float(np.max(np.abs(A @ B - (A @ B).T))),
        float(np.max(np.abs(A.T @ C - (A.T @ C).T))),
        float(np.max(np.abs(A @ A - B @ C - np.eye(3)))),
        float(np.max(np.abs(D - A.T))),
    )
    w, vecs = np.linalg.eig(A.T)
    gaps = np.abs(w - s_value)
    k = int(np.argmin(gaps))
    if abs(np.imag(w[k])) > 1e-8:
        return KreinData(sign=0, value=0.0, eig_gap=float(gaps[k]), block_residual=res)
    v = np.real(vecs[:, k])
    n = np.linalg.norm(v)
    if n == 0.0:
        return KreinData(sign=0, value=0.0, eig_gap=float(gaps[k]), block_residual=res)
    v = v / n
    val = float(v @ B @ v)
    if abs(val) < KREIN_DEGENERATE:
        sign = 0
    else:
        sign = 1 if val > 0 else -1
    return KreinData(sign=sign, value=val, eig_gap=float(gaps[k]), block_residual=res)


def _signed_theta(s: float, krein_sign: int) -> tuple[float, float | None]:
    theta = float(np.arccos(np.clip(s, -1.0, 1.0)))
    if krein_sign > 0:
        return theta, theta
    if krein_sign < 0:
        return theta, 2.0 * np.pi - theta
    return theta, None


def _pair_report(s: float, M_H: np.ndarray, start: Symmetry) -> PairReport:
    kind = _kind_of(s)
    critical = abs(abs(s) - 1.0) < CRITICAL_MARGIN
    kd = krein_signature(M_H, s, start)
    if kind is PairKind.ELLIPTIC:
        theta, theta_signed = _signed_theta(s, kd.sign)
    else:
        theta, theta_signed = None, None
    return PairReport(
        s=s, kind=kind, lam=_multiplier(s), theta=theta,
        theta_signed=theta_signed, krein=kd, critical=critical,
    )


def _complex_pair_reports(s1: complex, s2: complex) -> tuple[PairReport, PairReport]:
    reps = []
    for s in (s1, s2):
        reps.append(
            PairReport(
                s=s, kind=PairKind.COMPLEX, lam=_multiplier(s), theta=None,
                theta_signed=None, krein=None, critical=False,
            )
        )
    return reps[0], reps[1]


def _trivial_error(M: np.ndarray) -> float:
    lams = np.linalg.eigvals(M)
    return float(np.min(np.abs(lams - 1.0)))


def report_from_V(sym: SymmetryClass, V_section: np.ndarray) -> MonodromyReport:
    """Stability report from the section variational matrix."""
    M = assemble_monodromy(sym, V_section)
    M_H = to_hamiltonian_monodromy(M)
    start = class_info(sym).start
    alpha, beta, s1, s2 = stability_indices(M)
    planar = bool(
        np.max(np.abs(M[np.ix_((0, 1, 3, 4), (2, 5))])) < 1e-9
        and np.max(np.abs(M[np.ix_((2, 5), (0, 1, 3, 4))])) < 1e-9
    )
    if beta < 0.0:
        pairs = _complex_pair_reports(s1, s2)
    else:
        pairs = (_pair_report(float(np.real(s1)), M_H, start),
                 _pair_report(float(np.real(s2)), M_H, start))
    rep = MonodromyReport(
        M=M, M_H=M_H, cond_V=float(np.linalg.cond(V_section)),
        alpha=alpha, beta=beta, pairs=pairs,
        trivial_error=_trivial_error(M), planar=planar,
    )
    if planar and beta >= 0.0:
        s_v = 0.5 * (M[2, 2] + M[5, 5])
        s_h = 0.5 * (M[0, 0] + M[1, 1] + M[3, 3] + M[4, 4] - 2.0)
        # Assign the alpha/beta roots to the decoupled blocks by proximity.
        if abs(pairs[0].s_real - s_v) + abs(pairs[1].s_real - s_h) <= (
                abs(pairs[0].s_real - s_h) + abs(pairs[1].s_real - s_v)):
            rep.pair_vertical, rep.pair_planar = pairs[0], pairs[1]
        else:
            rep.pair_vertical, rep.pair_planar = pairs[1], pairs[0]
    return rep


def monodromy_report(mu: float, sol: OrbitSolution,
                     config: IntegratorConfig | None = None) -> MonodromyReport:
    """Propagate the variational equations to the section and build the report."""
    cfg = config or DEFAULT_CONFIG
    rv = propagate_variational(mu, sol.initial_state, sol.t_section, cfg)
    return report_from_V(sol.sym, rv.V)
