"""Conley-Zehnder indices of periodic orbits, their covers, and index tracking.

Each nontrivial Floquet pair contributes an integer to the index.  An
elliptic pair carries an unwrapped rotation angle phi > 0 (the signed angle
accumulated along the family, not just its value modulo 2*pi) and the q-th
cover of the orbit picks up

    1 + 2*floor(q*phi / 2*pi).

A hyperbolic pair carries a frozen integer n, even when the multipliers are
positive and odd when they are negative, and the q-th cover picks up q*n.
The orbit index is the sum over its two nontrivial pairs; for planar orbits
the two pairs split into planar and vertical parts of the index.

Because only phi modulo 2*pi is observable from a single monodromy matrix,
indices are tracked along a family: the tracker seeds the winding from a
known starting index and transports it member to member, converting between
the elliptic angle and the hyperbolic integer whenever a pair crosses the
unit circle.  Steps too large to unwrap unambiguously raise
AmbiguousRotationError so a continuation driver can refine and retry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import AmbiguousRotationError, DegenerateIndexError
from .stability import MonodromyReport, PairKind, PairReport

# q*phi/(2*pi) closer than this to an integer means the cover sits on a
# resonance and its index is not defined.
DEGENERACY_TOL = 1e-9

# Largest admissible angle change between consecutive members of a family.
MAX_ANGLE_STEP = 0.5 * math.pi

_TWO_PI = 2.0 * math.pi


def wrap_pm(x: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    y = math.fmod(x + math.pi, _TWO_PI)
    if y <= 0.0:
        y += _TWO_PI
    return y - math.pi


@dataclass(frozen=True)
class PairTrack:
    """Transported winding data of one Floquet pair.

    Exactly one of the two payloads is meaningful: ``phi`` (unwrapped
    rotation) while the pair is elliptic, ``n`` (frozen integer) while it is
    hyperbolic.
    """

    elliptic: bool
    phi: float = 0.0
    n: int = 0

    def index(self, q: int = 1) -> int:
        """Index contribution of the q-th cover of this pair."""
        if self.elliptic:
            val = q * self.phi / _TWO_PI
            if abs(val - round(val)) < DEGENERACY_TOL:
                raise DegenerateIndexError(
                    f"pair rotation {self.phi:.12f} is resonant at cover {q}")
            return 1 + 2 * math.floor(val)
        return q * self.n

    def angle(self) -> float:
        """Observable rotation angle in [0, 2*pi) of an elliptic track."""
        return self.phi % _TWO_PI


def seed_track(pair: PairReport, pair_index: int) -> PairTrack:
    """Seed a track from one stability pair and its known index contribution.

    For an elliptic pair the contribution must be odd (it equals
    1 + 2*floor(phi/2*pi)); for hyperbolic pairs the contribution is the
    frozen integer itself and its parity must match the multiplier sign.
    """
    if pair.kind is PairKind.ELLIPTIC:
        if pair_index % 2 == 0:
            raise ValueError(f"elliptic pair cannot contribute even index {pair_index}")
        if pair.theta_signed is None:
            raise DegenerateIndexError("elliptic pair with indeterminate Krein sign")
        return PairTrack(elliptic=True,
                         phi=pair.theta_signed + _TWO_PI * ((pair_index - 1) // 2))
    if pair.kind is PairKind.POSITIVE_HYPERBOLIC:
        if pair_index % 2 != 0:
            raise ValueError(f"positive hyperbolic pair needs even index, got {pair_index}")
    elif pair.kind is PairKind.NEGATIVE_HYPERBOLIC:
        if pair_index % 2 == 0:
            raise ValueError(f"negative hyperbolic pair needs odd index, got {pair_index}")
    else:
        raise ValueError("cannot seed a track on a complex quadruple")
    return PairTrack(elliptic=False, n=pair_index)


def _advance(track: PairTrack, pair: PairReport) -> PairTrack:
    """Transport one track to the next family member's pair."""
    kind = pair.kind
    if kind is PairKind.ELLIPTIC:
        if pair.theta_signed is None:
            raise AmbiguousRotationError(
                "elliptic pair with indeterminate Krein signature")
        if track.elliptic:
            step = wrap_pm(pair.theta_signed - track.phi)
            if abs(step) >= MAX_ANGLE_STEP:
                raise AmbiguousRotationError(
                    f"rotation step {step:.4f} too large to unwrap")
            return replace(track, phi=track.phi + step)
        # leaving a hyperbolic stretch: the angle resumes near n*pi
        base = track.n * math.pi
        return PairTrack(elliptic=True, phi=base + wrap_pm(pair.theta_signed - base))
    if kind is PairKind.POSITIVE_HYPERBOLIC:
        if track.elliptic:
            # entered through s = +1, so phi is near an even multiple of pi
            return PairTrack(elliptic=False, n=2 * round(track.phi / _TWO_PI))
        if track.n % 2 != 0:
            raise AmbiguousRotationError(
                "hyperbolic pair changed multiplier sign without an elliptic window")
        return track
    if kind is PairKind.NEGATIVE_HYPERBOLIC:
        if track.elliptic:
            # entered through s = -1, so phi is near an odd multiple of pi
            k = round((track.phi / math.pi - 1.0) / 2.0)
            return PairTrack(elliptic=False, n=2 * k + 1)
        if track.n % 2 == 0:
            raise AmbiguousRotationError(
                "hyperbolic pair changed multiplier sign without an elliptic window")
        return track
    raise ValueError("complex pairs are handled by the tracker, not per-pair")


def _match_cost(track: PairTrack, pair: PairReport) -> float:
    """Continuity penalty for assigning a pair observation to a track."""
    if pair.kind is PairKind.ELLIPTIC:
        if not track.elliptic:
            return abs(wrap_pm((pair.theta_signed or 0.0) - track.n * math.pi))
        return abs(wrap_pm((pair.theta_signed or 0.0) - track.phi))
    # hyperbolic observation
    want_odd = pair.kind is PairKind.NEGATIVE_HYPERBOLIC
    if track.elliptic:
        near = track.phi / math.pi
        k = round((near - 1.0) / 2.0) * 2 + 1 if want_odd else 2 * round(near / 2.0)
        return abs(near - k) * math.pi
    if (track.n % 2 != 0) != want_odd:
        return 10.0
    return 0.0


@dataclass
class IndexSample:
    """Indices of one family member as reported by a tracker."""

    mu: int
    tracks: tuple[PairTrack, PairTrack]
    complex_frozen: bool
    mu_planar: int | None = None
    mu_spatial: int | None = None


class IndexTracker:
    """Transports Conley-Zehnder data along one orbit family.

    For planar families the two pairs are identified with the planar and
    vertical blocks of the monodromy and tracked by label; spatial families
    have no such labels, so observations are matched to tracks by rotation
    continuity.  While the multipliers form a complex quadruple both tracks
    are frozen and the index is the sum at entry.
    """

    def __init__(self, tracks: tuple[PairTrack, PairTrack], planar: bool):
        # planar: tracks = (vertical pair, planar pair)
        self.tracks = tracks
        self.planar = planar
        self.frozen = False
        self.frozen_total = 0

    @classmethod
    def seed(cls, rep: MonodromyReport, pair_indices: tuple[int, int]) -> "IndexTracker":
        """Seed from a stability report and per-pair index contributions.

        For planar orbits ``pair_indices`` is (vertical, planar); for spatial
        orbits the order matches ``rep.pairs``.
        """
        if rep.planar:
            if rep.pair_vertical is None or rep.pair_planar is None:
                raise DegenerateIndexError("planar orbit with complex quadruple")
            tracks = (seed_track(rep.pair_vertical, pair_indices[0]),
                      seed_track(rep.pair_planar, pair_indices[1]))
            return cls(tracks, planar=True)
        tracks = (seed_track(rep.pairs[0], pair_indices[0]),
                  seed_track(rep.pairs[1], pair_indices[1]))
        return cls(tracks, planar=False)

    def _observations(self, rep: MonodromyReport) -> tuple[PairReport, PairReport]:
        if self.planar:
            if rep.pair_vertical is None or rep.pair_planar is None:
                raise AmbiguousRotationError(
                    "planar family member lost its block structure")
            return rep.pair_vertical, rep.pair_planar
        a, b = rep.pairs
        straight = _match_cost(self.tracks[0], a) + _match_cost(self.tracks[1], b)
        crossed = _match_cost(self.tracks[0], b) + _match_cost(self.tracks[1], a)
        return (a, b) if straight <= crossed else (b, a)

    def update(self, rep: MonodromyReport) -> IndexSample:
        """Advance to the next family member and return its indices."""
        if rep.pairs[0].kind is PairKind.COMPLEX:
            if not self.frozen:
                # a quadruple forms either by two elliptic pairs colliding on
                # the unit circle or by two same-sign hyperbolic pairs
                # colliding on the real axis; a mixed state means a
                # transition was stepped over together with the collision
                e0, e1 = self.tracks[0].elliptic, self.tracks[1].elliptic
                if e0 != e1:
                    raise AmbiguousRotationError(
                        "complex quadruple formed from a mixed "
                        "elliptic-hyperbolic state; refine the step")
                if not e0 and self.tracks[0].n % 2 != self.tracks[1].n % 2:
                    raise AmbiguousRotationError(
                        "complex quadruple formed from opposite-sign "
                        "hyperbolic pairs; refine the step")
                self.frozen_total = self.tracks[0].index() + self.tracks[1].index()
                self.frozen = True
            return self._sample()
        if self.frozen:
            self.tracks = self._land(rep)
            self.frozen = False
            return self._sample()
        obs = self._observations(rep)
        self.tracks = (_advance(self.tracks[0], obs[0]),
                       _advance(self.tracks[1], obs[1]))
        return self._sample()

    def _land(self, rep: MonodromyReport) -> tuple[PairTrack, PairTrack]:
        """Resume tracks when a complex quadruple returns to the circle or axis.

        The total index cannot change while the multipliers stay off the unit
        circle, so the landed tracks are chosen as the continuity-nearest pair
        of states whose contributions still sum to the frozen total.
        """
        obs = self._observations(rep)
        if obs[0].kind is not obs[1].kind:
            raise AmbiguousRotationError(
                "complex quadruple landed on mixed pair kinds; refine the step")
        kind = obs[0].kind
        anchors = [tr.phi if tr.elliptic else tr.n * math.pi for tr in self.tracks]
        best: tuple[float, tuple[PairTrack, PairTrack]] | None = None
        if kind is PairKind.ELLIPTIC:
            if obs[0].theta_signed is None or obs[1].theta_signed is None:
                raise AmbiguousRotationError(
                    "landing pair with indeterminate Krein signature")
            base = [anchors[i] + wrap_pm(obs[i].theta_signed - anchors[i])
                    for i in range(2)]
            for j0 in (-1, 0, 1):
                for j1 in (-1, 0, 1):
                    cand = (PairTrack(elliptic=True, phi=base[0] + _TWO_PI * j0),
                            PairTrack(elliptic=True, phi=base[1] + _TWO_PI * j1))
                    try:
                        if cand[0].index() + cand[1].index() != self.frozen_total:
                            continue
                    except DegenerateIndexError:
                        continue
                    cost = (abs(cand[0].phi - anchors[0])
                            + abs(cand[1].phi - anchors[1]))
                    if best is None or cost < best[0]:
                        best = (cost, cand)
        else:
            odd = kind is PairKind.NEGATIVE_HYPERBOLIC
            near = (2 * round((anchors[0] / math.pi - 1.0) / 2.0) + 1 if odd
                    else 2 * round(anchors[0] / _TWO_PI))
            for d in range(-3, 4):
                n0 = near + 2 * d
                n1 = self.frozen_total - n0
                if (n1 % 2 != 0) != odd:
                    continue
                cand = (PairTrack(elliptic=False, n=n0),
                        PairTrack(elliptic=False, n=n1))
                cost = (abs(anchors[0] - n0 * math.pi)
                        + abs(anchors[1] - n1 * math.pi))
                if best is None or cost < best[0]:
                    best = (cost, cand)
        # inside the window each hidden angle may travel as far as the
        # nearest multiple of pi, so allow up to a half turn per pair
        if best is None or best[0] > _TWO_PI:
            raise AmbiguousRotationError(
                "no landing consistent with the frozen index; refine the step")
        return best[1]

    def current(self) -> IndexSample:
        """Indices at the current member, without advancing."""
        return self._sample()

    def _sample(self) -> IndexSample:
        mu0 = self.tracks[0].index()
        mu1 = self.tracks[1].index()
        sample = IndexSample(mu=mu0 + mu1, tracks=self.tracks,
                             complex_frozen=self.frozen)
        if self.planar:
            sample.mu_spatial = mu0
            sample.mu_planar = mu1
        return sample

    def cover_index(self, q: int) -> int:
        """Index of the q-th cover at the current member."""
        return self.tracks[0].index(q) + self.tracks[1].index(q)

    def kinds(self) -> tuple[PairKind, PairKind]:
        out = []
        for tr in self.tracks:
            if self.frozen:
                out.append(PairKind.COMPLEX)
            elif tr.elliptic:
                out.append(PairKind.ELLIPTIC)
            else:
                out.append(PairKind.POSITIVE_HYPERBOLIC if tr.n % 2 == 0
                           else PairKind.NEGATIVE_HYPERBOLIC)
        return out[0], out[1]


def nearest_track(tracks: tuple[PairTrack, PairTrack], pair: PairReport) -> int:
    """Index of the track that best continues an observed pair."""
    return 0 if _match_cost(tracks[0], pair) <= _match_cost(tracks[1], pair) else 1


def cover_track(track: PairTrack, q: int) -> PairTrack:
    """Track of the q-th cover: rotation angles and frozen integers scale by q.

    A negative hyperbolic pair covered an even number of times becomes
    positive hyperbolic; the parity of q*n encodes that automatically.
    """
    if track.elliptic:
        return PairTrack(elliptic=True, phi=q * track.phi)
    return PairTrack(elliptic=False, n=q * track.n)


def _fresh_track(pair: PairReport, anchor: float) -> PairTrack:
    """Track of a pair that split off the unit circle at cover rotation ``anchor``."""
    if pair.kind is PairKind.ELLIPTIC:
        if pair.theta_signed is None:
            raise DegenerateIndexError(
                "newborn elliptic pair with indeterminate Krein signature")
        return PairTrack(elliptic=True,
                         phi=anchor + wrap_pm(pair.theta_signed - anchor))
    if pair.kind is PairKind.POSITIVE_HYPERBOLIC:
        return PairTrack(elliptic=False, n=round(anchor / math.pi))
    raise AmbiguousRotationError(
        "newborn pair did not emerge near +1; reduce the branch offset")


def seed_branch(parent_tracks: tuple[PairTrack, PairTrack], resonant: int,
                q: int, rep: MonodromyReport) -> IndexTracker:
    """Seed a tracker for a family born at a q-th cover resonance of a parent.

    ``parent_tracks`` is the parent tracker state at the branch point and
    ``resonant`` names the pair that meets the resonance there.  The other
    pair carries over to the new family as its q-th cover.  The resonant
    pair is replaced by a fresh track anchored at the cover rotation
    2*pi*round(q*x / 2*pi) (x is the parent winding at the branch point,
    n*pi on a hyperbolic stretch) and unwrapped toward the first corrected
    member of the new family, whose report ``rep`` decides on which side of
    the unit circle the fresh pair lands.
    """
    covered = cover_track(parent_tracks[1 - resonant], q)
    res = parent_tracks[resonant]
    x = res.phi if res.elliptic else res.n * math.pi
    anchor = _TWO_PI * round(q * x / _TWO_PI)
    if rep.planar:
        if rep.pair_vertical is None or rep.pair_planar is None:
            raise DegenerateIndexError("planar branch member with complex quadruple")
        tracks = (_advance(covered, rep.pair_vertical),
                  _fresh_track(rep.pair_planar, anchor))
        return IndexTracker(tracks, planar=True)
    probe = PairTrack(elliptic=True, phi=anchor)
    a, b = rep.pairs
    straight = _match_cost(covered, a) + _match_cost(probe, b)
    crossed = _match_cost(covered, b) + _match_cost(probe, a)
    cov_obs, fresh_obs = (a, b) if straight <= crossed else (b, a)
    return IndexTracker((_advance(covered, cov_obs),
                         _fresh_track(fresh_obs, anchor)), planar=False)


def is_good_cover(tracks: tuple[PairTrack, PairTrack], q: int,
                  frozen: bool = False) -> bool:
    """Whether the q-th cover contributes to the Euler characteristic.

    A cover is bad exactly when q is even and precisely one of the two pairs
    is negative hyperbolic; two flips cancel and complex quadruples carry
    none.
    """
    if q % 2 != 0 or frozen:
        return True
    neg = sum(1 for tr in tracks if not tr.elliptic and tr.n % 2 != 0)
    return neg != 1


def euler_characteristic(entries: list[tuple[int, int, bool]]) -> int:
    """Sum of mult * (-1)**mu over the good orbits.

    ``entries`` holds (multiplicity, index, good) triples; bad orbits are
    skipped.
    """
    total = 0
    for mult, mu, good in entries:
        if good:
            total += mult * (-1) ** mu
    return total
