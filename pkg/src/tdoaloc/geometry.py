"""Source-space geometry for delay-based localization.

Everything here is closed-form: per-pair delay bounds, classification of
the single-pair locus, the quadratic system that maps a relative-delay
vector to a source position, the feasibility discriminant, the redundant
consistency residual, and the localization mapping itself.

Conventions
-----------
Microphone 0 is the reference. A delay vector ``t`` has ``M - 1`` entries,
``t[j]`` being the arrival-time difference between microphone ``j + 1``
and microphone 0 in seconds (positive means the wave reaches the
reference first). All positions are meters, speed of sound meters/second.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr

from .errors import (
    DisambiguationError,
    EqualityViolationError,
    GeometryError,
    InfeasibleDelayError,
    InvalidPairError,
)

DEFAULT_SPEED_OF_SOUND = 343.0

#: delay-vector agreement below which two candidates count as the same source
EPS_LOC = 1e-9
#: default ceiling on the squared consistency-residual norm (feasibility test)
EPS_EQ = 1e-12
#: condition-number gate for the invertible block of the system matrix
COND_CEILING = 1e6


class MicArray:
    """Immutable microphone array with cached localization matrices.

    Parameters
    ----------
    positions : array_like, shape (M, N)
        Microphone positions in meters, M >= N + 1, not all in one
        hyperplane.
    speed_of_sound : float
        Propagation speed in m/s.
    cond_ceiling : float
        Maximum accepted condition number for the invertible block.

    Notes
    -----
    The delay-to-position system is assembled as

        ``D @ S + P * ||S - M0|| + Q = 0``

    where row ``j`` of ``D`` is ``2 * (M_{j+1} - M_0)``, ``P = 2 nu t``
    and ``Q = nu^2 t^2 + ||M0||^2 - ||M_{j+1}||^2``. The factor two on
    the rows keeps those coefficient definitions exact. ``D`` is split
    into an invertible N x N block (rows chosen by pivoted QR for
    conditioning) and the remaining rows, which supply the redundancy
    constraints when M > N + 1.
    """

    def __init__(self, positions, speed_of_sound=DEFAULT_SPEED_OF_SOUND,
                 cond_ceiling=COND_CEILING):
        pos = np.asarray(positions, dtype=float)
        if pos.ndim != 2:
            raise GeometryError("positions must be a (M, N) array")
        m, n = pos.shape
        if m < n + 1:
            raise GeometryError(f"need at least N+1={n + 1} microphones, got {m}")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("positions must be finite")
        if speed_of_sound <= 0:
            raise GeometryError("speed of sound must be positive")

        dists = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
        off = dists[~np.eye(m, dtype=bool)]
        if np.any(off <= 0):
            raise GeometryError("coincident microphones")

        self.positions = pos
        self.positions.setflags(write=False)
        self.speed_of_sound = float(speed_of_sound)
        self.pair_bounds = dists / self.speed_of_sound
        self.pair_bounds.setflags(write=False)
        self.centroid = pos.mean(axis=0)

        self.system_matrix = 2.0 * (pos[1:] - pos[0])
        # pivoted QR on the transpose ranks rows for a well-conditioned block
        _, _, piv = qr(self.system_matrix.T, pivoting=True)
        self._l_rows = np.sort(piv[:n])
        self._e_rows = np.sort(piv[n:])
        block = self.system_matrix[self._l_rows]
        cond = np.linalg.cond(block)
        if not np.isfinite(cond) or cond > cond_ceiling:
            raise GeometryError(
                f"microphones are too close to a hyperplane (cond={cond:.3g})")
        self.inv_ml = np.linalg.inv(block)
        self.matrix_me = self.system_matrix[self._e_rows]
        # constant part of Q: ||M0||^2 - ||Mm||^2
        self._q_const = pos[0] @ pos[0] - np.einsum("ij,ij->i", pos[1:], pos[1:])

    @property
    def n_mics(self):
        return self.positions.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]

    @property
    def reference_bounds(self):
        """Per-axis delay bounds |t[j]| <= bound, i.e. t* of pairs (0, j+1)."""
        return self.pair_bounds[0, 1:]

    @property
    def max_pairwise_lag(self):
        """Largest pairwise lag reachable anywhere in the enclosing delay box.

        For any point of the box ``|t[j]| <= t*_{0,j+1}`` the implied lag of
        pair (i, j) is at most ``t*_{0,i} + t*_{0,j}``, which can exceed the
        pair's own bound. Correlation tables meant to support search over the
        whole box must cover this value.
        """
        b = np.concatenate([[0.0], self.reference_bounds])
        return float(max(b[i] + b[j] for i in range(len(b))
                         for j in range(i + 1, len(b))))

    @classmethod
    def from_json(cls, path):
        """Load an array from ``{"speed_of_sound": nu, "positions": [[...]]}``."""
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls(doc["positions"], doc.get("speed_of_sound",
                                             DEFAULT_SPEED_OF_SOUND))

    def to_json_dict(self):
        return {"speed_of_sound": self.speed_of_sound,
                "positions": self.positions.tolist()}


class LocusKind(enum.Enum):
    """Class of the single-pair locus {S : t_pair(S) = t_hat}."""

    EMPTY_SET = "empty_set"
    HALF_LINE_MAX = "half_line_max"
    HALF_LINE_MIN = "half_line_min"
    HYPERPLANE = "hyperplane"
    HYPERBOLOID_SHEET = "hyperboloid_sheet"


@dataclass(frozen=True)
class Locus:
    """Locus classification plus the geometric parameters of the pair.

    ``midpoint`` is the point halfway between the two microphones and
    ``baseline`` the vector from the second to the first; together they
    parameterize the degenerate (half-line / hyperplane) cases.
    """

    kind: LocusKind
    midpoint: np.ndarray
    baseline: np.ndarray


@dataclass(frozen=True)
class LinearSystemParts:
    """Coefficients of the delay-to-position system at a given delay vector.

    ``a`` and ``b`` parameterize the candidate line ``S = a * w + b`` where
    ``w`` stands for the source-to-reference distance; ``p_e`` / ``q_e`` are
    the coefficients of the redundancy rows (empty when M = N + 1).
    """

    p: np.ndarray
    q: np.ndarray
    a: np.ndarray
    b: np.ndarray
    p_e: np.ndarray
    q_e: np.ndarray


def delays_from_source(array, source):
    """Relative arrival delays a source at ``source`` produces on ``array``.

    Total function: any finite point maps into the physical delay box.
    """
    source = np.asarray(source, dtype=float)
    d = np.linalg.norm(array.positions - source, axis=1)
    return (d[1:] - d[0]) / array.speed_of_sound


def full_delay_matrix(t):
    """Expand the M-1 reference delays to the full antisymmetric M x M table."""
    u = np.concatenate([[0.0], np.asarray(t, dtype=float)])
    return u[None, :] - u[:, None]


def in_delay_box(array, t, slack=0.0):
    """Whether every implied pairwise delay respects its physical bound."""
    tm = np.abs(full_delay_matrix(t))
    return bool(np.all(tm <= array.pair_bounds + slack))


def classify_locus(array, m, n, t_hat, tol=1e-12):
    """Classify the set of source points whose pair (m, n) delay equals t_hat.

    Boundary cases (``t_hat`` equal to 0 or to the pair bound) are decided
    within ``tol`` seconds.
    """
    if m == n:
        raise InvalidPairError(f"pair ({m}, {n}) needs two distinct microphones")
    pm, pn = array.positions[m], array.positions[n]
    bound = array.pair_bounds[m, n]
    mid = 0.5 * (pm + pn)
    base = pm - pn
    if abs(t_hat) > bound + tol:
        kind = LocusKind.EMPTY_SET
    elif abs(t_hat - bound) <= tol:
        kind = LocusKind.HALF_LINE_MAX
    elif abs(t_hat + bound) <= tol:
        kind = LocusKind.HALF_LINE_MIN
    elif abs(t_hat) <= tol:
        kind = LocusKind.HYPERPLANE
    else:
        kind = LocusKind.HYPERBOLOID_SHEET
    return Locus(kind, mid, base)


def build_linear_system(array, t):
    """Assemble the quadratic-system coefficients for a delay vector."""
    t = np.asarray(t, dtype=float)
    nu = array.speed_of_sound
    p = 2.0 * nu * t
    q = nu * nu * t * t + array._q_const
    a = -array.inv_ml @ p[array._l_rows]
    b = -array.inv_ml @ q[array._l_rows]
    return LinearSystemParts(p=p, q=q, a=a, b=b,
                             p_e=p[array._e_rows], q_e=q[array._e_rows])


def discriminant(array, t):
    """Discriminant of the source-distance quadratic; >= 0 is necessary for
    the delays to correspond to a real source position."""
    parts = build_linear_system(array, t)
    u = parts.b - array.positions[0]
    beta = parts.a @ u
    return beta * beta - (u @ u) * (parts.a @ parts.a - 1.0)


def _distance_roots(alpha, beta, gamma):
    """Real nonnegative roots of ``alpha w^2 + 2 beta w + gamma = 0``.

    Stable form: the larger-magnitude root comes from the direct formula,
    the other from the root product. Raises InfeasibleDelayError when the
    roots are complex.
    """
    if abs(alpha) < 1e-14:
        if beta == 0.0:
            raise DisambiguationError("degenerate linear system (alpha=beta=0)")
        roots = [-gamma / (2.0 * beta)]
    else:
        disc = beta * beta - alpha * gamma
        if disc < 0.0:
            if disc > -1e-12 * max(beta * beta, abs(alpha * gamma), 1e-300):
                disc = 0.0  # roundoff at the feasibility boundary
            else:
                raise InfeasibleDelayError(
                    f"negative discriminant ({disc:.3e})")
        sq = np.sqrt(disc)
        big = -(beta + (np.sign(beta) if beta != 0.0 else 1.0) * sq)
        if big == 0.0:
            roots = [0.0, -2.0 * beta / alpha]
        else:
            roots = [big / alpha, gamma / big]
    return sorted(w for w in roots if w >= -1e-12)


def _candidates(array, t, parts=None):
    """Candidate positions on the line S = a w + b with w >= 0."""
    if parts is None:
        parts = build_linear_system(array, t)
    u = parts.b - array.positions[0]
    alpha = parts.a @ parts.a - 1.0
    beta = parts.a @ u
    gamma = u @ u
    ws = _distance_roots(alpha, beta, gamma)
    return [parts.a * max(w, 0.0) + parts.b for w in ws], parts


def _residual_e(array, parts, point):
    """Redundancy-row residual of the full system at a candidate point."""
    if array.n_mics == array.dim + 1:
        return np.zeros(0)
    w = np.linalg.norm(point - array.positions[0])
    return array.matrix_me @ point + parts.p_e * w + parts.q_e


def localize(array, t, eps_loc=EPS_LOC, eps_eq=None):
    """Closed-form source position for a feasible delay vector.

    Both roots of the distance quadratic are formed; candidates that do
    not reproduce ``t`` (they reproduce ``-t`` instead) are rejected. Two
    genuine candidates can remain when the squared gain of the candidate
    line exceeds one, since both roots then share a sign. In that case
    the redundancy residual picks the consistent one for arrays with
    M > N + 1, and for minimal arrays the candidate farther from the
    reference microphone is returned (the nearer twin sits at array
    scale, inside the rig itself, for compact arrays).

    Raises
    ------
    InfeasibleDelayError
        Negative discriminant: no real position exists.
    EqualityViolationError
        ``eps_eq`` given and the redundancy residual of the result exceeds it.
    DisambiguationError
        No nonnegative root reproduces ``t`` within ``eps_loc``.
    """
    t = np.asarray(t, dtype=float)
    cands, parts = _candidates(array, t)
    matched = []
    for point in cands:
        mism = np.linalg.norm(delays_from_source(array, point) - t)
        if mism <= eps_loc:
            matched.append(point)
    if not matched:
        raise DisambiguationError(
            "no candidate reproduces the input delays (numerically degenerate)")
    if len(matched) == 1:
        chosen = matched[0]
    elif array.n_mics > array.dim + 1:
        chosen = min(matched,
                     key=lambda s: np.linalg.norm(_residual_e(array, parts, s)))
    else:
        chosen = max(matched,
                     key=lambda s: np.linalg.norm(s - array.positions[0]))
    if eps_eq is not None:
        res = _residual_e(array, parts, chosen)
        if res.size and res @ res > eps_eq:
            raise EqualityViolationError(
                f"consistency residual too large (|e|^2 = {res @ res:.3e})")
    return chosen


def equality_residual(array, t):
    """Residual of the M - N - 1 redundancy constraints at the localized point.

    Empty for a minimal (M = N + 1) array. Raises InfeasibleDelayError when
    the discriminant is negative, since the localized point is undefined.
    """
    t = np.asarray(t, dtype=float)
    if array.n_mics == array.dim + 1:
        # discriminant check still applies even though the residual is empty
        if discriminant(array, t) < 0:
            raise InfeasibleDelayError("negative discriminant")
        return np.zeros(0)
    point = localize(array, t)
    parts = build_linear_system(array, t)
    return _residual_e(array, parts, point)


def is_feasible(array, t, eps_eq=EPS_EQ):
    """Whether ``t`` lies in the delay box and corresponds to a real source.

    Nonnegativity of the discriminant alone is only necessary: both roots
    of the distance quadratic can be negative, in which case no position
    reproduces ``t``. Feasible here means the closed-form localization
    actually succeeds (and, for redundant arrays, its consistency
    residual stays within ``eps_eq``). Never raises: infeasibility of any
    kind yields ``False``.
    """
    t = np.asarray(t, dtype=float)
    if not in_delay_box(array, t):
        return False
    if discriminant(array, t) < 0:
        return False
    try:
        point = localize(array, t)
    except (InfeasibleDelayError, DisambiguationError):
        return False
    if array.n_mics == array.dim + 1:
        return True
    parts = build_linear_system(array, t)
    res = _residual_e(array, parts, point)
    return bool(res @ res <= eps_eq)
