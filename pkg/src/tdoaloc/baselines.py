"""Reference solvers: log-barrier local descent, direct grid minimization,
pairwise peak picking, and regularized multilateration.

Method registry names follow the benchmark vocabulary:

- ``unc``    multi-start damped Newton on the raw criterion (no constraint)
- ``d-lb``   multi-start log-barrier descent from the dense feasible grid
- ``s-lb``   same descent from the sparse correlation-peak grid
- ``dm``     plain argmin of the criterion over the dense feasible grid
- ``pi``     independent per-pair correlation peak picking
- ``n/t/f-mult``  position fit to all pairwise hyperboloids with a radius
  prior of 0.9 / 1.7 / 2.5 m
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import geometry
from .correlation import criterion, criterion_batch, \
    criterion_value_grad_hess
from .errors import AllStartsFailedError, EmptyGridError, InfeasibleDelayError, \
    SolverError
from .results import LocalizationResult


# ---------------------------------------------------------------------------
# derivatives of the feasibility discriminant
# ---------------------------------------------------------------------------

def _discriminant_pieces(array, t):
    t = np.asarray(t, dtype=float)
    nu = array.speed_of_sound
    parts = geometry.build_linear_system(array, t)
    a, b = parts.a, parts.b
    u = b - array.positions[0]
    g = array.inv_ml
    n = array.dim
    sel = array._l_rows
    t_l = t[sel]
    j_a = -2.0 * nu * g                       # d a / d t_l
    j_b = -2.0 * nu * nu * g * t_l[None, :]   # d b / d t_l
    return parts, a, b, u, j_a, j_b, sel, n, nu, g, t_l


def delta_gradient(array, t):
    """Gradient of the feasibility discriminant w.r.t. the M-1 delays."""
    _, a, _, u, j_a, j_b, sel, _, _, _, _ = _discriminant_pieces(array, t)
    f1 = a @ u
    f2 = u @ u
    f3 = a @ a - 1.0
    grad_l = 2.0 * (f1 * (j_a.T @ u + j_b.T @ a)
                    - f3 * (j_b.T @ u) - f2 * (j_a.T @ a))
    grad = np.zeros(len(t))
    grad[sel] = grad_l
    return grad


def delta_hessian(array, t):
    """Hessian of the feasibility discriminant w.r.t. the M-1 delays."""
    _, a, _, u, j_a, j_b, sel, _, nu, g, _ = _discriminant_pieces(array, t)
    f1 = a @ u
    f2 = u @ u
    f3 = a @ a - 1.0
    grad_f1 = j_a.T @ u + j_b.T @ a
    d_diag = -2.0 * nu * nu * np.diag(g.T @ a)
    e_diag = -2.0 * nu * nu * np.diag(g.T @ u)
    jbu = j_b.T @ u
    jaa = j_a.T @ a
    h_l = 2.0 * (np.outer(grad_f1, grad_f1)
                 + f1 * (j_a.T @ j_b + d_diag + j_b.T @ j_a)
                 - (2.0 * np.outer(jbu, jaa)
                    + f3 * (e_diag + j_b.T @ j_b)
                    + 2.0 * np.outer(jaa, jbu)
                    + f2 * (j_a.T @ j_a)))
    hess = np.zeros((len(t), len(t)))
    hess[np.ix_(sel, sel)] = h_l
    return hess


# ---------------------------------------------------------------------------
# initialization grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InitGrid:
    """A named list of delay-vector starting points."""

    kind: str
    points: np.ndarray


def _lattice(array, points_per_axis):
    """Cell-centered lattice over the enclosing delay box, pruned to the
    physical box. 10 points per axis lands near the historical grid sizes
    (about 470 box points, about 390 feasible) for the default array."""
    bounds = array.reference_bounds
    axes = [(-1.0 + (2.0 * np.arange(points_per_axis) + 1.0) / points_per_axis)
            * b for b in bounds]
    pts = np.array(list(itertools.product(*axes)))
    keep = [geometry.in_delay_box(array, p) for p in pts]
    return pts[np.asarray(keep, dtype=bool)]


def _correlation_peaks(corr_set, array, pair_index, k_peaks):
    """Top local maxima of the reference-pair correlation, refined by a
    three-point parabola and clamped to the pair's physical range."""
    bound_s = array.reference_bounds[pair_index - 1]
    fs = corr_set.sample_rate
    k_lim = min(int(np.floor(bound_s * fs)), int(corr_set.max_lag * fs))
    lag_idx = np.arange(-k_lim, k_lim + 1)
    vals = corr_set.rho(0, pair_index, lag_idx / fs)
    inner = np.arange(1, len(vals) - 1)
    is_peak = (vals[inner] >= vals[inner - 1]) & (vals[inner] >= vals[inner + 1])
    peak_pos = inner[is_peak]
    if peak_pos.size == 0:
        peak_pos = np.array([int(np.argmax(vals))])
    order = peak_pos[np.argsort(vals[peak_pos])[::-1][:k_peaks]]
    out = []
    for p in order:
        tau = _parabolic_refine(lag_idx, vals, p) / fs
        out.append(float(np.clip(tau, -bound_s, bound_s)))
    while len(out) < k_peaks:
        out.append(out[-1])
    return out


def _parabolic_refine(lag_idx, vals, p):
    if p <= 0 or p >= len(vals) - 1:
        return float(lag_idx[p])
    y0, y1, y2 = vals[p - 1], vals[p], vals[p + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0:
        return float(lag_idx[p])
    shift = 0.5 * (y0 - y2) / denom
    return float(lag_idx[p]) + float(np.clip(shift, -0.5, 0.5))


def make_grid(kind, corr_set, array, points_per_axis=10, k_peaks=3,
              eps_eq=geometry.EPS_EQ):
    """Build one of the named initialization grids.

    ``dense_feasible`` keeps lattice points passing the full feasibility
    test; ``unconstrained`` keeps the whole in-box lattice; ``sparse`` is
    the Cartesian product of the top-``k_peaks`` reference-pair
    correlation maxima.
    """
    if kind == "sparse":
        per_pair = [_correlation_peaks(corr_set, array, j, k_peaks)
                    for j in range(1, array.n_mics)]
        pts = np.array(list(itertools.product(*per_pair)))
        return InitGrid(kind, pts)
    lattice = _lattice(array, points_per_axis)
    if kind == "unconstrained":
        if lattice.size == 0:
            raise EmptyGridError("lattice pruning removed every point")
        return InitGrid(kind, lattice)
    if kind == "dense_feasible":
        keep = [geometry.is_feasible(array, p, eps_eq) for p in lattice]
        pts = lattice[np.asarray(keep, dtype=bool)]
        if pts.size == 0:
            raise EmptyGridError("no feasible lattice points")
        return InitGrid(kind, pts)
    raise SolverError(f"unknown grid kind: {kind}")


# ---------------------------------------------------------------------------
# log-barrier local descent
# ---------------------------------------------------------------------------

@dataclass
class LbConfig:
    """Damped-Newton log-barrier settings.

    The barrier weight starts at ``mu_initial`` (None: 1e-2 |J(init)| +
    1e-6) and shrinks by ``mu_decay`` for ``outer_rounds`` rounds. A
    round stops early once the gradient is below ``grad_tolerance``
    (criterion units per second) or the accepted step moves every delay
    by less than ``step_tolerance`` seconds.
    """

    mu_initial: float | None = None
    mu_decay: float = 0.2
    outer_rounds: int = 8
    max_newton_steps: int = 12
    grad_tolerance: float = 1e-7
    step_tolerance: float = 1e-9
    constrained: bool = True
    armijo: float = 1e-4
    eps_eq: float = geometry.EPS_EQ


def _newton_direction(hess, grad):
    """Descent direction from a positive-definite-regularized Hessian."""
    dim = len(grad)
    eta = 0.0
    scale = max(float(np.max(np.abs(hess))), 1e-12)
    for _ in range(12):
        try:
            chol = np.linalg.cholesky(hess + eta * np.eye(dim))
            step = np.linalg.solve(chol.T, np.linalg.solve(chol, -grad))
            return step
        except np.linalg.LinAlgError:
            eta = max(2.0 * eta, 1e-8 * scale)
    return -grad / scale


def solve_logbarrier(corr_set, array, init, cfg=None):
    """Descend the (optionally barrier-augmented) criterion from ``init``.

    Returns the lowest-criterion iterate visited, so the result never
    scores worse than the start. In constrained mode every accepted
    iterate keeps a strictly positive discriminant, and the start must
    satisfy that too.
    """
    cfg = cfg or LbConfig()
    t = np.asarray(init, dtype=float).copy()
    if cfg.constrained and geometry.discriminant(array, t) <= 0:
        raise InfeasibleDelayError("constrained descent needs delta(init) > 0")

    j_best = criterion(corr_set, t)
    t_best = t.copy()
    mu = cfg.mu_initial
    if mu is None:
        mu = 1e-2 * abs(j_best) + 1e-6

    def objective(x, mu_now):
        j = criterion(corr_set, x)
        if not cfg.constrained:
            return j, j
        d = geometry.discriminant(array, x)
        if d <= 0:
            return np.inf, j
        return j - mu_now * np.log(d), j

    for _ in range(cfg.outer_rounds):
        phi0 = None
        for _ in range(cfg.max_newton_steps):
            _, grad, hess = criterion_value_grad_hess(corr_set, t)
            if cfg.constrained:
                d = geometry.discriminant(array, t)
                gd = delta_gradient(array, t)
                hd = delta_hessian(array, t)
                grad = grad - mu * gd / d
                hess = hess - mu * hd / d + mu * np.outer(gd, gd) / (d * d)
            if np.linalg.norm(grad) < cfg.grad_tolerance:
                break
            step = _newton_direction(hess, grad)
            if not np.all(np.isfinite(step)):
                raise SolverError("non-finite Newton step")
            if phi0 is None:
                phi0, _ = objective(t, mu)
            slope = grad @ step
            alpha = 1.0
            accepted = False
            for _ in range(14):
                cand = t + alpha * step
                if geometry.in_delay_box(array, cand):
                    phi, j_cand = objective(cand, mu)
                    if phi <= phi0 + cfg.armijo * alpha * slope:
                        t = cand
                        if j_cand < j_best and (not cfg.constrained
                                                or np.isfinite(phi)):
                            j_best, t_best = j_cand, cand.copy()
                        accepted = True
                        break
                alpha *= 0.5
            if not accepted:
                break
            improved = phi0 - phi
            phi0 = phi
            if np.max(np.abs(alpha * step)) < cfg.step_tolerance:
                break
            if improved <= 1e-12 * (1.0 + abs(phi)):
                break
        mu *= cfg.mu_decay
    return t_best


def solve_multistart(corr_set, array, grid, cfg=None, method_name=None):
    """Run the local descent from every grid point and keep the best
    feasible endpoint (the raw grid points themselves compete too)."""
    cfg = cfg or LbConfig()
    t_start = time.perf_counter()
    best = None
    best_j = np.inf
    for point in grid.points:
        candidates = [np.asarray(point, dtype=float)]
        try:
            candidates.append(solve_logbarrier(corr_set, array, point, cfg))
        except (InfeasibleDelayError, SolverError):
            pass
        for cand in candidates:
            if not geometry.is_feasible(array, cand, cfg.eps_eq):
                continue
            j = criterion(corr_set, cand)
            if j < best_j:
                best_j, best = j, cand
    if best is None:
        raise AllStartsFailedError(
            f"no feasible endpoint from {len(grid.points)} starts")
    name = method_name or ("d-lb" if cfg.constrained else "unc")
    position = geometry.localize(array, best)
    return LocalizationResult(delays=best, position=position,
                              criterion=best_j, feasible=True, method=name,
                              wall_time=time.perf_counter() - t_start)


def solve_dm(corr_set, array, grid):
    """Plain minimum of the criterion over a feasible grid, no refinement."""
    t_start = time.perf_counter()
    if grid.points.size == 0:
        raise EmptyGridError("empty grid")
    jvals = criterion_batch(corr_set, grid.points)
    idx = int(np.argmin(jvals))
    best = grid.points[idx]
    position = geometry.localize(array, best)
    return LocalizationResult(delays=best.copy(), position=position,
                              criterion=float(jvals[idx]), feasible=True,
                              method="dm",
                              wall_time=time.perf_counter() - t_start)


# ---------------------------------------------------------------------------
# pairwise-independent estimation and multilateration
# ---------------------------------------------------------------------------

def estimate_pairwise_delays(corr_set, array):
    """Per-pair correlation peak of each reference pair, refined to
    sub-sample accuracy. No cross-pair consistency is enforced; the result
    may be infeasible."""
    return np.array([_correlation_peaks(corr_set, array, j, 1)[0]
                     for j in range(1, array.n_mics)])


@dataclass
class MultConfig:
    """Multilateration settings: radius prior ``radius`` (meters),
    regularization weight ``lam`` (None: scaled from the typical cost at
    the initial directions), and the size of the direction grid."""

    radius: float = 1.7
    lam: float | None = None
    direction_grid_size: int = 200
    max_newton_steps: int = 60
    grad_tolerance: float = 1e-9


def _pair_coefficients(array, t):
    """Expanded pairwise delay coefficients p, q for all pairs m < n."""
    nu = array.speed_of_sound
    full = geometry.full_delay_matrix(t)
    m_ch = array.n_mics
    coeffs = []
    for m in range(m_ch):
        for n in range(m + 1, m_ch):
            t_mn = full[m, n]
            p = 2.0 * nu * t_mn
            q = (nu * nu * t_mn * t_mn
                 + array.positions[n] @ array.positions[n]
                 - array.positions[m] @ array.positions[m])
            coeffs.append((m, n, p, q))
    return coeffs


def mult_cost(point, t, array):
    """Sum of squared two-sheet hyperboloid equations over all pairs.

    Zero exactly when every pairwise hyperboloid passes through ``point``;
    nonnegative everywhere.
    """
    point = np.asarray(point, dtype=float)
    total = 0.0
    for m, n, p, q in _pair_coefficients(array, t):
        total += _h_value(point, array, m, n, p, q) ** 2
    return total


def _h_value(point, array, m, n, p, q):
    # (q - 2 <S, Mn - Mm>)^2 - p^2 |S - Mn|^2, the squared-radical form
    dvec = array.positions[n] - array.positions[m]
    dot = point @ dvec
    rn = point - array.positions[n]
    return (q - 2.0 * dot) ** 2 - p * p * (rn @ rn)


def mult_gradient(point, t, array):
    """Gradient of the multilateration cost in source space."""
    point = np.asarray(point, dtype=float)
    grad = np.zeros_like(point)
    for m, n, p, q in _pair_coefficients(array, t):
        dvec = array.positions[n] - array.positions[m]
        dot = point @ dvec
        h = (q - 2.0 * dot) ** 2 - p * p * ((point - array.positions[n])
                                            @ (point - array.positions[n]))
        gh = (8.0 * dot * dvec - 4.0 * q * dvec
              - 2.0 * p * p * (point - array.positions[n]))
        grad += 2.0 * h * gh
    return grad


def mult_hessian(point, t, array):
    """Hessian of the multilateration cost in source space."""
    point = np.asarray(point, dtype=float)
    dim = len(point)
    hess = np.zeros((dim, dim))
    for m, n, p, q in _pair_coefficients(array, t):
        dvec = array.positions[n] - array.positions[m]
        dot = point @ dvec
        rn = point - array.positions[n]
        h = (q - 2.0 * dot) ** 2 - p * p * (rn @ rn)
        gh = 8.0 * dot * dvec - 4.0 * q * dvec - 2.0 * p * p * rn
        hh = 8.0 * np.outer(dvec, dvec) - 2.0 * p * p * np.eye(dim)
        hess += 2.0 * (np.outer(gh, gh) + h * hh)
    return hess


def _fibonacci_directions(count):
    """Deterministic quasi-uniform directions on the unit sphere."""
    idx = np.arange(count, dtype=float)
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * idx + 1.0) / count
    theta = 2.0 * np.pi * idx / phi
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)


def solve_mult(corr_set, array, cfg=None, delays=None, method_name="t-mult"):
    """Fit a source position to all pairwise hyperboloids with a radius
    prior, starting from a sphere of candidate directions.

    The objective is the pair cost plus ``lam * (|S - c|^2 - r^2)^2`` with
    ``c`` the array centroid, which pulls the fit toward the prior radius
    without fixing the direction.
    """
    cfg = cfg or MultConfig()
    t_start = time.perf_counter()
    if delays is None:
        delays = estimate_pairwise_delays(corr_set, array)
    delays = np.asarray(delays, dtype=float)
    center = array.centroid
    dirs = _fibonacci_directions(cfg.direction_grid_size)
    starts = center[None, :] + cfg.radius * dirs

    lam = cfg.lam
    if lam is None:
        pairs = array.n_mics * (array.n_mics - 1) // 2
        typical = np.median([mult_cost(s, delays, array) for s in starts])
        lam = 0.1 * max(typical / pairs, 1e-12)

    r2 = cfg.radius * cfg.radius

    def objective(s):
        dev = (s - center) @ (s - center) - r2
        return mult_cost(s, delays, array) + lam * dev * dev

    def obj_grad(s):
        dev = (s - center) @ (s - center) - r2
        return mult_gradient(s, delays, array) + 4.0 * lam * dev * (s - center)

    def obj_hess(s):
        u = s - center
        dev = u @ u - r2
        return (mult_hessian(s, delays, array)
                + 4.0 * lam * (dev * np.eye(len(s)) + 2.0 * np.outer(u, u)))

    best, best_val = None, np.inf
    for s0 in starts:
        s = s0.copy()
        val = objective(s)
        for _ in range(cfg.max_newton_steps):
            grad = obj_grad(s)
            if np.linalg.norm(grad) < cfg.grad_tolerance * max(1.0, abs(val)):
                break
            step = _newton_direction(obj_hess(s), grad)
            slope = grad @ step
            alpha, moved = 1.0, False
            for _ in range(30):
                cand = s + alpha * step
                cval = objective(cand)
                if np.isfinite(cval) and cval <= val + 1e-4 * alpha * slope:
                    s, val, moved = cand, cval, True
                    break
                alpha *= 0.5
            if not moved:
                break
        if val < best_val and np.all(np.isfinite(s)):
            best_val, best = val, s
    if best is None:
        raise AllStartsFailedError("every multilateration start diverged")
    return LocalizationResult(delays=delays, position=best,
                              criterion=float(best_val), feasible=True,
                              method=method_name,
                              wall_time=time.perf_counter() - t_start)
