"""Lipschitz branch-and-bound minimization of the coherence criterion.

The search domain is the axis-aligned cube enclosing the physical delay
box. Cubes are recursively split into 2^(M-1) children; each child is
scored at its center and bounded via a Lipschitz constant, with the
bound radius equal to the center-to-corner distance. Children whose
lower bound exceeds the smallest known upper bound are set aside. When
every surviving cube is smaller than the resolution target, the
feasible cube center with the least criterion value is localized in
closed form. If no surviving center is feasible, the search restarts
once from the set-aside list.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import geometry
from .correlation import criterion_batch
from .errors import NoFeasibleRegionError, SolverError
from .results import LocalizationResult


@dataclass
class Region:
    """A hypercube of delay space: center, side, and cached bounds."""

    center: np.ndarray
    side: float
    lower_bound: float = np.nan
    upper_bound: float = np.nan
    j_at_center: float = np.nan


@dataclass
class BnbConfig:
    """Solver knobs.

    ``lipschitz`` of None estimates the constant from ``lipschitz_pairs``
    random point pairs. ``min_side`` of None resolves to half a sample
    period. ``radius_factor`` of None uses the exact center-to-corner
    distance ``side/2 * sqrt(M-1)``; setting it to 1.0 reproduces the
    classical full-side bound radius.
    """

    lipschitz: float | None = None
    lipschitz_pairs: int = 1000
    min_side: float | None = None
    max_iterations: int = 60
    eps_eq: float = geometry.EPS_EQ
    radius_factor: float | None = None
    lipschitz_seed: int = 0


@dataclass
class BnbOutcome:
    """Result bundle: best localization plus search statistics."""

    best: LocalizationResult
    kept_regions: int = 0
    discarded_regions: int = 0
    reran_on_discarded: bool = False
    wall_time: float = 0.0
    iterations: int = 0
    tau: float = np.nan


def sample_delay_box(array, n_points, rng):
    """Uniform samples from the physical delay box (rejection from the
    enclosing cube)."""
    bounds = array.reference_bounds
    out = []
    while len(out) < n_points:
        cand = rng.uniform(-1.0, 1.0, size=(max(n_points, 64), len(bounds)))
        cand = cand * bounds
        keep = [t for t in cand if geometry.in_delay_box(array, t)]
        out.extend(keep)
    return np.asarray(out[:n_points])


def estimate_lipschitz(corr_set, array, pairs=1000, rng_seed=0,
                       safety=1.5, floor=1e-6):
    """Estimated Lipschitz constant of the criterion over the delay box.

    Maximum secant slope over ``pairs`` random point pairs, inflated by
    ``safety`` and floored at ``floor``. Half the pairs are independent
    draws (long-range secants), half are short log-spaced offsets of a
    draw, which probe the local gradient scale that long pairs average
    away. Deterministic for a given seed.
    """
    if pairs < 2:
        raise SolverError("need at least two sample pairs")
    rng = np.random.default_rng(rng_seed)
    n_long = pairs // 2
    n_short = pairs - n_long
    pts = sample_delay_box(array, 2 * n_long + n_short, rng)
    a = np.concatenate([pts[:n_long], pts[2 * n_long:]])
    span = 2.0 * float(np.max(array.reference_bounds))
    direction = rng.normal(size=(n_short, a.shape[1]))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    scale = span * 10.0 ** rng.uniform(-4.0, -0.5, size=(n_short, 1))
    short = pts[2 * n_long:] + direction * scale
    lo, hi = -array.reference_bounds, array.reference_bounds
    short = np.clip(short, lo, hi)
    b = np.concatenate([pts[n_long:2 * n_long], short])
    dist = np.linalg.norm(a - b, axis=1)
    ok = dist > 0
    slopes = np.abs(criterion_batch(corr_set, a[ok])
                    - criterion_batch(corr_set, b[ok])) / dist[ok]
    return max(float(np.max(slopes)) * safety, floor)


def branch(regions):
    """Split every region into its 2^(M-1) half-side children."""
    if not regions:
        return []
    dim = len(regions[0].center)
    offsets = np.array(list(itertools.product((-1.0, 1.0), repeat=dim)))
    children = []
    for reg in regions:
        quarter = reg.side / 4.0
        for off in offsets:
            children.append(Region(center=reg.center + off * quarter,
                                   side=reg.side / 2.0))
    return children


def bound(regions, lipschitz, corr_set, radius_factor=None):
    """Score and bound every region, then move dominated ones aside.

    Returns ``(kept, discarded, tau)`` with ``tau`` the smallest upper
    bound. The bound radius is ``radius_factor * side * L``; the default
    factor ``sqrt(M-1)/2`` is the exact center-to-corner distance.
    """
    if lipschitz <= 0:
        raise SolverError("Lipschitz constant must be positive")
    if not regions:
        return [], [], np.inf
    dim = len(regions[0].center)
    factor = radius_factor if radius_factor is not None else 0.5 * np.sqrt(dim)
    centers = np.array([r.center for r in regions])
    sides = np.array([r.side for r in regions])
    jvals = criterion_batch(corr_set, centers)
    radii = factor * sides * lipschitz
    lowers = jvals - radii
    uppers = jvals + radii
    tau = float(np.min(uppers))
    kept, discarded = [], []
    for reg, j, lo, up in zip(regions, jvals, lowers, uppers):
        reg.j_at_center = float(j)
        reg.lower_bound = float(lo)
        reg.upper_bound = float(up)
        (discarded if lo > tau else kept).append(reg)
    return kept, discarded, tau


def _cull_outside(array, regions):
    """Drop regions that cannot intersect the physical delay box.

    A cube is provably outside when some pairwise delay constraint is
    violated across the whole cube: the implied pairwise lag varies by at
    most one full side (half a side per endpoint) around its center value.
    """
    bounds = array.pair_bounds
    ref = array.reference_bounds
    kept = []
    for reg in regions:
        c = reg.center
        s = reg.side
        if np.any(np.abs(c) - s / 2.0 > ref):
            continue
        u = np.concatenate([[0.0], c])
        m_ch = len(u)
        ok = True
        for m in range(1, m_ch):
            for n in range(m + 1, m_ch):
                if abs(u[n] - u[m]) - s > bounds[m, n]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            kept.append(reg)
    return kept


def _refine(array, corr_set, cfg, regions, min_side, lipschitz, progress,
            iteration_offset=0):
    """Run branch/bound rounds until every region is below min_side."""
    discarded_all = []
    tau = np.inf
    it = iteration_offset
    while regions and max(r.side for r in regions) > min_side:
        if it - iteration_offset >= cfg.max_iterations:
            raise SolverError(
                f"exceeded {cfg.max_iterations} refinement iterations")
        it += 1
        regions = _cull_outside(array, branch(regions))
        regions, newly_discarded, tau_now = bound(
            regions, lipschitz, corr_set, cfg.radius_factor)
        tau = min(tau, tau_now)
        discarded_all.extend(newly_discarded)
        if progress is not None:
            progress(it, len(regions), len(discarded_all), tau)
    return regions, discarded_all, tau, it


def _select_feasible(array, corr_set, cfg, regions):
    """Least-criterion feasible region center, ties broken lexicographically."""
    if not regions:
        return None
    order = sorted(regions, key=lambda r: (r.j_at_center, tuple(r.center)))
    for reg in order:
        if geometry.is_feasible(array, reg.center, cfg.eps_eq):
            return reg
    return None


def solve_bnb(corr_set, array, cfg=None, progress=None):
    """Globally minimize the criterion over the delay box and localize.

    Raises NoFeasibleRegionError when neither the surviving regions nor
    the one-shot restart on the set-aside list contain a feasible center.
    """
    cfg = cfg or BnbConfig()
    t_start = time.perf_counter()
    min_side = cfg.min_side
    if min_side is None:
        min_side = 0.5 / corr_set.sample_rate
    lipschitz_c = cfg.lipschitz
    if lipschitz_c is None:
        lipschitz_c = estimate_lipschitz(corr_set, array, cfg.lipschitz_pairs,
                                  cfg.lipschitz_seed)

    side0 = 2.0 * float(np.max(array.reference_bounds))
    initial = [Region(center=np.zeros(array.n_mics - 1), side=side0)]
    kept, discarded, tau, iters = _refine(
        array, corr_set, cfg, initial, min_side, lipschitz_c, progress)

    best_reg = _select_feasible(array, corr_set, cfg, kept)
    reran = False
    if best_reg is None and discarded:
        reran = True
        kept2, discarded2, tau2, iters = _refine(
            array, corr_set, cfg, discarded, min_side, lipschitz_c, progress,
            iteration_offset=iters)
        best_reg = _select_feasible(array, corr_set, cfg, kept2)
        kept, discarded, tau = kept2, discarded2, min(tau, tau2)
    if best_reg is None:
        raise NoFeasibleRegionError(
            "no feasible region center, even after the restart")

    position = geometry.localize(array, best_reg.center)
    elapsed = time.perf_counter() - t_start
    result = LocalizationResult(
        delays=best_reg.center.copy(), position=position,
        criterion=best_reg.j_at_center, feasible=True, method="bnb",
        wall_time=elapsed)
    return BnbOutcome(best=result, kept_regions=len(kept),
                      discarded_regions=len(discarded),
                      reran_on_discarded=reran, wall_time=elapsed,
                      iterations=iters, tau=tau)
