"""Acceptance suite: one test per criterion, each printing a PASS line
with the measured numbers when it holds.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import time

import numpy as np
import pytest

from tdoaloc import geometry
from tdoaloc.baselines import (
    LbConfig,
    delta_gradient,
    delta_hessian,
    make_grid,
    mult_cost,
    mult_gradient,
    mult_hessian,
    solve_dm,
    solve_multistart,
)
from tdoaloc.bnb import BnbConfig, Region, bound, estimate_lipschitz, \
    sample_delay_box, solve_bnb
from tdoaloc.bench import BenchmarkConfig, render_csv, run_benchmark
from tdoaloc.correlation import build_correlations, criterion_batch, \
    criterion, criterion_gradient, criterion_hessian, default_max_lag
from tdoaloc.errors import TdoaError
from tdoaloc.geometry import (
    LocusKind,
    MicArray,
    classify_locus,
    delays_from_source,
    discriminant,
    localize,
)
from tdoaloc.simroom import (
    RoomSpec,
    SourcePlacement,
    default_array,
    direction_grid,
    make_test_signal,
    measure_snr_db,
    render_frame,
    schroeder_t60,
    simulate_rir,
)

FS = 16000.0


def _report(num, text):
    print(f"\n[criterion {num}] PASS: {text}")


# ---------------------------------------------------------------------------
# 1. round-trip localization
# ---------------------------------------------------------------------------

def test_criterion_1_round_trip():
    # a five-microphone general-position array: the redundancy constraint
    # makes the delay-to-position map injective over the whole room
    array = MicArray([[2.0, 2.1, 1.83], [1.8, 2.1, 1.83], [1.9, 2.2, 1.97],
                      [1.9, 2.0, 1.97], [2.05, 1.95, 2.05]])
    rng = np.random.default_rng(101)
    sources = []
    while len(sources) < 1000:
        cand = rng.uniform(0.0, 4.0, size=(1500, 3))
        dist = np.linalg.norm(cand[:, None, :] - array.positions[None, :, :],
                              axis=2)
        sources.extend(cand[np.min(dist, axis=1) > 0.05])
    sources = np.asarray(sources[:1000])
    t0 = time.perf_counter()
    worst = 0.0
    for s in sources:
        est = localize(array, delays_from_source(array, s))
        worst = max(worst, float(np.linalg.norm(est - s)))
    elapsed = time.perf_counter() - t0
    assert worst < 1e-6
    assert elapsed < 1.0
    _report(1, f"1000 round trips, worst error {worst:.2e} m "
               f"in {elapsed:.2f} s")


# ---------------------------------------------------------------------------
# 2. derivative oracles
# ---------------------------------------------------------------------------

def _central_grad(fn, x, h):
    g = np.zeros(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def _central_hess(fn, x, h):
    n = len(x)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n); ei[i] = h
            ej = np.zeros(n); ej[j] = h
            out[i, j] = (fn(x + ei + ej) - fn(x + ei - ej)
                         - fn(x - ei + ej) + fn(x - ei - ej)) / (4 * h * h)
    return out


def test_criterion_2_derivative_oracles():
    t0 = time.perf_counter()
    array = default_array()
    room = RoomSpec(t60=0.0, sample_rate=FS)
    rirs = simulate_rir(room, array, SourcePlacement(30.0, 10.0))
    sig = make_test_signal("speech_like", 1.2, FS, seed=2)
    frame = render_frame(rirs, sig, 5.0, 3, FS)
    corr = build_correlations(frame, default_max_lag(array, FS))
    rng = np.random.default_rng(102)

    worst = {"Jg": 0.0, "Jh": 0.0, "Dg": 0.0, "Dh": 0.0,
             "Hg": 0.0, "Hh": 0.0}

    # criterion J: small steps keep the spline's knot curvature jumps out
    # of the finite-difference oracle
    for _ in range(100):
        t = rng.uniform(-0.7, 0.7, 3) * array.reference_bounds
        fd = _central_grad(lambda x: criterion(corr, x), t, 1e-8)
        g = criterion_gradient(corr, t)
        worst["Jg"] = max(worst["Jg"],
                          np.linalg.norm(g - fd) / np.linalg.norm(fd))
        fdh = _central_hess(lambda x: criterion(corr, x), t, 3e-8)
        h = criterion_hessian(corr, t)
        worst["Jh"] = max(worst["Jh"],
                          np.linalg.norm(h - fdh) / np.linalg.norm(fdh))

    for _ in range(100):
        t = rng.uniform(-0.7, 0.7, 3) * array.reference_bounds
        fd = _central_grad(lambda x: discriminant(array, x), t, 1e-10)
        g = delta_gradient(array, t)
        worst["Dg"] = max(worst["Dg"],
                          np.linalg.norm(g - fd) / np.linalg.norm(fd))
        fdh = _central_hess(lambda x: discriminant(array, x), t, 1e-7)
        h = delta_hessian(array, t)
        worst["Dh"] = max(worst["Dh"],
                          np.linalg.norm(h - fdh) / np.linalg.norm(fdh))

    t_ref = delays_from_source(array, np.array([2.5, 3.0, 1.2]))
    for _ in range(100):
        s = rng.uniform(0.5, 3.5, 3)
        fd = _central_grad(lambda x: mult_cost(x, t_ref, array), s, 1e-6)
        g = mult_gradient(s, t_ref, array)
        worst["Hg"] = max(worst["Hg"],
                          np.linalg.norm(g - fd) / np.linalg.norm(fd))
        fdh = _central_hess(lambda x: mult_cost(x, t_ref, array), s, 1e-5)
        h = mult_hessian(s, t_ref, array)
        worst["Hh"] = max(worst["Hh"],
                          np.linalg.norm(h - fdh) / np.linalg.norm(fdh))

    elapsed = time.perf_counter() - t0
    assert worst["Jg"] < 1e-4 and worst["Dg"] < 1e-4 and worst["Hg"] < 1e-4
    assert worst["Jh"] < 1e-3 and worst["Dh"] < 1e-3 and worst["Hh"] < 1e-3
    assert elapsed < 10.0
    _report(2, "gradients rel.err. J={Jg:.1e} D={Dg:.1e} H={Hg:.1e}; "
               "Hessians J={Jh:.1e} D={Dh:.1e} H={Hh:.1e}; "
               "{s:.1f} s".format(s=elapsed, **worst))


# ---------------------------------------------------------------------------
# 3. global-optimality audit
# ---------------------------------------------------------------------------

def _mixed_condition_frames(array, count, seed0=300):
    """Frames over a mix of SNR/T60 conditions and directions."""
    conditions = [(np.inf, 0.0), (10.0, 0.0), (0.0, 0.0), (0.0, 0.1),
                  (-5.0, 0.2), (0.0, 0.4)]
    grid = direction_grid()
    rirs_cache = {}
    out = []
    for k in range(count):
        snr, t60 = conditions[k % len(conditions)]
        place = grid[(37 * k) % len(grid)]
        key = (place.azimuth_deg, place.elevation_deg, t60)
        if key not in rirs_cache:
            room = RoomSpec(t60=t60, sample_rate=FS)
            rirs_cache[key] = simulate_rir(room, array, place)
        sig = make_test_signal("speech_like", 1.2, FS, seed=seed0 + k)
        frame = render_frame(rirs_cache[key], sig, snr, seed0 + 7 * k, FS)
        out.append((frame, place, snr, t60))
    return out


def test_criterion_3_global_optimality_audit():
    t0 = time.perf_counter()
    array = default_array()
    axes = [np.arange(-b, b + 0.5 / FS, 1.0 / FS)
            for b in array.reference_bounds]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    keep = np.array([geometry.in_delay_box(array, t) for t in mesh])
    mesh = mesh[keep]
    min_side = 0.5 / FS
    worst_gap = -np.inf
    for frame, place, snr, t60 in _mixed_condition_frames(array, 20):
        corr = build_correlations(frame, default_max_lag(array, FS))
        lip = estimate_lipschitz(corr, array, pairs=1000, rng_seed=0)
        try:
            out = solve_bnb(corr, array, BnbConfig())
        except TdoaError:
            continue  # no feasible region is not an optimality violation
        grid_min = float(np.min(criterion_batch(corr, mesh)))
        gap = out.best.criterion - (grid_min + 2.0 * min_side * lip)
        worst_gap = max(worst_gap, gap)
        assert out.best.criterion <= grid_min + 2.0 * min_side * lip
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    _report(3, f"20 mixed frames, worst audit slack {worst_gap:.3e} "
               f"(<= 0 required), {elapsed:.0f} s")


# ---------------------------------------------------------------------------
# 4. bound soundness
# ---------------------------------------------------------------------------

def test_criterion_4_bound_soundness():
    array = default_array()
    room = RoomSpec(t60=0.1, sample_rate=FS)
    rirs = simulate_rir(room, array, SourcePlacement(-60.0, 25.0))
    sig = make_test_signal("speech_like", 1.2, FS, seed=41)
    frame = render_frame(rirs, sig, 0.0, 42, FS)
    corr = build_correlations(frame, default_max_lag(array, FS))
    lip = estimate_lipschitz(corr, array, pairs=1000, rng_seed=4)
    rng = np.random.default_rng(104)
    centers = sample_delay_box(array, 50, rng)
    sides = 10.0 ** rng.uniform(-6.0, -4.3, size=50)
    regions = [Region(center=c, side=s) for c, s in zip(centers, sides)]
    bound(regions, lip, corr)
    worst_margin = np.inf
    for reg in regions:
        offs = rng.uniform(-0.5, 0.5, size=(400, 3)) * reg.side
        pts = reg.center + offs
        jv = criterion_batch(corr, pts)
        worst_margin = min(worst_margin,
                           float(np.min(jv) - reg.lower_bound))
        assert np.min(jv) >= reg.lower_bound
    _report(4, f"50 regions x 400 samples, smallest sample-to-bound "
               f"margin {worst_margin:.3e} (>= 0 required)")


# ---------------------------------------------------------------------------
# 5. desk-scale benchmark reproduction
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def desk_benchmark():
    cfg = BenchmarkConfig(methods=("bnb", "dm", "t-mult"),
                          conditions=((0.0, 0.0),),
                          n_directions=40, frames_per_direction=2,
                          master_seed=1234)
    t0 = time.perf_counter()
    rows, trials = run_benchmark(cfg)
    return rows, trials, time.perf_counter() - t0


def test_criterion_5_table_reproduction(desk_benchmark):
    rows, _, elapsed = desk_benchmark
    by = {r.method: r for r in rows}
    assert by["bnb"].inlier_rate >= 70.0
    assert by["bnb"].inlier_mean_error <= 13.0
    assert 70.0 <= by["dm"].inlier_rate <= 90.0
    assert 50.0 <= by["t-mult"].inlier_rate <= 72.0
    assert elapsed < 1800.0
    _report(5, "SNR 0 dB / T60 0 s, 80 trials: "
               f"bnb {by['bnb'].inlier_rate:.1f}% @ "
               f"{by['bnb'].inlier_mean_error:.2f} deg, "
               f"dm {by['dm'].inlier_rate:.1f}%, "
               f"t-mult {by['t-mult'].inlier_rate:.1f}%, "
               f"{elapsed:.0f} s")


# ---------------------------------------------------------------------------
# 6. ordering reproduction
# ---------------------------------------------------------------------------

def test_criterion_6_ordering():
    array = default_array()
    cfg = BenchmarkConfig(methods=("bnb", "pi"),
                          conditions=((0.0, 0.4),),
                          n_directions=40, frames_per_direction=2,
                          master_seed=1234)
    rows, _ = run_benchmark(cfg)
    by = {r.method: r for r in rows}
    assert by["bnb"].inlier_rate > by["pi"].inlier_rate

    # refinement dominance on shared frames and identical grids
    grid_dirs = direction_grid()
    idx = np.linspace(0, 188, 12).round().astype(int)
    dominance_checked = 0
    for k, i in enumerate(idx):
        place = grid_dirs[int(i)]
        room = RoomSpec(t60=0.4, sample_rate=FS)
        rirs = simulate_rir(room, array, place)
        sig = make_test_signal("speech_like", 1.2, FS, seed=600 + k)
        frame = render_frame(rirs, sig, 0.0, 601 + k, FS)
        corr = build_correlations(frame, default_max_lag(array, FS))
        grid = make_grid("dense_feasible", corr, array)
        dm = solve_dm(corr, array, grid)
        try:
            dlb = solve_multistart(corr, array, grid,
                                   LbConfig(constrained=True))
        except TdoaError:
            continue
        assert dlb.criterion <= dm.criterion + 1e-15
        dominance_checked += 1
    assert dominance_checked >= 10
    _report(6, f"bnb {by['bnb'].inlier_rate:.1f}% > pi "
               f"{by['pi'].inlier_rate:.1f}% at (0 dB, 0.4 s); refinement "
               f"dominance held on {dominance_checked} frames")


# ---------------------------------------------------------------------------
# 7. locus classification vs sampling oracle
# ---------------------------------------------------------------------------

def test_criterion_7_locus_classification():
    array = default_array()
    rng = np.random.default_rng(107)
    pts = rng.uniform(-1.0, 5.0, size=(200000, 3))

    def pair_delays(m, n):
        dm = np.linalg.norm(pts - array.positions[m], axis=1)
        dn = np.linalg.norm(pts - array.positions[n], axis=1)
        return (dn - dm) / array.speed_of_sound

    cases = 0
    class_counts = {k: 0 for k in LocusKind}
    pairs = [(m, n) for m in range(4) for n in range(4) if m != n]
    while cases < 200:
        m, n = pairs[rng.integers(len(pairs))]
        bound_s = array.pair_bounds[m, n]
        mode = cases % 5
        if mode == 0:
            t_hat = 0.0
        elif mode == 1:
            t_hat = bound_s
        elif mode == 2:
            t_hat = -bound_s
        elif mode == 3:
            t_hat = float(rng.uniform(1.02, 1.6)) * bound_s * \
                float(rng.choice([-1.0, 1.0]))
        else:
            t_hat = float(rng.uniform(0.05, 0.95)) * bound_s * \
                float(rng.choice([-1.0, 1.0]))
        locus = classify_locus(array, m, n, t_hat)
        class_counts[locus.kind] += 1
        vals = pair_delays(m, n)
        delta = bound_s / 60.0
        hits = pts[np.abs(vals - t_hat) < delta]
        dist = np.linalg.norm(hits - locus.midpoint, axis=1) \
            if len(hits) else np.zeros(0)
        if locus.kind is LocusKind.EMPTY_SET:
            assert len(hits) == 0
        elif locus.kind is LocusKind.HYPERPLANE:
            assert len(hits) > 0
            offs = (hits - locus.midpoint) @ locus.baseline \
                / np.linalg.norm(locus.baseline)
            assert np.all(np.abs(offs) <= dist / 20.0 + 0.02)
        elif locus.kind in (LocusKind.HALF_LINE_MAX, LocusKind.HALF_LINE_MIN):
            # points this close to the extreme delay hug the half line:
            # positive projection on the correct ray and small cross part
            sign = 1.0 if locus.kind is LocusKind.HALF_LINE_MAX else -1.0
            if len(hits):
                axis = sign * locus.baseline \
                    / np.linalg.norm(locus.baseline)
                proj = (hits - locus.midpoint) @ axis
                cross = np.linalg.norm(
                    hits - locus.midpoint - proj[:, None] * axis, axis=1)
                assert np.all(proj > 0)
                assert np.all(cross <= 0.35 * np.maximum(proj, 0.4))
        else:
            assert len(hits) > 0
            signs = np.sign(pair_delays(m, n))
            hit_signs = signs[np.abs(vals - t_hat) < delta]
            assert np.all(hit_signs == np.sign(t_hat))
        cases += 1
    assert all(class_counts[k] >= 40 for k in LocusKind)
    _report(7, "200 cases agree with the sampling oracle; per-class counts "
               + ", ".join(f"{k.value}={v}" for k, v in class_counts.items()))


# ---------------------------------------------------------------------------
# 8. SNR and decay-time calibration
# ---------------------------------------------------------------------------

def test_criterion_8_snr_t60_calibration():
    array = default_array()
    worst_snr = 0.0
    room0 = RoomSpec(t60=0.1, sample_rate=FS)
    rirs = simulate_rir(room0, array, SourcePlacement(20.0, -10.0))
    sig = make_test_signal("speech_like", 1.2, FS, seed=81)
    clean = render_frame(rirs, sig, np.inf, 0, FS)
    for snr in (0.0, -5.0, -10.0):
        noisy = render_frame(rirs, sig, snr, 82, FS)
        for ch in range(array.n_mics):
            got = measure_snr_db(noisy.channels[ch], clean.channels[ch])
            worst_snr = max(worst_snr, abs(got - snr))
    assert worst_snr <= 0.1

    worst_t60 = 0.0
    for t60 in (0.2, 0.4, 0.6):
        room = RoomSpec(t60=t60, sample_rate=FS)
        rr = simulate_rir(room, array, SourcePlacement(75.0, 20.0))
        measured = schroeder_t60(rr[0], FS)
        rel = abs(measured - t60) / t60
        worst_t60 = max(worst_t60, rel)
        assert rel < 0.25
    _report(8, f"SNR within {worst_snr:.3f} dB of target; decay time "
               f"within {100 * worst_t60:.1f}% of target")


# ---------------------------------------------------------------------------
# 9. benchmark determinism
# ---------------------------------------------------------------------------

def test_criterion_9_bench_determinism():
    def one_run():
        cfg = BenchmarkConfig(methods=("pi", "dm"),
                              conditions=((0.0, 0.0), (5.0, 0.1)),
                              n_directions=6, frames_per_direction=1,
                              master_seed=99)
        rows, _ = run_benchmark(cfg)
        return render_csv(rows)

    first, second = one_run(), one_run()
    assert first == second
    _report(9, f"two runs produced byte-identical CSV "
               f"({len(first)} bytes)")
