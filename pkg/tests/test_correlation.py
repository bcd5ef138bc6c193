import numpy as np
import pytest

from tdoaloc.correlation import (
    Frame,
    build_correlations,
    correlation_matrix,
    criterion,
    criterion_batch,
    criterion_gradient,
    criterion_hessian,
    default_max_lag,
    eval_rho,
)
from tdoaloc.errors import (
    CorrelationError,
    LagRangeError,
    SilentChannelError,
)

FS = 16000.0


def shifted_frame(shifts, n=1600, seed=0, noise=0.0, fs=FS):
    """Channels that are integer-sample shifts of one master signal."""
    rng = np.random.default_rng(seed)
    pad = max(abs(int(s)) for s in shifts) + 8
    master = rng.standard_normal(n + 2 * pad)
    chans = np.stack([master[pad - int(s): pad - int(s) + n] for s in shifts])
    if noise:
        chans = chans + noise * rng.standard_normal(chans.shape)
    return Frame(chans, fs)


def test_frame_validation():
    with pytest.raises(CorrelationError):
        Frame(np.zeros((2, 1)), FS)
    with pytest.raises(CorrelationError):
        Frame(np.full((2, 100), np.nan), FS)
    with pytest.raises(CorrelationError):
        Frame(np.zeros((2, 100)), 0.0)


def test_build_rejects_silent_channel():
    ch = np.random.default_rng(0).standard_normal((3, 400))
    ch[1] = 0.0
    with pytest.raises(SilentChannelError):
        build_correlations(Frame(ch, FS), 20 / FS)


def test_build_rejects_too_long_lag():
    fr = shifted_frame([0, 1], n=100)
    with pytest.raises(CorrelationError):
        build_correlations(fr, 60 / FS)


def test_self_correlation_is_one():
    fr = shifted_frame([0, 0])
    cs = build_correlations(fr, 20 / FS)
    assert eval_rho(cs, 0, 1, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert eval_rho(cs, 0, 0, 0.37 / FS) == 1.0


def test_pure_shift_peaks_at_delay():
    for d in (3, -5, 7):
        fr = shifted_frame([0, d])
        cs = build_correlations(fr, 20 / FS)
        lags = np.arange(-15, 16) / FS
        vals = [eval_rho(cs, 0, 1, la) for la in lags]
        assert lags[int(np.argmax(vals))] == pytest.approx(d / FS)


def test_integer_lags_exact_and_bounded():
    fr = shifted_frame([0, 4, -2], seed=3)
    cs = build_correlations(fr, 25 / FS)
    fn = cs._pairs[(0, 1)]
    for k in (-10, -3, 0, 5, 11):
        stored = fn.values[k + int(round(cs.max_lag * FS))]
        assert eval_rho(cs, 0, 1, k / FS) == pytest.approx(stored, abs=1e-12)
        assert abs(stored) <= 1.0 + 1e-12


def test_symmetry_rule():
    fr = shifted_frame([0, 4, -2], seed=4)
    cs = build_correlations(fr, 25 / FS)
    for tau in (-7.3 / FS, 0.0, 2.5 / FS, 11.0 / FS):
        assert eval_rho(cs, 0, 1, tau) == pytest.approx(
            eval_rho(cs, 1, 0, -tau), abs=1e-14)
        assert eval_rho(cs, 2, 1, tau) == pytest.approx(
            eval_rho(cs, 1, 2, -tau), abs=1e-14)


def test_independent_noise_low_correlation():
    rng = np.random.default_rng(5)
    worst = 0.0
    for trial in range(20):
        ch = rng.standard_normal((2, 1600))
        cs = build_correlations(Frame(ch, FS), 20 / FS)
        lags = np.arange(-20, 21) / FS
        worst = max(worst, np.max(np.abs(cs.rho(0, 1, lags))))
    assert worst < 0.25


def test_out_of_range_lag_raises():
    cs = build_correlations(shifted_frame([0, 1]), 20 / FS)
    with pytest.raises(LagRangeError):
        eval_rho(cs, 0, 1, 30 / FS)


def test_fractional_lag_matches_dense_resample():
    # spline values between samples vs a 16x-oversampled reference of the
    # same band-limited pair
    rng = np.random.default_rng(6)
    up = 16
    n_lo = 1664
    n_hi = n_lo * up
    spectrum = np.fft.rfft(rng.standard_normal(n_hi))
    # speech-band occupancy: most energy well below the base Nyquist
    spectrum[int(n_hi / (2 * up) * 0.35):] = 0.0
    hi = np.fft.irfft(spectrum, n_hi)
    d_hi = 24  # 1.5 base-rate samples
    x0 = hi[:-d_hi][::up][:1600]
    x1 = hi[d_hi:][::up][:1600]
    cs = build_correlations(Frame(np.stack([x0, x1]), FS), 20 / FS)
    # channel 1 leads channel 0 by 1.5 base samples: peak at -1.5
    assert eval_rho(cs, 0, 1, -1.5 / FS) > 0.97
    hi_cs = build_correlations(
        Frame(np.stack([hi[:-d_hi], hi[d_hi:]]), FS * up), 130 / (FS * up))
    for k in (-2.5, -0.5, 0.5, 2.5, 4.5):
        ref = eval_rho(hi_cs, 0, 1, (-1.5 + k) / FS)
        assert eval_rho(cs, 0, 1, (-1.5 + k) / FS) == pytest.approx(
            ref, abs=0.02)


def test_criterion_trivial_values():
    # identical channels at zero delay: singular all-ones matrix
    cs = build_correlations(shifted_frame([0, 0, 0]), 20 / FS)
    assert criterion(cs, np.zeros(2)) == pytest.approx(0.0, abs=1e-9)
    # independent channels: near identity
    rng = np.random.default_rng(7)
    cs2 = build_correlations(Frame(rng.standard_normal((3, 4000)), FS),
                             20 / FS)
    assert criterion(cs2, np.zeros(2)) == pytest.approx(1.0, abs=0.15)


def test_criterion_minimum_at_true_delays():
    true = np.array([4.0, -3.0]) / FS
    fr = shifted_frame([0, 4, -3], seed=8)
    cs = build_correlations(fr, 30 / FS)
    j_true = criterion(cs, true)
    rng = np.random.default_rng(9)
    for _ in range(100):
        t = true + rng.uniform(-1.0, 1.0, 2) * 8 / FS
        if np.linalg.norm(t - true) < 2.0 / FS:
            continue
        assert criterion(cs, t) > j_true


def test_criterion_batch_matches_scalar():
    cs = build_correlations(shifted_frame([0, 4, -3], seed=10), 20 / FS)
    rng = np.random.default_rng(11)
    pts = rng.uniform(-8, 8, size=(50, 2)) / FS
    batch = criterion_batch(cs, pts)
    for p, b in zip(pts, batch):
        assert criterion(cs, p) == pytest.approx(float(b), rel=1e-12)


def test_correlation_matrix_properties():
    cs = build_correlations(shifted_frame([0, 4, -3, 6], seed=12), 25 / FS)
    rng = np.random.default_rng(13)
    for _ in range(30):
        t = rng.uniform(-8, 8, 3) / FS
        r = correlation_matrix(cs, t)
        assert np.allclose(r, r.T)
        assert np.allclose(np.diag(r), 1.0)
        assert np.all(np.abs(r) <= 1.0 + 1e-12)
        m = r.shape[0]
        assert abs(criterion(cs, t)) <= m ** (m / 2) + 1e-9  # Hadamard


def _fd_gradient(cs, t, h=1e-8):
    # small enough that the spline's knot-level curvature jumps do not
    # pollute the central-difference oracle
    g = np.zeros(len(t))
    for i in range(len(t)):
        e = np.zeros(len(t))
        e[i] = h
        g[i] = (criterion(cs, t + e) - criterion(cs, t - e)) / (2 * h)
    return g


def _fd_hessian(cs, t, h=3e-8):
    n = len(t)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n); ei[i] = h
            ej = np.zeros(n); ej[j] = h
            out[i, j] = (criterion(cs, t + ei + ej)
                         - criterion(cs, t + ei - ej)
                         - criterion(cs, t - ei + ej)
                         + criterion(cs, t - ei - ej)) / (4 * h * h)
    return out


def test_gradient_matches_finite_differences():
    cs = build_correlations(shifted_frame([0, 4, -3, 6], seed=14, noise=0.2),
                            25 / FS)
    rng = np.random.default_rng(15)
    for _ in range(100):
        t = rng.uniform(-7, 7, 3) / FS
        g = criterion_gradient(cs, t)
        fd = _fd_gradient(cs, t)
        assert np.linalg.norm(g - fd) < 1e-4 * max(np.linalg.norm(fd), 1e-12)


def test_hessian_matches_finite_differences():
    cs = build_correlations(shifted_frame([0, 4, -3, 6], seed=16, noise=0.2),
                            25 / FS)
    rng = np.random.default_rng(17)
    for _ in range(100):
        t = rng.uniform(-7, 7, 3) / FS
        hs = criterion_hessian(cs, t)
        assert np.allclose(hs, hs.T, atol=1e-10 * max(1.0, np.abs(hs).max()))
        fd = _fd_hessian(cs, t)
        assert np.linalg.norm(hs - fd) < 1e-3 * max(np.linalg.norm(fd), 1e-9)


def test_gradient_zero_for_identity_matrix():
    # independent long noise: R ~ I, gradient ~ 0 relative to slope scale
    rng = np.random.default_rng(18)
    cs = build_correlations(Frame(rng.standard_normal((3, 60000)), FS),
                            20 / FS)
    g = criterion_gradient(cs, np.zeros(2))
    assert np.linalg.norm(g) < 40.0  # per-second units; J slope scale ~ 1e4


def test_gradient_small_at_constructed_optimum():
    fr = shifted_frame([0, 4, -3], seed=19)
    cs = build_correlations(fr, 20 / FS)
    true = np.array([4.0, -3.0]) / FS
    g_opt = np.linalg.norm(criterion_gradient(cs, true))
    rng = np.random.default_rng(20)
    neighborhood = [np.linalg.norm(criterion_gradient(
        cs, true + rng.uniform(-1, 1, 2) * 3.0 / FS)) for _ in range(50)]
    assert g_opt < 1e-3 * max(neighborhood)


def test_clamp_counter_stays_zero_on_integer_lags():
    cs = build_correlations(shifted_frame([0, 4, -3], seed=21), 20 / FS)
    lags = np.arange(-20, 21) / FS
    for m in range(3):
        for n in range(m + 1, 3):
            cs.rho(m, n, lags)
    assert cs.clamp_events == 0


def test_default_max_lag_covers_search_box(tetra):
    needed = tetra.max_pairwise_lag
    assert default_max_lag(tetra, FS) >= needed + 1.9 / FS
