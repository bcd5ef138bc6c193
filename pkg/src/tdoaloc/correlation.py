"""Normalized cross-correlation tables and the multichannel coherence criterion.

A frame of M synchronized channels is turned into a table of normalized
cross-correlation functions with continuous (spline) lag evaluation. The
criterion scored by every multichannel solver is the determinant of the
M x M matrix of correlations evaluated at the pairwise lags implied by a
delay vector: it vanishes when the aligned channels are fully coherent
and grows toward one as they decorrelate. First and second derivatives
are available in closed form through the spline derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import correlate

from .errors import CorrelationError, LagRangeError, SilentChannelError


@dataclass(frozen=True)
class Frame:
    """M equal-length sample sequences with a common sample rate."""

    channels: np.ndarray
    sample_rate: float

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        if ch.ndim != 2 or ch.shape[1] < 2:
            raise CorrelationError("channels must be (M, L) with L >= 2")
        if not np.all(np.isfinite(ch)):
            raise CorrelationError("samples must be finite")
        if self.sample_rate <= 0:
            raise CorrelationError("sample rate must be positive")
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self):
        return self.channels.shape[0]

    @property
    def n_samples(self):
        return self.channels.shape[1]

    @property
    def duration(self):
        return self.n_samples / self.sample_rate


class CorrelationFunction:
    """One pair's sampled normalized correlation with spline evaluation.

    A natural cubic spline is fitted over the uniformly spaced integer
    lags; evaluation exploits the uniform knots directly, which is much
    faster than generic piecewise-polynomial lookup. Values are clamped
    to [-1, 1] on evaluation; derivative evaluation uses the raw spline
    so the criterion stays twice differentiable.
    """

    def __init__(self, lags, values, sample_rate):
        self.lags = lags
        self.values = values
        self.sample_rate = sample_rate
        spline = CubicSpline(lags, values, bc_type="natural")
        self._coef = spline.c  # (4, n_intervals)
        self._x0 = float(lags[0])
        self._step = float(lags[1] - lags[0])

    @property
    def max_lag(self):
        return float(self.lags[-1])

    def _piece(self, tau):
        tau = np.asarray(tau, dtype=float)
        idx = np.clip(((tau - self._x0) / self._step).astype(np.int64),
                      0, self._coef.shape[1] - 1)
        dx = tau - (self._x0 + idx * self._step)
        return idx, dx

    def __call__(self, tau):
        return np.clip(self.raw(tau), -1.0, 1.0)

    def raw(self, tau):
        idx, dx = self._piece(tau)
        c = self._coef
        return ((c[0, idx] * dx + c[1, idx]) * dx + c[2, idx]) * dx \
            + c[3, idx]

    def deriv(self, tau, order=1):
        idx, dx = self._piece(tau)
        c = self._coef
        if order == 1:
            return (3.0 * c[0, idx] * dx + 2.0 * c[1, idx]) * dx + c[2, idx]
        return 6.0 * c[0, idx] * dx + 2.0 * c[1, idx]


class CorrelationSet:
    """Upper-triangular table of pair correlations with symmetric access.

    ``rho(m, n, tau)`` equals ``rho(n, m, -tau)``; the diagonal is the
    constant one. ``clamp_events`` counts evaluations where the spline
    overshot past +-1 and was clipped (diagnostic only).

    All pairs share one uniform knot grid, so their spline coefficients
    are stacked into a single array and a whole matrix row of lags is
    evaluated in one vectorized pass.
    """

    def __init__(self, pairs, energies, sample_rate, max_lag):
        self._pairs = pairs
        self.energies = energies
        self.sample_rate = sample_rate
        self.max_lag = max_lag
        self.clamp_events = 0
        self._pair_index = sorted(pairs)
        first = pairs[self._pair_index[0]]
        self._x0 = first._x0
        self._step = first._step
        self._coef = np.stack([pairs[key]._coef for key in self._pair_index],
                              axis=1)  # (4, n_pairs, n_intervals)
        self._mi = np.array([m for m, _ in self._pair_index])
        self._ni = np.array([n for _, n in self._pair_index])

    @property
    def n_channels(self):
        return len(self.energies)

    def _pair_eval(self, lag_rows, order=0):
        """Evaluate every pair's spline at its own lag, vectorized.

        ``lag_rows`` has shape (..., n_pairs), entry p being the lag for
        pair ``self._pair_index[p]``. Returns the same shape.
        """
        idx = ((lag_rows - self._x0) / self._step).astype(np.int64)
        np.clip(idx, 0, self._coef.shape[2] - 1, out=idx)
        dx = lag_rows - (self._x0 + idx * self._step)
        p_ix = np.arange(len(self._pair_index))
        c0 = self._coef[0][p_ix, idx]
        c1 = self._coef[1][p_ix, idx]
        c2 = self._coef[2][p_ix, idx]
        c3 = self._coef[3][p_ix, idx]
        if order == 0:
            return ((c0 * dx + c1) * dx + c2) * dx + c3
        if order == 1:
            return (3.0 * c0 * dx + 2.0 * c1) * dx + c2
        return 6.0 * c0 * dx + 2.0 * c1

    def _check_range_rows(self, lag_rows):
        worst = float(np.max(np.abs(lag_rows)))
        if worst > self.max_lag * (1 + 1e-12):
            raise LagRangeError(
                f"lag {worst:.3e} s beyond table range {self.max_lag:.3e} s")

    def _oriented(self, m, n, tau):
        if m < n:
            return self._pairs[(m, n)], tau, 1.0
        return self._pairs[(n, m)], -np.asarray(tau, dtype=float), -1.0

    def _check_range(self, tau):
        if np.any(np.abs(tau) > self.max_lag * (1 + 1e-12)):
            raise LagRangeError(
                f"lag {np.max(np.abs(tau)):.3e} s beyond table range "
                f"{self.max_lag:.3e} s")

    def rho(self, m, n, tau):
        """Normalized correlation of pair (m, n) at lag tau (seconds)."""
        if m == n:
            return np.ones_like(np.asarray(tau, dtype=float))
        self._check_range(tau)
        fn, tt, _ = self._oriented(m, n, tau)
        raw = fn.raw(tt)
        over = np.abs(raw) > 1.0 + 1e-15
        if np.any(over):
            self.clamp_events += int(np.count_nonzero(over))
        return np.clip(raw, -1.0, 1.0)

    def drho(self, m, n, tau, order=1):
        """First or second lag-derivative of the pair correlation."""
        if m == n:
            return np.zeros_like(np.asarray(tau, dtype=float))
        self._check_range(tau)
        fn, tt, sgn = self._oriented(m, n, tau)
        return fn.deriv(tt, order) * (sgn ** order)


def default_max_lag(array, sample_rate):
    """Lag range wide enough to evaluate the criterion anywhere in the
    enclosing delay box (plus a two-sample guard)."""
    return array.max_pairwise_lag + 2.0 / sample_rate


def build_correlations(frame, max_lag):
    """Estimate all pair correlations of a frame up to ``max_lag`` seconds.

    Channels are mean-corrected per frame, the estimator divides by the
    full window length (biased), and energies use the same normalization,
    which keeps every sampled value in [-1, 1].

    Raises
    ------
    SilentChannelError
        A channel carries no energy after mean removal.
    CorrelationError
        The requested lag range exceeds half the frame.
    """
    ch = frame.channels - frame.channels.mean(axis=1, keepdims=True)
    n_ch, n_samp = ch.shape
    fs = frame.sample_rate
    k_max = int(np.ceil(max_lag * fs))
    if k_max > n_samp / 2:
        raise CorrelationError(
            f"max_lag of {k_max} samples exceeds half the frame ({n_samp})")
    energies = np.einsum("ij,ij->i", ch, ch) / n_samp
    if np.any(energies <= 0):
        dead = int(np.argmin(energies))
        raise SilentChannelError(f"channel {dead} has zero energy")

    lags = np.arange(-k_max, k_max + 1) / fs
    pairs = {}
    mid = n_samp - 1
    for m in range(n_ch):
        for n in range(m + 1, n_ch):
            # full[k + mid] = sum_t ch[m][t] * ch[n][t + k]
            full = correlate(ch[n], ch[m], mode="full", method="fft")
            vals = full[mid - k_max: mid + k_max + 1] / n_samp
            vals /= np.sqrt(energies[m] * energies[n])
            pairs[(m, n)] = CorrelationFunction(lags, vals, fs)
    return CorrelationSet(pairs, energies, fs, k_max / fs)


def eval_rho(corr_set, m, n, tau):
    """Scalar convenience wrapper around ``CorrelationSet.rho``."""
    return float(corr_set.rho(m, n, float(tau)))


def _pair_lag_rows(corr_set, t_batch):
    """Per-pair lag rows u[n] - u[m] for the stacked delay vectors."""
    t_batch = np.atleast_2d(np.asarray(t_batch, dtype=float))
    u = np.concatenate([np.zeros((t_batch.shape[0], 1)), t_batch], axis=1)
    return u[:, corr_set._ni] - u[:, corr_set._mi]


def correlation_matrix(corr_set, t):
    """The symmetric unit-diagonal correlation matrix R at delay vector t."""
    return _stacked_r(corr_set, np.asarray(t, dtype=float)[None, :])[0]


def _stacked_r(corr_set, t_batch):
    lag_rows = _pair_lag_rows(corr_set, t_batch)
    corr_set._check_range_rows(lag_rows)
    vals = corr_set._pair_eval(lag_rows)
    over = np.abs(vals) > 1.0 + 1e-15
    if np.any(over):
        corr_set.clamp_events += int(np.count_nonzero(over))
        vals = np.clip(vals, -1.0, 1.0)
    m_ch = corr_set.n_channels
    r = np.ones((lag_rows.shape[0], m_ch, m_ch))
    r[:, corr_set._mi, corr_set._ni] = vals
    r[:, corr_set._ni, corr_set._mi] = vals
    return r


def criterion(corr_set, t):
    """det R(t): zero for perfectly coherent aligned channels, ~1 for
    uncorrelated ones."""
    return float(np.linalg.det(correlation_matrix(corr_set, t)))


def criterion_batch(corr_set, t_batch):
    """Vectorized ``criterion`` over rows of ``t_batch`` (P, M-1)."""
    return np.linalg.det(_stacked_r(corr_set, t_batch))


def _derivative_tables(corr_set, t):
    """R, its entrywise lag-derivatives, and the per-variable sign factors.

    Entry (m, n) of R depends on the delay variables through the lag
    ``u[n] - u[m]``, so differentiating with respect to variable j scales
    the lag derivative by ``F_j[m, n] = [n == j+1] - [m == j+1]``.
    """
    lag_rows = _pair_lag_rows(corr_set, np.asarray(t, dtype=float)[None, :])
    corr_set._check_range_rows(lag_rows)
    vals = np.clip(corr_set._pair_eval(lag_rows), -1.0, 1.0)[0]
    d1 = corr_set._pair_eval(lag_rows, 1)[0]
    d2 = corr_set._pair_eval(lag_rows, 2)[0]
    m_ch = corr_set.n_channels
    mi, ni = corr_set._mi, corr_set._ni
    r = np.ones((m_ch, m_ch))
    r1 = np.zeros((m_ch, m_ch))
    r2 = np.zeros((m_ch, m_ch))
    r[mi, ni] = r[ni, mi] = vals
    r1[mi, ni], r1[ni, mi] = d1, -d1
    r2[mi, ni] = r2[ni, mi] = d2
    factors = getattr(corr_set, "_factors", None)
    if factors is None:
        factors = np.zeros((m_ch - 1, m_ch, m_ch))
        idx = np.arange(m_ch)
        for j in range(m_ch - 1):
            col = (idx == j + 1).astype(float)
            factors[j] = col[None, :] - col[:, None]
        corr_set._factors = factors
    return r, r1, r2, factors


def _safe_inverse(r, ridge=1e-10):
    """Inverse of R, falling back to a ridged copy when near-singular."""
    try:
        inv = np.linalg.inv(r)
        if np.all(np.isfinite(inv)):
            return inv
    except np.linalg.LinAlgError:
        pass
    return np.linalg.inv(r + ridge * np.eye(r.shape[0]))


def criterion_gradient(corr_set, t):
    """Analytic gradient of det R with respect to the M-1 delays."""
    r, r1, _, factors = _derivative_tables(corr_set, t)
    det_r = np.linalg.det(r)
    inv_r = _safe_inverse(r)
    n_var = factors.shape[0]
    grad = np.empty(n_var)
    for j in range(n_var):
        grad[j] = det_r * np.trace(inv_r @ (r1 * factors[j]))
    return grad




def criterion_hessian(corr_set, t):
    """Analytic Hessian of det R with respect to the M-1 delays."""
    return criterion_value_grad_hess(corr_set, t)[2]


def criterion_value_grad_hess(corr_set, t):
    """Criterion value, gradient and Hessian from one table build.

    The Newton-descent solvers need all three per iterate; computing them
    together avoids re-evaluating the correlation splines.
    """
    r, r1, r2, factors = _derivative_tables(corr_set, t)
    det_r = np.linalg.det(r)
    inv_r = _safe_inverse(r)
    n_var = factors.shape[0]
    dr = [r1 * factors[j] for j in range(n_var)]
    traces = np.array([np.trace(inv_r @ d) for d in dr])
    grad = det_r * traces
    prods = [inv_r @ d for d in dr]
    hess = np.empty((n_var, n_var))
    for j in range(n_var):
        for k in range(j, n_var):
            d2r = r2 * factors[j] * factors[k]
            val = det_r * (traces[j] * traces[k]
                           + np.trace(-prods[j] @ prods[k] + inv_r @ d2r))
            hess[j, k] = hess[k, j] = val
    return float(det_r), grad, hess
