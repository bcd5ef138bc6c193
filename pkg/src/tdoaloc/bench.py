"""Benchmark harness: method dispatch, angular metrics, and the full
condition-grid protocol with CSV/JSON reporting.

Frames are generated once per (condition, direction, repeat) and shared
by every method, so cross-method comparisons run on identical data. The
CSV report contains only seed-determined fields and reproduces
byte-identically for a fixed configuration; wall-clock statistics live in
the JSON bundle.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import baselines, bnb, geometry, simroom
from .correlation import build_correlations, default_max_lag
from .errors import SolverError, TdoaError
from .results import LocalizationResult

METHODS = ("bnb", "unc", "d-lb", "s-lb", "dm", "n-mult", "t-mult", "f-mult",
           "pi")
_MULT_RADII = {"n-mult": 0.9, "t-mult": 1.7, "f-mult": 2.5}
HISTOGRAM_BINS = 18


def angular_error(true_pos, est_pos, array):
    """Angle in degrees between the two positions as seen from the array
    centroid."""
    a = np.asarray(true_pos, dtype=float) - array.centroid
    b = np.asarray(est_pos, dtype=float) - array.centroid
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("position coincides with the array centroid")
    cosang = np.clip(a @ b / (na * nb), -1.0, 1.0)
    return float(np.degrees(np.arccos(cosang)))


def run_localize(frame, array, method, params=None):
    """Localize one frame with a named method.

    ``params`` may carry per-method overrides (``bnb_config``,
    ``lb_config``, ``mult_config``, ``grids``). Correlations are built
    wide enough to cover the whole delay search box. Solver failures
    raise; the benchmark loop records them as failed trials.
    """
    params = params or {}
    if method not in METHODS:
        raise SolverError(f"unknown method {method!r}; choose from {METHODS}")
    corr_set = params.get("corr_set")
    if corr_set is None:
        corr_set = build_correlations(
            frame, default_max_lag(array, frame.sample_rate))
    t0 = time.perf_counter()
    if method == "bnb":
        out = bnb.solve_bnb(corr_set, array, params.get("bnb_config"))
        result = out.best
    elif method in ("unc", "d-lb", "s-lb"):
        constrained = method != "unc"
        cfg = params.get("lb_config") or baselines.LbConfig(
            constrained=constrained)
        grid = _grid_for(method, corr_set, array, params)
        result = baselines.solve_multistart(corr_set, array, grid, cfg,
                                            method_name=method)
    elif method == "dm":
        grid = _grid_for(method, corr_set, array, params)
        result = baselines.solve_dm(corr_set, array, grid)
    elif method in _MULT_RADII:
        cfg = params.get("mult_config") or baselines.MultConfig(
            radius=_MULT_RADII[method])
        result = baselines.solve_mult(corr_set, array, cfg,
                                      method_name=method)
    else:  # pi
        delays = baselines.estimate_pairwise_delays(corr_set, array)
        feasible = geometry.is_feasible(array, delays)
        position = geometry.localize(array, delays) if feasible else None
        result = LocalizationResult(
            delays=delays, position=position,
            criterion=float(baselines.mult_cost(
                position if position is not None else array.centroid,
                delays, array)),
            feasible=feasible, method="pi", wall_time=0.0)
        if not feasible:
            result.extras["reason"] = "pairwise delays are infeasible"
    result.wall_time = time.perf_counter() - t0
    return result


def _grid_for(method, corr_set, array, params):
    grids = params.setdefault("grids", {})
    kind = {"unc": "unconstrained", "d-lb": "dense_feasible",
            "s-lb": "sparse", "dm": "dense_feasible"}[method]
    if kind not in grids:
        grids[kind] = baselines.make_grid(kind, corr_set, array)
    return grids[kind]


@dataclass
class BenchmarkConfig:
    """The benchmark protocol: methods x (snr, t60) conditions, a subset
    of the 189-direction grid, repeated frames per direction."""

    methods: tuple = ("bnb", "dm", "pi")
    conditions: tuple = ((0.0, 0.0),)
    n_directions: int = 40
    frames_per_direction: int = 2
    inlier_threshold_deg: float = 30.0
    master_seed: int = 1234
    sample_rate: float = simroom.DEFAULT_SAMPLE_RATE
    room_dimensions: tuple = (4.0, 4.0, 4.0)
    signal_kind: str = "speech_like"
    signal_duration: float = 1.2
    csv_path: str | None = None
    json_path: str | None = None

    def __post_init__(self):
        if not self.methods or not self.conditions:
            raise ValueError("methods and conditions must be non-empty")
        if self.inlier_threshold_deg <= 0:
            raise ValueError("inlier threshold must be positive")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods: {bad}")

    def directions(self):
        grid = simroom.direction_grid()
        if self.n_directions >= len(grid):
            return grid
        idx = np.linspace(0, len(grid) - 1, self.n_directions).round()
        return [grid[int(i)] for i in idx]


@dataclass
class MetricsRow:
    """Aggregated metrics of one (method, condition) cell."""

    method: str
    snr_db: float
    t60: float
    n_trials: int
    n_inliers: int
    inlier_rate: float
    inlier_mean_error: float
    inlier_std_error: float
    histogram: list
    mean_runtime: float
    std_runtime: float


def _trial_seed(master, cond_idx, dir_idx, rep):
    seq = np.random.SeedSequence([master, cond_idx, dir_idx, rep])
    return int(seq.generate_state(1)[0])


def run_benchmark(cfg, progress=None):
    """Run the protocol and return (rows, trial_records).

    Every failed trial counts as an outlier with a 180-degree error (top
    histogram bin). Inlier mean/std cover inliers only; the histogram
    covers all trials. Writes CSV and JSON reports when paths are set.
    """
    array = simroom.default_array()
    directions = cfg.directions()
    rows, trials = [], []
    rirs_cache = {}
    for cond_idx, (snr_db, t60) in enumerate(cfg.conditions):
        errors = {m: [] for m in cfg.methods}
        runtimes = {m: [] for m in cfg.methods}
        for dir_idx, placement in enumerate(directions):
            true_pos = placement.resolve(array)
            rir_key = (dir_idx, float(t60))
            if rir_key not in rirs_cache:
                room = simroom.RoomSpec(dimensions=cfg.room_dimensions,
                                        t60=t60, snr_db=snr_db,
                                        sample_rate=cfg.sample_rate)
                rirs_cache[rir_key] = simroom.simulate_rir(room, array,
                                                           placement)
            rirs = rirs_cache[rir_key]
            for rep in range(cfg.frames_per_direction):
                seed = _trial_seed(cfg.master_seed, cond_idx, dir_idx, rep)
                signal = simroom.make_test_signal(
                    cfg.signal_kind, cfg.signal_duration, cfg.sample_rate,
                    seed)
                frame = simroom.render_frame(rirs, signal, snr_db, seed + 1,
                                             cfg.sample_rate)
                shared = {"corr_set": build_correlations(
                    frame, default_max_lag(array, frame.sample_rate)),
                    "grids": {}}
                for method in cfg.methods:
                    record = {"method": method, "snr_db": snr_db, "t60": t60,
                              "direction": dir_idx,
                              "azimuth_deg": placement.azimuth_deg,
                              "elevation_deg": placement.elevation_deg,
                              "repeat": rep, "seed": seed}
                    try:
                        res = run_localize(frame, array, method,
                                           dict(shared))
                        if res.position is None:
                            raise SolverError("no position produced")
                        err = angular_error(true_pos, res.position, array)
                        record.update(error_deg=err, failed=False,
                                      criterion=res.criterion,
                                      runtime=res.wall_time)
                        runtimes[method].append(res.wall_time)
                    except TdoaError as exc:
                        err = 180.0
                        record.update(error_deg=err, failed=True,
                                      reason=str(exc), runtime=np.nan)
                    errors[method].append(err)
                    trials.append(record)
                if progress is not None:
                    progress(cond_idx, dir_idx, rep)
        for method in cfg.methods:
            errs = np.asarray(errors[method])
            inl = errs < cfg.inlier_threshold_deg
            # the top bin is closed at 180, so failures (recorded as 180)
            # land there without special-casing
            hist, _ = np.histogram(errs, bins=HISTOGRAM_BINS,
                                   range=(0.0, 180.0))
            rts = np.asarray(runtimes[method])
            rows.append(MetricsRow(
                method=method, snr_db=snr_db, t60=t60,
                n_trials=len(errs), n_inliers=int(inl.sum()),
                inlier_rate=100.0 * float(inl.mean()) if len(errs) else 0.0,
                inlier_mean_error=float(errs[inl].mean()) if inl.any()
                else float("nan"),
                inlier_std_error=float(errs[inl].std()) if inl.any()
                else float("nan"),
                histogram=hist.tolist(),
                mean_runtime=float(rts.mean()) if rts.size else float("nan"),
                std_runtime=float(rts.std()) if rts.size else float("nan")))
    if cfg.csv_path:
        with open(cfg.csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(rows))
    if cfg.json_path:
        with open(cfg.json_path, "w", encoding="utf-8") as fh:
            json.dump({"rows": [row.__dict__ for row in rows],
                       "trials": trials}, fh, indent=1, sort_keys=True,
                      default=float)
    return rows, trials


def render_csv(rows):
    """Deterministic CSV of the metric rows.

    Runtime statistics are deliberately left to the JSON bundle: the CSV
    must reproduce byte-for-byte for a fixed seed, and wall-clock numbers
    never do.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "snr_db", "t60", "n_trials", "n_inliers",
                     "inlier_rate_pct", "inlier_mean_error_deg",
                     "inlier_std_error_deg"]
                    + [f"hist_{10 * b}_{10 * (b + 1)}"
                       for b in range(HISTOGRAM_BINS)])
    for row in rows:
        writer.writerow([row.method, _fmt(row.snr_db), _fmt(row.t60),
                         row.n_trials, row.n_inliers,
                         _fmt(row.inlier_rate), _fmt(row.inlier_mean_error),
                         _fmt(row.inlier_std_error)] + row.histogram)
    return buf.getvalue()


def _fmt(value):
    return f"{value:.6f}" if np.isfinite(value) else "nan"
