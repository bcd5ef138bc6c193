"""Delay-based sound source localization for arbitrary non-coplanar arrays.

Closed-form geometry maps a consistent set of relative arrival delays to
the unique source position it determines; a determinant-of-correlations
criterion scores candidate delay vectors against the received signals;
and a Lipschitz branch-and-bound solver finds the best geometrically
consistent delays globally. Reference solvers, a shoebox reverberation
simulator and a benchmark harness round out the toolkit.
"""

from .bnb import BnbConfig, BnbOutcome, Region, estimate_lipschitz, solve_bnb
from .baselines import (
    InitGrid,
    LbConfig,
    MultConfig,
    delta_gradient,
    delta_hessian,
    estimate_pairwise_delays,
    make_grid,
    mult_cost,
    mult_gradient,
    mult_hessian,
    solve_dm,
    solve_logbarrier,
    solve_multistart,
    solve_mult,
)
from .bench import (
    BenchmarkConfig,
    MetricsRow,
    angular_error,
    run_benchmark,
    run_localize,
)
from .correlation import (
    CorrelationFunction,
    CorrelationSet,
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
from .geometry import (
    LinearSystemParts,
    Locus,
    LocusKind,
    MicArray,
    build_linear_system,
    classify_locus,
    delays_from_source,
    discriminant,
    equality_residual,
    full_delay_matrix,
    in_delay_box,
    is_feasible,
    localize,
)
from .results import LocalizationResult
from .simroom import (
    RoomSpec,
    SourcePlacement,
    default_array,
    direction_grid,
    make_test_signal,
    measure_snr_db,
    render_frame,
    schroeder_t60,
    simulate_rir,
    spectral_centroid,
)
from .wavio import read_frame, write_frame

__version__ = "0.1.0"
