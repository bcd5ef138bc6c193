"""Every localization method on one shared frame.

Runs the global solver plus all reference methods on the same rendered
scene and prints angular errors side by side.
"""

from tdoaloc.bench import METHODS, angular_error, run_localize
from tdoaloc.errors import TdoaError
from tdoaloc.simroom import (
    RoomSpec,
    SourcePlacement,
    default_array,
    make_test_signal,
    render_frame,
    simulate_rir,
)

FS = 16000.0
array = default_array()
place = SourcePlacement(azimuth_deg=80.0, elevation_deg=-15.0)
room = RoomSpec(t60=0.1, sample_rate=FS)

rirs = simulate_rir(room, array, place)
signal = make_test_signal("speech_like", 1.2, FS, seed=35)
frame = render_frame(rirs, signal, snr_db=0.0, rng_seed=36, sample_rate=FS)
truth = place.resolve(array)

print(f"scene: azimuth {place.azimuth_deg} deg, elevation "
      f"{place.elevation_deg} deg, SNR 0 dB, decay 0.1 s\n")
print(f"{'method':8s} {'error':>9s} {'criterion':>12s} {'time':>8s}")
for method in METHODS:
    try:
        res = run_localize(frame, array, method)
    except TdoaError as exc:
        print(f"{method:8s} {'failed':>9s}  ({exc})")
        continue
    if res.position is None:
        print(f"{method:8s} {'no fix':>9s}  (estimate is infeasible)")
        continue
    err = angular_error(truth, res.position, array)
    print(f"{method:8s} {err:8.2f}d {res.criterion:12.3e} "
          f"{res.wall_time * 1000:7.0f}ms")
