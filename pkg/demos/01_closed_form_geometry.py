"""Closed-form localization geometry, step by step.

Builds the benchmark tetrahedron, inspects per-pair delay bounds and
locus classes, and runs the delay -> position round trip, including the
twin-solution regime that minimal four-microphone arrays exhibit.
"""

import numpy as np

from tdoaloc import (
    MicArray,
    build_linear_system,
    classify_locus,
    delays_from_source,
    discriminant,
    equality_residual,
    is_feasible,
    localize,
)
from tdoaloc.simroom import default_array

array = default_array()
print("microphones (m):")
print(array.positions)
print(f"\nspeed of sound: {array.speed_of_sound} m/s")
print("pair delay bounds (us):")
print(np.round(array.pair_bounds * 1e6, 1))

# --- locus classes of a single pair -----------------------------------
print("\nlocus of pair (0, 1) for a few target delays:")
bound01 = array.pair_bounds[0, 1]
for frac in (0.0, 0.5, 1.0, -1.0, 1.2):
    locus = classify_locus(array, 0, 1, frac * bound01)
    print(f"  t_hat = {frac:+.1f} * bound -> {locus.kind.value}")

# --- forward model and round trip --------------------------------------
source = array.centroid + np.array([1.2, -0.7, 0.5])
t = delays_from_source(array, source)
print(f"\nsource {source} gives delays (us): {np.round(t * 1e6, 2)}")
print(f"feasible: {is_feasible(array, t)}")
print(f"discriminant: {discriminant(array, t):.3e}")
est = localize(array, t)
print(f"localized back to {est} (error {np.linalg.norm(est - source):.2e} m)")

# --- the twin regime of minimal arrays ----------------------------------
parts = build_linear_system(array, t)
gain = float(parts.a @ parts.a)
print(f"\nsquared line gain |a|^2 = {gain:.3f}")
print("when |a|^2 > 1 both roots of the distance quadratic can be genuine:")
rng = np.random.default_rng(0)
shown = 0
while shown < 2:
    s = rng.uniform(0.5, 3.5, 3)
    tt = delays_from_source(array, s)
    pp = build_linear_system(array, tt)
    if pp.a @ pp.a <= 1.0:
        continue
    est = localize(array, tt)
    twin_err = np.linalg.norm(est - s)
    print(f"  true {np.round(s, 3)} -> returned {np.round(est, 3)} "
          f"(|diff| = {twin_err:.2e} m; both reproduce the delays)")
    shown += 1

# --- a fifth microphone removes the ambiguity ---------------------------
penta = MicArray(np.vstack([array.positions, [2.05, 1.95, 2.05]]))
worst = 0.0
for _ in range(2000):
    s = rng.uniform(0.3, 3.7, 3)
    est = localize(penta, delays_from_source(penta, s))
    worst = max(worst, float(np.linalg.norm(est - s)))
print(f"\nwith 5 microphones, worst of 2000 round trips: {worst:.2e} m")
res = equality_residual(penta, delays_from_source(penta, source))
print(f"redundancy residual at a true source: {np.linalg.norm(res):.2e}")
