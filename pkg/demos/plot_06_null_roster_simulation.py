"""
What does a "suspicious" rate ratio look like under the null?
=============================================================

Deaths are generated from a time-of-day intensity that knows nothing
about the roster. A nurse who works mostly mornings, when deaths are
more frequent, still shows an on-duty rate well above the off-duty rate.
The simulator reports the ratio per replicate and the analytic value it
should average to.
"""

import numpy as np

from wardstats import rostersim

config, profiles, intensity, registration = rostersim.morning_heavy_setup(horizon_days=168, seed=303)
result = rostersim.run_null_experiment(config, profiles, intensity, registration, reps=300, workers=4)

for nurse in ("FT", "pool-morning-1", "pool-afternoon-1", "pool-night-1"):
    s = result.summaries[nurse]
    print(f"{nurse:>18}: mean {s.mean:.3f} +/- {s.se:.3f}, analytic {s.expected:.3f}, "
          f"90% of replicates in [{s.quantiles['q05']:.2f}, {s.quantiles['q95']:.2f}]")

###############################################################################
# With a flat intensity every nurse averages about 1
flat = rostersim.run_null_experiment(rostersim.WardConfig(horizon_days=28, seed=101), [],
                                     rostersim.IntensityProfile.flat(1.0), reps=200)
means = np.array([s.mean for s in flat.summaries.values()])
print("flat intensity, mean ratios range:", means.min().round(3), "to", means.max().round(3))

###############################################################################
# Results are keyed on (seed, replicate), so thread count does not matter
serial = rostersim.run_null_experiment(config, profiles, intensity, reps=20, workers=1)
parallel = rostersim.run_null_experiment(config, profiles, intensity, reps=20, workers=8)
print("identical across workers:", np.array_equal(serial.on_deaths, parallel.on_deaths))
