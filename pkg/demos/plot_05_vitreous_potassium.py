"""
Prediction intervals for vitreous potassium
===========================================

Potassium in the vitreous humour rises after death, so a measured value
says something about the post-mortem interval (PMI). A quadratic in PMI
is fitted by least squares and the prediction interval at a new PMI uses
Student's t with n - 3 degrees of freedom.
"""

import numpy as np

from wardstats import vitreous

rng = np.random.default_rng(3)
data = vitreous.simulate_k_data(60, rng)
model = vitreous.fit_poly2(data)
print("coefficients:", np.round(model.coefficients, 5), "residual sd:", round(model.residual_sd, 4))

###############################################################################
# Intervals widen away from the bulk of the data
pmis = [5, 24, 48, 96, 150]
band = vitreous.prediction_band(model, pmis, 0.95)
for pmi, pi in zip(pmis, band):
    print(f"PMI {pmi:>3} h: {pi.point:6.2f}  [{pi.lower:6.2f}, {pi.upper:6.2f}]  width {pi.upper - pi.lower:.2f}")

###############################################################################
# Two levels at the same PMI: the 99% interval contains the 95% one
print(vitreous.format_intervals([vitreous.predict_interval(model, 36, lv) for lv in (0.95, 0.99)]))

###############################################################################
# The t quantiles come from an in-house incomplete beta function
for df in (1, 2, 5, 30, 10**6):
    print(f"t_0.975({df}) = {vitreous.t_quantile(0.975, df):.10f}")
