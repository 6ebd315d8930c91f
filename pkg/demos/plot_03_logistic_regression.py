"""
Logistic regression by IRLS
===========================

First a check on simulated data where the true coefficients are known,
then the two ward models: death against sector, number of the target
nurse's shifts during the stay, age and presence at registration.
"""

import numpy as np

from wardstats import glm, rostersim

rng = np.random.default_rng(0)
n = 5000
age = rng.normal(80, 8, n)
exposed = rng.integers(0, 2, n)
true_beta = np.array([-9.0, 0.1, 0.4])
X = np.column_stack([np.ones(n), age, exposed])
y = (rng.uniform(size=n) < 1 / (1 + np.exp(-X @ true_beta))).astype(float)

fit = glm.fit_logistic(X, y, ["(Intercept)", "age", "exposed"])
for name, b, se in zip(fit.names, fit.coefficients, fit.std_errors):
    print(f"{name:>12}: {b:8.4f} (se {se:.4f})")
print("iterations:", fit.n_iter, "converged:", fit.converged)

###############################################################################
# Now the ward. On synthetic data the presence covariate is nearly a
# perfect predictor (every death registered on FT's shift has present = 1,
# survivors always have 0), and the fit flags that as separation. M2 keeps
# only patients whose stay overlapped a shift of FT; FT works sector A
# only, so the sector dummies are constant there and are dropped with a
# warning.
config, profiles, intensity, _ = rostersim.morning_heavy_setup(horizon_days=84, seed=2)
roster, admissions, deaths = rostersim.gen_ward(intensity, rostersim.RegistrationModel(), config, profiles)
fits = [glm.fit_design(glm.build_design(admissions, roster, "FT", m, deaths)) for m in ("m1", "m2")]
print(glm.summarize(*fits, titles=["Model M1", "Model M2"]))
for f in fits:
    print({k: v for k, v in f.separation_flags.items() if v})
